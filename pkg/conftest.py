import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'levy_heat.settings')
django.setup()
