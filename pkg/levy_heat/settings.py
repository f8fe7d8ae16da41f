"""
Django settings for levy_heat project.

The project has no web surface: it is driven through management commands
(see verification/management/commands). Settings hold the runtime
defaults for experiment output, worker count, seeds and logging.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-levy-heat-local-only')

DEBUG = os.getenv('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'verification',
]

# No models are stored; report records go to an append-only log on disk.
DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Cache configuration
CACHES = {
    'default': {
        'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
        'LOCATION': 'levy-heat-spectral-cache',
    }
}

# Cache timeout for Littlewood-Paley partitions (in seconds)
SPECTRAL_CACHE_TIMEOUT = 3600


# Experiment runner defaults
LEVY_HEAT_OUTPUT_DIR = Path(os.getenv('LEVY_HEAT_OUTPUT_DIR', BASE_DIR / 'results'))

LEVY_HEAT_WORKERS = int(os.getenv('LEVY_HEAT_WORKERS', '1'))

LEVY_HEAT_SEED = int(os.getenv('LEVY_HEAT_SEED', '0'))

LEVY_HEAT_LOG_LEVEL = os.getenv('LEVY_HEAT_LOG_LEVEL', 'INFO').upper()


# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'verification': {
            'handlers': ['console'],
            'level': LEVY_HEAT_LOG_LEVEL,
            'propagate': False,
        },
    },
}
