from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from verification.services.runner import LOG_NAME, PLOT_TABLES, emit_plot_data, read_records


class Command(BaseCommand):
    help = 'Write a plot-ready CSV table from a report log'

    def add_arguments(self, parser):
        parser.add_argument('--selector', required=True, choices=sorted(PLOT_TABLES))
        parser.add_argument('--log', help=f'Report log (default <out>/{LOG_NAME})')
        parser.add_argument('--out', help='Directory for the table (default LEVY_HEAT_OUTPUT_DIR)')

    def handle(self, *args, **options):
        out = Path(options.get('out') or getattr(settings, 'LEVY_HEAT_OUTPUT_DIR', 'results'))
        log = Path(options.get('log') or out / LOG_NAME)
        try:
            records = read_records(log)
        except ValueError as e:
            raise CommandError(f"cannot read {log}: {e}")
        path = emit_plot_data(records, options['selector'], out)
        self.stdout.write(f"wrote {path}")
