"""
Shared plumbing for the experiment commands.
"""
from typing import Tuple

from django.core.management.base import BaseCommand, CommandError

from verification.services.config import ExperimentConfig
from verification.services.errors import ConfigError
from verification.services.runner import format_summary, run


class ExperimentCommand(BaseCommand):
    """Load a config, run its check, print the summary table.

    Subclasses restrict the checks they accept through `checks`; an empty
    tuple accepts all of them.
    """
    checks: Tuple[str, ...] = ()

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Path to an experiment config (JSON)')
        parser.add_argument('--seed', type=int, help='Override the config seed')
        parser.add_argument('--out', help='Directory for reports.jsonl (default LEVY_HEAT_OUTPUT_DIR)')
        parser.add_argument('--workers', type=int, help='Worker processes for Monte Carlo paths')

    def load_config(self, options) -> ExperimentConfig:
        try:
            config = ExperimentConfig.load(options['config'])
        except ConfigError as e:
            raise CommandError(f"invalid config: {e}")
        if self.checks and config.check not in self.checks:
            raise CommandError(
                f"invalid config: check.name: '{config.check}' is not handled here; "
                f"expected one of {', '.join(self.checks)}"
            )
        if options.get('workers') is not None and options['workers'] < 1:
            raise CommandError("--workers must be >= 1")
        return config.with_overrides(seed=options.get('seed'), workers=options.get('workers'))

    def prepare(self, config: ExperimentConfig) -> ExperimentConfig:
        return config

    def handle(self, *args, **options):
        config = self.prepare(self.load_config(options))
        result = run(config, options.get('out'))
        self.stdout.write(format_summary(result.records))
        self.stdout.write(f"{len(result.records)} record(s) appended to {result.log_path}")
        failed = [r for r in result.reports if not r.passed]
        for report in failed:
            self.stderr.write(f"{report.name} failed: {report.criterion}")
        if failed:
            raise CommandError(f"{len(failed)} of {len(result.reports)} check(s) failed")
        self.stdout.write(self.style.SUCCESS('all checks passed'))
