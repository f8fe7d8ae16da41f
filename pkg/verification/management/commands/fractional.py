from dataclasses import replace

from django.core.management.base import CommandError

from verification.management.base import ExperimentCommand
from verification.services.config import FRACTIONAL_CHECKS


class Command(ExperimentCommand):
    help = 'Fractional-Laplacian variants, fanned out over the configured alpha list'
    checks = FRACTIONAL_CHECKS

    def prepare(self, config):
        if not config.alphas:
            raise CommandError("invalid config: exponents.alpha: the fractional command needs at least one alpha")
        return replace(config, kind='fractional')
