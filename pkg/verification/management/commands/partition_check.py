from verification.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Check the Littlewood-Paley partition of unity on the configured grid'
    checks = ('partition',)
