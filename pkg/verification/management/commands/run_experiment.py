from verification.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Run any configured check'
