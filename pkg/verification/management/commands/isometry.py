from verification.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Monte Carlo second moment of the solution against its exact value'
    checks = ('isometry',)
