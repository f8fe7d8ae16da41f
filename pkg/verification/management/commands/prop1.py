from verification.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Besov bound for the deterministic heat convolution and its reductions'
    checks = ('prop1', 'reduction', 'quadratic_variation', 'horizon_sweep')
