from verification.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Monte Carlo check of the a-priori estimate for the stochastic convolution'
    checks = ('theorem', 'k_reduction', 'kunita')
