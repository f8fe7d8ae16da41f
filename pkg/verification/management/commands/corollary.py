from verification.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Sobolev/Besov norm pairs for the solution, with the embedding constant'
    checks = ('corollary',)
