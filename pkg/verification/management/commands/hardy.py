from verification.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Check the Hardy-type inequality on random nonnegative step functions'
    checks = ('lemma3',)
