from verification.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Fit the exponential decay of dyadic heat kernels (lemma1) or block semigroups (lemma2)'
    checks = ('lemma1', 'lemma2')
