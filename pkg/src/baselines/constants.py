from enum import StrEnum


class Scorer(StrEnum):
    CPSCA = "cpsca"
    CPSE = "cpse"
    L1 = "l1"
    SLIMMING = "slimming"


# Scorers that read channel gates from a forward pass over the training set
DATA_DRIVEN_SCORERS = frozenset({Scorer.CPSCA, Scorer.CPSE})
