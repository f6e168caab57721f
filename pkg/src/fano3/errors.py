"""Exception hierarchy.

Every error carries a short ``kind`` string so the command line front end can
print a single greppable reason line.
"""


class Fano3Error(Exception):
    kind = "Fano3Error"


class MismatchedStructure(Fano3Error):
    kind = "MismatchedStructure"


class MissingCoupling(Fano3Error):
    kind = "MissingCoupling"


class NonPositiveLinewidth(Fano3Error):
    kind = "NonPositiveLinewidth"


class PoleAtEnergy(Fano3Error):
    kind = "PoleAtEnergy"


class DegenerateDenominator(Fano3Error):
    kind = "DegenerateDenominator"


class EmptyGrid(Fano3Error):
    kind = "EmptyGrid"


class SpanTooNarrow(Fano3Error):
    kind = "SpanTooNarrow"


class GridOutsideSpan(Fano3Error):
    kind = "GridOutsideSpan"


class ConvergenceFailure(Fano3Error):
    kind = "ConvergenceFailure"


class NotConverged(Fano3Error):
    kind = "NotConverged"


class UnknownPreset(Fano3Error):
    kind = "UnknownPreset"


class IoFailure(Fano3Error):
    kind = "IoFailure"


class MalformedFile(Fano3Error):
    kind = "MalformedFile"
