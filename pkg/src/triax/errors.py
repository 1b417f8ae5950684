"""Exception hierarchy.

Every exception carries a short machine-readable ``code`` so that the CLI and
the validation report can name the failing check without string matching.
"""

from __future__ import annotations


class TriaxError(Exception):
    code = "ERROR"
    #: CLI exit status: 1 for input / validation problems, 2 for numerics.
    exit_status = 1


class ParseError(TriaxError):
    code = "PARSE"


class ModelError(TriaxError):
    code = "MODEL"


class DivergentMomentError(TriaxError):
    code = "DIVERGENT"
    exit_status = 2


class NoRootError(TriaxError):
    code = "NO_ROOT"
    exit_status = 2


class ArithmeticLawError(TriaxError):
    code = "ARITHMETIC"


class DuplicateIndicesError(TriaxError):
    code = "DUPLICATE_INDICES"


class EpsOutOfRangeError(TriaxError):
    code = "EPS_OUT_OF_RANGE"


class NumericUnderflowError(TriaxError):
    code = "NUMERIC_UNDERFLOW"
    exit_status = 2


class SimulationOverflowError(TriaxError):
    code = "OVERFLOW"
    exit_status = 2


class TooLargeError(TriaxError):
    code = "TOO_LARGE"


class NotDominatedError(TriaxError):
    code = "NOT_DOMINATED"


class WrongRegimeError(TriaxError):
    code = "WRONG_REGIME"


class MissingUError(TriaxError):
    code = "MISSING_U"


class DegenerateSampleError(TriaxError):
    code = "DEGENERATE"
    exit_status = 2


class HypothesisFailError(TriaxError):
    code = "HYPOTHESIS_FAIL"
    exit_status = 2
