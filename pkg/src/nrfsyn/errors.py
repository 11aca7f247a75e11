"""Exception hierarchy for descriptor-system synthesis.

Every failure mode that callers are expected to branch on gets its own
class; anything truly unexpected propagates as a plain numpy/scipy error.
"""


class NrfsynError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(NrfsynError):
    """Operands have incompatible shapes."""


class SingularPencil(NrfsynError):
    """det(A - s E) vanishes identically, so the system has no transfer matrix."""


class SingularAtPoint(NrfsynError):
    """Evaluation point coincides with a pole (or the pencil is singular there)."""


class ImproperAtInfinity(NrfsynError):
    """Transfer matrix has a polynomial part, so the value at infinity is undefined."""


class NotAdmissible(NrfsynError):
    """System is not admissible (unstable finite modes or impulsive modes)."""


class Unstable(NrfsynError):
    """Operation requires a stable, proper system."""


class NotStronglyStabilizable(NrfsynError):
    """No feedback can make the loop admissible."""


class SingularE(NrfsynError):
    """E must be invertible for this operation."""


class SingularDtD(NrfsynError):
    """D'D must be positive definite for this Riccati problem."""


class NoStabilizingSolution(NrfsynError):
    """The Riccati equation has no stabilizing solution."""


class NotAdmissibleF(NrfsynError):
    """Candidate state feedback fails to make the closed loop admissible."""


class NotAdmissibleH(NrfsynError):
    """Candidate output injection fails to make the closed loop admissible."""


class NotStabilizing(NrfsynError):
    """Controller does not stabilize the plant it is certified against."""


class IllPosed(NrfsynError):
    """Feedback interconnection is ill-posed (algebraic loop is singular)."""


class IllPosedAtInfinity(NrfsynError):
    """Closed loop would be improper; the direct-feedthrough loop is singular."""


class DiagonalSingular(NrfsynError):
    """Diagonal part that must be inverted is singular at infinity."""


class HypothesisViolation(NrfsynError):
    """Input data violates a precondition of the synthesis procedure."""


class NormTooLarge(NrfsynError):
    """A norm bound required by the design is exceeded."""


class SingularDenominator(NrfsynError):
    """Denominator factor is singular, so the fraction cannot be formed."""


class UnstableQbar(NrfsynError):
    """Comparison parameter for the robustness certificate is not stable."""


class UnstableX(NrfsynError):
    """Scalar parameter vector must be stable and proper."""


class DegenerateQ(NrfsynError):
    """Parameter makes the controller denominator identically singular."""


class Infeasible(NrfsynError):
    """Constraint system admits no solution."""


class InitializationInfeasible(NrfsynError):
    """Initial feasibility program of the iteration has no solution."""


class SolverFailure(NrfsynError):
    """Conic solver returned an unusable status."""
