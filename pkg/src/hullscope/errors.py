"""Exception and warning classes shared across hullscope."""


class HullscopeError(Exception):
    """Base class for all hullscope errors."""


# geometry
class DegenerateGradient(HullscopeError):
    """The w-gradient of the defining function vanishes (or nearly so)."""


class RootFindFailure(HullscopeError):
    """A ray from the fiber anchor never crossed the level set."""


class PushTooDeep(HullscopeError):
    """The center selector left the open sublevel set; shrink the push depth."""


class GradientOrderViolation(HullscopeError):
    """|D_w rho1| > |D_w rho2| fails somewhere on the shared level set."""


class LevelMismatch(HullscopeError):
    """Two defining functions that should agree on a level set do not."""


class VanishingDenominator(HullscopeError):
    """The dual transform denominator sum_j w_j d rho/d w_j is zero."""


# hardy space
class OutsideDisk(HullscopeError):
    """Evaluation point lies outside the closed unit disk."""


# solver
class NonFinite(HullscopeError):
    """The scenario produced NaN or infinite values."""


class Inconclusive(HullscopeError):
    """gamma is within the tolerance band of the level but the optimizer is not flat."""


# lempert
class BadDirection(HullscopeError):
    """Direction vector is not of unit length."""


class RegionViolation(UserWarning):
    """Evaluation point lies where u1 > 1/2, outside the epsilon-inverse regime."""


# scenario files
class SchemaError(HullscopeError):
    """Scenario or configuration document failed validation."""


class UnknownFamily(SchemaError):
    """Scenario names a family that is not in the registry."""


class DimensionError(SchemaError):
    """Scenario dimension n < 2."""
