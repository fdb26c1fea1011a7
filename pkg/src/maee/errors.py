"""Exception types shared across the package."""


class MaeeError(Exception):
    """Base class for all package-specific errors."""


class DegeneratePaths(MaeeError):
    """Channel paths coincide, so a gain period is undefined (infinite)."""


class OutOfRegion(MaeeError):
    """Requested antenna position lies outside the allowed moving region."""


class BlockExhausted(MaeeError):
    """Antenna movement consumes the whole transmission block."""


class ZeroEnergy(MaeeError):
    """Total consumed energy is zero, so an efficiency ratio is undefined."""


class ZeroCombiner(MaeeError):
    """A receive combining vector is identically zero."""


class ZeroGain(MaeeError):
    """Channel gain is zero where a positive gain is required."""


class InfeasibleThroughput(MaeeError):
    """The throughput floor cannot be met at this position within the power budget."""


class Infeasible(MaeeError):
    """No feasible operating point exists for the given constraints."""


class BadStart(MaeeError):
    """Solver start point violates the variable box."""


class DegenerateLocalPoint(MaeeError):
    """Surrogate expansion point lies outside the domain where the surrogate is defined."""
