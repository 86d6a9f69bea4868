class KampError(Exception):
    """Base class for every error raised by the package."""


class ProblemFormatError(KampError, ValueError):
    """A design/response file could not be parsed."""

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class NumericalError(KampError):
    """A computation ran but did not produce a trustworthy number."""


class QuadratureError(NumericalError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (error estimate {residual:.3e})")


class StateEvolutionError(NumericalError):
    pass


class DegenerateFixedPointError(StateEvolutionError):
    """The only fixed point of the tau equation is the tau -> 0+ boundary."""


class NoAdmissibleRootError(StateEvolutionError):
    pass


class ZeroLimitError(StateEvolutionError):
    pass


class UnattainableTargetError(NumericalError):
    def __init__(self, target, lo, hi):
        self.target = target
        self.lo = lo
        self.hi = hi
        super().__init__(
            f"target {target:.6g} is outside the attainable range [{lo:.6g}, {hi:.6g}]"
        )


class LassoConvergenceError(NumericalError):
    def __init__(self, lam, sweeps, duality_gap):
        self.lam = lam
        self.sweeps = sweeps
        self.duality_gap = duality_gap
        super().__init__(
            f"coordinate descent did not converge at lambda={lam:.6g} after {sweeps} sweeps "
            f"(duality gap {duality_gap:.3e})"
        )
