"""Exception types shared across the package."""


class PlateflowError(Exception):
    """Base class for all structured plateflow errors."""


class RepresentationError(PlateflowError):
    """A field was supplied in the wrong representation (spectral vs physical)."""


class GridMismatchError(PlateflowError):
    """Fields living on different grids were combined."""


class NonHurwitz(PlateflowError):
    """The coupling matrix has an eigenvalue with non-positive real part."""

    def __init__(self, eigenvalues, message=None):
        self.eigenvalues = tuple(eigenvalues)
        if message is None:
            message = ("coupling matrix rejected: eigenvalue real parts "
                       f"{[complex(z).real for z in self.eigenvalues]} must all be > 0")
        super().__init__(message)


class InadmissiblePhi(PlateflowError):
    """The nonlinearity violates the admissibility conditions at the origin."""

    def __init__(self, report, message=None):
        self.report = report
        super().__init__(message or f"inadmissible nonlinearity: {report}")


class BlowUp(PlateflowError):
    """Nodal values exceeded the overflow guard (or went non-finite)."""

    def __init__(self, t, detail=""):
        self.t = float(t)
        super().__init__(f"blow-up detected at t={t:g}" + (f": {detail}" if detail else ""))


class NeumannDiverged(PlateflowError):
    """The inner perturbation-series iteration failed to contract."""

    def __init__(self, factors, message=None):
        self.factors = list(factors)
        super().__init__(message or
                         f"inner iteration diverged (last factors {self.factors[-3:]})")


class OuterDiverged(PlateflowError):
    """The outer fixed-point iteration failed to contract."""

    def __init__(self, factors, message=None):
        self.factors = list(factors)
        super().__init__(message or
                         f"outer iteration diverged (last factors {self.factors[-3:]})")


class InadmissibleParams(PlateflowError):
    """Norm or hypothesis parameters outside their admissible range."""


class NonPositiveSamples(PlateflowError):
    """A decay fit was requested on samples that are not strictly positive."""


class WindowTooSmall(PlateflowError):
    """Not enough samples (or envelope peaks) inside the fit window."""


class ConfigError(PlateflowError):
    """Malformed experiment configuration; carries line/key diagnostics."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if key is not None:
            loc.append(f"key '{key}'")
        super().__init__((f"[{', '.join(loc)}] " if loc else "") + message)
