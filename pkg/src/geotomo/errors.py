"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class InvalidBodyError(ValueError):
    """A star body's radial function is non-positive or otherwise unusable."""


class NumericDomainError(ArithmeticError):
    """An integrand returned a non-finite value; the message names the node."""


class BandlimitInsufficientError(RuntimeError):
    """The requested bandlimit cannot represent the function to tolerance."""

    def __init__(self, residual, tolerance, bandlimit):
        self.residual = float(residual)
        self.tolerance = float(tolerance)
        self.bandlimit = int(bandlimit)
        super().__init__(
            f"expansion residual {self.residual:.3e} exceeds {self.tolerance:.3e} "
            f"at bandlimit {self.bandlimit}"
        )


class IllConditionedInversionError(RuntimeError):
    """A spectral inversion hit a multiplier below the conditioning floor."""

    def __init__(self, degree, multiplier, band_sup):
        self.degree = int(degree)
        self.multiplier = float(multiplier)
        self.band_sup = float(band_sup)
        super().__init__(
            f"degree-{self.degree} multiplier {self.multiplier:.3e} is below the "
            f"conditioning floor while the band has sup-norm {self.band_sup:.3e}"
        )
