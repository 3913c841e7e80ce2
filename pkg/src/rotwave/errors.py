"""Typed errors shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration or precondition violation (CLI exit code 2)."""


class NearResonanceError(ArithmeticError):
    """Wave operator is numerically singular at the requested frequency.

    Raised when an LU pivot falls below the singularity threshold, which
    happens when the temporal frequency sits near an inertial-mode resonance.
    """

    def __init__(self, omega_freq: float, m: int, pivot_ratio: float):
        self.omega_freq = omega_freq
        self.m = m
        self.pivot_ratio = pivot_ratio
        super().__init__(
            f"wave operator near-singular at omega={omega_freq:g}, m={m} "
            f"(pivot ratio {pivot_ratio:.3e})"
        )
