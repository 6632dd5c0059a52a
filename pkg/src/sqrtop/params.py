"""Physical constants bundle used by every operator."""

from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, speed of light, reduced Planck constant and charge.

    Defaults are natural units (hbar = c = 1, so ``mu == m``).
    """

    m: float = 1.0
    c: float = 1.0
    hbar: float = 1.0
    e: float = 1.0

    def __post_init__(self):
        if self.m < 0 or self.c <= 0 or self.hbar <= 0:
            raise DomainError("require m >= 0, c > 0, hbar > 0")

    @property
    def mu(self):
        """Inverse Compton length m c / hbar."""
        return self.m * self.c / self.hbar

    @property
    def rest_energy(self):
        return self.m * self.c**2

    @property
    def hbar_c(self):
        return self.hbar * self.c

    def gauge_wavevector(self, A):
        """a = e A / (hbar c) for a vector potential ``A``."""
        return [self.e * float(x) / (self.hbar * self.c) for x in A]

    def as_dict(self):
        return {"m": self.m, "c": self.c, "hbar": self.hbar, "e": self.e}
