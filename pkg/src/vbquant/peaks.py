"""Area-parameterized peak line shapes and their analytic derivatives.

Both shapes integrate to exactly their area parameter over the real line,
which lets fitted areas feed intensity ratios without a separate
integration step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

# fwhm-to-sigma factor for a Gaussian: fwhm = 2*sqrt(2*ln 2)*sigma
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


class PeakShape(str, enum.Enum):
    LORENTZIAN = "lorentzian"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PeakModel:
    """One spectral line: shape, center, full width at half maximum, area.

    identity is a free tag ("D1", "E2g", ...) used to track which physical
    mode a fitted peak represents.
    """

    shape: PeakShape
    center: float
    fwhm: float
    area: float
    identity: str | None = None

    def __post_init__(self):
        shape = PeakShape(self.shape)
        object.__setattr__(self, "shape", shape)
        for name in ("center", "fwhm", "area"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"peak {name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.fwhm <= 0:
            raise DomainError(f"peak fwhm must be positive, got {self.fwhm}")

    def with_identity(self, identity: str) -> "PeakModel":
        return replace(self, identity=identity)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = x - self.center
        if self.shape is PeakShape.LORENTZIAN:
            return (2.0 * self.area / (math.pi * self.fwhm)) / (
                1.0 + 4.0 * u * u / (self.fwhm * self.fwhm)
            )
        sigma = self.fwhm * FWHM_TO_SIGMA
        return (
            self.area
            / (sigma * math.sqrt(2.0 * math.pi))
            * np.exp(-0.5 * (u / sigma) ** 2)
        )

    def jacobian(self, x) -> np.ndarray:
        """Partial derivatives wrt (center, fwhm, area), shape (n, 3)."""
        x = np.asarray(x, dtype=float)
        u = x - self.center
        out = np.empty((x.size, 3))
        if self.shape is PeakShape.LORENTZIAN:
            g = self.fwhm
            d = 1.0 + 4.0 * u * u / (g * g)
            d2 = d * d
            out[:, 0] = 16.0 * self.area * u / (math.pi * g**3 * d2)
            out[:, 1] = (
                2.0 * self.area / (math.pi * g * g * d2) * (4.0 * u * u / (g * g) - 1.0)
            )
            out[:, 2] = (2.0 / (math.pi * g)) / d
        else:
            sigma = self.fwhm * FWHM_TO_SIGMA
            val = np.exp(-0.5 * (u / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
            out[:, 0] = self.area * val * u / (sigma * sigma)
            out[:, 1] = self.area * val * ((u / sigma) ** 2 - 1.0) / self.fwhm
            out[:, 2] = val
        return out

    def height(self) -> float:
        """Model value at the center."""
        if self.shape is PeakShape.LORENTZIAN:
            return 2.0 * self.area / (math.pi * self.fwhm)
        sigma = self.fwhm * FWHM_TO_SIGMA
        return self.area / (sigma * math.sqrt(2.0 * math.pi))


def area_for_height(shape: PeakShape, fwhm: float, height: float) -> float:
    """Area giving the requested peak height, inverse of PeakModel.height."""
    if PeakShape(shape) is PeakShape.LORENTZIAN:
        return height * math.pi * fwhm / 2.0
    return height * fwhm * FWHM_TO_SIGMA * math.sqrt(2.0 * math.pi)
