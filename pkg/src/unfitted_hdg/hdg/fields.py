"""
Coefficient fields frozen at a previous iterate.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..basis.polynomials import ElementBasisSet

logger = logging.getLogger(__name__)

# (elements (P,), points (P, N, 2)) -> values (P, N)
PointField = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class FrozenFields:
    """
    kappa^{-1} and the source of one linearized HDG step.

    Both fields are evaluated per element, so points outside an element are
    served by extrapolating that element's iterate. kappa^{-1} is clamped
    to [1/kappa_hi, 1/kappa_lo]; clamp_events counts clamped samples.
    """

    kappa_inv_raw: PointField
    source_raw: PointField
    kappa_lo: float
    kappa_hi: float
    clamp_events: int = field(default=0)

    def kappa_inv_at(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        values = np.asarray(self.kappa_inv_raw(np.asarray(elements), points), dtype=float)
        lo, hi = 1.0 / self.kappa_hi, 1.0 / self.kappa_lo
        outside = (values < lo * (1 - 1e-12)) | (values > hi * (1 + 1e-12)) | ~np.isfinite(values)
        count = int(np.count_nonzero(outside))
        if count:
            self.clamp_events += count
            logger.debug(f"Clamped {count} kappa^-1 sample(s) into [{lo:.4g}, {hi:.4g}]")
        return np.clip(np.nan_to_num(values, nan=hi, posinf=hi, neginf=lo), lo, hi)

    def kappa_at(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        return 1.0 / self.kappa_inv_at(elements, points)

    def source_at(self, elements: np.ndarray, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.source_raw(np.asarray(elements), points), dtype=float)

    @classmethod
    def constant(
        cls,
        kappa: float = 1.0,
        source: float = 0.0,
        kappa_lo: Optional[float] = None,
        kappa_hi: Optional[float] = None,
    ) -> "FrozenFields":
        """Constant diffusivity and source."""
        return cls(
            kappa_inv_raw=lambda e, p: np.full(p.shape[:-1], 1.0 / kappa),
            source_raw=lambda e, p: np.full(p.shape[:-1], float(source)),
            kappa_lo=kappa_lo if kappa_lo is not None else kappa,
            kappa_hi=kappa_hi if kappa_hi is not None else kappa,
        )

    @classmethod
    def from_scalar_iterate(
        cls,
        basis: ElementBasisSet,
        zeta: np.ndarray,
        kappa: Callable[[np.ndarray], np.ndarray],
        source: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
        kappa_lo: float,
        kappa_hi: float,
    ) -> "FrozenFields":
        """
        Freeze kappa(zeta) and f(zeta) at a scalar iterate.

        Args:
            basis: Element bases
            zeta: Coefficients (M, dim) of the iterate
            kappa: kappa(u), vectorized
            source: f(x, y, u), vectorized
            kappa_lo: Lower diffusivity bound
            kappa_hi: Upper diffusivity bound
        """

        def values(e: np.ndarray, p: np.ndarray) -> np.ndarray:
            return basis.evaluate(zeta[e], p, e)

        return cls(
            kappa_inv_raw=lambda e, p: 1.0 / kappa(values(e, p)),
            source_raw=lambda e, p: source(p[..., 0], p[..., 1], values(e, p)),
            kappa_lo=kappa_lo,
            kappa_hi=kappa_hi,
        )

    @classmethod
    def from_gradient_iterate(
        cls,
        basis: ElementBasisSet,
        eta: np.ndarray,
        zeta: np.ndarray,
        kappa: Callable[[np.ndarray, np.ndarray], np.ndarray],
        source: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
        kappa_lo: float,
        kappa_hi: float,
    ) -> "FrozenFields":
        """
        Freeze kappa(eta) at a vector iterate and f(zeta) at a scalar one.

        Args:
            basis: Element bases
            eta: Coefficients (M, 2, dim) of the gradient iterate
            zeta: Coefficients (M, dim) of the scalar iterate
            kappa: kappa(sx, sy), vectorized
            source: f(x, y, u), vectorized
            kappa_lo: Lower diffusivity bound
            kappa_hi: Upper diffusivity bound
        """

        def kappa_inv(e: np.ndarray, p: np.ndarray) -> np.ndarray:
            s = basis.evaluate(eta[e], p, e)
            return 1.0 / kappa(s[..., 0], s[..., 1])

        return cls(
            kappa_inv_raw=kappa_inv,
            source_raw=lambda e, p: source(p[..., 0], p[..., 1], basis.evaluate(zeta[e], p, e)),
            kappa_lo=kappa_lo,
            kappa_hi=kappa_hi,
        )
