"""
Discrete HDG solutions.
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """
    Coefficient blocks of one HDG solution.

    q: (M, 2, dim) flux coefficients; u: (M, dim); uhat: (F, k + 1) in the
    orthonormal face basis oriented along each face's owner; sigma: (M, 2, dim)
    for the gradient variant only.
    """

    degree: int
    q: np.ndarray
    u: np.ndarray
    uhat: np.ndarray
    sigma: Optional[np.ndarray] = None
    residual: float = 0.0

    @property
    def n_elements(self) -> int:
        return int(self.u.shape[0])

    def summary(self) -> Dict[str, Any]:
        return {
            "degree": self.degree,
            "elements": self.n_elements,
            "faces": int(self.uhat.shape[0]),
            "has_sigma": self.sigma is not None,
            "residual": self.residual,
            "u_coefficient_norm": float(np.linalg.norm(self.u)),
        }
