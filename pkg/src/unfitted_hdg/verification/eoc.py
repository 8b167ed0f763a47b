"""
Experimental orders of convergence.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence

import pandas as pd

from ..core.errors import ConfigurationError, ZeroError
from .errors import ErrorReport

logger = logging.getLogger(__name__)

# errors below this are treated as exact
ZERO_ERROR = 1e-14


def rate(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    """
    log(e_coarse / e_fine) / log(h_coarse / h_fine).

    Raises:
        ZeroError: If either error is at machine zero
    """
    if e_coarse <= ZERO_ERROR or e_fine <= ZERO_ERROR:
        raise ZeroError(f"error {min(e_coarse, e_fine):.3e} is at machine zero; the rate is undefined")
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def eoc(reports: Sequence[ErrorReport]) -> List[Dict[str, Optional[float]]]:
    """
    Rates between consecutive reports, per tracked norm.

    Entry i compares reports i and i + 1. A norm at machine zero on either
    level gets rate None (the discretization is exact there).

    Raises:
        ConfigurationError: Fewer than two reports or h not strictly decreasing
    """
    if len(reports) < 2:
        raise ConfigurationError("at least two error reports are needed for a rate", "mesh")
    for coarse, fine in zip(reports, reports[1:]):
        if not fine.h < coarse.h:
            raise ConfigurationError(f"mesh sizes must strictly decrease, got {coarse.h} then {fine.h}", "mesh")

    rates: List[Dict[str, Optional[float]]] = []
    for coarse, fine in zip(reports, reports[1:]):
        pair: Dict[str, Optional[float]] = {}
        fine_norms = fine.norms()
        for name, value in coarse.norms().items():
            if name not in fine_norms:
                continue
            try:
                pair[name] = rate(value, fine_norms[name], coarse.h, fine.h)
            except ZeroError:
                logger.debug(f"Norm '{name}' is exact at h={fine.h:.4g}")
                pair[name] = None
        rates.append(pair)
    return rates


def eoc_table(reports: Sequence[ErrorReport]) -> pd.DataFrame:
    """
    One row per level: h, dofs, the norms and the rate from the previous level.
    """
    frame = pd.DataFrame([r.row() for r in reports])
    if len(reports) < 2:
        return frame
    rates = eoc(reports)
    for name in reports[0].norms():
        column = [None] + [pair.get(name) for pair in rates]
        frame[f"rate_{name}"] = column
    return frame
