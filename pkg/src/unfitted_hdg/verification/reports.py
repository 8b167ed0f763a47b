"""
Report writers: CSV tables, JSON documents, gnuplot data files and
per-element solution dumps. Every file starts with (or contains) the
SHA-256 hash of the run configuration.
"""
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..hdg.solution import DiscreteSolution
from .study import StudyResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
HEADER_PREFIX = "# unfitted-hdg"


def header_lines(config_hash: Optional[str], title: str) -> List[str]:
    lines = [f"{HEADER_PREFIX} {title}"]
    if config_hash:
        lines.append(f"# config-sha256: {config_hash}")
    return lines


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Enum):
        return value.value
    return value


def write_json(data: Dict[str, Any], path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
    """Write a JSON document with the config hash under 'config_sha256'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"config_sha256": config_hash, **_jsonable(data)}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=False)
    logger.info(f"Wrote {path}")
    return path


def write_csv(
    frame: pd.DataFrame,
    path: Union[str, Path],
    config_hash: Optional[str] = None,
    title: str = "table",
    float_format: str = FLOAT_FORMAT,
) -> Path:
    """Write a DataFrame as CSV behind a '#' header block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(header_lines(config_hash, title)) + "\n")
        frame.to_csv(f, index=False, float_format=float_format)
    logger.info(f"Wrote {path}")
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_gnuplot(
    result: StudyResult, directory: Union[str, Path], config_hash: Optional[str] = None
) -> Dict[str, Path]:
    """One two-column (h, error) file per tracked norm."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths: Dict[str, Path] = {}
    norms = result.reports[0].norms() if result.reports else {}
    for name in norms:
        data = np.array([[r.h, r.norms()[name]] for r in result.reports])
        path = directory / f"{name}.dat"
        header = "\n".join(line[2:] for line in header_lines(config_hash, f"{name} error")) + "\nh error"
        np.savetxt(path, data, fmt=FLOAT_FORMAT, header=header)
        paths[name] = path
    return paths


def write_study(
    result: StudyResult,
    directory: Union[str, Path],
    config_hash: Optional[str] = None,
    float_format: str = FLOAT_FORMAT,
) -> Dict[str, Path]:
    """
    Write the artifacts of a convergence study.

    Returns:
        Mapping from artifact name to path: errors (CSV with rates), study
        (JSON with reports, rates and verdict), verdict (JSON) and one
        gnuplot file per norm
    """
    directory = Path(directory)
    paths = {
        "errors": write_csv(result.table(), directory / "errors.csv", config_hash, "error table", float_format),
        "study": write_json(result.to_dict(), directory / "study.json", config_hash),
        "verdict": write_json(result.verdict, directory / "verdict.json", config_hash),
    }
    paths.update(write_gnuplot(result, directory, config_hash))
    return paths


def write_solution(
    solution: DiscreteSolution,
    path: Union[str, Path],
    config_hash: Optional[str] = None,
    float_format: str = FLOAT_FORMAT,
) -> Path:
    """
    Per-element coefficients as plain text: one row per element with
    columns element, u_0..u_{n-1}, qx_*, qy_* (and sigmax_*, sigmay_*).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    m, n = solution.u.shape
    blocks = [solution.u, solution.q[:, 0], solution.q[:, 1]]
    names = [f"u_{i}" for i in range(n)] + [f"qx_{i}" for i in range(n)] + [f"qy_{i}" for i in range(n)]
    if solution.sigma is not None:
        blocks += [solution.sigma[:, 0], solution.sigma[:, 1]]
        names += [f"sigmax_{i}" for i in range(n)] + [f"sigmay_{i}" for i in range(n)]
    frame = pd.DataFrame(np.hstack(blocks), columns=names)
    frame.insert(0, "element", np.arange(m))
    return write_csv(frame, path, config_hash, f"solution k={solution.degree}", float_format)
