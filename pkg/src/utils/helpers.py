# src/utils/helpers.py

import logging
import os
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import coloredlogs
import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

FLOAT_FORMAT = "%.12g"
TREND_BAND = 0.1


def setup_logging(level: str = "INFO") -> None:
    """Install coloredlogs on the root logger once per process."""
    coloredlogs.install(level=level.upper(), fmt="%(asctime)s %(name)s %(levelname)s %(message)s")
    logging.captureWarnings(True)


def run_points(fn: Callable, items: Sequence, jobs: int = 1, progress: bool = False, desc: str = "sweep",
               prefer: Optional[str] = None) -> list:
    """Evaluate fn over items, in a joblib pool when jobs > 1; order is preserved."""
    if jobs > 1:
        return Parallel(n_jobs=jobs, prefer=prefer)(delayed(fn)(item) for item in items)
    return [fn(item) for item in tqdm(items, desc=desc, disable=not progress)]


def trend_notes(values: Sequence[float], decreasing: bool, label: str, floor: float = 0.0) -> List[str]:
    """Monotonicity along a sweep, tolerating a relative noise band and an absolute floor."""
    notes = []
    for k, (a, b) in enumerate(zip(values, values[1:])):
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        band = max(TREND_BAND * max(abs(a), abs(b)), floor)
        if (decreasing and b > a + band) or (not decreasing and b < a - band):
            notes.append(f"{label}: trend broken between points {k} and {k + 1} ({a:.6g} -> {b:.6g})")
    if not notes:
        notes.append(f"{label}: {'nonincreasing' if decreasing else 'nondecreasing'} within {TREND_BAND:.0%} band")
    return notes


def kappa_columns(kappa) -> Dict[str, float]:
    """kappa_1..kappa_n columns; infinite limits are written as inf."""
    values = np.atleast_1d(np.asarray(kappa, dtype=float))
    return {f"kappa_{i + 1}": float(v) for i, v in enumerate(values)}


def write_table(rows: Iterable[dict], path: str, meta: Optional[dict] = None, drop: Sequence[str] = (),
                columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Write rows as CSV with the run metadata appended to every row; the header is kept when rows is empty."""
    frame = pd.DataFrame(list(rows), columns=columns)
    for key, value in (meta or {}).items():
        frame[key] = value
    frame = frame.drop(columns=[c for c in drop if c in frame.columns])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return frame


def write_summary(lines: Sequence[str], path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def format_value(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, np.ndarray):
        return "[" + ", ".join(f"{v:.6g}" for v in value.ravel()) + "]"
    return str(value)
