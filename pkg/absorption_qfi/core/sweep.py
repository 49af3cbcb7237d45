"""
Parameter sweeps for absorption-qfi.
This module evaluates a scenario over the (gain, kappa_I) grid of a run configuration, flags divergent
points and intensity-difference dips, reads and writes self-describing CSV files, and derives log-ratio
curves, crossover points and the approximate DL QFI fit from sweep results.
"""

import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy

from absorption_qfi import __version__
from absorption_qfi.core.configurations import GainSpec, eta_from_kappa
from absorption_qfi.core.qfi import Estimand, FitReport, fit_alpha
from absorption_qfi.core.run_config import RunConfig
from absorption_qfi.core.scenarios import Quantity, Scenario
from absorption_qfi.error_handling.exceptions import DivergentQfi, NoCrossover, ParameterError, VanishingDerivative
from absorption_qfi.performance.caching import get_cache_manager_or_none

logger = logging.getLogger(__name__)

KAPPA_COLUMN = "kappa_i_nm^-1"
ETA_COLUMN = "eta_i"
GAIN_COLUMN = "gain_Npeak"
VALUE_COLUMN = "value"
FLAG_COLUMN = "flag"
COLUMNS = [KAPPA_COLUMN, ETA_COLUMN, GAIN_COLUMN, VALUE_COLUMN, FLAG_COLUMN]
DERIVATIVE_FLOOR = 1e-30


class Flag(str, Enum):
    OK = "ok"
    DIVERGENT = "divergent"
    VANISHING_DERIVATIVE = "vanishing_derivative"
    NO_CROSSOVER = "no_crossover"


VALUE_UNITS = {
    ("qfi", "kappa"): "nm^2",
    ("qfi", "eta"): "dimensionless",
    ("inverse_error", "kappa"): "nm^2",
    ("inverse_error", "eta"): "dimensionless",
    ("inverse_ratio", "kappa"): "nm^-2",
    ("inverse_ratio", "eta"): "dimensionless",
}


@dataclass
class SweepResult:
    """Rows (kappa_I, eta_I, gain, value, flag) sorted by (gain, kappa_I) plus a metadata header."""

    frame: pd.DataFrame
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        missing = [c for c in COLUMNS if c not in self.frame.columns]
        if missing:
            raise ParameterError(f"Sweep frame is missing columns {missing}")
        self.frame = (
            self.frame[COLUMNS].sort_values([GAIN_COLUMN, KAPPA_COLUMN], kind="mergesort").reset_index(drop=True)
        )

    @property
    def gains(self) -> List[float]:
        return sorted(self.frame[GAIN_COLUMN].unique().tolist())

    def curve(self, gain: float) -> pd.DataFrame:
        return self.frame[self.frame[GAIN_COLUMN] == gain].reset_index(drop=True)

    def ok_rows(self) -> pd.DataFrame:
        return self.frame[self.frame[FLAG_COLUMN] == Flag.OK.value]

    def to_csv_text(self) -> str:
        header = "".join(f"# {key}: {value}\n" for key, value in self.metadata.items())
        return header + self.frame.to_csv(index=False, lineterminator="\n")

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(self.to_csv_text())
        logger.info(f"Wrote {len(self.frame)} rows to {path}")
        return path

    @classmethod
    def from_csv_text(cls, text: str) -> "SweepResult":
        metadata: Dict[str, str] = {}
        lines = text.splitlines(keepends=True)
        body_start = 0
        for index, line in enumerate(lines):
            if not line.startswith("# "):
                body_start = index
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            metadata[key] = value
        else:
            body_start = len(lines)
        frame = pd.read_csv(
            io.StringIO("".join(lines[body_start:])),
            float_precision="round_trip",
            dtype={FLAG_COLUMN: str},
        )
        return cls(frame=frame, metadata=metadata)

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "SweepResult":
        with open(path, "r") as f:
            return cls.from_csv_text(f.read())

    def same_as(self, other: "SweepResult") -> bool:
        return self.metadata == other.metadata and self.frame.equals(other.frame)


def sweep_metadata(cfg: RunConfig, **extra: str) -> Dict[str, str]:
    run = cfg.run
    metadata = {
        "model": run.model,
        "access": run.access,
        "estimand": run.estimand,
        "quantity": run.quantity,
        "length_nm": repr(cfg.grid.length_nm),
        "config_hash": cfg.config_hash(),
        "seed": str(run.seed),
        "versions": f"absorption_qfi={__version__} numpy={np.__version__} scipy={scipy.__version__}",
        "units": f"kappa_i_nm^-1=nm^-1 eta_i=1 gain_Npeak=photons value={VALUE_UNITS[(run.quantity, run.estimand)]}",
        "columns": ",".join(COLUMNS),
    }
    metadata.update(extra)
    return metadata


def _evaluate_point(task: Tuple[Scenario, float, float]) -> Tuple[float, float, float, float, str, float]:
    """Evaluate one grid point; returns (kappa, eta, gain, value, flag, slope)."""
    scenario, n_peak, kappa = task
    gain = GainSpec(n_peak)
    epsilon = scenario.epsilon_of(kappa)
    eta = eta_from_kappa(kappa, scenario.length)
    slope = math.nan
    try:
        value = scenario.evaluate(gain, epsilon)
        flag = Flag.OK
        if scenario.quantity == Quantity.INVERSE_ERROR:
            slope = scenario.intensity_difference_slope(gain, epsilon)
    except VanishingDerivative:
        value, flag, slope = 0.0, Flag.VANISHING_DERIVATIVE, 0.0
    except DivergentQfi:
        value, flag = math.inf, Flag.DIVERGENT
    return kappa, eta, n_peak, value, flag.value, slope


def _flag_dips(frame: pd.DataFrame, slopes: np.ndarray) -> None:
    """Flag the smaller-|slope| point of every neighbouring pair where d(N_S - N_I)/d kappa changes sign."""
    for gain in frame[GAIN_COLUMN].unique():
        index = frame.index[frame[GAIN_COLUMN] == gain]
        s = slopes[index]
        for k in range(len(index) - 1):
            if not (np.isfinite(s[k]) and np.isfinite(s[k + 1])):
                continue
            if s[k] * s[k + 1] < 0:
                pick = index[k] if abs(s[k]) <= abs(s[k + 1]) else index[k + 1]
                frame.loc[pick, VALUE_COLUMN] = 0.0
                frame.loc[pick, FLAG_COLUMN] = Flag.VANISHING_DERIVATIVE.value
        for k, slope in zip(index, s):
            if np.isfinite(slope) and abs(slope) < DERIVATIVE_FLOOR:
                frame.loc[k, VALUE_COLUMN] = 0.0
                frame.loc[k, FLAG_COLUMN] = Flag.VANISHING_DERIVATIVE.value


def _worker_count(requested: int) -> int:
    return requested if requested > 0 else (os.cpu_count() or 1)


def _run_points(tasks: List[Tuple[Scenario, float, float]], workers: int) -> List[Tuple]:
    if workers == 1 or len(tasks) < 2:
        return [_evaluate_point(task) for task in tasks]
    chunksize = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(_evaluate_point, tasks, chunksize=chunksize))


def run_sweep(cfg: RunConfig, workers: Optional[int] = None) -> SweepResult:
    """
    Evaluate the configured quantity at every (gain, kappa_I) point of the grid.

    Identical configurations give identical results; a configured cache manager returns a stored
    result for a configuration hash it has already seen.

    Args:
        cfg: Validated run configuration
        workers: Override of cfg.sweep.workers (0 uses every core)

    Returns:
        SweepResult: One row per grid point, sorted by (gain, kappa_I)
    """
    key = cfg.config_hash()
    cache = get_cache_manager_or_none() if cfg.cache.enabled else None
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit

    scenario = cfg.to_scenario()
    kappas = cfg.grid.kappa_values()
    tasks = [(scenario, float(g), float(k)) for g in cfg.grid.gains for k in kappas]
    n_workers = _worker_count(cfg.sweep.workers if workers is None else workers)
    logger.info(
        f"Sweep {key}: model={cfg.run.model} access={cfg.run.access} estimand={cfg.run.estimand} "
        f"quantity={cfg.run.quantity}, {len(tasks)} points on {n_workers} worker(s)"
    )

    rows = _run_points(tasks, n_workers)
    frame = pd.DataFrame([row[:5] for row in rows], columns=COLUMNS)
    order = frame.sort_values([GAIN_COLUMN, KAPPA_COLUMN], kind="mergesort").index
    slopes = np.array([row[5] for row in rows], dtype=float)[order]
    frame = frame.loc[order].reset_index(drop=True)
    if scenario.quantity == Quantity.INVERSE_ERROR:
        _flag_dips(frame, slopes)

    flagged = frame[frame[FLAG_COLUMN] != Flag.OK.value]
    for flag, count in flagged[FLAG_COLUMN].value_counts().sort_index().items():
        logger.warning(f"Sweep {key}: {count} point(s) flagged {flag}")

    result = SweepResult(frame=frame, metadata=sweep_metadata(cfg))
    logger.info(f"Sweep {key} finished with {len(frame)} rows")
    if cache is not None:
        cache.put(key, result)
    return result


def log_ratio(res_a: SweepResult, res_b: SweepResult, **metadata: str) -> SweepResult:
    """log10(value_A / value_B) on a shared grid; a row inherits the first non-ok flag of its operands."""
    _check_matching(res_a, res_b)
    a, b = res_a.frame, res_b.frame
    values = []
    flags = []
    for va, vb, fa, fb in zip(a[VALUE_COLUMN], b[VALUE_COLUMN], a[FLAG_COLUMN], b[FLAG_COLUMN]):
        flag = fa if fa != Flag.OK.value else fb
        if flag == Flag.OK.value and va > 0 and vb > 0:
            values.append(math.log10(va / vb))
        else:
            values.append(math.nan)
        flags.append(flag)
    frame = a[[KAPPA_COLUMN, ETA_COLUMN, GAIN_COLUMN]].copy()
    frame[VALUE_COLUMN] = values
    frame[FLAG_COLUMN] = flags
    header = {
        "quantity": "log10_ratio",
        "numerator": res_a.metadata.get("config_hash", ""),
        "denominator": res_b.metadata.get("config_hash", ""),
    }
    header.update(metadata)
    return SweepResult(frame=frame, metadata=header)


def _check_matching(res_a: SweepResult, res_b: SweepResult) -> None:
    a, b = res_a.frame, res_b.frame
    if len(a) != len(b) or not (
        np.array_equal(a[KAPPA_COLUMN].to_numpy(), b[KAPPA_COLUMN].to_numpy())
        and np.array_equal(a[GAIN_COLUMN].to_numpy(), b[GAIN_COLUMN].to_numpy())
    ):
        raise ParameterError("Sweep results do not share the same (gain, kappa_I) grid")


def crossover(res_a: SweepResult, res_b: SweepResult) -> Dict[float, float]:
    """
    Per-gain decay rate where log(H_A / H_B) changes sign, by linear interpolation in log kappa_I.

    Flagged or non-positive points are skipped. With several sign changes the first is returned. A gain
    without a sign change maps to NaN and is logged.

    Raises:
        NoCrossover: If no gain has a sign change on the grid
    """
    ratio = log_ratio(res_a, res_b)
    points: Dict[float, float] = {}
    missing = []
    for gain in ratio.gains:
        curve = ratio.curve(gain)
        curve = curve[np.isfinite(curve[VALUE_COLUMN])]
        log_kappa = np.log(curve[KAPPA_COLUMN].to_numpy())
        r = curve[VALUE_COLUMN].to_numpy()
        changes = np.nonzero(r[:-1] * r[1:] < 0)[0]
        if len(changes) == 0:
            missing.append(gain)
            points[gain] = math.nan
            continue
        if len(changes) > 1:
            logger.warning(f"Gain {gain}: {len(changes)} sign changes, reporting the first")
        k = changes[0]
        t = r[k] / (r[k] - r[k + 1])
        points[gain] = float(np.exp(log_kappa[k] + t * (log_kappa[k + 1] - log_kappa[k])))
    if len(missing) == len(points):
        raise NoCrossover(f"No sign change of the log ratio for gains {missing}")
    if missing:
        logger.warning(f"No sign change of the log ratio for gains {missing}")
    return points


def fit_from_sweep(result: SweepResult, length: float, estimand: Estimand = Estimand.KAPPA_I) -> FitReport:
    """Fit alpha to an inverse-ratio sweep, dividing out L^2 eta^2 for the transmission estimand."""
    rows = result.ok_rows()
    ratios = rows[VALUE_COLUMN].to_numpy(dtype=float)
    if estimand == Estimand.ETA_I:
        ratios = ratios / (length * rows[ETA_COLUMN].to_numpy(dtype=float)) ** 2
    return fit_alpha(rows[KAPPA_COLUMN].tolist(), rows[GAIN_COLUMN].tolist(), ratios.tolist())
