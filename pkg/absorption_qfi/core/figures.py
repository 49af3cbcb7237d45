"""
Figure reproduction for absorption-qfi.
This module defines the comparison panels (QFI per configuration and access scenario, log ratios,
DL inverse ratios with the alpha fit, intensity-difference inverse errors) and writes one CSV per panel
plus SVG plots.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from absorption_qfi.core.qfi import APPROXIMATE_DL_ALPHA, Estimand  # noqa: E402
from absorption_qfi.core.run_config import RunConfig, load_config  # noqa: E402
from absorption_qfi.core.scenarios import alpha_curve  # noqa: E402
from absorption_qfi.core.sweep import (  # noqa: E402
    ETA_COLUMN,
    FLAG_COLUMN,
    KAPPA_COLUMN,
    VALUE_COLUMN,
    Flag,
    SweepResult,
    fit_from_sweep,
    log_ratio,
    run_sweep,
)
from absorption_qfi.error_handling.exceptions import ParameterError  # noqa: E402

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Panel:
    """A sweep panel (updates applied to the base config) or a log ratio of two other panels."""

    title: str
    updates: Dict[str, Any] = field(default_factory=dict)
    ratio_of: Optional[Tuple[str, str]] = None


def _sweep(model: str, access: str, quantity: str = "qfi", estimand: str = "kappa") -> Dict[str, Any]:
    return {"run.model": model, "run.access": access, "run.quantity": quantity, "run.estimand": estimand}


FIG2_PANELS: Dict[str, Panel] = {
    "fig2a": Panel("SU(1,1) and IC, full access", _sweep("su11", "all")),
    "fig2b": Panel("DL, full access", _sweep("dl", "all")),
    "fig2c": Panel("log10 DL / SU(1,1), full access", ratio_of=("fig2b", "fig2a")),
    "fig2d": Panel("IC, two-mode (idler traced out)", _sweep("ic", "ic_two_mode")),
    "fig2e": Panel("log10 IC two-mode / SU(1,1) single-mode", ratio_of=("fig2d", "fig2g")),
    "fig2f": Panel("log10 IC two-mode / DL single-mode", ratio_of=("fig2d", "fig2h")),
    "fig2g": Panel("SU(1,1), single mode", _sweep("su11", "single_mode")),
    "fig2h": Panel("DL, single mode", _sweep("dl", "single_mode")),
    "fig2i": Panel("IC, single mode", _sweep("ic", "single_mode")),
    "fig2j": Panel("log10 DL / SU(1,1), single mode", ratio_of=("fig2h", "fig2g")),
    "fig2k": Panel("log10 IC / SU(1,1), single mode", ratio_of=("fig2i", "fig2g")),
    "fig2l": Panel("log10 IC / DL, single mode", ratio_of=("fig2i", "fig2h")),
}

FIG3_PANELS: Dict[str, Tuple[str, str]] = {
    "fig3a": ("eta", ETA_COLUMN),
    "fig3b": ("eta", KAPPA_COLUMN),
    "fig3c": ("kappa", ETA_COLUMN),
    "fig3d": ("kappa", KAPPA_COLUMN),
}

FIG4_PANELS: Dict[str, Panel] = {
    "fig4a": Panel("SU(1,1), intensity-difference inverse error", _sweep("su11", "all", "inverse_error")),
    "fig4b": Panel("DL, intensity-difference inverse error", _sweep("dl", "all", "inverse_error")),
    "fig4c": Panel("log10 DL / SU(1,1) inverse error", ratio_of=("fig4b", "fig4a")),
}

FIGURES = sorted(FIG2_PANELS) + ["fig2", "fig3", "fig4", "all"]


class PanelBuilder:
    """Evaluates panels against one base configuration, reusing sweeps shared between panels."""

    def __init__(self, base: RunConfig, panels: Dict[str, Panel]):
        self.base = base
        self.panels = panels
        self._results: Dict[str, SweepResult] = {}

    def result(self, name: str) -> SweepResult:
        if name not in self._results:
            panel = self.panels[name]
            if panel.ratio_of is not None:
                numerator, denominator = panel.ratio_of
                self._results[name] = log_ratio(self.result(numerator), self.result(denominator), panel=name)
            else:
                result = run_sweep(self.base.derive(panel.updates))
                self._results[name] = SweepResult(frame=result.frame, metadata={**result.metadata, "panel": name})
        return self._results[name]


def _plot_panel(result: SweepResult, title: str, path: Path, is_ratio: bool) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    for gain in result.gains:
        curve = result.curve(gain)
        ok = curve[(curve[FLAG_COLUMN] == Flag.OK.value) & np.isfinite(curve[VALUE_COLUMN])]
        ax.plot(ok[KAPPA_COLUMN], ok[VALUE_COLUMN], label=f"$N^P_S$={gain:g}")
    ax.set_xscale("log")
    if is_ratio:
        ax.axhline(0.0, color="grey", linewidth=0.8)
        ax.set_ylabel("log10 ratio")
    else:
        ax.set_yscale("log")
        ax.set_ylabel("value")
    ax.set_xlabel(r"$\kappa_I$ (nm$^{-1}$)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.info(f"Wrote plot {path}")
    return path


def _emit_panels(builder: PanelBuilder, names: List[str], outdir: Path, plot: bool) -> List[Path]:
    written = []
    for name in names:
        panel = builder.panels[name]
        result = builder.result(name)
        written.append(result.write_csv(outdir / f"{name}.csv"))
        if plot:
            written.append(_plot_panel(result, panel.title, outdir / f"{name}.svg", panel.ratio_of is not None))
    return written


def _fig3(base: RunConfig, outdir: Path, plot: bool) -> List[Path]:
    written: List[Path] = []
    sweeps = {
        estimand: run_sweep(base.derive(_sweep("dl", "all", "inverse_ratio", estimand)))
        for estimand in ("eta", "kappa")
    }
    length = base.grid.length_nm
    fits = {
        estimand: fit_from_sweep(result, length, Estimand.ETA_I if estimand == "eta" else Estimand.KAPPA_I)
        for estimand, result in sweeps.items()
    }
    for name, (estimand, x_column) in FIG3_PANELS.items():
        result = sweeps[estimand]
        metadata = {
            **result.metadata,
            "panel": name,
            "x_axis": x_column,
            "alpha_overlay": repr(APPROXIMATE_DL_ALPHA),
            "alpha_fitted": repr(fits[estimand].alpha),
            "r_squared_mean": repr(fits[estimand].r_squared),
        }
        written.append(SweepResult(frame=result.frame, metadata=metadata).write_csv(outdir / f"{name}.csv"))

    if plot:
        fig, axes = plt.subplots(2, 2, figsize=(9, 7))
        for ax, (name, (estimand, x_column)) in zip(axes.flat, FIG3_PANELS.items()):
            result = sweeps[estimand]
            target = Estimand.ETA_I if estimand == "eta" else Estimand.KAPPA_I
            for gain in result.gains:
                ok = result.curve(gain)
                ok = ok[ok[FLAG_COLUMN] == Flag.OK.value]
                ax.plot(ok[x_column], ok[VALUE_COLUMN], label=f"$N^P_S$={gain:g}")
            kappas = result.curve(result.gains[0])[KAPPA_COLUMN].to_numpy()
            xs = result.curve(result.gains[0])[x_column].to_numpy()
            fit = [alpha_curve(k, APPROXIMATE_DL_ALPHA, target, length) for k in kappas]
            ax.plot(xs, fit, "k--", label="Fit")
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel(r"$\eta_I$" if x_column == ETA_COLUMN else r"$\kappa_I$ (nm$^{-1}$)")
            ax.set_title(f"{name}: estimand {estimand}")
            ax.legend(fontsize=7)
        fig.tight_layout()
        path = outdir / "fig3.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)
    return written


def reproduce_figure(which: str, outdir: Union[str, Path], cfg: Optional[RunConfig] = None) -> List[Path]:
    """
    Write the CSV files (and SVG plots when cfg.sweep.plot) of one figure or panel.

    Args:
        which: fig2a ... fig2l, fig2, fig3, fig4 or all
        outdir: Output directory, created if missing
        cfg: Base configuration; the grid, dispersion, phases and numerics are taken from it

    Returns:
        List[Path]: Files written
    """
    if which not in FIGURES:
        raise ParameterError(f"Unknown figure '{which}'; choose one of {', '.join(FIGURES)}")
    base = cfg or load_config()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    plot = base.sweep.plot

    written: List[Path] = []
    if which.startswith("fig2") or which == "all":
        names = sorted(FIG2_PANELS) if which in ("fig2", "all") else [which]
        written += _emit_panels(PanelBuilder(base, FIG2_PANELS), names, outdir, plot)
    if which in ("fig3", "all"):
        written += _fig3(base, outdir, plot)
    if which in ("fig4", "all"):
        written += _emit_panels(PanelBuilder(base, FIG4_PANELS), sorted(FIG4_PANELS), outdir, plot)
    logger.info(f"Reproduced {which}: {len(written)} files in {outdir}")
    return written
