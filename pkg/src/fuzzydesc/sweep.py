"""Feasibility-domain sweeps over scalar model entries, plus the SVG emitters."""
from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import lmi
from .model import NetworkModel, set_entry
from .synth import SynthOptions, replay_corollary, synthesize

__all__ = [
    "Binding",
    "ParamRange",
    "SweepGrid",
    "CellRecord",
    "BindingError",
    "parse_binding",
    "parse_range",
    "apply_bindings",
    "run_sweep",
    "run_cell",
    "sweep_csv",
    "emit_csv",
    "emit_svg",
    "plot_trajectory_svg",
    "METHOD_TAGS",
]

METHOD_TAGS = {lmi.THEOREM1: "th1", lmi.COROLLARY1: "cor1"}

_BIND_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*=\s*([^.\s]+)\.([EAB])\[(\d+)\]\[(\d+)\]\[(\d+)\]\s*$")
_RANGE_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*:(.+):(.+):(.+)$")


class BindingError(ValueError):
    pass


@dataclass(frozen=True)
class Binding:
    """Names one scalar entry: ``subsystem.matrix[k][row][col]`` (``k`` from 1, row/col from 0)."""

    name: str
    subsystem: str
    matrix: str
    k: int
    row: int
    col: int

    def __str__(self) -> str:
        return f"{self.name}={self.subsystem}.{self.matrix}[{self.k}][{self.row}][{self.col}]"


@dataclass(frozen=True)
class ParamRange:
    name: str
    lo: float
    hi: float
    steps: int

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.steps)


def parse_binding(text: str) -> Binding:
    m = _BIND_RE.match(text)
    if not m:
        raise BindingError(f"bad binding {text!r}; expected name=subsystem.M[k][row][col]")
    name, sub, mat, k, r, c = m.groups()
    return Binding(name, sub, mat, int(k), int(r), int(c))


def parse_range(text: str) -> ParamRange:
    m = _RANGE_RE.match(text)
    if not m:
        raise BindingError(f"bad range {text!r}; expected name:min:max:steps")
    name, lo, hi, steps = m.groups()
    try:
        lo_f, hi_f, n = float(lo), float(hi), int(steps)
    except ValueError:
        raise BindingError(f"bad range {text!r}; expected name:min:max:steps") from None
    if n < 1 or not (math.isfinite(lo_f) and math.isfinite(hi_f)):
        raise BindingError(f"bad range {text!r}; steps must be >= 1 and bounds finite")
    if n > 1 and not hi_f > lo_f:
        raise BindingError(f"bad range {text!r}; need max > min")
    return ParamRange(name, lo_f, hi_f, n)


def apply_bindings(net: NetworkModel, bindings: Sequence[Binding], values: Sequence[float]) -> NetworkModel:
    for b, v in zip(bindings, values):
        try:
            net = set_entry(net, b.subsystem, b.matrix, b.k, b.row, b.col, float(v))
        except KeyError as exc:
            raise BindingError(f"{b}: {exc.args[0]}") from None
    return net


@dataclass
class CellRecord:
    index: int
    values: tuple[float, ...]
    feasible: dict[str, bool]
    rho: dict[str, list[float]]
    status: dict[str, str]
    replay: float | None = None


@dataclass
class SweepGrid:
    bindings: list[Binding]
    ranges: list[ParamRange]
    methods: list[str]
    cells: list[CellRecord] = field(default_factory=list)

    def __post_init__(self):
        names = [b.name for b in self.bindings]
        if len(set(names)) != len(names):
            raise BindingError("duplicate binding names")
        if sorted(names) != sorted(r.name for r in self.ranges):
            raise BindingError("every binding needs exactly one range and vice versa")
        self.ranges = sorted(self.ranges, key=lambda r: names.index(r.name))
        for m in self.methods:
            if m not in METHOD_TAGS:
                raise BindingError(f"unknown method {m!r}")
        if not self.methods:
            raise BindingError("no methods requested")

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.bindings]

    def points(self) -> list[tuple[float, ...]]:
        """Cell coordinates; the first parameter varies slowest."""
        axes = [r.values() for r in self.ranges]
        if not axes:
            return []
        mesh = np.meshgrid(*axes, indexing="ij")
        return [tuple(float(m.flat[i]) for m in mesh) for i in range(mesh[0].size)]

    def cell_count(self) -> int:
        return int(np.prod([r.steps for r in self.ranges])) if self.ranges else 0

    def counts(self) -> dict[str, int]:
        return {m: sum(c.feasible[m] for c in self.cells) for m in self.methods}


def _cell_status(results) -> str:
    if all(r.feasible for r in results):
        return "feasible"
    if any(r.status == "infeasible" for r in results):
        return "infeasible"
    return "numerical-failure"


def run_cell(net: NetworkModel, grid: SweepGrid, index: int, values: Sequence[float],
             opts: SynthOptions) -> CellRecord:
    """Synthesize every requested method at one grid point; failures are recorded."""
    model = apply_bindings(net, grid.bindings, values)
    feas, rho, status = {}, {}, {}
    replay = None
    for m in grid.methods:
        try:
            results = synthesize(model, m, replace(opts, method=m))
        except Exception as exc:  # recorded, never fatal
            feas[m], rho[m], status[m] = False, [math.nan] * model.n, f"error: {exc}"
            continue
        feas[m] = all(r.feasible for r in results)
        rho[m] = [r.rho if r.feasible else math.nan for r in results]
        status[m] = _cell_status(results)
        if m == lmi.COROLLARY1 and feas[m]:
            replay = max(replay_corollary(model, r) for r in results)
    return CellRecord(index, tuple(float(v) for v in values), feas, rho, status, replay)


def _cell_job(args):
    return run_cell(*args)


def run_sweep(net: NetworkModel, grid: SweepGrid, opts: SynthOptions | None = None,
              workers: int = 1, progress=None) -> SweepGrid:
    """Fill ``grid.cells`` in cell-index order.

    The default options skip the polishing solve: a sweep only needs verdicts
    and the minimal levels.
    """
    opts = opts or SynthOptions(polish=0.0)
    pts = grid.points()
    if pts:
        apply_bindings(net, grid.bindings, pts[0])  # fail early on bad bindings
    jobs = [(net, grid, i, p, opts) for i, p in enumerate(pts)]
    cells = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell in pool.map(_cell_job, jobs):
                cells.append(cell)
                if progress:
                    progress(cell)
    else:
        for job in jobs:
            cell = _cell_job(job)
            cells.append(cell)
            if progress:
                progress(cell)
    grid.cells = cells
    return grid


# -- output ------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _columns(grid: SweepGrid, n_sub: int) -> list[str]:
    tags = [METHOD_TAGS[m] for m in grid.methods]
    cols = list(grid.names) + [f"{t}_feasible" for t in tags]
    cols += [f"rho{i + 1}" for i in range(n_sub)]
    for t in tags[1:]:
        cols += [f"{t}_rho{i + 1}" for i in range(n_sub)]
    cols += [f"{t}_status" for t in tags]
    if lmi.COROLLARY1 in grid.methods:
        cols.append("cor1_replay")
    return cols


def sweep_csv(grid: SweepGrid, n_sub: int = 2) -> str:
    """Columns: parameters, one feasibility flag per method, the first method's
    levels ``rho1..rhoN``, the other methods' levels, statuses."""
    if grid.cells:
        n_sub = len(next(iter(grid.cells[0].rho.values())))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(_columns(grid, n_sub))
    for c in grid.cells:
        row = [repr(v) for v in c.values]
        row += ["1" if c.feasible[m] else "0" for m in grid.methods]
        for m in grid.methods:
            row += [_fmt(r) for r in c.rho[m]]
        row += [c.status[m] for m in grid.methods]
        if lmi.COROLLARY1 in grid.methods:
            row.append(_fmt(c.replay))
        wr.writerow(row)
    return buf.getvalue()


def emit_csv(grid: SweepGrid, path: str | Path, n_sub: int = 2) -> None:
    Path(path).write_text(sweep_csv(grid, n_sub))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "fuzzydesc"
    import matplotlib.pyplot as plt

    return plt


_STYLES = {
    lmi.THEOREM1: dict(marker="o", s=70, facecolors="none", edgecolors="tab:blue", label="theorem1"),
    lmi.COROLLARY1: dict(marker="+", s=40, color="tab:red", label="corollary1"),
}


def emit_svg(grid: SweepGrid, path: str | Path) -> None:
    """Scatter of feasible cells, one mark style per method."""
    if len(grid.names) != 2:
        raise ValueError("the scatter needs exactly two swept parameters")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for m in grid.methods:
        pts = np.array([c.values for c in grid.cells if c.feasible[m]]).reshape(-1, 2)
        ax.scatter(pts[:, 0], pts[:, 1], **_STYLES[m])
    r0, r1 = grid.ranges
    ax.set_xlim(r0.lo - 0.1 * max(r0.hi - r0.lo, 1), r0.hi + 0.1 * max(r0.hi - r0.lo, 1))
    ax.set_ylim(r1.lo - 0.1 * max(r1.hi - r1.lo, 1), r1.hi + 0.1 * max(r1.hi - r1.lo, 1))
    ax.set_xlabel(grid.names[0])
    ax.set_ylabel(grid.names[1])
    ax.legend(loc="upper right")
    ax.set_title("feasible cells")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_trajectory_svg(header: Sequence[str], data: np.ndarray, path: str | Path) -> None:
    """States on top, inputs below, against the ``t`` column."""
    plt = _pyplot()
    t = data[:, 0]
    xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
    ucols = [i for i, h in enumerate(header) if h.startswith("u_")]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for i in xcols:
        ax1.plot(t, data[:, i], label=header[i], linewidth=1.0)
    for i in ucols:
        ax2.plot(t, data[:, i], label=header[i], linewidth=1.0)
    ax1.set_ylabel("state")
    ax2.set_ylabel("input")
    ax2.set_xlabel("t")
    for ax in (ax1, ax2):
        if ax.lines:
            ax.legend(loc="upper right", fontsize="small")
        ax.grid(True, linewidth=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
