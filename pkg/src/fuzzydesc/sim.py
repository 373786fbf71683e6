"""Closed-loop simulation of the interconnected descriptor network.

Each subsystem obeys ``E_i^v(x_i) xdot_i = sum_k h_i^k (A_i^k x_i + B_i^k u_i
+ sum_{alpha != i} F_{i alpha}^k x_alpha)``.  The blended ``E`` is solved at
every Runge-Kutta stage, so the integrator only handles non-impulsive
descriptors whose ``E`` blend stays invertible.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .memexpr import eval_time_derivative
from .model import NetworkModel, SubsystemModel
from .synth import SingularBlendError, SynthesisResult, blended_X1, evaluate_controller

__all__ = [
    "SimulationError",
    "SingularDescriptorError",
    "DivergenceError",
    "Trajectory",
    "simulate",
    "lyapunov_value",
    "hinf_report",
    "derivative_bound_diagnostic",
    "write_csv",
    "read_csv",
    "trajectory_csv",
    "E_COND_LIMIT",
]

E_COND_LIMIT = 1e12


class SimulationError(RuntimeError):
    pass


class SingularDescriptorError(SimulationError):
    def __init__(self, subsystem: str, t: float, cond: float):
        super().__init__(f"blended E of {subsystem} is singular at t={t:.6g} (condition number {cond:.3e})")
        self.subsystem, self.t, self.cond = subsystem, t, cond


class DivergenceError(SimulationError):
    def __init__(self, step: int, t: float):
        super().__init__(f"state became nonfinite at step {step} (t={t:.6g})")
        self.step, self.t = step, t


@dataclass
class Trajectory:
    """Samples on a uniform grid; arrays are indexed ``[sample, component]``."""

    t: np.ndarray
    names: list[str]
    x: list[np.ndarray]
    u: list[np.ndarray]
    V: list[np.ndarray]
    xdot: list[np.ndarray]
    phi: list[dict[str, np.ndarray]]
    E_state: list[np.ndarray]
    E_phi: list[np.ndarray]
    open_loop: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def final_state(self) -> np.ndarray:
        return np.concatenate([x[-1] for x in self.x])

    def initial_state(self) -> np.ndarray:
        return np.concatenate([x[0] for x in self.x])


def _phi_weight(n: int) -> float:
    # each peer appears (n-1) times as itself and (n-2) times as a bystander
    return float(2 * n - 3) if n > 1 else 0.0


def lyapunov_value(res: SynthesisResult, sub: SubsystemModel, x: Sequence[float]) -> float:
    """``x^T (sum v_j h_s X1^js)^-1 x`` with memberships taken at ``x``."""
    x = np.asarray(x, dtype=float)
    v, h = sub.memberships(x)
    X = blended_X1(res, v, h)
    return float(x @ np.linalg.solve(X, x))


class _Closed:
    def __init__(self, net: NetworkModel, results, open_loop: bool):
        self.net = net
        self.results = results
        self.open_loop = open_loop
        self.dims = [s.state_dim for s in net.subsystems]
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)
        self.coupling = [{a: np.array(net.coupling(i, a)) for a in net.peers(i)} for i in range(net.n)]
        self.E = [np.array(s.E) for s in net.subsystems]
        self.A = [np.array(s.A) for s in net.subsystems]
        self.B = [np.array(s.B) for s in net.subsystems]
        if results is not None and not open_loop:
            self.X1 = [np.array(r.X1) for r in results]
            self.K = [np.array(r.K) for r in results]

    def split(self, z: np.ndarray) -> list[np.ndarray]:
        return [z[self.offsets[i]:self.offsets[i + 1]] for i in range(self.net.n)]

    def control(self, i: int, x: np.ndarray, v=None, h=None) -> np.ndarray:
        sub = self.net.subsystems[i]
        if self.open_loop:
            return np.zeros(sub.input_dim)
        if v is None:
            return evaluate_controller(self.results[i], sub, x)
        w = np.outer(v, h)
        X = np.tensordot(w, self.X1[i], 2)
        K = np.tensordot(w, self.K[i], 2)
        cond = float(np.linalg.cond(X))
        if not math.isfinite(cond) or cond > 1e12:
            raise SingularBlendError(cond)
        return K @ np.linalg.solve(X, x)

    def phi(self, i: int, h: np.ndarray, xs: list[np.ndarray]) -> dict[int, np.ndarray]:
        return {a: np.tensordot(h, Fs, 1) @ xs[a] for a, Fs in self.coupling[i].items()}

    def rhs(self, z: np.ndarray, t: float) -> np.ndarray:
        xs = self.split(z)
        out = np.empty_like(z)
        for i, sub in enumerate(self.net.subsystems):
            x = xs[i]
            v, h = sub.memberships(x)
            E = np.tensordot(v, self.E[i], 1)
            cond = float(np.linalg.cond(E))
            if not math.isfinite(cond) or cond > E_COND_LIMIT:
                raise SingularDescriptorError(sub.name, t, cond)
            u = self.control(i, x, v, h)
            f = np.tensordot(h, self.A[i], 1) @ x + np.tensordot(h, self.B[i], 1) @ u
            for p in self.phi(i, h, xs).values():
                f += p
            out[self.offsets[i]:self.offsets[i + 1]] = np.linalg.solve(E, f)
        return out


def simulate(net: NetworkModel, results: Sequence[SynthesisResult] | None, x0: Sequence[Sequence[float]],
             dt: float = 1e-3, T: float = 10.0, open_loop: bool = False) -> Trajectory:
    """Classical RK4 with memberships re-evaluated at every stage.

    ``results`` may be None only for an open-loop run; then ``V`` is NaN.
    """
    if not dt > 0 or not T > dt:
        raise ValueError("need dt > 0 and T > dt")
    if len(x0) != net.n:
        raise ValueError(f"expected {net.n} initial states, got {len(x0)}")
    if results is None and not open_loop:
        raise ValueError("closed-loop simulation needs synthesis results")
    if results is not None:
        results = list(results)
        if [r.name for r in results] != [s.name for s in net.subsystems]:
            raise ValueError("results do not match the model's subsystems")
        if not open_loop:
            bad = [r.name for r in results if not r.feasible]
            if bad:
                raise ValueError(f"no feasible controller for {', '.join(bad)}")
    for i, (sub, x) in enumerate(zip(net.subsystems, x0)):
        if len(x) != sub.state_dim:
            raise ValueError(f"initial state of {sub.name} has {len(x)} entries, expected {sub.state_dim}")

    steps = int(round(T / dt))
    if not math.isclose(steps * dt, T, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("T must be an integer multiple of dt")
    sys = _Closed(net, results, open_loop)
    n = net.n
    N = steps + 1
    t = dt * np.arange(N)
    xs = [np.empty((N, d)) for d in sys.dims]
    xd = [np.empty((N, d)) for d in sys.dims]
    us = [np.empty((N, s.input_dim)) for s in net.subsystems]
    Vs = [np.empty(N) for _ in range(n)]
    phis = [{net.subsystems[a].name: np.empty((N, net.subsystems[i].state_dim)) for a in net.peers(i)}
            for i in range(n)]
    inst_x = [np.empty(N) for _ in range(n)]
    inst_p = [np.empty(N) for _ in range(n)]
    w = _phi_weight(n)

    def record(m: int, z: np.ndarray, k1: np.ndarray):
        parts = sys.split(z)
        dparts = sys.split(k1)
        for i, sub in enumerate(net.subsystems):
            x = parts[i]
            xs[i][m] = x
            xd[i][m] = dparts[i]
            us[i][m] = sys.control(i, x)
            Vs[i][m] = lyapunov_value(results[i], sub, x) if results is not None else math.nan
            _, h = sub.memberships(x)
            pv = sys.phi(i, h, parts)
            for a, p in pv.items():
                phis[i][net.subsystems[a].name][m] = p
            inst_x[i][m] = float(x @ x)
            inst_p[i][m] = w * sum(float(p @ p) for p in pv.values())

    z = np.concatenate([np.asarray(x, dtype=float) for x in x0])
    k1 = sys.rhs(z, 0.0)
    record(0, z, k1)
    for m in range(steps):
        tm = t[m]
        k2 = sys.rhs(z + 0.5 * dt * k1, tm + 0.5 * dt)
        k3 = sys.rhs(z + 0.5 * dt * k2, tm + 0.5 * dt)
        k4 = sys.rhs(z + dt * k3, tm + dt)
        z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(m + 1, t[m + 1])
        k1 = sys.rhs(z, t[m + 1])
        record(m + 1, z, k1)

    def cumtrapz(f):
        out = np.zeros_like(f)
        out[1:] = np.cumsum(0.5 * dt * (f[1:] + f[:-1]))
        return out

    return Trajectory(
        t=t, names=[s.name for s in net.subsystems], x=xs, u=us, V=Vs, xdot=xd, phi=phis,
        E_state=[cumtrapz(f) for f in inst_x], E_phi=[cumtrapz(f) for f in inst_p],
        open_loop=open_loop, meta={"dt": dt, "T": T, "steps": steps, "phi_weight": w},
    )


def hinf_report(traj: Trajectory, results: Sequence[SynthesisResult], tol: float = 1e-3,
                rho: Sequence[float] | None = None) -> list[dict]:
    """Dissipation residual ``D = int x^T x - rho^2 int phi^T phi - V(t0) + V(tf)``.

    ``rho`` overrides the certified levels (useful to show the check bites).
    """
    out = []
    for i, name in enumerate(traj.names):
        r = float(rho[i]) if rho is not None else float(results[i].rho)
        ex, ep = float(traj.E_state[i][-1]), float(traj.E_phi[i][-1])
        V0, Vf = float(traj.V[i][0]), float(traj.V[i][-1])
        D = ex - r * r * ep - V0 + Vf
        out.append({"subsystem": name, "rho": r, "E_state": ex, "E_phi": ep, "V0": V0, "Vf": Vf,
                    "D": D, "tol": tol, "passed": bool(D <= tol)})
    return out


def derivative_bound_diagnostic(traj: Trajectory, net: NetworkModel, h: float = 1e-6) -> list[dict]:
    """Smallest observed membership derivative of every rule against its declared bound.

    A rule whose derivative dips below the bound gets ``"WARN"``; this is a
    warning, since the bounds are assumptions of the synthesis, not outputs.
    """
    rows = []
    for i, sub in enumerate(net.subsystems):
        x, xd = traj.x[i], traj.xdot[i]
        fams = (("h", sub.h_exprs, sub.omega_bounds), ("v", sub.v_exprs, sub.lambda_bounds))
        for fam, exprs, bounds in fams:
            for r, (e, b) in enumerate(zip(exprs, bounds)):
                d = np.array([eval_time_derivative(e, x[m], xd[m], h) for m in range(len(traj.t))])
                m = int(np.argmin(d))
                rows.append({"subsystem": sub.name, "family": fam, "rule": r + 1, "bound": float(b),
                             "min": float(d[m]), "time": float(traj.t[m]),
                             "status": "WARN" if d[m] < b else "OK"})
    return rows


# -- CSV --------------------------------------------------------------------------


def _header(traj: Trajectory) -> list[str]:
    cols = ["t"]
    for name, x in zip(traj.names, traj.x):
        cols += [f"x_{name}_{k + 1}" for k in range(x.shape[1])]
    for name, u in zip(traj.names, traj.u):
        cols += [f"u_{name}" if u.shape[1] == 1 else f"u_{name}_{k + 1}" for k in range(u.shape[1])]
    cols += [f"V_{name}" for name in traj.names]
    cols += [f"E_state_{name}" for name in traj.names]
    cols += [f"E_phi_{name}" for name in traj.names]
    return cols


def trajectory_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(_header(traj))
    cols = [traj.t[:, None]] + traj.x + traj.u + [v[:, None] for v in traj.V]
    cols += [e[:, None] for e in traj.E_state] + [e[:, None] for e in traj.E_phi]
    data = np.hstack(cols)
    for row in data:
        wr.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_csv(traj: Trajectory, path: str | Path) -> None:
    Path(path).write_text(trajectory_csv(traj))


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header and numeric matrix of a trajectory CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise ValueError(f"{path}: not a trajectory CSV")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))
    return rows[0], data
