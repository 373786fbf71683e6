"""Controller synthesis, posterior verification and result files.

The LMIs of one subsystem involve only that subsystem's variables and its
own ``mu``, so the network problem splits into ``n`` independent SDPs.

A subsystem is reported feasible only when the solved variables pass an
independent eigenvalue check of every relaxed LMI (Jacobi eigensolver, not
the solver's factorizations) and every ``X1`` is positive definite.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import lmi
from .linalg import jacobi_eigvalsh, max_eig
from .model import NetworkModel, SubsystemModel
from .sdp import INFEASIBLE, SolverOptions, get_backend, vectorize

__all__ = [
    "SynthOptions",
    "SynthesisResult",
    "SingularBlendError",
    "synthesize",
    "synthesize_subsystem",
    "evaluate_controller",
    "blended_X1",
    "verify_blended",
    "relaxed_instances_for",
    "result_vector",
    "simplex_lattice",
    "replay_corollary",
    "save_results",
    "load_results",
    "results_to_dict",
    "results_from_dict",
]

RESULT_FORMAT = "fuzzydesc-result"


class SingularBlendError(ArithmeticError):
    def __init__(self, cond: float):
        super().__init__(f"blended X1 is singular or ill-conditioned (condition number {cond:.3e})")
        self.cond = cond


@dataclass(frozen=True)
class SynthOptions:
    """Knobs for one synthesis run.

    ``delta`` is relative: the strictness margin is ``delta * max(1, data scale)``.
    ``radius`` bounds the decision vector and ``norm_penalty`` weights its norm
    in the objective (see :func:`fuzzydesc.sdp.vectorize`).

    The infimum of ``mu`` is usually approached with a singular ``X1``, which
    makes ``K X1^-1`` huge.  With ``polish > 0`` a second solve keeps
    ``rho <= (1 + polish) rho_min`` and maximizes the smallest eigenvalue of
    ``X1``; its certificate is kept when it passes the eigenvalue check.
    """

    method: str = lmi.THEOREM1
    delta: float = 1e-7
    interconnect_eps: float = 0.0
    reduce: bool = True
    radius: float | None = 1e3
    norm_penalty: float = 1e-6
    polish: float = 1e-2
    backend: str = "embedded"
    grid_density: int = 5
    check_tol: float = 1e-6
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class SynthesisResult:
    name: str
    index: int
    method: str
    feasible: bool
    rho: float
    mu: float
    X1: list[list[np.ndarray]]
    X3: list[list[np.ndarray]]
    X4: list[list[np.ndarray]]
    K: list[list[np.ndarray]]
    omega_bounds: tuple[float, ...]
    lambda_bounds: tuple[float, ...]
    delta: float
    reduce: bool
    interconnect_eps: float
    solver: dict
    verification: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        if self.feasible:
            return "feasible"
        return "infeasible" if self.solver.get("status") == INFEASIBLE else "numerical-failure"

    def min_X1_eig(self) -> float:
        return min(float(jacobi_eigvalsh(X)[0]) for row in self.X1 for X in row)

    def to_dict(self) -> dict:
        mat = lambda rows: [[M.tolist() for M in row] for row in rows]
        return {
            "name": self.name,
            "index": self.index,
            "method": self.method,
            "feasible": self.feasible,
            "status": self.status,
            "rho": _num(self.rho),
            "mu": _num(self.mu),
            "X1": mat(self.X1),
            "X3": mat(self.X3),
            "X4": mat(self.X4),
            "K": mat(self.K),
            "omega_bounds": list(self.omega_bounds),
            "lambda_bounds": list(self.lambda_bounds),
            "delta": self.delta,
            "reduce": self.reduce,
            "interconnect_eps": self.interconnect_eps,
            "solver": {k: _num(v) for k, v in self.solver.items()},
            "verification": self.verification,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisResult":
        mat = lambda rows: [[np.array(M, dtype=float) for M in row] for row in rows]
        return cls(
            name=d["name"], index=int(d["index"]), method=d["method"], feasible=bool(d["feasible"]),
            rho=_unnum(d["rho"]), mu=_unnum(d["mu"]),
            X1=mat(d["X1"]), X3=mat(d["X3"]), X4=mat(d["X4"]), K=mat(d["K"]),
            omega_bounds=tuple(d["omega_bounds"]), lambda_bounds=tuple(d["lambda_bounds"]),
            delta=float(d["delta"]), reduce=bool(d["reduce"]),
            interconnect_eps=float(d["interconnect_eps"]),
            solver={k: _unnum(v) for k, v in d.get("solver", {}).items()},
            verification=d.get("verification", {}),
        )


def _num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _unnum(v):
    if isinstance(v, str) and v in ("nan", "inf", "-inf"):
        return float(v)
    return v


# -- synthesis -----------------------------------------------------------------


def _catalog(sub: SubsystemModel, method: str) -> lmi.DecisionVarCatalog:
    return lmi.DecisionVarCatalog.for_subsystem(sub, method)


def relaxed_instances_for(net: NetworkModel, i: int, cat: lmi.DecisionVarCatalog, delta: float,
                          reduce: bool, interconnect_eps: float, omega=None, lam=None):
    return lmi.subsystem_instances(net, i, cat, delta=delta, interconnect_eps=interconnect_eps,
                                   reduce=reduce, omega=omega, lam=lam)


def synthesize_subsystem(net: NetworkModel, i: int, opts: SynthOptions | None = None) -> SynthesisResult:
    opts = opts or SynthOptions()
    sub = net.subsystems[i]
    cat = _catalog(sub, opts.method)
    delta = opts.delta * max(1.0, sub.data_scale())
    if opts.method == lmi.COROLLARY1:
        omega = lam = None
        omega_used, lam_used = (0.0,) * sub.right_rule_count, (0.0,) * sub.left_rule_count
    else:
        omega, lam = sub.omega_bounds, sub.lambda_bounds
        omega_used, lam_used = tuple(omega), tuple(lam)
    insts = relaxed_instances_for(net, i, cat, delta, opts.reduce, opts.interconnect_eps, omega, lam)
    backend = get_backend(opts.backend)
    prob = vectorize(insts, cat, "minimize-mu", delta=delta, radius=opts.radius,
                     norm_penalty=opts.norm_penalty)
    sol = backend.solve(prob, opts.solver)
    y, worst, min_x1 = _certify(cat, insts, sol.y)
    feasible = _accept(sol, worst, min_x1, y[cat.mu_index])
    mu_min = float(y[cat.mu_index])
    polish = None
    if feasible and opts.polish > 0:
        cap = max(mu_min, 0.0) * (1.0 + opts.polish) ** 2
        prob2 = vectorize(insts, cat, "maximize-margin", delta=delta, radius=opts.radius,
                          norm_penalty=opts.norm_penalty, mu_cap=cap)
        sol2 = backend.solve(prob2, opts.solver)
        y2, worst2, min_x1_2 = _certify(cat, insts, sol2.y)
        ok2 = _accept(sol2, worst2, min_x1_2, y2[cat.mu_index]) and min_x1_2 >= min_x1
        polish = {"status": sol2.status, "iterations": int(sol2.iterations), "accepted": bool(ok2),
                  "rho_slack": opts.polish, "min_X1_eig": float(min_x1_2)}
        if ok2:
            y, worst, min_x1, sol = y2, worst2, min_x1_2, sol2
    mats = cat.extract(y)
    mu = float(mats["mu"])
    solver = {
        "backend": opts.backend,
        "status": sol.status,
        "iterations": int(sol.iterations),
        "objective": float(sol.objective_value),
        "max_block_eig": float(sol.max_block_eig),
        "primal_infeasibility": float(sol.primal_infeasibility),
        "dual_infeasibility": float(sol.dual_infeasibility),
        "relative_gap": float(sol.relative_gap),
        "detail": sol.detail,
        "var_count": int(cat.var_count),
        "instance_count": len(insts),
        "max_instance_eig": float(worst),
        "min_X1_eig": float(min_x1),
        "rho_min": math.sqrt(mu_min) if feasible and mu_min >= 0 else math.nan,
        "radius": opts.radius if opts.radius is not None else "none",
        "norm_penalty": opts.norm_penalty,
        "polish": polish if polish is not None else "off",
    }
    res = SynthesisResult(
        name=sub.name, index=i, method=opts.method, feasible=bool(feasible),
        rho=math.sqrt(max(mu, 0.0)) if feasible else math.nan, mu=mu,
        X1=mats["X1"], X3=mats["X3"], X4=mats["X4"], K=mats["K"],
        omega_bounds=omega_used, lambda_bounds=lam_used, delta=delta, reduce=opts.reduce,
        interconnect_eps=opts.interconnect_eps, solver=solver,
    )
    if feasible:
        res.verification = verify_blended(net, [res], opts.grid_density, opts.check_tol)[0]
    else:
        res.verification = {"passed": False, "skipped": "no certificate"}
    return res


def _certify(cat, insts, y_full):
    y = np.asarray(y_full[:cat.var_count], dtype=float)
    worst = max((max_eig(inst.matrix(y)) for inst in insts), default=-math.inf)
    min_x1 = min(float(jacobi_eigvalsh(X.evaluate(y))[0]) for _, X in cat.sym_blocks())
    return y, worst, min_x1


def _accept(sol, worst: float, min_x1: float, mu: float) -> bool:
    return bool(sol.status != INFEASIBLE and worst < 0.0 and min_x1 > 0.0 and mu >= 0.0)


def synthesize(net: NetworkModel, method: str = lmi.THEOREM1,
               opts: SynthOptions | None = None) -> list[SynthesisResult]:
    """One result per subsystem; a failing subsystem never aborts the others."""
    opts = replace(opts or SynthOptions(), method=method)
    if net.n < 2:
        raise ValueError("synthesis needs a network of at least two subsystems")
    return [synthesize_subsystem(net, i, opts) for i in range(net.n)]


# -- controller ----------------------------------------------------------------


def _blend2(mats: list[list[np.ndarray]], v: np.ndarray, h: np.ndarray) -> np.ndarray:
    out = np.zeros_like(mats[0][0])
    for j, row in enumerate(mats):
        for s, M in enumerate(row):
            w = v[j] * h[s]
            if w:
                out = out + w * M
    return out


def blended_X1(res: SynthesisResult, v: np.ndarray, h: np.ndarray) -> np.ndarray:
    return _blend2(res.X1, v, h)


def evaluate_controller(res: SynthesisResult, sub: SubsystemModel, x: Sequence[float]) -> np.ndarray:
    """``u = (sum v_j h_s K^js) (sum v_j h_s X1^js)^-1 x``."""
    x = np.asarray(x, dtype=float)
    v, h = sub.memberships(x)
    Xb = _blend2(res.X1, v, h)
    Kb = _blend2(res.K, v, h)
    cond = float(np.linalg.cond(Xb))
    if not math.isfinite(cond) or cond > 1e12:
        raise SingularBlendError(cond)
    return Kb @ np.linalg.solve(Xb, x)


# -- verification --------------------------------------------------------------


def simplex_lattice(parts: int, density: int) -> list[np.ndarray]:
    """All weight vectors with entries in {0, 1/density, ..., 1} summing to 1."""
    if parts < 1 or density < 1:
        raise ValueError("parts and density must be positive")
    out = []
    for combo in itertools.combinations_with_replacement(range(parts), density):
        w = np.zeros(parts)
        for c in combo:
            w[c] += 1.0
        out.append(w / density)
    out.sort(key=lambda w: tuple(-w))
    return out


def result_vector(res: SynthesisResult, cat: lmi.DecisionVarCatalog) -> np.ndarray:
    X1 = res.X1
    if cat.method == lmi.COROLLARY1:
        X1 = [[res.X1[0][0]] * cat.r for _ in range(cat.l)]
    return cat.pack({"X1": X1, "X3": res.X3, "X4": res.X4, "K": res.K, "mu": res.mu})


def verify_blended(net: NetworkModel, results: Sequence[SynthesisResult], grid_density: int = 5,
                   tol: float = 1e-6) -> list[dict]:
    """Eigenvalue check of every relaxed instance and of the blended
    pre-relaxation matrix ``sum v_j h_k h_s G^jks`` on a simplex lattice."""
    reports = []
    for res in results:
        i = res.index
        sub = net.subsystems[i]
        cat = _catalog(sub, res.method)
        y = result_vector(res, cat)
        omega = None if res.method == lmi.COROLLARY1 else res.omega_bounds
        lam = None if res.method == lmi.COROLLARY1 else res.lambda_bounds
        insts = relaxed_instances_for(net, i, cat, res.delta, res.reduce, res.interconnect_eps, omega, lam)
        relaxed = [(lmi.label_str(inst.label), max_eig(inst.matrix(y))) for inst in insts]
        worst_relaxed = max(relaxed, key=lambda t: t[1], default=("", -math.inf))

        vs = simplex_lattice(sub.left_rule_count, grid_density)
        hs = simplex_lattice(sub.right_rule_count, grid_density)
        worst_blend = (-math.inf, None)
        samples = 0
        for alpha in sorted(net.peers(i), key=lambda a: net.subsystems[a].name):
            red = lmi.reduction_for(net, i, alpha, res.interconnect_eps, res.reduce)
            gam = {}
            for j in range(sub.left_rule_count):
                for k in range(sub.right_rule_count):
                    for s in range(sub.right_rule_count):
                        if res.method == lmi.COROLLARY1:
                            inst = lmi.assemble_T(net, cat, i, alpha, j, k, s, red, 0.0)
                        else:
                            inst = lmi.assemble_gamma(net, cat, i, alpha, j, k, s, omega, lam, red, 0.0)
                        gam[j, k, s] = inst.matrix(y)
            for v in vs:
                for h in hs:
                    M = sum(v[j] * h[k] * h[s] * G for (j, k, s), G in gam.items())
                    e = max_eig(M)
                    samples += 1
                    if e > worst_blend[0]:
                        worst_blend = (e, {"alpha": net.subsystems[alpha].name,
                                           "v": [float(t) for t in v], "h": [float(t) for t in h]})
        reports.append({
            "subsystem": res.name,
            "grid_density": grid_density,
            "tol": tol,
            "relaxed_count": len(relaxed),
            "relaxed_max_eig": float(worst_relaxed[1]),
            "relaxed_worst": worst_relaxed[0],
            "blend_samples": samples,
            "blend_max_eig": float(worst_blend[0]),
            "blend_worst": worst_blend[1],
            "min_X1_eig": res.min_X1_eig(),
            "passed": bool(worst_relaxed[1] <= tol and worst_blend[0] <= tol and res.min_X1_eig() > 0),
        })
    return reports


def replay_corollary(net: NetworkModel, res: SynthesisResult) -> float:
    """Largest entry-wise difference between the shared-X1 instances at the
    corollary certificate and the non-quadratic instances (zero bounds, every
    X1^js set to the shared X1) at the same certificate."""
    if res.method != lmi.COROLLARY1:
        raise ValueError("replay needs a corollary1 result")
    i = res.index
    sub = net.subsystems[i]
    cat_c = _catalog(sub, lmi.COROLLARY1)
    cat_t = _catalog(sub, lmi.THEOREM1)
    y_c = result_vector(res, cat_c)
    shared = res.X1[0][0]
    y_t = cat_t.pack({"X1": [[shared] * cat_t.r for _ in range(cat_t.l)], "X3": res.X3, "X4": res.X4,
                      "K": res.K, "mu": res.mu})
    zeros_r, zeros_l = [0.0] * sub.right_rule_count, [0.0] * sub.left_rule_count
    a = relaxed_instances_for(net, i, cat_c, res.delta, res.reduce, res.interconnect_eps)
    b = relaxed_instances_for(net, i, cat_t, res.delta, res.reduce, res.interconnect_eps, zeros_r, zeros_l)
    if [x.label[:5] for x in a] != [x.label[:5] for x in b]:
        raise AssertionError("instance enumerations differ")
    return max((float(np.max(np.abs(p.matrix(y_c) - q.matrix(y_t)))) for p, q in zip(a, b)), default=0.0)


# -- files -----------------------------------------------------------------------


def results_to_dict(results: Sequence[SynthesisResult]) -> dict:
    return {"format": RESULT_FORMAT, "version": 1,
            "method": results[0].method if results else None,
            "subsystems": [r.to_dict() for r in results]}


def results_from_dict(doc: dict) -> list[SynthesisResult]:
    if doc.get("format") != RESULT_FORMAT:
        raise ValueError(f"not a result file (format {doc.get('format')!r})")
    return [SynthesisResult.from_dict(d) for d in doc["subsystems"]]


def save_results(results: Sequence[SynthesisResult], path: str | Path) -> None:
    Path(path).write_text(json.dumps(results_to_dict(results), indent=2) + "\n")


def load_results(path: str | Path) -> list[SynthesisResult]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return results_from_dict(doc)
