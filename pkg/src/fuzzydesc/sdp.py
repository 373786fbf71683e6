"""Small dense SDPs in LMI form and an embedded primal-dual interior-point solver.

Problem form::

    minimize  c^T y   subject to   C_b + sum_p y_p A_{b,p} <= 0   for every block b

Internally this is the dual of a standard primal SDP with data ``(-C, A, -c)``:
``S_b = -C_b - sum_p y_p A_{b,p}``.  The solver is an infeasible-start
path-following method with the HKM search direction and a Mehrotra
predictor-corrector.  Infeasibility of the LMI system is detected through a
Farkas certificate ``X >= 0``, ``<A_p, X> ~ 0``, ``<C, X> > 0`` built from
the primal iterate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .linalg import jacobi_eigvalsh
from .lmi import DecisionVarCatalog, LmiInstance

__all__ = [
    "SdpBlock",
    "SdpProblem",
    "SdpSolution",
    "SolverOptions",
    "CheckReport",
    "OPTIMAL",
    "INFEASIBLE",
    "MAX_ITERATIONS",
    "ILL_CONDITIONED",
    "vectorize",
    "solve",
    "check_solution",
    "write_sdpa",
    "get_backend",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"
ILL_CONDITIONED = "ill-conditioned"


@dataclass
class SdpBlock:
    """``constant + sum_p y_p coeffs[p] <= 0``."""

    constant: np.ndarray
    coeffs: dict[int, np.ndarray]
    label: str = ""

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, y: Sequence[float]) -> np.ndarray:
        out = self.constant.copy()
        for p, c in self.coeffs.items():
            out += y[p] * c
        return out


@dataclass
class SdpProblem:
    var_count: int
    objective: np.ndarray
    blocks: list[SdpBlock]
    psd_var_constraints: list[tuple[tuple[int, ...], int]] = field(default_factory=list)
    var_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        if self.objective.size != self.var_count:
            raise ValueError(f"objective has {self.objective.size} entries, expected {self.var_count}")
        for b in self.blocks:
            for p in b.coeffs:
                if not 0 <= p < self.var_count:
                    raise ValueError(f"block {b.label!r} references unknown variable {p}")


@dataclass
class SdpSolution:
    y: np.ndarray
    status: str
    objective_value: float
    max_block_eig: float
    iterations: int
    primal_infeasibility: float = math.nan
    dual_infeasibility: float = math.nan
    relative_gap: float = math.nan
    detail: str = ""


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    infeas_tol: float = 1e-8
    step_fraction: float = 0.98


def vectorize(instances: Sequence[LmiInstance], catalog: DecisionVarCatalog | None = None,
              objective: str = "minimize-mu", delta: float = 0.0,
              radius: float | None = None, norm_penalty: float = 0.0,
              mu_cap: float | None = None) -> SdpProblem:
    """Stack instances into one problem.

    With a catalog, adds ``-X1 + delta*I <= 0`` for each distinct symmetric
    variable and ``-mu <= 0``.  ``objective`` is ``"minimize-mu"``,
    ``"feasibility"`` or ``"maximize-margin"``.  The last one needs ``mu_cap``:
    it appends a variable ``eta``, asks ``X1 >= (delta + eta) I`` and
    ``mu <= mu_cap``, and maximizes ``eta``.

    A finite ``radius`` bounds the decision vector, ``|y|_2 <= radius``.  With
    ``norm_penalty > 0`` the bound becomes ``|y|_2 <= t <= radius`` for an
    extra trailing variable ``t`` and ``norm_penalty * t`` joins the
    objective; this picks a small-norm certificate when the optimal set is
    unbounded.
    """
    if objective not in ("minimize-mu", "feasibility", "maximize-margin"):
        raise ValueError(f"unknown objective {objective!r}")
    if objective == "maximize-margin" and mu_cap is None:
        raise ValueError("maximize-margin needs mu_cap")
    if catalog is None:
        if objective != "feasibility":
            raise ValueError(f"{objective} needs a catalog")
        m = 1 + max((p for inst in instances for p in inst.coeff_blocks), default=-1)
        names = [f"y{p}" for p in range(m)]
    else:
        m = catalog.var_count
        names = [catalog.name_of(p) for p in range(m)]
    blocks = []
    for inst in instances:
        for p in inst.coeff_blocks:
            if not 0 <= p < m:
                raise ValueError(f"instance {inst.label} references unknown variable {p}")
        C = inst.constant_block + inst.shift * np.eye(inst.dimension)
        blocks.append(SdpBlock(C, dict(inst.coeff_blocks), _label(inst.label)))
    psd = []
    c = np.zeros(m)
    if catalog is not None:
        eta = m if objective == "maximize-margin" else None
        for name, X in catalog.sym_blocks():
            n = X.shape[0]
            coeffs = {p: -a for p, a in sorted(X.coeffs.items())}
            if eta is not None:
                coeffs[eta] = np.eye(n)
            blocks.append(SdpBlock(delta * np.eye(n), coeffs, f"{name} > 0"))
            psd.append((tuple(sorted(X.coeffs)), n))
        blocks.append(SdpBlock(np.zeros((1, 1)), {catalog.mu_index: -np.ones((1, 1))}, "mu >= 0"))
        if objective == "minimize-mu":
            c[catalog.mu_index] = 1.0
        if eta is not None:
            blocks.append(SdpBlock(np.array([[-float(mu_cap)]]), {catalog.mu_index: np.ones((1, 1))},
                                   f"mu <= {mu_cap:.17g}"))
            c = np.append(c, -1.0)
            names.append("eta")
            m += 1
    if radius is not None and m:
        if norm_penalty > 0:
            t = m
            ball = ball_block(m, 1.0)
            coeffs = dict(ball.coeffs)
            coeffs[t] = ball.constant.copy()
            blocks.append(SdpBlock(np.zeros_like(ball.constant), coeffs, "|y| <= t"))
            blocks.append(SdpBlock(np.array([[-float(radius)]]), {t: np.ones((1, 1))}, f"t <= {radius:g}"))
            c = np.append(c, norm_penalty)
            names.append("t")
            m += 1
        else:
            blocks.append(ball_block(m, radius))
    return SdpProblem(m, c, blocks, psd, names)


def ball_block(m: int, radius: float) -> SdpBlock:
    """``|y|_2 <= radius`` as an (m+1)-dimensional LMI block (Schur complement)."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    C = -radius * np.eye(m + 1)
    coeffs = {}
    for p in range(m):
        A = np.zeros((m + 1, m + 1))
        A[p, m] = A[m, p] = 1.0
        coeffs[p] = A
    return SdpBlock(C, coeffs, f"|y| <= {radius:g}")


def _label(label) -> str:
    if isinstance(label, tuple) and len(label) == 6:
        i, a, j, k, s, kind = label
        return f"{kind}(i={i + 1},alpha={a + 1},j={j + 1},k={k + 1},s={s + 1})"
    return str(label)


# -- embedded interior-point method ------------------------------------------


def _nt_scaling(X: np.ndarray, S: np.ndarray):
    """Nesterov-Todd scaling ``W = G G^T`` with ``W S W = X``.

    Returns ``(G, G^-1, d)`` where ``G^-1 X G^-T = G^T S G = diag(d)``.
    """
    Lx = np.linalg.cholesky(X)
    Ls = np.linalg.cholesky(S)
    U, dv, Vt = np.linalg.svd(Ls.T @ Lx)
    if dv[-1] <= 0:
        raise np.linalg.LinAlgError("degenerate scaling")
    r = np.sqrt(dv)
    G = (Lx @ Vt.T) / r
    Gi = (U.T @ Ls.T) / r[:, None]
    return G, Gi, dv


def _diag_step(dv: np.ndarray, T: np.ndarray) -> float:
    """Largest t with diag(dv) + t T >= 0."""
    r = 1.0 / np.sqrt(dv)
    lam = np.linalg.eigvalsh(r[:, None] * T * r[None, :])[0]
    return math.inf if lam >= 0 else -1.0 / lam


_IDENTITY = object()
log = logging.getLogger(__name__)


def _presolve(p: SdpProblem):
    """Restrict ``y`` to the row space of the coefficient operator.

    Directions along which no block changes (unused variables, or variables
    entering only through fixed combinations) make the Schur matrix singular.
    Returns ``(basis, problem)``; ``basis`` is ``_IDENTITY`` when nothing is
    removed and ``None`` when the objective is unbounded along a null direction.
    """
    m = p.var_count
    cols = np.zeros((sum(b.dim * b.dim for b in p.blocks), m))
    r0 = 0
    for blk in p.blocks:
        n2 = blk.dim * blk.dim
        for k, c in blk.coeffs.items():
            cols[r0:r0 + n2, k] = c.reshape(-1)
        r0 += n2
    _, sv, vt = np.linalg.svd(cols, full_matrices=cols.shape[0] < m)
    tol = max(cols.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    if rank == m:
        return _IDENTITY, p
    V = vt[:rank].T
    null = vt[rank:].T
    if float(np.linalg.norm(null.T @ p.objective)) > 1e-12 * max(1.0, float(np.linalg.norm(p.objective))):
        return None, p
    blocks = []
    for blk in p.blocks:
        coeffs = {}
        for q in range(rank):
            acc = np.zeros_like(blk.constant)
            for k, c in blk.coeffs.items():
                if V[k, q] != 0.0:
                    acc += V[k, q] * c
            if np.any(acc):
                coeffs[q] = acc
        blocks.append(SdpBlock(blk.constant, coeffs, blk.label))
    return V, SdpProblem(rank, V.T @ p.objective, blocks)


class _Data:
    def __init__(self, p: SdpProblem):
        self.m = p.var_count
        self.C, self.A, self.idx = [], [], []
        for blk in p.blocks:
            keys = sorted(blk.coeffs)
            n = blk.dim
            self.C.append(-blk.constant)
            self.idx.append(np.array(keys, dtype=int))
            self.A.append(np.array([blk.coeffs[k] for k in keys]).reshape(len(keys), n, n))
        self.b = -p.objective
        self.dims = [c.shape[0] for c in self.C]
        self.N = sum(self.dims)

    def opA(self, X: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.m)
        for Xb, Ab, ib in zip(X, self.A, self.idx):
            if ib.size:
                out[ib] += np.einsum("pij,ij->p", Ab, Xb)
        return out

    def opAt(self, y: np.ndarray) -> list[np.ndarray]:
        return [np.einsum("p,pij->ij", y[ib], Ab) if ib.size else np.zeros((n, n))
                for Ab, ib, n in zip(self.A, self.idx, self.dims)]


class _SchurSolver:
    """Cholesky of the Schur matrix with escalating diagonal regularization.

    When regularization was needed, solves are refined against the exact
    matrix so the search direction keeps satisfying the linearized equations.
    """

    def __init__(self, M: np.ndarray):
        self.M = M
        dg = np.diag(M).copy()
        dg[dg <= 0] = 1.0
        for eps in (0.0, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6):
            try:
                self.L = np.linalg.cholesky(M + eps * np.diag(dg) if eps else M)
                self.eps = eps
                return
            except np.linalg.LinAlgError:
                continue
        raise np.linalg.LinAlgError("Schur complement not positive definite")

    def _raw(self, h):
        return np.linalg.solve(self.L.T, np.linalg.solve(self.L, h))

    def __call__(self, h: np.ndarray) -> np.ndarray:
        x = self._raw(h)
        hn = float(np.linalg.norm(h)) or 1.0
        best, best_r = x, float(np.linalg.norm(h - self.M @ x))
        for _ in range(10):
            if best_r <= 1e-15 * hn:
                break
            x = best + self._raw(h - self.M @ best)
            r = float(np.linalg.norm(h - self.M @ x))
            if r >= 0.5 * best_r:
                break
            best, best_r = x, r
        return best


def _inner(X: list[np.ndarray], S: list[np.ndarray]) -> float:
    return float(sum(np.sum(a * b) for a, b in zip(X, S)))


def _fro(X: list[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(a * a)) for a in X))


def _block_max_eig(p: SdpProblem, y: np.ndarray) -> float:
    if not p.blocks:
        return -math.inf
    return max(float(np.linalg.eigvalsh(b.evaluate(y))[-1]) for b in p.blocks)


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve with the embedded interior-point method. Never raises on infeasibility."""
    opts = opts or SolverOptions()
    m = p.var_count
    if not p.blocks or m == 0:
        y0 = np.zeros(m)
        if np.any(p.objective != 0):
            return SdpSolution(y0, ILL_CONDITIONED, math.nan, _block_max_eig(p, y0), 0,
                               detail="objective depends on an unconstrained variable (unbounded)")
        worst = _block_max_eig(p, y0)
        status = OPTIMAL if worst <= opts.feas_tol else INFEASIBLE
        return SdpSolution(y0, status, 0.0, worst, 0, 0.0, 0.0, 0.0)
    basis, reduced = _presolve(p)
    if basis is None:
        y0 = np.zeros(m)
        return SdpSolution(y0, ILL_CONDITIONED, math.nan, _block_max_eig(p, y0), 0,
                           detail="objective has a component along a direction no block constrains (unbounded)")
    d = _Data(reduced)

    def finish(z, status, it, pinf, dinf, gap, detail=""):
        y_full = z.copy() if basis is _IDENTITY else basis @ z
        obj = float(p.objective @ y_full)
        return SdpSolution(y_full, status, obj, _block_max_eig(p, y_full), it, pinf, dinf, gap, detail)

    normb = 1.0 + float(np.linalg.norm(d.b))
    normC = 1.0 + _fro(d.C)
    X, S = [], []
    for Cb, Ab, ib, n in zip(d.C, d.A, d.idx, d.dims):
        anorm = np.sqrt(np.einsum("pij,pij->p", Ab, Ab)) if Ab.shape[0] else np.zeros(0)
        xi = max(10.0, math.sqrt(n))
        if anorm.size:
            xi = max(xi, n * float(np.max((1.0 + np.abs(d.b[ib])) / (1.0 + anorm))))
        eta = max(10.0, math.sqrt(n), (1.0 + max(float(anorm.max(initial=0.0)), float(np.linalg.norm(Cb)))) / math.sqrt(n))
        X.append(xi * np.eye(n))
        S.append(eta * np.eye(n))
    y = np.zeros(d.m)

    pinf = dinf = relgap = math.inf
    best = (math.inf, None)

    def stalled(status, it, detail):
        merit, state = best
        if state is None:
            return finish(y, status, it, pinf, dinf, relgap, detail)
        by, bit, bp, bd, bg = state
        if merit <= 1.0:
            return finish(by, OPTIMAL, bit, bp, bd, bg)
        return finish(by, status, bit, bp, bd, bg,
                      f"{detail}; best iterate {bit} kept (pinf {bp:.1e}, dinf {bd:.1e}, gap {bg:.1e})")

    for it in range(opts.max_iter + 1):
        AX = d.opA(X)
        rp = d.b - AX
        Aty = d.opAt(y)
        Rd = [Cb - Sb - Ab for Cb, Sb, Ab in zip(d.C, S, Aty)]
        pobj = _inner(d.C, X)
        dobj = float(d.b @ y)
        gap = _inner(X, S)
        pinf = float(np.linalg.norm(rp)) / normb
        dinf = _fro(Rd) / normC
        relgap = gap / (1.0 + abs(pobj) + abs(dobj))
        log.debug("it %3d pobj %.6e dobj %.6e gap %.2e pinf %.1e dinf %.1e", it, pobj, dobj, gap, pinf, dinf)
        if pinf <= opts.feas_tol and dinf <= opts.feas_tol and relgap <= opts.gap_tol:
            return finish(y, OPTIMAL, it, pinf, dinf, relgap)
        merit = max(pinf / opts.feas_tol, dinf / opts.feas_tol, relgap / opts.gap_tol)
        if merit < best[0]:
            best = (merit, (y.copy(), it, pinf, dinf, relgap))
        # Farkas certificate for infeasibility of the LMI system:
        # X >= 0 with A(X) = 0 and <C, X> < 0 (C here is the negated constant).
        if pobj < 0:
            if float(np.linalg.norm(AX)) / -pobj <= opts.infeas_tol:
                return finish(y, INFEASIBLE, it, pinf, dinf, relgap,
                              "Farkas certificate: <A_p, X> ~ 0 with <C, X> > 0")
        if it == opts.max_iter:
            break
        mu = gap / d.N
        try:
            scal = [_nt_scaling(Xb, Sb) for Xb, Sb in zip(X, S)]
            M = np.zeros((d.m, d.m))
            for (Gb, _, _), Ab, ib in zip(scal, d.A, d.idx):
                if ib.size == 0:
                    continue
                # NT Schur entries tr(A_p W A_q W) as a Gram matrix of G^T A_p G
                P = (Gb.T @ Ab @ Gb).reshape(ib.size, -1)
                M[np.ix_(ib, ib)] += P @ P.T
            schur = _SchurSolver(M)
        except np.linalg.LinAlgError:
            return stalled(ILL_CONDITIONED, it, "Schur complement not positive definite")

        def direction(R_list):
            # scaled complementarity: D o (dX~ + dS~) = R, solved entrywise
            H = [2.0 * Rb / (dv[:, None] + dv[None, :]) for Rb, (_, _, dv) in zip(R_list, scal)]
            GHG = [Gb @ Hb @ Gb.T for Hb, (Gb, _, _) in zip(H, scal)]
            WRW = [Gb @ (Gb.T @ Rb @ Gb) @ Gb.T for Rb, (Gb, _, _) in zip(Rd, scal)]
            h = rp - d.opA([a - b for a, b in zip(GHG, WRW)])
            dy = schur(h)
            dS = [Rb - Ab for Rb, Ab in zip(Rd, d.opAt(dy))]
            dSt = [Gb.T @ dSb @ Gb for dSb, (Gb, _, _) in zip(dS, scal)]
            dSt = [0.5 * (T + T.T) for T in dSt]
            dXt = [Hb - T for Hb, T in zip(H, dSt)]
            return dXt, dy, dSt

        def steps(dXt, dSt):
            ap = min([1.0] + [_diag_step(dv, T) for T, (_, _, dv) in zip(dXt, scal)])
            ad = min([1.0] + [_diag_step(dv, T) for T, (_, _, dv) in zip(dSt, scal)])
            return ap, ad

        try:
            R0 = [-np.diag(dv * dv) for (_, _, dv) in scal]
            dXa, dya, dSa = direction(R0)
            ap, ad = steps(dXa, dSa)
            gap_a = sum(float(np.sum((np.diag(dv) + ap * A1) * (np.diag(dv) + ad * B1)))
                        for A1, B1, (_, _, dv) in zip(dXa, dSa, scal))
            sigma = min(1.0, max(0.0, gap_a / gap)) ** 3
            R1 = []
            for A1, B1, (_, _, dv) in zip(dXa, dSa, scal):
                cross = A1 @ B1
                R1.append(sigma * mu * np.eye(dv.size) - np.diag(dv * dv) - 0.5 * (cross + cross.T))
            dXt, dy, dSt = direction(R1)
            ap, ad = steps(dXt, dSt)
        except np.linalg.LinAlgError:
            return stalled(ILL_CONDITIONED, it, "iterate lost positive definiteness")
        dX = [Gb @ T @ Gb.T for T, (Gb, _, _) in zip(dXt, scal)]
        dS = [Gi.T @ T @ Gi for T, (_, Gi, _) in zip(dSt, scal)]
        tau = opts.step_fraction
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)
        log.debug("       sigma %.2e step primal %.2e dual %.2e", sigma, ap, ad)
        X = [Xb + ap * D for Xb, D in zip(X, dX)]
        X = [0.5 * (Xb + Xb.T) for Xb in X]
        y = y + ad * dy
        S = [Sb + ad * D for Sb, D in zip(S, dS)]
        S = [0.5 * (Sb + Sb.T) for Sb in S]
        if not all(np.all(np.isfinite(Xb)) for Xb in X) or not np.all(np.isfinite(y)):
            return stalled(ILL_CONDITIONED, it, "non-finite iterate")
        if max(ap, ad) < 1e-8:
            return stalled(ILL_CONDITIONED, it, "no progress (step lengths below 1e-8)")
    return stalled(MAX_ITERATIONS, opts.max_iter, "iteration cap reached")


# -- independent verification ------------------------------------------------


@dataclass
class CheckReport:
    block_max_eigs: list[tuple[str, float]]
    objective: float
    tol: float

    @property
    def max_eig(self) -> float:
        return max((e for _, e in self.block_max_eigs), default=-math.inf)

    @property
    def passed(self) -> bool:
        return self.max_eig <= self.tol

    def violations(self) -> list[tuple[str, float]]:
        return [(lab, e) for lab, e in self.block_max_eigs if e > self.tol]


def check_solution(p: SdpProblem, y: Sequence[float], tol: float = 1e-7) -> CheckReport:
    """Re-evaluate every block at ``y`` with the Jacobi eigensolver."""
    y = np.asarray(y, dtype=float)
    if y.size != p.var_count:
        raise ValueError(f"y has {y.size} entries, expected {p.var_count}")
    eigs = [(b.label, float(jacobi_eigvalsh(b.evaluate(y))[-1])) for b in p.blocks]
    return CheckReport(eigs, float(p.objective @ y), tol)


# -- plain-text dump -----------------------------------------------------------


def write_sdpa(p: SdpProblem, path: str | Path) -> None:
    """Sparse SDPA format: ``min c^T y  s.t.  sum_p y_p F_p - F_0 >= 0``
    with ``F_0 = C_b`` and ``F_p = -A_{b,p}`` (upper triangles, 1-based)."""
    lines = [f'"LMI problem: min c^T y s.t. C_b + sum y_p A_bp <= 0"',
             str(p.var_count), str(len(p.blocks)),
             " ".join(str(b.dim) for b in p.blocks) if p.blocks else "0",
             " ".join(repr(float(v)) for v in p.objective) if p.var_count else ""]
    for bi, blk in enumerate(p.blocks, start=1):
        mats = [(0, blk.constant)] + [(k + 1, -c) for k, c in sorted(blk.coeffs.items())]
        for mat, M in mats:
            n = M.shape[0]
            for a in range(n):
                for b in range(a, n):
                    if M[a, b] != 0.0:
                        lines.append(f"{mat} {bi} {a + 1} {b + 1} {float(M[a, b])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


# -- backends ------------------------------------------------------------------


class Backend(Protocol):
    name: str

    def solve(self, p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution: ...


class EmbeddedBackend:
    name = "embedded"

    def solve(self, p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
        return solve(p, opts)


class CvxpyBackend:
    """External conic solver via cvxpy (optional dependency)."""

    name = "cvxpy"

    def __init__(self, solver: str | None = None):
        self.solver = solver

    def solve(self, p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
        import cvxpy as cp

        y = cp.Variable(p.var_count) if p.var_count else None
        cons = []
        for blk in p.blocks:
            n = blk.dim
            if not blk.coeffs:
                if np.max(np.linalg.eigvalsh(blk.constant)) > 0:
                    return SdpSolution(np.zeros(p.var_count), INFEASIBLE, math.nan, math.nan, 0,
                                       detail=f"constant block {blk.label} is not NSD")
                continue
            idx = sorted(blk.coeffs)
            stack = np.array([blk.coeffs[k].reshape(-1) for k in idx])
            lin = cp.reshape(stack.T @ y[idx], (n, n), order="C")
            expr = blk.constant + lin
            cons.append((expr + expr.T) / 2 << 0)
        obj = cp.Minimize(p.objective @ y) if y is not None else cp.Minimize(0)
        prob = cp.Problem(obj, cons)
        opts = opts or SolverOptions()
        solver = self.solver
        if solver is None and "CLARABEL" in cp.installed_solvers():
            solver = "CLARABEL"
        kwargs = {}
        if solver == "CLARABEL":
            kwargs = dict(tol_feas=opts.feas_tol, tol_gap_abs=opts.gap_tol, tol_gap_rel=opts.gap_tol,
                          max_iter=opts.max_iter)
        try:
            prob.solve(solver=solver, **kwargs)
        except cp.error.SolverError as exc:
            return SdpSolution(np.zeros(p.var_count), ILL_CONDITIONED, math.nan, math.nan, 0, detail=str(exc))
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            return SdpSolution(np.zeros(p.var_count), INFEASIBLE, math.nan, math.nan, 0, detail=prob.status)
        if y is None or y.value is None:
            return SdpSolution(np.zeros(p.var_count), ILL_CONDITIONED, math.nan, math.nan, 0, detail=prob.status)
        yv = np.asarray(y.value, dtype=float)
        status = OPTIMAL if prob.status == "optimal" else ILL_CONDITIONED
        return SdpSolution(yv, status, float(p.objective @ yv), _block_max_eig(p, yv), 0, detail=prob.status)


def get_backend(name: str = "embedded") -> Backend:
    if name == "embedded":
        return EmbeddedBackend()
    if name == "cvxpy":
        return CvxpyBackend()
    raise ValueError(f"unknown SDP backend {name!r}")
