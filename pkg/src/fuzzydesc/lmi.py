"""Affine block LMIs for non-PDC decentralized synthesis.

For subsystem ``i``, peer ``alpha`` and rule indices ``(j, k, s)`` the
Theorem-1 style block matrix is (lower triangle, block sizes n_i, n_i, q, n_i)::

    [ G11                                      ]
    [ A^k X1^js + B^k K^js - E^j X3^ks + X4^ksT   -E^j X4^ks - (E^j X4^ks)^T   ]
    [ 0              (n-1) (F^k V)^T            -mu (n-1)(2n-3) (F^k V)^T F^k V ]
    [ X1^js          0                          0                 -I            ]

    G11 = X3^ks + X3^ksT - sum_t w_t X1^jt - sum_t l_t X1^ts

where ``w``/``l`` are the lower bounds on the right/left membership
derivatives and ``V`` is an orthonormal basis of the coupling row space.
The shared-X1 variant drops the derivative term.

Indices in this module are 0-based; labels written to disk are 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import NetworkModel

__all__ = [
    "Affine",
    "DecisionVarCatalog",
    "LmiInstance",
    "InterconnectReduction",
    "THEOREM1",
    "COROLLARY1",
    "METHODS",
    "reduce_interconnect",
    "identity_reduction",
    "assemble_gamma",
    "assemble_T",
    "enumerate_relaxed",
    "subsystem_instances",
    "dump_instances",
]

THEOREM1 = "theorem1"
COROLLARY1 = "corollary1"
METHODS = (THEOREM1, COROLLARY1)


class Affine:
    """Matrix-valued affine expression ``const + sum_p y[p] * coeffs[p]``."""

    __slots__ = ("const", "coeffs")
    __array_ufunc__ = None  # make ``ndarray @ Affine`` defer to __rmatmul__

    def __init__(self, const: np.ndarray, coeffs: dict[int, np.ndarray] | None = None):
        self.const = np.asarray(const, dtype=float)
        self.coeffs = coeffs if coeffs is not None else {}

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @classmethod
    def constant(cls, m) -> "Affine":
        return cls(np.array(m, dtype=float))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Affine":
        return cls(np.zeros((rows, cols)))

    def _combine(self, other: "Affine", sign: float) -> "Affine":
        if not isinstance(other, Affine):
            other = Affine.constant(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        coeffs = dict(self.coeffs)
        for p, c in other.coeffs.items():
            coeffs[p] = coeffs[p] + sign * c if p in coeffs else sign * c
        return Affine(self.const + sign * other.const, coeffs)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, a: float) -> "Affine":
        a = float(a)
        return Affine(self.const * a, {p: c * a for p, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __matmul__(self, m: np.ndarray) -> "Affine":
        m = np.asarray(m, dtype=float)
        return Affine(self.const @ m, {p: c @ m for p, c in self.coeffs.items()})

    def __rmatmul__(self, m: np.ndarray) -> "Affine":
        m = np.asarray(m, dtype=float)
        return Affine(m @ self.const, {p: m @ c for p, c in self.coeffs.items()})

    @property
    def T(self) -> "Affine":
        return Affine(self.const.T.copy(), {p: c.T.copy() for p, c in self.coeffs.items()})

    def sym(self) -> "Affine":
        """``self + self^T``, exactly symmetric."""
        return self + self.T

    def evaluate(self, y: Sequence[float]) -> np.ndarray:
        out = self.const.copy()
        for p, c in self.coeffs.items():
            if y[p] != 0.0:
                out += y[p] * c
        return out

    @staticmethod
    def block(rows: Sequence[Sequence["Affine | None"]], row_sizes: Sequence[int],
              col_sizes: Sequence[int]) -> "Affine":
        R, C = sum(row_sizes), sum(col_sizes)
        const = np.zeros((R, C))
        coeffs: dict[int, np.ndarray] = {}
        r0 = 0
        for bi, row in enumerate(rows):
            c0 = 0
            for bj, blk in enumerate(row):
                rs, cs = row_sizes[bi], col_sizes[bj]
                if blk is not None and rs and cs:
                    if blk.shape != (rs, cs):
                        raise ValueError(f"block ({bi},{bj}) has shape {blk.shape}, expected {(rs, cs)}")
                    const[r0:r0 + rs, c0:c0 + cs] = blk.const
                    for p, c in blk.coeffs.items():
                        if p not in coeffs:
                            coeffs[p] = np.zeros((R, C))
                        coeffs[p][r0:r0 + rs, c0:c0 + cs] = c
                c0 += cs
            r0 += row_sizes[bi]
        return Affine(const, coeffs)


@dataclass
class _VarEntry:
    name: str
    row: int
    col: int


class DecisionVarCatalog:
    """Decision variables of one subsystem problem.

    ``X1[j][s]`` symmetric n x n (one shared matrix in corollary mode),
    ``X3[k][s]`` / ``X4[k][s]`` full n x n, ``K[j][s]`` m x n, and ``mu``.
    Symmetric matrices use upper-triangle indexing so symmetry is structural.
    """

    def __init__(self, state_dim: int, input_dim: int, l: int, r: int, method: str = THEOREM1):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        self.state_dim, self.input_dim, self.l, self.r = state_dim, input_dim, l, r
        self.entries: list[_VarEntry] = []
        self.symmetric: dict[str, list[int]] = {}
        n, m = state_dim, input_dim
        if method == COROLLARY1:
            shared = self._sym("X1", n)
            self.X1 = [[shared for _ in range(r)] for _ in range(l)]
        else:
            self.X1 = [[self._sym(f"X1[{j + 1}][{s + 1}]", n) for s in range(r)] for j in range(l)]
        self.X3 = [[self._full(f"X3[{k + 1}][{s + 1}]", n, n) for s in range(r)] for k in range(r)]
        self.X4 = [[self._full(f"X4[{k + 1}][{s + 1}]", n, n) for s in range(r)] for k in range(r)]
        self.K = [[self._full(f"K[{j + 1}][{s + 1}]", m, n) for s in range(r)] for j in range(l)]
        mu = self._new("mu", 0, 0)
        self.mu_index = mu
        self.mu = Affine(np.zeros((1, 1)), {mu: np.ones((1, 1))})

    @classmethod
    def for_subsystem(cls, sub, method: str = THEOREM1) -> "DecisionVarCatalog":
        return cls(sub.state_dim, sub.input_dim, sub.left_rule_count, sub.right_rule_count, method)

    @property
    def var_count(self) -> int:
        return len(self.entries)

    def _new(self, name: str, row: int, col: int) -> int:
        self.entries.append(_VarEntry(name, row, col))
        return len(self.entries) - 1

    def _sym(self, name: str, n: int) -> Affine:
        coeffs = {}
        idx = []
        for a in range(n):
            for b in range(a, n):
                p = self._new(name, a, b)
                idx.append(p)
                c = np.zeros((n, n))
                c[a, b] = c[b, a] = 1.0
                coeffs[p] = c
        self.symmetric[name] = idx
        return Affine(np.zeros((n, n)), coeffs)

    def _full(self, name: str, rows: int, cols: int) -> Affine:
        coeffs = {}
        for a in range(rows):
            for b in range(cols):
                p = self._new(name, a, b)
                c = np.zeros((rows, cols))
                c[a, b] = 1.0
                coeffs[p] = c
        return Affine(np.zeros((rows, cols)), coeffs)

    def name_of(self, p: int) -> str:
        e = self.entries[p]
        return f"{e.name}({e.row + 1},{e.col + 1})" if e.name != "mu" else "mu"

    def sym_blocks(self) -> list[tuple[str, Affine]]:
        """Distinct symmetric variables (targets of X1 > 0 constraints)."""
        seen, out = set(), []
        for row in self.X1:
            for X in row:
                if id(X) not in seen:
                    seen.add(id(X))
                    name = self.entries[min(X.coeffs)].name
                    out.append((name, X))
        return out

    def extract(self, y: Sequence[float]) -> dict:
        """Solved matrices as nested lists of ndarrays, indexed like the catalog."""
        ev = lambda X: X.evaluate(y)
        return {
            "X1": [[ev(X) for X in row] for row in self.X1],
            "X3": [[ev(X) for X in row] for row in self.X3],
            "X4": [[ev(X) for X in row] for row in self.X4],
            "K": [[ev(X) for X in row] for row in self.K],
            "mu": float(y[self.mu_index]),
        }

    def pack(self, mats: dict) -> np.ndarray:
        """Inverse of :meth:`extract`: build the decision vector from matrices."""
        y = np.zeros(self.var_count)

        def put(X: Affine, M):
            M = np.asarray(M, dtype=float)
            for p, c in X.coeffs.items():
                a, b = self.entries[p].row, self.entries[p].col
                y[p] = M[a, b]

        for name in ("X1", "X3", "X4", "K"):
            for row_vars, row_vals in zip(getattr(self, name), mats[name]):
                for X, M in zip(row_vars, row_vals):
                    put(X, M)
        y[self.mu_index] = mats["mu"]
        return y


@dataclass(frozen=True)
class InterconnectReduction:
    """Orthonormal basis ``V`` (n_alpha x q) replacing ``F`` by ``F V``."""

    basis: np.ndarray
    eps: float = 0.0  # extra -eps*I on the coupling block (debug fallback)

    @property
    def q(self) -> int:
        return self.basis.shape[1]


def reduce_interconnect(F_list: Sequence[np.ndarray], rtol: float = 1e-10) -> InterconnectReduction:
    """Basis of the row space of the stacked coupling matrices."""
    if not F_list:
        raise ValueError("need at least one coupling matrix")
    shapes = {np.shape(F) for F in F_list}
    if len(shapes) != 1:
        raise ValueError(f"coupling matrices have different shapes: {sorted(shapes)}")
    stacked = np.vstack([np.asarray(F, dtype=float) for F in F_list])
    n_alpha = stacked.shape[1]
    _, sv, vt = np.linalg.svd(stacked)
    if sv.size == 0 or sv[0] == 0.0:
        return InterconnectReduction(np.zeros((n_alpha, 0)))
    q = int(np.sum(sv > rtol * max(stacked.shape) * sv[0]))
    V = vt[:q].T.copy()
    for c in range(q):
        if V[np.argmax(np.abs(V[:, c])), c] < 0:
            V[:, c] = -V[:, c]
    return InterconnectReduction(V)


def identity_reduction(n_alpha: int, eps: float = 0.0) -> InterconnectReduction:
    return InterconnectReduction(np.eye(n_alpha), eps)


@dataclass
class LmiInstance:
    """``constant_block + sum_p y_p coeff_blocks[p] + shift*I <= 0``."""

    label: tuple
    constant_block: np.ndarray
    coeff_blocks: dict[int, np.ndarray]
    shift: float = 0.0
    block_sizes: tuple[int, ...] = field(default=())

    @property
    def dimension(self) -> int:
        return self.constant_block.shape[0]

    @classmethod
    def from_affine(cls, label, expr: Affine, shift: float, block_sizes=()) -> "LmiInstance":
        coeffs = {p: c for p, c in sorted(expr.coeffs.items()) if np.any(c)}
        return cls(label, expr.const, coeffs, shift, tuple(block_sizes))

    def matrix(self, y: Sequence[float]) -> np.ndarray:
        out = self.constant_block.copy()
        for p, c in self.coeff_blocks.items():
            out += y[p] * c
        return out

    def combine(self, other: "LmiInstance", a: float, b: float, label) -> "LmiInstance":
        """``a*self + b*other`` on the affine representation (shift kept)."""
        coeffs = {p: a * c for p, c in self.coeff_blocks.items()}
        for p, c in other.coeff_blocks.items():
            coeffs[p] = coeffs[p] + b * c if p in coeffs else b * c
        return LmiInstance(label, a * self.constant_block + b * other.constant_block,
                           dict(sorted(coeffs.items())), self.shift, self.block_sizes)


def _check_indices(net: NetworkModel, i: int, alpha: int, j: int, k: int, s: int):
    if not (0 <= i < net.n and 0 <= alpha < net.n):
        raise IndexError(f"subsystem indices ({i}, {alpha}) out of range for n={net.n}")
    if i == alpha:
        raise IndexError("alpha must differ from i")
    sub = net.subsystems[i]
    if not 0 <= j < sub.left_rule_count:
        raise IndexError(f"left rule index {j} out of range (l={sub.left_rule_count})")
    if not (0 <= k < sub.right_rule_count and 0 <= s < sub.right_rule_count):
        raise IndexError(f"right rule indices ({k}, {s}) out of range (r={sub.right_rule_count})")


def _assemble(net, cat, i, alpha, j, k, s, omega, lam, reduction, delta, kind) -> LmiInstance:
    _check_indices(net, i, alpha, j, k, s)
    sub = net.subsystems[i]
    n = net.n
    ni = sub.state_dim
    n_alpha = net.subsystems[alpha].state_dim
    if reduction is None:
        reduction = identity_reduction(n_alpha)
    V = reduction.basis
    if V.shape[0] != n_alpha:
        raise ValueError(f"reduction basis has {V.shape[0]} rows, peer state dimension is {n_alpha}")
    q = reduction.q
    E, A, B = sub.E[j], sub.A[k], sub.B[k]
    FV = net.coupling(i, alpha)[k] @ V
    X1 = cat.X1[j][s]
    X3, X4, K = cat.X3[k][s], cat.X4[k][s], cat.K[j][s]

    g11 = X3.sym()
    if omega is not None:
        for t, w in enumerate(omega):
            if w:
                g11 = g11 - w * cat.X1[j][t]
    if lam is not None:
        for t, w in enumerate(lam):
            if w:
                g11 = g11 - w * cat.X1[t][s]
    g21 = A @ X1 + B @ K - E @ X3 + X4.T
    EX4 = E @ X4
    g22 = -(EX4.sym())
    c1, c2 = n - 1, (n - 1) * (2 * n - 3)
    g32 = Affine.constant(c1 * FV.T)
    g33 = Affine(np.zeros((q, q)), {cat.mu_index: -c2 * (FV.T @ FV)})
    if reduction.eps:
        g33 = g33 - reduction.eps * np.eye(q)
    g41 = X1
    g44 = Affine.constant(-np.eye(ni))
    sizes = (ni, ni, q, ni)
    lower = [
        [g11, None, None, None],
        [g21, g22, None, None],
        [None, g32, g33, None],
        [g41, None, None, g44],
    ]
    grid = [[None] * 4 for _ in range(4)]
    for a in range(4):
        for b in range(a + 1):
            blk = lower[a][b]
            if blk is None:
                continue
            grid[a][b] = blk
            if a != b:
                grid[b][a] = blk.T
    expr = Affine.block(grid, sizes, sizes)
    label = (i, alpha, j, k, s, kind)
    return LmiInstance.from_affine(label, expr, delta, sizes)


def assemble_gamma(net: NetworkModel, cat: DecisionVarCatalog, i: int, alpha: int, j: int, k: int,
                   s: int, omega: Sequence[float] | None = None, lam: Sequence[float] | None = None,
                   reduction: InterconnectReduction | None = None, delta: float = 0.0) -> LmiInstance:
    """Non-quadratic block with derivative-bound term; bounds default to the model's."""
    sub = net.subsystems[i]
    omega = sub.omega_bounds if omega is None else omega
    lam = sub.lambda_bounds if lam is None else lam
    return _assemble(net, cat, i, alpha, j, k, s, omega, lam, reduction, delta, "gamma")


def assemble_T(net: NetworkModel, cat: DecisionVarCatalog, i: int, alpha: int, j: int, k: int,
               s: int, reduction: InterconnectReduction | None = None, delta: float = 0.0) -> LmiInstance:
    """Shared-X1 block: no derivative-bound term."""
    if cat.method != COROLLARY1:
        raise ValueError("assemble_T needs a corollary1 catalog (shared X1)")
    return _assemble(net, cat, i, alpha, j, k, s, None, None, reduction, delta, "T")


def enumerate_relaxed(net: NetworkModel, cat: DecisionVarCatalog, i: int, alpha: int,
                      method: str | None = None, reduction: InterconnectReduction | None = None,
                      delta: float = 0.0, omega=None, lam=None) -> list[LmiInstance]:
    """Diagonal instances ``G^jkk`` plus, for every ordered pair ``k != s``,
    ``G^jkk/(r-1) + (G^jks + G^jsk)/2``."""
    method = method or cat.method
    sub = net.subsystems[i]
    l, r = sub.left_rule_count, sub.right_rule_count

    def build(j, k, s):
        if method == COROLLARY1:
            return assemble_T(net, cat, i, alpha, j, k, s, reduction, delta)
        return assemble_gamma(net, cat, i, alpha, j, k, s, omega, lam, reduction, delta)

    out = []
    for j in range(l):
        diag = [build(j, k, k) for k in range(r)]
        for k in range(r):
            d = diag[k]
            out.append(LmiInstance(d.label[:5] + ("diag",), d.constant_block, d.coeff_blocks,
                                   d.shift, d.block_sizes))
        if r == 1:
            continue
        cross = {(k, s): build(j, k, s) for k in range(r) for s in range(r) if k != s}
        for k in range(r):
            for s in range(r):
                if k == s:
                    continue
                half = cross[k, s].combine(cross[s, k], 0.5, 0.5, None)
                out.append(diag[k].combine(half, 1.0 / (r - 1), 1.0, (i, alpha, j, k, s, "pair")))
    return out


def subsystem_instances(net: NetworkModel, i: int, cat: DecisionVarCatalog, delta: float = 0.0,
                        interconnect_eps: float = 0.0, reduce: bool = True,
                        omega=None, lam=None) -> list[LmiInstance]:
    """All relaxed instances of subsystem ``i`` over every peer (peers in name order)."""
    out = []
    for alpha in sorted(net.peers(i), key=lambda a: net.subsystems[a].name):
        red = reduction_for(net, i, alpha, interconnect_eps, reduce)
        out.extend(enumerate_relaxed(net, cat, i, alpha, cat.method, red, delta, omega, lam))
    return out


def reduction_for(net: NetworkModel, i: int, alpha: int, interconnect_eps: float = 0.0,
                  reduce: bool = True) -> InterconnectReduction:
    if interconnect_eps or not reduce:
        return identity_reduction(net.subsystems[alpha].state_dim, interconnect_eps)
    return reduce_interconnect(net.coupling(i, alpha))


def label_str(label: tuple, names: Sequence[str] | None = None) -> str:
    i, alpha, j, k, s, kind = label
    si = names[i] if names else str(i + 1)
    sa = names[alpha] if names else str(alpha + 1)
    return f"{kind}_i{si}_a{sa}_j{j + 1}_k{k + 1}_s{s + 1}"


def _write_mtx(path: Path, M: np.ndarray, comment: str = ""):
    n = M.shape[0]
    rows = [(a, b, M[a, b]) for b in range(n) for a in range(b, n) if M[a, b] != 0.0]
    lines = ["%%MatrixMarket matrix coordinate real symmetric"]
    if comment:
        lines.append(f"% {comment}")
    lines.append(f"{n} {n} {len(rows)}")
    lines += [f"{a + 1} {b + 1} {v!r}" for a, b, v in rows]
    path.write_text("\n".join(lines) + "\n")


def dump_instances(instances: Iterable[LmiInstance], cat: DecisionVarCatalog, outdir: str | Path,
                   names: Sequence[str] | None = None) -> list[Path]:
    """Write each instance as Matrix Market files: ``<label>.C.mtx`` plus one per variable."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for inst in instances:
        base = label_str(inst.label, names)
        p = outdir / f"{base}.C.mtx"
        _write_mtx(p, inst.constant_block, f"constant block, shift {inst.shift!r}, blocks {list(inst.block_sizes)}")
        written.append(p)
        for v, c in inst.coeff_blocks.items():
            p = outdir / f"{base}.y{v}.mtx"
            _write_mtx(p, c, f"coefficient of {cat.name_of(v)}")
            written.append(p)
    index = outdir / "variables.txt"
    index.write_text("".join(f"y{p} {cat.name_of(p)}\n" for p in range(cat.var_count)))
    written.append(index)
    return written
