"""Interconnected Takagi-Sugeno descriptor networks.

Each subsystem ``i`` obeys::

    sum_j v_j(x_i) E^j  xdot_i = sum_k h_k(x_i) (A^k x_i + B^k u_i + sum_{a != i} F_{ia}^k x_a)

The JSON model format is documented in the README.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import memexpr
from .memexpr import MembershipExpr

__all__ = [
    "ModelError",
    "ModelParseError",
    "DimensionError",
    "MembershipError",
    "SimplexError",
    "MembershipViolation",
    "SubsystemModel",
    "NetworkModel",
    "load_network",
    "network_from_dict",
    "network_to_dict",
    "save_network",
    "validate_memberships",
    "blend_E",
    "fixture_path",
    "load_fixture",
]

DEFAULT_SAMPLE_COUNT = 1000
DEFAULT_MEMBERSHIP_TOL = 1e-9


class ModelError(ValueError):
    pass


class ModelParseError(ModelError):
    """Malformed model file; ``locus`` names the offending field."""

    def __init__(self, message: str, locus: str = "", line: int | None = None):
        where = locus
        if line is not None:
            where = f"line {line}" + (f", {locus}" if locus else "")
        super().__init__(f"{where}: {message}" if where else message)
        self.locus = locus
        self.line = line


class DimensionError(ModelError):
    def __init__(self, message: str, matrix: str):
        super().__init__(f"{matrix}: {message}")
        self.matrix = matrix


class MembershipError(ModelError):
    def __init__(self, violations: list["MembershipViolation"]):
        first = violations[0]
        super().__init__(
            f"membership check failed for {first.subsystem} ({first.family}): "
            f"{first.reason} at x={list(first.state)}"
        )
        self.violations = violations


class SimplexError(ValueError):
    pass


@dataclass(frozen=True)
class MembershipViolation:
    subsystem: str
    family: str  # "v" or "h"
    reason: str
    state: tuple[float, ...]
    value: float


@dataclass(frozen=True, eq=False)
class SubsystemModel:
    name: str
    state_dim: int
    input_dim: int
    E: tuple[np.ndarray, ...]
    A: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]
    F: dict[str, tuple[np.ndarray, ...]]
    v_exprs: tuple[MembershipExpr, ...]
    h_exprs: tuple[MembershipExpr, ...]
    omega_bounds: tuple[float, ...]
    lambda_bounds: tuple[float, ...]

    @property
    def left_rule_count(self) -> int:
        return len(self.E)

    @property
    def right_rule_count(self) -> int:
        return len(self.A)

    def memberships(self, x: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Return the (v, h) weight vectors at local state ``x``."""
        v = np.array([e(x) for e in self.v_exprs])
        h = np.array([e(x) for e in self.h_exprs])
        return v, h

    def data_scale(self) -> float:
        mats = list(self.E) + list(self.A) + list(self.B)
        for fs in self.F.values():
            mats.extend(fs)
        return max(float(np.max(np.abs(m))) if m.size else 0.0 for m in mats)


@dataclass(frozen=True, eq=False)
class NetworkModel:
    subsystems: tuple[SubsystemModel, ...]
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {s.name: i for i, s in enumerate(self.subsystems)})

    @property
    def n(self) -> int:
        return len(self.subsystems)

    def index(self, name: str) -> int:
        return self._index[name]

    def __getitem__(self, i: int | str) -> SubsystemModel:
        if isinstance(i, str):
            i = self._index[i]
        return self.subsystems[i]

    def coupling(self, i: int, alpha: int) -> tuple[np.ndarray, ...]:
        """F_{i,alpha}^k for all k; zero matrices when the pair is not listed."""
        sub, peer = self.subsystems[i], self.subsystems[alpha]
        if peer.name in sub.F:
            return sub.F[peer.name]
        z = np.zeros((sub.state_dim, peer.state_dim))
        return tuple(z for _ in range(sub.right_rule_count))

    def peers(self, i: int) -> list[int]:
        return [a for a in range(self.n) if a != i]


# -- construction ----------------------------------------------------------


def _matrix(raw, locus: str) -> np.ndarray:
    try:
        arr = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelParseError(f"not a numeric matrix ({exc})", locus) from exc
    if arr.ndim != 2:
        raise ModelParseError("matrix must be a nested list of rows", locus)
    if not np.all(np.isfinite(arr)):
        raise ModelParseError("matrix has non-finite entries", locus)
    arr.setflags(write=False)
    return arr


def _matrix_list(raw, locus: str) -> tuple[np.ndarray, ...]:
    if not isinstance(raw, list) or not raw:
        raise ModelParseError("expected a nonempty list of matrices", locus)
    return tuple(_matrix(m, f"{locus}[{k}]") for k, m in enumerate(raw))


def _check_shape(m: np.ndarray, shape: tuple[int, int], name: str):
    if m.shape != shape:
        raise DimensionError(f"shape {m.shape[0]}x{m.shape[1]}, expected {shape[0]}x{shape[1]}", name)


def _reals(raw, count: int, locus: str) -> tuple[float, ...]:
    if not isinstance(raw, list) or len(raw) != count:
        raise ModelParseError(f"expected a list of {count} reals", locus)
    vals = []
    for k, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ModelParseError("bound must be a finite real", f"{locus}[{k}]")
        vals.append(float(v))
    return tuple(vals)


def _exprs(raw, count: int, dim: int, locus: str) -> tuple[MembershipExpr, ...]:
    if not isinstance(raw, list) or len(raw) != count:
        raise ModelParseError(f"expected a list of {count} expressions", locus)
    out = []
    for k, src in enumerate(raw):
        if not isinstance(src, str):
            raise ModelParseError("expression must be a string", f"{locus}[{k}]")
        try:
            out.append(memexpr.parse(src, dim))
        except memexpr.ExprError as exc:
            raise ModelParseError(str(exc), f"{locus}[{k}]") from exc
    return tuple(out)


def _positive_int(raw, locus: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < 1:
        raise ModelParseError("expected a positive integer", locus)
    return raw


def _subsystem_from_dict(d: dict, pos: int) -> SubsystemModel:
    loc = f"subsystems[{pos}]"
    if not isinstance(d, dict):
        raise ModelParseError("expected an object", loc)
    for key in ("name", "state_dim", "input_dim", "E", "A", "B", "v_exprs", "h_exprs",
                "omega_bounds", "lambda_bounds"):
        if key not in d:
            raise ModelParseError(f"missing field {key!r}", loc)
    name = d["name"]
    if not isinstance(name, str) or not name:
        raise ModelParseError("name must be a nonempty string", f"{loc}.name")
    loc = f"subsystem {name!r}"
    n = _positive_int(d["state_dim"], f"{loc}.state_dim")
    m = _positive_int(d["input_dim"], f"{loc}.input_dim")
    E = _matrix_list(d["E"], f"{loc}.E")
    A = _matrix_list(d["A"], f"{loc}.A")
    B = _matrix_list(d["B"], f"{loc}.B")
    l, r = len(E), len(A)
    for key, declared, actual in (("left_rule_count", l, l), ("right_rule_count", r, r)):
        if key in d and d[key] != actual:
            raise ModelParseError(f"declared {d[key]} but {actual} matrices given", f"{loc}.{key}")
    if len(B) != r:
        raise ModelParseError(f"expected {r} B matrices (one per right rule), got {len(B)}", f"{loc}.B")
    for k, e in enumerate(E):
        _check_shape(e, (n, n), f"{name}.E[{k + 1}]")
    for k, a in enumerate(A):
        _check_shape(a, (n, n), f"{name}.A[{k + 1}]")
    for k, b in enumerate(B):
        _check_shape(b, (n, m), f"{name}.B[{k + 1}]")
    F_raw = d.get("F", {}) or {}
    if not isinstance(F_raw, dict):
        raise ModelParseError("F must map peer names to matrix lists", f"{loc}.F")
    F = {}
    for peer, mats in F_raw.items():
        F[peer] = _matrix_list(mats, f"{loc}.F.{peer}")
        if len(F[peer]) != r:
            raise ModelParseError(f"expected {r} coupling matrices, got {len(F[peer])}", f"{loc}.F.{peer}")
    v = _exprs(d["v_exprs"], l, n, f"{loc}.v_exprs")
    h = _exprs(d["h_exprs"], r, n, f"{loc}.h_exprs")
    om = _reals(d["omega_bounds"], r, f"{loc}.omega_bounds")
    la = _reals(d["lambda_bounds"], l, f"{loc}.lambda_bounds")
    return SubsystemModel(name, n, m, E, A, B, F, v, h, om, la)


def network_from_dict(doc: dict, *, validate: bool = True, sample_count: int = DEFAULT_SAMPLE_COUNT,
                      tol: float = DEFAULT_MEMBERSHIP_TOL,
                      box: tuple[float, float] = (-math.pi, math.pi)) -> NetworkModel:
    if not isinstance(doc, dict) or "subsystems" not in doc:
        raise ModelParseError("top level must be an object with a 'subsystems' list")
    raw = doc["subsystems"]
    if not isinstance(raw, list):
        raise ModelParseError("'subsystems' must be a list", "subsystems")
    subs = tuple(_subsystem_from_dict(d, p) for p, d in enumerate(raw))
    names = [s.name for s in subs]
    if len(set(names)) != len(names):
        raise ModelParseError("duplicate subsystem names", "subsystems")
    if len(subs) < 2:
        raise ModelError(f"a network needs at least 2 subsystems, got {len(subs)}")
    dims = {s.name: s.state_dim for s in subs}
    for s in subs:
        for peer, mats in s.F.items():
            if peer == s.name:
                raise ModelParseError("a subsystem cannot couple to itself", f"subsystem {s.name!r}.F.{peer}")
            if peer not in dims:
                raise ModelParseError(f"unknown peer subsystem {peer!r}", f"subsystem {s.name!r}.F")
            for k, f in enumerate(mats):
                _check_shape(f, (s.state_dim, dims[peer]), f"{s.name}.F[{peer}][{k + 1}]")
    net = NetworkModel(subs)
    if validate:
        violations = []
        for s in subs:
            violations += validate_memberships(s, sample_count, tol, box)
        if violations:
            raise MembershipError(violations)
    return net


def load_network(path: str | Path, **kwargs) -> NetworkModel:
    """Load and validate a JSON model file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(exc.msg, f"column {exc.colno}", line=exc.lineno) from exc
    return network_from_dict(doc, **kwargs)


def network_to_dict(net: NetworkModel) -> dict:
    subs = []
    for s in net.subsystems:
        subs.append({
            "name": s.name,
            "state_dim": s.state_dim,
            "input_dim": s.input_dim,
            "E": [e.tolist() for e in s.E],
            "A": [a.tolist() for a in s.A],
            "B": [b.tolist() for b in s.B],
            "F": {peer: [f.tolist() for f in fs] for peer, fs in s.F.items()},
            "v_exprs": [e.source for e in s.v_exprs],
            "h_exprs": [e.source for e in s.h_exprs],
            "omega_bounds": list(s.omega_bounds),
            "lambda_bounds": list(s.lambda_bounds),
        })
    return {"subsystems": subs}


def save_network(net: NetworkModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2) + "\n")


def with_bounds(net: NetworkModel, omega: float | None = None, lam: float | None = None) -> NetworkModel:
    """Copy of ``net`` with every derivative bound replaced by a uniform value."""
    doc = network_to_dict(net)
    for s in doc["subsystems"]:
        if omega is not None:
            s["omega_bounds"] = [float(omega)] * len(s["omega_bounds"])
        if lam is not None:
            s["lambda_bounds"] = [float(lam)] * len(s["lambda_bounds"])
    return network_from_dict(doc, validate=False)


# -- memberships -----------------------------------------------------------


def _sample_states(dim: int, count: int, box: tuple[float, float], seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(box[0], box[1], size=(count, dim))


def validate_memberships(sub: SubsystemModel, sample_count: int = DEFAULT_SAMPLE_COUNT,
                         tol: float = DEFAULT_MEMBERSHIP_TOL,
                         box: tuple[float, float] = (-math.pi, math.pi)) -> list[MembershipViolation]:
    """Check range and partition-of-unity on ``sample_count`` states drawn from ``box``.

    Sampling is seeded, so the report is reproducible. At most one violation is
    reported per family and reason.
    """
    out: list[MembershipViolation] = []
    seen = set()

    def report(family, reason, x, value):
        if (family, reason) not in seen:
            seen.add((family, reason))
            out.append(MembershipViolation(sub.name, family, reason, tuple(float(t) for t in x), float(value)))

    for x in _sample_states(sub.state_dim, sample_count, box):
        for family, exprs in (("v", sub.v_exprs), ("h", sub.h_exprs)):
            try:
                vals = [e(x) for e in exprs]
            except memexpr.EvaluationError as exc:
                report(family, f"evaluation error: {exc}", x, math.nan)
                continue
            for k, val in enumerate(vals):
                if not (-tol <= val <= 1 + tol):
                    report(family, f"{family}{k + 1} outside [0, 1]", x, val)
            total = math.fsum(vals)
            if abs(total - 1.0) > tol:
                report(family, f"sum of {family} memberships is {total!r}", x, total)
    return out


def check_simplex(w: Sequence[float], size: int, tol: float = 1e-12, what: str = "weights") -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (size,):
        raise SimplexError(f"{what} must have length {size}, got shape {w.shape}")
    if np.any(w < -tol) or abs(math.fsum(w) - 1.0) > tol:
        raise SimplexError(f"{what} {w.tolist()} are not on the unit simplex")
    return w


def blend_E(sub: SubsystemModel, v: Sequence[float]) -> np.ndarray:
    v = check_simplex(v, sub.left_rule_count, what="v")
    return sum(vj * Ej for vj, Ej in zip(v, sub.E))


def blend(mats: Iterable[np.ndarray], w: Sequence[float]) -> np.ndarray:
    return sum(wk * M for wk, M in zip(w, mats))


# -- bundled fixture -------------------------------------------------------


def fixture_path(name: str = "example22.json") -> Path:
    return Path(str(resources.files("fuzzydesc.data").joinpath(name)))


def load_fixture(name: str = "example22.json", **kwargs) -> NetworkModel:
    return load_network(fixture_path(name), **kwargs)


def set_entry(net: NetworkModel, subsystem: str, matrix: str, k: int, row: int, col: int,
              value: float) -> NetworkModel:
    """Copy of ``net`` with one scalar entry replaced; ``k`` is the 1-based rule index."""
    doc = copy.deepcopy(network_to_dict(net))
    try:
        sub = next(s for s in doc["subsystems"] if s["name"] == subsystem)
    except StopIteration:
        raise KeyError(f"no subsystem named {subsystem!r}") from None
    if matrix not in ("E", "A", "B"):
        raise KeyError(f"matrix must be one of E, A, B, got {matrix!r}")
    mats = sub[matrix]
    if not 1 <= k <= len(mats):
        raise KeyError(f"{subsystem}.{matrix} has rules 1..{len(mats)}, got {k}")
    m = mats[k - 1]
    if not (0 <= row < len(m) and 0 <= col < len(m[0])):
        raise KeyError(f"{subsystem}.{matrix}[{k}] has no entry [{row}][{col}]")
    m[row][col] = float(value)
    return network_from_dict(doc, validate=False)
