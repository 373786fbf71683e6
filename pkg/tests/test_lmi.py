import numpy as np
import pytest

from fuzzydesc import lmi
from fuzzydesc.lmi import (
    COROLLARY1, THEOREM1, DecisionVarCatalog, assemble_T, assemble_gamma, dump_instances,
    enumerate_relaxed, identity_reduction, reduce_interconnect, subsystem_instances,
)
from fuzzydesc.model import fixture_path, network_from_dict, with_bounds
import json


def cat_for(net, i, method=THEOREM1):
    return DecisionVarCatalog.for_subsystem(net.subsystems[i], method)


def test_var_count(net):
    assert cat_for(net, 0).var_count == 4 * 3 + 4 * 4 + 4 * 4 + 4 * 2 + 1 == 53
    assert cat_for(net, 0, COROLLARY1).var_count == 3 + 16 + 16 + 8 + 1


def test_pack_extract_roundtrip(net, rng):
    cat = cat_for(net, 1)
    y = rng.normal(size=cat.var_count)
    np.testing.assert_array_equal(cat.pack(cat.extract(y)), y)


def test_instance_dimensions(net):
    cat = cat_for(net, 0)
    full = assemble_gamma(net, cat, 0, 1, 0, 0, 0, reduction=identity_reduction(2))
    red = assemble_gamma(net, cat, 0, 1, 0, 0, 0, reduction=reduce_interconnect(net.coupling(0, 1)))
    assert full.dimension == 8 and full.block_sizes == (2, 2, 2, 2)
    assert red.dimension == 7
    cat2 = cat_for(net, 1)
    assert assemble_gamma(net, cat2, 1, 0, 0, 0, 0, reduction=reduce_interconnect(net.coupling(1, 0))).dimension == 7


def test_reduction_basis(net):
    red = reduce_interconnect(net.coupling(0, 1))
    assert red.q == 1
    np.testing.assert_allclose(red.basis, [[1.0], [0.0]], atol=1e-15)
    assert reduce_interconnect([np.eye(3)]).q == 3
    assert reduce_interconnect([np.zeros((2, 2)), np.zeros((2, 2))]).q == 0


def test_zero_coupling_drops_block(net):
    doc = json.loads(fixture_path().read_text())
    del doc["subsystems"][0]["F"]
    z = network_from_dict(doc)
    cat = cat_for(z, 0)
    inst = assemble_gamma(z, cat, 0, 1, 0, 0, 0, reduction=reduce_interconnect(z.coupling(0, 1)))
    assert inst.dimension == 6
    assert cat.mu_index not in inst.coeff_blocks


def test_relaxed_count(net):
    # l*r diagonal instances plus l*r*(r-1) ordered pairs
    insts = subsystem_instances(net, 0, cat_for(net, 0))
    assert len(insts) == 2 * 2 + 2 * 2 * 1 == 8
    assert sum(1 for x in insts if x.label[5] == "diag") == 4


def test_single_right_rule_only_diagonal(net):
    doc = json.loads(fixture_path().read_text())
    s = doc["subsystems"][0]
    s["E"] = s["E"] + [s["E"][0]]
    s["v_exprs"] = ["0.5", "0.25", "0.25"]
    s["lambda_bounds"] = [-2.0, -2.0, -2.0]
    for key in ("A", "B"):
        s[key] = s[key][:1]
    s["F"]["sub2"] = s["F"]["sub2"][:1]
    s["h_exprs"] = ["1"]
    s["omega_bounds"] = [-2.0]
    one = network_from_dict(doc)
    insts = subsystem_instances(one, 0, cat_for(one, 0))
    assert len(insts) == 3
    assert all(x.label[5] == "diag" for x in insts)


def _blocks_by_hand(net, mats, i, alpha, j, k, s, omega, lam, V):
    """Direct numpy transcription of the block matrix at given variable values."""
    sub = net.subsystems[i]
    n = net.n
    E, A, B = sub.E[j], sub.A[k], sub.B[k]
    FV = net.coupling(i, alpha)[k] @ V
    X1, X3, X4, K = mats["X1"][j][s], mats["X3"][k][s], mats["X4"][k][s], mats["K"][j][s]
    g11 = X3 + X3.T
    g11 = g11 - sum(w * mats["X1"][j][t] for t, w in enumerate(omega))
    g11 = g11 - sum(w * mats["X1"][t][s] for t, w in enumerate(lam))
    g21 = A @ X1 + B @ K - E @ X3 + X4.T
    g22 = -E @ X4 - X4.T @ E.T
    g32 = (n - 1) * FV.T
    g33 = -mats["mu"] * (n - 1) * (2 * n - 3) * FV.T @ FV
    ni, q = X1.shape[0], FV.shape[1]
    Z = lambda r, c: np.zeros((r, c))
    return np.block([
        [g11, g21.T, Z(ni, q), X1.T],
        [g21, g22, g32.T, Z(ni, ni)],
        [Z(q, ni), g32, g33, Z(q, ni)],
        [X1, Z(ni, ni), Z(ni, q), -np.eye(ni)],
    ])


@pytest.mark.parametrize("i,alpha", [(0, 1), (1, 0)])
def test_assembly_matches_hand_transcription(net, rng, i, alpha):
    cat = cat_for(net, i)
    y = rng.normal(size=cat.var_count)
    mats = cat.extract(y)
    red = reduce_interconnect(net.coupling(i, alpha))
    sub = net.subsystems[i]
    for j in range(2):
        for k in range(2):
            for s in range(2):
                inst = assemble_gamma(net, cat, i, alpha, j, k, s, reduction=red)
                ref = _blocks_by_hand(net, mats, i, alpha, j, k, s, sub.omega_bounds, sub.lambda_bounds, red.basis)
                np.testing.assert_allclose(inst.matrix(y), ref, rtol=0, atol=1e-12)


def test_symmetry_and_affinity(net, rng):
    for method in (THEOREM1, COROLLARY1):
        for i in range(2):
            cat = cat_for(net, i, method)
            kw = {} if method == THEOREM1 else {"omega": None, "lam": None}
            for inst in subsystem_instances(net, i, cat, **kw):
                y1, y2 = rng.normal(size=(2, cat.var_count))
                a = rng.uniform(-2, 2)
                M1, M2 = inst.matrix(y1), inst.matrix(y2)
                assert np.array_equal(M1, M1.T)
                C = inst.matrix(np.zeros(cat.var_count))
                lhs = inst.matrix(a * y1 + (1 - a) * y2) - C
                rhs = a * (M1 - C) + (1 - a) * (M2 - C)
                scale = max(1.0, np.abs(lhs).max())
                assert np.abs(lhs - rhs).max() <= 1e-14 * scale * cat.var_count


def test_pair_instance_formula(net, rng):
    cat = cat_for(net, 0)
    red = reduce_interconnect(net.coupling(0, 1))
    insts = enumerate_relaxed(net, cat, 0, 1, reduction=red)
    y = rng.normal(size=cat.var_count)
    G = lambda j, k, s: assemble_gamma(net, cat, 0, 1, j, k, s, reduction=red).matrix(y)
    pair = next(x for x in insts if x.label == (0, 1, 1, 0, 1, "pair"))
    np.testing.assert_allclose(pair.matrix(y), G(1, 0, 0) + 0.5 * (G(1, 0, 1) + G(1, 1, 0)), atol=1e-13)


def test_corollary_is_theorem_at_zero_bounds_with_shared_X1(net, rng):
    cc, ct = cat_for(net, 0, COROLLARY1), cat_for(net, 0, THEOREM1)
    mats = cc.extract(rng.normal(size=cc.var_count))
    yc = cc.pack(mats)
    yt = ct.pack(mats)
    for j in range(2):
        for k in range(2):
            for s in range(2):
                a = assemble_T(net, cc, 0, 1, j, k, s).matrix(yc)
                b = assemble_gamma(net, ct, 0, 1, j, k, s, omega=[0, 0], lam=[0, 0]).matrix(yt)
                assert np.abs(a - b).max() <= 1e-12
    with pytest.raises(ValueError):
        assemble_T(net, ct, 0, 1, 0, 0, 0)


def test_bounds_enter_only_11_block(net, rng):
    cat = cat_for(net, 0)
    y = rng.normal(size=cat.var_count)
    a = assemble_gamma(net, cat, 0, 1, 0, 1, 0).matrix(y)
    b = assemble_gamma(with_bounds(net, 0.0, 0.0), cat, 0, 1, 0, 1, 0).matrix(y)
    diff = a - b
    assert np.abs(diff[2:, :]).max() == 0 and np.abs(diff[:, 2:]).max() == 0
    assert np.abs(diff[:2, :2]).max() > 0


def test_bad_indices(net):
    cat = cat_for(net, 0)
    with pytest.raises(IndexError):
        assemble_gamma(net, cat, 0, 0, 0, 0, 0)
    with pytest.raises(IndexError):
        assemble_gamma(net, cat, 0, 1, 2, 0, 0)


def test_dump(net, tmp_path):
    cat = cat_for(net, 0)
    insts = subsystem_instances(net, 0, cat)
    files = dump_instances(insts, cat, tmp_path, ["sub1", "sub2"])
    assert (tmp_path / "variables.txt").read_text().splitlines()[0] == "y0 X1[1][1](1,1)"
    head = (tmp_path / "diag_isub1_asub2_j1_k1_s1.C.mtx").read_text().splitlines()
    assert head[0].startswith("%%MatrixMarket") and head[2].startswith("7 7 ")
    assert len(files) > len(insts)
