import copy
import json

import numpy as np
import pytest

from fuzzydesc.model import (
    DimensionError, MembershipError, ModelParseError, SimplexError, blend_E, fixture_path,
    load_network, network_from_dict, network_to_dict, save_network, set_entry,
    validate_memberships, with_bounds,
)


@pytest.fixture
def doc():
    return json.loads(fixture_path().read_text())


def test_fixture_shape(net):
    assert net.n == 2
    for s in net.subsystems:
        assert (s.left_rule_count, s.right_rule_count, s.state_dim, s.input_dim) == (2, 2, 2, 1)
    assert [s.name for s in net.subsystems] == ["sub1", "sub2"]


def test_fixture_parameters(net):
    # a = A_1^1[1,1] and b = B_1^2[1,1]
    assert net["sub1"].A[0][0, 0] == 0.0
    assert net["sub1"].B[1][0, 0] == -0.5
    assert net["sub1"].omega_bounds == (-2.0, -2.0)
    assert net["sub2"].lambda_bounds == (-2.0, -2.0)


def test_bad_shape(doc):
    doc["subsystems"][0]["A"][0] = [[0, 1, 2], [3, 4, 5]]
    with pytest.raises(DimensionError):
        network_from_dict(doc)


def test_pythagorean_memberships_pass(doc):
    doc["subsystems"][1]["h_exprs"] = ["sin(x1)^2", "cos(x1)^2"]
    network_from_dict(doc)


def test_membership_validation(net, doc):
    assert validate_memberships(net["sub1"], 1000, 1e-9) == []
    bad = copy.deepcopy(doc)
    bad["subsystems"][0]["h_exprs"] = ["0.6", "0.6"]
    with pytest.raises(MembershipError) as ei:
        network_from_dict(bad)
    assert any("sum" in v.reason for v in ei.value.violations)
    ok = copy.deepcopy(doc)
    ok["subsystems"][0]["v_exprs"] = ["1", "0"]
    network_from_dict(ok)


def test_unknown_peer(doc):
    doc["subsystems"][0]["F"] = {"nobody": doc["subsystems"][0]["F"]["sub2"]}
    with pytest.raises(ModelParseError):
        network_from_dict(doc)


def test_bad_json(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"subsystems": [')
    with pytest.raises(ModelParseError) as ei:
        load_network(p)
    assert ei.value.line == 1


def test_blend_E(net):
    s = net["sub1"]
    np.testing.assert_array_equal(blend_E(s, [1, 0]), [[1, 0], [-1, 1]])
    np.testing.assert_array_equal(blend_E(s, [0, 1]), [[1, 0.5], [-1, 1]])
    np.testing.assert_allclose(blend_E(s, [0.5, 0.5]), [[1, 0.25], [-1, 1]])
    with pytest.raises(SimplexError):
        blend_E(s, [0.7, 0.7])


def test_roundtrip(net, tmp_path):
    p = tmp_path / "out.json"
    save_network(net, p)
    again = load_network(p)
    assert network_to_dict(again) == network_to_dict(net)


def test_set_entry_and_bounds(net):
    m = set_entry(net, "sub1", "B", 2, 0, 0, 0.75)
    assert m["sub1"].B[1][0, 0] == 0.75
    assert net["sub1"].B[1][0, 0] == -0.5
    with pytest.raises(KeyError):
        set_entry(net, "sub1", "A", 3, 0, 0, 1.0)
    w = with_bounds(net, -0.3, -0.4)
    assert w["sub2"].omega_bounds == (-0.3, -0.3)
    assert w["sub2"].lambda_bounds == (-0.4, -0.4)


def test_coupling_default_zero(doc):
    del doc["subsystems"][1]["F"]
    net = network_from_dict(doc)
    assert all(np.count_nonzero(F) == 0 for F in net.coupling(1, 0))
