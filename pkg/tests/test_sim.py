import math

import numpy as np
import pytest

from fuzzydesc import sim, synth
from fuzzydesc.model import set_entry, with_bounds

from conftest import X0


def test_origin_is_an_equilibrium(net, cor1):
    tr = sim.simulate(net, cor1, [[0.0, 0.0], [0.0, 0.0]], dt=1e-2, T=0.5)
    assert not np.any(tr.final_state())
    assert all(not np.any(u) for u in tr.u)
    assert all(not np.any(v) for v in tr.V)


def test_closed_loop_decays(cor1_traj):
    ratio = np.linalg.norm(cor1_traj.final_state()) / np.linalg.norm(cor1_traj.initial_state())
    assert ratio <= 1e-2


def test_theorem_controller_decays(th1_traj):
    ratio = np.linalg.norm(th1_traj.final_state()) / np.linalg.norm(th1_traj.initial_state())
    assert ratio <= 1e-2


def test_step_halving(cor1_traj, cor1_traj_half):
    a, b = cor1_traj.final_state(), cor1_traj_half.final_state()
    assert np.linalg.norm(a - b) / np.linalg.norm(b) < 1e-6


def test_energy_integrals_converge(cor1_traj, cor1_traj_half):
    for i in range(2):
        for name in ("E_state", "E_phi"):
            a = getattr(cor1_traj, name)[i][-1]
            b = getattr(cor1_traj_half, name)[i][-1]
            assert a == pytest.approx(b, rel=1e-4)


def test_energy_integrals_are_monotone(cor1_traj):
    for e in cor1_traj.E_state + cor1_traj.E_phi:
        assert e[0] == 0.0
        assert np.all(np.diff(e) >= 0)


def test_dissipation_residual(cor1_traj, cor1):
    rep = sim.hinf_report(cor1_traj, cor1)
    assert all(r["passed"] and r["D"] <= 1e-3 for r in rep)


def test_residual_algebra(cor1_traj, cor1):
    zero = sim.hinf_report(cor1_traj, cor1, rho=[0.0, 0.0])
    for r in zero:
        assert r["D"] == pytest.approx(r["E_state"] - r["V0"] + r["Vf"], abs=1e-12)
    # D is non-increasing in rho
    Ds = [sim.hinf_report(cor1_traj, cor1, rho=[s, s])[1]["D"] for s in (0.0, 0.5, 1.0, 2.0)]
    assert Ds == sorted(Ds, reverse=True)


def test_lyapunov_value_at_vertex(net, cor1):
    sub = net.subsystems[0]
    x = np.array([0.0, 0.7])  # v = (0, 1), h = (0, 1)
    V = sim.lyapunov_value(cor1[0], sub, x)
    assert V == pytest.approx(float(x @ np.linalg.inv(cor1[0].X1[1][1]) @ x), rel=1e-12)


def test_lyapunov_positive(net, cor1, rng):
    for _ in range(50):
        x = rng.uniform(-3, 3, size=2)
        for r, sub in zip(cor1, net.subsystems):
            assert sim.lyapunov_value(r, sub, x) > 0


def test_derivative_diagnostic(cor1_traj, net):
    rows = sim.derivative_bound_diagnostic(cor1_traj, net)
    assert len(rows) == 8
    warn = {(r["subsystem"], r["family"], r["rule"]) for r in rows if r["status"] == "WARN"}
    assert ("sub1", "h", 1) in warn
    loose = with_bounds(net, -1e6, -1e6)
    assert all(r["status"] == "OK" for r in sim.derivative_bound_diagnostic(cor1_traj, loose))


def test_derivative_of_complement_rules(cor1_traj, net):
    rows = {(r["subsystem"], r["family"], r["rule"]): r for r in sim.derivative_bound_diagnostic(cor1_traj, net)}
    # cos^2 and 1 - cos^2 have opposite derivatives, so their extremes mirror
    assert rows[("sub2", "v", 2)]["min"] == pytest.approx(rows[("sub2", "h", 1)]["min"], rel=1e-6)


def test_csv_layout_and_roundtrip(cor1_traj, tmp_path):
    p = tmp_path / "t.csv"
    sim.write_csv(cor1_traj, p)
    header, data = sim.read_csv(p)
    assert header == ["t", "x_sub1_1", "x_sub1_2", "x_sub2_1", "x_sub2_2", "u_sub1", "u_sub2",
                      "V_sub1", "V_sub2", "E_state_sub1", "E_state_sub2", "E_phi_sub1", "E_phi_sub2"]
    assert data.shape == (10001, 13)
    np.testing.assert_array_equal(data[:, 0], cor1_traj.t)
    np.testing.assert_array_equal(data[:, 1:3], cor1_traj.x[0])


def test_read_csv_rejects_foreign(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        sim.read_csv(p)


def test_repeat_runs_identical(net, cor1):
    a = sim.trajectory_csv(sim.simulate(net, cor1, X0, dt=1e-3, T=0.5))
    b = sim.trajectory_csv(sim.simulate(net, cor1, X0, dt=1e-3, T=0.5))
    assert a == b


def test_open_loop(net):
    tr = sim.simulate(net, None, X0, dt=1e-3, T=0.5, open_loop=True)
    assert tr.open_loop
    assert all(not np.any(u) for u in tr.u)
    assert all(np.all(np.isnan(v)) for v in tr.V)


def test_singular_descriptor(net, cor1):
    bad = net
    for k in (1, 2):
        bad = set_entry(bad, "sub1", "E", k, 1, 0, 0.0)
        bad = set_entry(bad, "sub1", "E", k, 1, 1, 0.0)
    with pytest.raises(sim.SingularDescriptorError) as info:
        sim.simulate(bad, cor1, X0, dt=1e-3, T=0.1)
    assert info.value.subsystem == "sub1"


@pytest.mark.parametrize("kwargs", [
    dict(x0=[[1.0, 0.0]]),
    dict(x0=[[1.0], [0.0, 0.0]]),
    dict(dt=0.0),
    dict(dt=3e-3, T=0.01),
])
def test_bad_arguments(net, cor1, kwargs):
    args = dict(x0=X0, dt=1e-3, T=0.1) | kwargs
    with pytest.raises(ValueError):
        sim.simulate(net, cor1, **args)


def test_infeasible_results_rejected(net):
    res = synth.synthesize(net, "theorem1", synth.SynthOptions(polish=0.0))
    with pytest.raises(ValueError):
        sim.simulate(net, res, X0, dt=1e-3, T=0.1)
