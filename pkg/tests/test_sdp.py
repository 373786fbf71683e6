import math

import numpy as np
import pytest

from fuzzydesc import lmi
from fuzzydesc.sdp import (
    ILL_CONDITIONED, INFEASIBLE, OPTIMAL, SdpBlock, SdpProblem, check_solution, get_backend,
    solve, vectorize, write_sdpa,
)


def schur_problem():
    # minimize mu s.t. [[-mu, 1], [1, -1]] <= 0
    return SdpProblem(1, [1.0], [SdpBlock(np.array([[0.0, 1.0], [1.0, -1.0]]),
                                          {0: np.array([[-1.0, 0.0], [0.0, 0.0]])})])


def diag_problem():
    return SdpProblem(1, [1.0], [SdpBlock(np.diag([4.0, 9.0]), {0: -np.eye(2)})])


def sym_feasibility(delta=1e-3):
    coeffs = {0: -np.array([[1.0, 0], [0, 0]]), 1: -np.array([[0, 1.0], [1.0, 0]]),
              2: -np.array([[0, 0], [0, 1.0]])}
    return SdpProblem(3, np.zeros(3), [SdpBlock(delta * np.eye(2), coeffs)])


def test_schur_optimum():
    sol = solve(schur_problem())
    assert sol.status == OPTIMAL
    assert abs(sol.y[0] - 1.0) <= 1e-7


def test_diag_optimum():
    sol = solve(diag_problem())
    assert sol.status == OPTIMAL
    assert abs(sol.y[0] - 9.0) <= 1e-7


def test_feasibility_certificate():
    p = sym_feasibility()
    sol = solve(p)
    assert sol.status == OPTIMAL
    X = np.array([[sol.y[0], sol.y[1]], [sol.y[1], sol.y[2]]])
    assert np.linalg.eigvalsh(X).min() >= 1e-3 - 1e-7
    # the identity is accepted too
    assert check_solution(p, [1.0, 0.0, 1.0]).passed


def test_infeasible_detected():
    # y >= 1 and y <= -1
    p = SdpProblem(1, [0.0], [SdpBlock(np.array([[1.0]]), {0: np.array([[-1.0]])}),
                              SdpBlock(np.array([[1.0]]), {0: np.array([[1.0]])})])
    assert solve(p).status == INFEASIBLE


def test_constant_only_problems():
    assert solve(SdpProblem(0, [], [])).status == OPTIMAL
    bad = SdpProblem(0, [], [SdpBlock(np.eye(1), {})])
    assert solve(bad).status == INFEASIBLE


def test_unbounded_direction():
    p = SdpProblem(1, [1.0], [SdpBlock(-np.eye(1), {})])
    assert solve(p).status == ILL_CONDITIONED


def test_check_solution_examples():
    p = schur_problem()
    rep = check_solution(p, [1.0])
    assert abs(rep.max_eig) <= 1e-9 and rep.passed
    rep0 = check_solution(p, [0.0])
    assert rep0.max_eig == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-14)
    assert not rep0.passed and rep0.violations()
    assert check_solution(SdpProblem(0, [], []), []).block_max_eigs == []


def test_problem_validation():
    with pytest.raises(ValueError):
        SdpProblem(1, [1.0, 2.0], [])
    with pytest.raises(ValueError):
        SdpProblem(1, [1.0], [SdpBlock(np.eye(1), {3: np.eye(1)})])


def test_vectorize_fixture(net):
    cat = lmi.DecisionVarCatalog.for_subsystem(net.subsystems[0])
    insts = lmi.subsystem_instances(net, 0, cat)
    p = vectorize(insts, cat, delta=1e-7)
    assert p.var_count == 53
    assert len(p.blocks) == len(insts) + 4 + 1
    assert p.objective[cat.mu_index] == 1.0
    pr = vectorize(insts, cat, radius=10.0, norm_penalty=1e-6)
    assert pr.var_count == 54 and pr.objective[-1] == 1e-6
    pm = vectorize(insts, cat, "maximize-margin", mu_cap=4.0)
    assert pm.objective[-1] == -1.0 and pm.var_names[-1] == "eta"
    with pytest.raises(ValueError):
        vectorize(insts, cat, "maximize-margin")
    with pytest.raises(ValueError):
        vectorize(insts, None, "minimize-mu")


def test_empty_feasibility_is_trivial():
    p = vectorize([], None, "feasibility")
    assert p.var_count == 0
    assert solve(p).status == OPTIMAL


def test_write_sdpa(tmp_path):
    path = tmp_path / "p.dat-s"
    write_sdpa(schur_problem(), path)
    lines = [l for l in path.read_text().splitlines() if not l.startswith(('"', "*"))]
    assert lines[0].split()[0] == "1"      # m
    assert lines[1].split()[0] == "1"      # block count
    assert lines[2].split()[0] == "2"      # block size


def test_deterministic():
    a, b = solve(schur_problem()), solve(schur_problem())
    assert a.y.tobytes() == b.y.tobytes() and a.iterations == b.iterations


def test_cvxpy_backend_agrees():
    pytest.importorskip("cvxpy")
    pytest.importorskip("clarabel")
    be = get_backend("cvxpy")
    be.solver = "CLARABEL"
    assert be.solve(diag_problem()).y[0] == pytest.approx(9.0, abs=1e-6)
