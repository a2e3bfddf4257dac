import math

import numpy as np
import pytest

from hybridmsa import discs
from hybridmsa.ocp import ControlGrid, evaluate_hamiltonian, transversality


def rand_state(rng):
    x = rng.uniform(-3, 3, size=8)
    # keep the discs apart so detections stay in their smooth region
    while np.linalg.norm(x[0:2] - x[2:4]) < 0.5:
        x[0:2] = rng.uniform(-3, 3, size=2)
    return x


def test_zero_costate_leaves_running_cost(concentric_cfg):
    p = discs.build_problem(concentric_cfg)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, u = rand_state(rng), rng.uniform(-2, 2, size=2)
        assert evaluate_hamiltonian(p, x, np.zeros(8), u) == pytest.approx(
            concentric_cfg.epsilon * float(u @ u), abs=1e-14
        )


def test_hamiltonian_position_costate_picks_velocity(concentric_cfg):
    p = discs.build_problem(concentric_cfg)
    x = np.zeros(8)
    x[0:2] = (-2.0, -2.0)
    x[4:6] = (2.0, 3.0)  # v1
    lam = np.zeros(8)
    lam[0] = 1.0  # lambda_q1 = (1, 0)
    assert evaluate_hamiltonian(p, x, lam, np.zeros(2)) == pytest.approx(2.0)


def test_hamiltonian_velocity_costate_and_cost(concentric_cfg):
    p = discs.build_problem(concentric_cfg)
    x = np.zeros(8)
    x[0:2] = (-2.0, -2.0)
    lam = np.zeros(8)
    lam[4] = 1.0  # lambda_v1 = (1, 0)
    u = np.array([3.0, 0.0])
    # lambda_v1 . u / m1 + eps |u|^2 = 3 + 0.1 * 9
    assert evaluate_hamiltonian(p, x, lam, u) == pytest.approx(3.9)


def test_hamiltonian_matches_handwritten_form(concentric_cfg):
    """Generic lambda.f + L against the spelled-out disc expression."""
    cfg = concentric_cfg
    p = discs.build_problem(cfg)
    rng = np.random.default_rng(1)
    for _ in range(1000):
        x, lam, u = rand_state(rng), rng.uniform(-2, 2, size=8), rng.uniform(-4, 4, size=2)
        by_hand = (
            lam[0:2] @ x[4:6]
            + lam[2:4] @ x[6:8]
            + lam[4:6] @ u / cfg.m1
            + cfg.epsilon * (u @ u)
        )
        assert evaluate_hamiltonian(p, x, lam, u) == pytest.approx(by_hand, abs=1e-12)


@pytest.mark.parametrize("cost", ["quadratic", "l1"])
def test_grad_u_matches_finite_differences(cost, concentric_cfg, l1_cfg):
    cfg = concentric_cfg if cost == "quadratic" else l1_cfg
    p = discs.build_problem(cfg)
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(50):
        x, lam = rand_state(rng), rng.uniform(-2, 2, size=8)
        u = rng.uniform(0.5, 3, size=2) * rng.choice([-1, 1], size=2)  # away from |u|=0
        grad = p.hamiltonian_grad_u(x, lam, u)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (
                evaluate_hamiltonian(p, x, lam, u + e) - evaluate_hamiltonian(p, x, lam, u - e)
            ) / (2 * h)
            assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("cost", ["quadratic", "l1"])
def test_minimizer_beats_random_controls(cost, concentric_cfg, l1_cfg):
    cfg = concentric_cfg if cost == "quadratic" else l1_cfg
    p = discs.build_problem(cfg)
    rng = np.random.default_rng(3)
    for _ in range(20):
        x, lam = rand_state(rng), rng.uniform(-2, 2, size=8)
        u_star = p.hamiltonian_minimizer(x, lam)
        h_star = evaluate_hamiltonian(p, x, lam, u_star)
        for _ in range(100):
            if cost == "l1":  # admissible set is the closed disc of radius u_max
                v = rng.uniform(-1, 1, size=2)
                v *= cfg.u_max * rng.uniform(0, 1) / max(np.linalg.norm(v), 1e-12)
            else:
                v = rng.uniform(-30, 30, size=2)
            assert h_star <= evaluate_hamiltonian(p, x, lam, v) + 1e-9


def test_transversality_head_on(head_on_cfg):
    p = discs.build_problem(head_on_cfg)
    x = np.array([-0.4, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0])  # touching, approaching
    # normal speed sqrt(2)/2 * N.(v1-v2) with N = (-1, 0)
    assert transversality(p, x, np.zeros(2), discs.INTERDISC) == pytest.approx(-math.sqrt(2))


def test_transversality_wall(wall_cfg):
    p = discs.build_problem(wall_cfg)
    x = np.array([-2.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.3, 0.8])
    # wall gap derivative along the flow: -v2 . N_w
    assert transversality(p, x, np.zeros(2), discs.WALL_DISC2) == pytest.approx(-0.8)


def test_problem_definition_validation(concentric_cfg):
    p = discs.build_problem(concentric_cfg)
    assert p.n_manifolds == 1
    with pytest.raises(ValueError):
        ControlGrid(np.zeros((0, 2)), 1.0)
    with pytest.raises(ValueError):
        ControlGrid(np.zeros((4, 2)), 0.0)


def test_control_grid_basics():
    u = ControlGrid.constant((1.0, 2.0), 10, 2.0)
    assert u.steps == 10
    assert u.dt == pytest.approx(0.2)
    assert np.allclose(u.times(), np.arange(10) * 0.2)
    v = u.copy()
    v.values[0, 0] = 9.0
    assert u.values[0, 0] == 1.0
