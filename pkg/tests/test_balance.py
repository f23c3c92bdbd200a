import numpy as np
import pytest

from omdlab.balance import (balance_report, entropy_gradient_ceiling, loss_balance, max_step_audit,
                            not_too_far_audit, psi_floor, simplex_coordinate_bounds_check, simplex_pair_basis,
                            stuck_criterion, trajectory_balance, trajectory_difference_check)
from omdlab.exceptions import BalanceViolation, PreconditionError
from omdlab.geometry import Domain, Point, Regularizer
from omdlab.instances import make_loss_stream
from omdlab.trajectories import Trajectory, build_entropy_stuck, run_exact, run_honest_inexact


def _exact(reg, T=60, d=3, eta=0.1, seed=0):
    L = make_loss_stream({"kind": "iid", "d": d}, T, seed).realized
    return run_exact(Domain.simplex(d), reg, L, eta)


def _fake(points, reg=None, eta=0.1, eps=0.0):
    reg = reg or Regularizer.neg_entropy()
    pts = [Point.with_logs(p) for p in points]
    d = len(points[0])
    L = np.zeros((len(points) - 1, d))
    return Trajectory(pts, L, eta, eps, [], "honest", reg, Domain.simplex(d))


# -- balance identity -------------------------------------------------------------------


@pytest.mark.parametrize("reg", [Regularizer.neg_entropy(), Regularizer.log_barrier(), Regularizer.tsallis(0.5)],
                         ids=lambda r: r.label)
def test_exact_balance_equals_loss_balance(reg):
    traj = _exact(reg)
    v = np.array([0.5, 0.0, -0.5])
    for t1, t2 in [(1, 2), (1, 61), (7, 33), (40, 41)]:
        expected = traj.eta * traj.losses[t1 - 1:t2 - 1].sum(axis=0) @ v
        assert trajectory_balance(traj, v, t1, t2) == pytest.approx(expected, abs=1e-10)


def test_balance_is_additive_and_antisymmetric():
    traj = _exact(Regularizer.log_barrier())
    v = np.array([1.0, -1.0, 0.0])
    a, b, c = trajectory_balance(traj, v, 3, 20), trajectory_balance(traj, v, 20, 50), trajectory_balance(traj, v, 3, 50)
    assert a + b == pytest.approx(c, abs=1e-12)
    assert trajectory_balance(traj, v, 20, 3) == pytest.approx(-a, abs=1e-15)
    assert trajectory_balance(traj, v, 9, 9) == 0.0


def test_balance_rejects_non_kernel_vector():
    with pytest.raises(ValueError):
        trajectory_balance(_exact(Regularizer.neg_entropy()), [1.0, 0.0, 0.0], 1, 2)


def test_balance_rejects_round_out_of_range():
    with pytest.raises(IndexError):
        trajectory_balance(_exact(Regularizer.neg_entropy(), T=5), [1.0, -1.0, 0.0], 1, 7)


def test_balance_report_on_simplex_is_eta_times_loss_balance():
    traj = _exact(Regularizer.neg_entropy(), T=200)
    rep = balance_report(traj)
    alpha = loss_balance(traj.losses, simplex_pair_basis(3) * 1.0)
    assert rep.exact_for_domain
    assert rep.k_balanced_at == pytest.approx(traj.eta * alpha, rel=1e-10)


def test_balance_report_grid_agrees_with_running_extremes():
    traj = _exact(Regularizer.log_barrier(), T=40)
    rep = balance_report(traj)
    assert rep.max_over_pairs == pytest.approx(rep.k_balanced_at, rel=1e-12)


# -- loss balance -----------------------------------------------------------------------------


def test_loss_balance_constant_loss():
    L = np.tile([1.0, 0.0], (10, 1))
    assert loss_balance(L, [[0.5, -0.5]]) == pytest.approx(5.0)


def test_loss_balance_switching_loss():
    L = np.vstack([np.tile([1.0, 0.0], (30, 1)), np.tile([0.0, 1.0], (70, 1))])
    # prefix sums of (l1 - l2)/2 rise to 15 then fall to -20
    assert loss_balance(L, [[0.5, -0.5]]) == pytest.approx(35.0)


def test_loss_balance_matches_brute_force():
    rng = np.random.default_rng(1)
    L = rng.uniform(-1, 1, (40, 3))
    V = simplex_pair_basis(3)
    brute = max(float(L[a:b].sum(axis=0) @ v) for v in V for a in range(41) for b in range(a, 41))
    assert loss_balance(L, V) == pytest.approx(brute, abs=1e-12)


def test_loss_balance_requires_l1_normalized_basis():
    with pytest.raises(ValueError):
        loss_balance(np.zeros((3, 2)), [[1.0, -1.0]])


# -- floors and criteria ------------------------------------------------------------------------


def test_psi_floor_log_barrier_value():
    assert psi_floor(2.0, 1.0, 0.05, 2000, 4) == pytest.approx(1 / (8 * 0.05 * 2000 * 4 + 8), rel=1e-15)


def test_psi_floor_tsallis_value():
    val = psi_floor(1.5, 0.5, 0.05, 2000, 4)
    assert val == pytest.approx((0.5 / (3200 + 0.5 * 8 ** 0.5)) ** 2, rel=1e-14)


def test_psi_floor_rejects_entropy():
    with pytest.raises(PreconditionError):
        psi_floor(1.0, 1.0, 0.1, 10, 2)


def test_stuck_criterion_examples():
    reg = Regularizer.neg_entropy()
    assert stuck_criterion(reg, 1e-3, 0.1, 4e-4)
    assert not stuck_criterion(reg, 1.1e-3, 0.1, 4e-4)
    assert stuck_criterion(Regularizer.log_barrier(), 0.01, 0.1, 4e-5)


# -- gradient ceiling -----------------------------------------------------------------------------


@pytest.mark.parametrize("reg", [Regularizer.neg_entropy(), Regularizer.log_barrier()], ids=lambda r: r.label)
def test_gradient_ceiling_holds_on_exact_runs(reg):
    traj = _exact(reg, T=300, d=4, eta=0.05)
    k = balance_report(traj).k_balanced_at
    rep = entropy_gradient_ceiling(traj, k)
    assert rep.margin >= 0
    assert rep.main_text_bound >= rep.bound - 1e-12


def test_gradient_ceiling_detects_violation():
    # a coordinate collapses while the claimed balance is tiny
    traj = _fake([[0.5, 0.5], [1e-9, 1 - 1e-9]])
    with pytest.raises(BalanceViolation):
        entropy_gradient_ceiling(traj, 0.01)


def test_gradient_ceiling_requires_uniform_start():
    with pytest.raises(PreconditionError):
        entropy_gradient_ceiling(_fake([[0.4, 0.6], [0.4, 0.6]]), 1.0)


# -- coordinate bounds -------------------------------------------------------------------------------


def test_coordinate_bounds_on_stuck_trajectory():
    traj = build_entropy_stuck(100, 4e-4, 0.1, 300)
    i_star = 1
    v = np.zeros(2)
    v[i_star], v[0] = 1.0, -1.0
    for t1, t2 in [(1, 50), (60, 250), (100, 301)]:
        k = max(trajectory_balance(traj, v, t1, t2), 0.0)
        assert simplex_coordinate_bounds_check(traj, 0, i_star, t1, t2, k)


def test_coordinate_bounds_precondition():
    traj = build_entropy_stuck(100, 4e-4, 0.1, 300)
    with pytest.raises(PreconditionError):
        # with i = 1 and i* = 0 the balance over rounds 1..50 is 4.9 > 0
        simplex_coordinate_bounds_check(traj, 1, 0, 1, 50, 0.0)


# -- trajectory difference ---------------------------------------------------------------------------


def test_trajectory_difference_on_saturating_run():
    d, T, eta, eps = 3, 200, 0.05, 1e-8
    reg = Regularizer.log_barrier()
    L = make_loss_stream({"kind": "iid", "d": d}, T, 2).realized
    exact = run_exact(Domain.simplex(d), reg, L, eta)
    approx = run_honest_inexact(Domain.simplex(d), reg, L, eta, eps, noise_policy="saturating", seed=2)
    psi = float(approx.coords().min())
    v = np.array([0.5, -0.5, 0.0])
    lhs, rhs = trajectory_difference_check(exact, approx, v, 1, T + 1, psi)
    assert lhs <= rhs


def test_trajectory_difference_premise_on_psi():
    reg = Regularizer.log_barrier()
    L = np.zeros((5, 2))
    exact = run_exact(Domain.simplex(2), reg, L, 0.1)
    approx = run_honest_inexact(Domain.simplex(2), reg, L, 0.1, 1e-6)
    with pytest.raises(PreconditionError):
        trajectory_difference_check(exact, approx, [0.5, -0.5], 1, 6, 0.9)


# -- audits --------------------------------------------------------------------------------------------


@pytest.mark.parametrize("reg", [Regularizer.neg_entropy(), Regularizer.log_barrier(), Regularizer.tsallis(0.5)],
                         ids=lambda r: r.label)
def test_audits_pass_on_saturating_runs(reg):
    L = make_loss_stream({"kind": "iid", "d": 4}, 300, 5).realized
    eta = 1 / (16 * reg.c1) * 0.8
    traj = run_honest_inexact(Domain.simplex(4), reg, L, eta, 1e-8, noise_policy="saturating", seed=5)
    assert max_step_audit(traj) > 0
    assert not_too_far_audit(traj) > 0


def test_max_step_audit_flags_jump():
    with pytest.raises(BalanceViolation):
        max_step_audit(_fake([[0.5, 0.5], [0.99, 0.01]], eta=0.01, eps=1e-8))


def test_not_too_far_audit_flags_collapse():
    with pytest.raises(BalanceViolation):
        not_too_far_audit(_fake([[0.5, 0.5], [0.2, 0.8]], eta=0.01, eps=1e-8))


def test_audit_preconditions():
    with pytest.raises(PreconditionError):
        max_step_audit(_fake([[0.5, 0.5], [0.5, 0.5]], eta=0.5))
    with pytest.raises(PreconditionError):
        not_too_far_audit(_fake([[0.5, 0.5], [0.5, 0.5]], eta=0.1))
