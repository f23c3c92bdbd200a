"""Balance diagnostics for mirror-descent trajectories.

The balance of a trajectory along a kernel direction ``v`` between rounds
``t1 <= t2`` is ``B^v(t1, t2) = <grad R(w_t1) - grad R(w_t2), v>``.  For exact
OMD it equals ``eta * <l_{t1:t2}, v>`` where ``l_{t1:t2}`` sums the losses of
rounds ``t1 .. t2-1``.  Rounds are 1-based: ``w_1`` is the initial iterate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import BalanceViolation, PreconditionError
from .geometry import Domain, Regularizer, kernel_basis, normalize_l1

__all__ = [
    "BalanceReport",
    "GradientCeilingReport",
    "gradient_matrix",
    "trajectory_balance",
    "balance_report",
    "loss_balance",
    "simplex_pair_basis",
    "psi_floor",
    "entropy_gradient_ceiling",
    "simplex_coordinate_bounds_check",
    "stuck_criterion",
    "trajectory_difference_check",
    "max_step_audit",
    "not_too_far_audit",
]

KERNEL_TOL = 1e-10


def gradient_matrix(traj) -> np.ndarray:
    """(T+1, d) array of grad R(w_t); entropy uses log coordinates."""
    reg = traj.reg
    if reg.is_barrier:
        return reg.dr_from_log(traj.log_coords())
    return reg.dr(traj.coords())


def _check_kernel(dom: Domain, v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    A, _ = dom.equality_constraints()
    if A.shape[0] and float(np.max(np.abs(A @ v))) > KERNEL_TOL:
        raise ValueError(f"vector is not in ker(A): max |Av| = {np.max(np.abs(A @ v)):.3e}")
    return v


def trajectory_balance(traj, v, t1: int, t2: int, grads: Optional[np.ndarray] = None) -> float:
    """B^v(t1, t2) for 1-based rounds ``1 <= t1, t2 <= T+1``."""
    v = _check_kernel(traj.dom, v)
    G = gradient_matrix(traj) if grads is None else grads
    for t in (t1, t2):
        if not 1 <= t <= G.shape[0]:
            raise IndexError(f"round {t} outside 1..{G.shape[0]}")
    if t1 == t2:
        return 0.0
    return math.fsum(((G[t1 - 1] - G[t2 - 1]) * v).tolist())


def simplex_pair_basis(d: int) -> np.ndarray:
    """The vectors (e_i - e_j)/2 for i != j: the extreme points of the unit L1 ball in ker(1^T)."""
    rows = []
    for i, j in itertools.permutations(range(d), 2):
        v = np.zeros(d)
        v[i], v[j] = 0.5, -0.5
        rows.append(v)
    return np.array(rows)


def _default_basis(dom: Domain) -> np.ndarray:
    if dom.kind == "simplex":
        return simplex_pair_basis(dom.d)
    V = normalize_l1(kernel_basis(dom))
    return np.vstack([V, -V])


@dataclass(frozen=True, eq=False)
class BalanceReport:
    per_pair: dict
    max_over_pairs: float
    k_balanced_at: float
    exact_for_domain: bool = False
    note: str = ""


def _max_ordered_drop(P: np.ndarray) -> float:
    """max over t1 <= t2 of P[t1] - P[t2]."""
    running = np.maximum.accumulate(P)
    return float(np.max(running - P))


def balance_report(traj, basis=None, times=None) -> BalanceReport:
    """Balance over a kernel basis and a grid of rounds.

    ``k_balanced_at`` is the largest B^v(t1, t2) with t1 <= t2 over all rounds
    and the (L1-normalized) basis.  For the simplex the default basis is the
    pair family (e_i - e_j)/2, which makes the value exact; for other
    polytopes it is a lower bound on the true k.
    """
    dom = traj.dom
    V = _default_basis(dom) if basis is None else np.atleast_2d(np.asarray(basis, dtype=float))
    V = normalize_l1(V)
    for v in V:
        _check_kernel(dom, v)
    G = gradient_matrix(traj)
    proj = G @ V.T                              # (T+1, k)
    k_bal = max((_max_ordered_drop(proj[:, j]) for j in range(V.shape[0])), default=0.0)
    grid = range(1, G.shape[0] + 1) if times is None else list(times)
    per_pair = {}
    if times is not None or G.shape[0] <= 60:
        for j in range(V.shape[0]):
            for t1, t2 in itertools.combinations_with_replacement(sorted(grid), 2):
                per_pair[(j, t1, t2)] = float(proj[t1 - 1, j] - proj[t2 - 1, j])
    max_pairs = max(per_pair.values(), default=0.0)
    exact = dom.kind == "simplex" and basis is None
    note = "" if exact else "k over the supplied basis only: a lower bound for general polytopes"
    return BalanceReport(per_pair, max_pairs, max(k_bal, max_pairs), exact, note)


def loss_balance(losses, basis) -> float:
    """Smallest alpha with <l_{t1:t2}, v> <= alpha for every interval and basis vector.

    The interval sums are differences of prefix sums P_t (with P_0 = 0), so
    the maximum is ``max_t P_t - min_t P_t`` when both signs of each vector
    are considered, and the largest ordered drop otherwise.  ``basis`` must be
    L1-normalized; both orientations of every vector are used.
    """
    L = np.asarray(getattr(losses, "realized", losses), dtype=float)
    V = np.atleast_2d(np.asarray(basis, dtype=float))
    norms = np.sum(np.abs(V), axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError("basis vectors must be L1-normalized")
    P = np.vstack([np.zeros(V.shape[0]), np.cumsum(L @ V.T, axis=0)])
    return float(np.max(P.max(axis=0) - P.min(axis=0))) if P.size else 0.0


def psi_floor(nu: float, c1: float, eta: float, T: int, d: int) -> float:
    """(c1 / (8 eta T d + c1 (2d)^(nu-1)))^(1/(nu-1)): iterate floor for nu > 1 barriers."""
    if not nu > 1:
        raise PreconditionError("psi_floor needs nu > 1; negative entropy has no polynomial floor")
    return (c1 / (8.0 * eta * T * d + c1 * (2.0 * d) ** (nu - 1.0))) ** (1.0 / (nu - 1.0))


@dataclass(frozen=True, eq=False)
class GradientCeilingReport:
    bound: float
    main_text_bound: float
    margin: float
    worst: tuple
    note: str = ("bound is max{4kd - r'(1/d), -r'(1/2d)}; the looser single-term form "
                 "4kd - r'(1/2d) is reported alongside")


def entropy_gradient_ceiling(traj, k: float, d: Optional[int] = None, atol: float = 1e-9) -> GradientCeilingReport:
    """Check -r'(w_t^i) <= max{4kd - r'(1/d), -r'(1/2d)} for every round and coordinate.

    Valid for any separable regularizer when the trajectory is k-balanced in
    the L1 sense and starts at the uniform point.
    """
    reg = traj.reg
    d = traj.dom.d if d is None else d
    w1 = traj.iterates[0].coords
    if not np.allclose(w1, 1.0 / d, rtol=1e-12, atol=0):
        raise PreconditionError("gradient ceiling requires a uniform initial iterate")
    r1 = float(reg.dr(1.0 / d))
    r2 = float(reg.dr(1.0 / (2 * d)))
    bound = max(4 * k * d - r1, -r2)
    loose = 4 * k * d - r2
    G = -gradient_matrix(traj)
    margins = bound - G
    t, i = np.unravel_index(int(np.argmin(margins)), margins.shape)
    worst = (int(t) + 1, int(i), float(margins[t, i]))
    bad = np.argwhere(margins < -atol * max(1.0, abs(bound)))
    if bad.size:
        viol = [(int(a) + 1, int(b), float(margins[a, b])) for a, b in bad[:20]]
        raise BalanceViolation(f"gradient ceiling violated at {len(bad)} (t, i) pairs: {viol}", viol)
    return GradientCeilingReport(bound, loose, float(margins[t, i]), worst)


def simplex_coordinate_bounds_check(traj, i: int, i_star: Optional[int], t1: int, t2: int, k: float,
                                    rtol: float = 1e-12) -> bool:
    """Coordinate-ratio implications implied by B^i(t1, t2) <= k on the simplex.

    (1) w_t2^i >= w_t1^i implies e^(k/c1) w_t2^{i*} >= w_t1^{i*};
    (2) w_t2^{i*} <= w_t1^{i*} implies w_t2^i <= e^(k/c1) w_t1^i.
    ``i_star`` defaults to the best arm in hindsight (lowest index on ties).
    """
    if traj.dom.kind != "simplex":
        raise ValueError("coordinate bounds apply to the simplex")
    if i_star is None:
        i_star = int(np.argmin(traj.losses.sum(axis=0)))
    d = traj.dom.d
    v = np.zeros(d)
    v[i_star] += 1.0
    v[i] -= 1.0
    G = gradient_matrix(traj)
    b = trajectory_balance(traj, v, t1, t2, grads=G)
    if b > k + 1e-12 * max(1.0, abs(k)):
        raise PreconditionError(f"B^i({t1},{t2}) = {b:.6e} exceeds k = {k:.6e}")
    c1 = traj.reg.c1 if traj.reg.is_barrier else traj.reg.beta
    W = traj.coords()
    L = traj.log_coords() if traj.reg.is_barrier else None
    factor = k / c1

    def le(a_idx, b_idx, coord, shift):
        # compares w_a <= e^shift * w_b in the log domain when available
        if L is not None:
            return L[a_idx, coord] <= L[b_idx, coord] + shift + rtol
        return W[a_idx, coord] <= math.exp(shift) * W[b_idx, coord] * (1 + rtol)

    a, c = t1 - 1, t2 - 1
    problems = []
    if le(a, c, i, 0.0) and not le(a, c, i_star, factor):
        problems.append("implication (1)")
    if le(c, a, i_star, 0.0) and not le(c, a, i, factor):
        problems.append("implication (2)")
    if problems:
        raise BalanceViolation(f"coordinate bounds fail for i={i}, i*={i_star}, t1={t1}, t2={t2}: "
                               + ", ".join(problems), [(t1, t2, i)])
    return True


def stuck_criterion(reg: Regularizer, w: float, eta: float, eps: float) -> bool:
    """(4 eta / c1) w^nu <= eps: freezing this coordinate stays an eps-approximate step."""
    return 4.0 * eta / reg.c1 * float(w) ** reg.nu <= eps


def trajectory_difference_check(exact, approx, v, t1: int, t2: int, psi: float):
    """Balance of an approximate trajectory vs the exact one with the same losses.

    Returns ``(approx_balance, exact_balance + (t2 - t1) sqrt(c2 eps / psi^nu))``
    and raises :class:`BalanceViolation` if the first exceeds the second.
    The premises (iterate floor ``psi`` on v's support, eps <= c2 psi / 2 and
    ||v||_1 = 1) are checked first.
    """
    reg = approx.reg
    v = _check_kernel(approx.dom, v)
    if abs(np.sum(np.abs(v)) - 1.0) > 1e-9:
        raise ValueError("v must have unit L1 norm")
    eps = approx.eps
    if eps > reg.c2 * psi / 2:
        raise PreconditionError("trajectory difference bound needs eps <= c2 psi / 2")
    support = v != 0
    window = approx.coords()[t1 - 1:t2]
    if np.any(window[:, support] < psi):
        raise PreconditionError("approximate iterates drop below psi on the support of v")
    lhs = trajectory_balance(approx, v, t1, t2)
    rhs = trajectory_balance(exact, v, t1, t2) + (t2 - t1) * math.sqrt(reg.c2 * eps / psi**reg.nu)
    if lhs > rhs + 1e-9:
        raise BalanceViolation(f"trajectory difference bound fails: {lhs:.6e} > {rhs:.6e}", [(t1, t2)])
    return lhs, rhs


def _effective_eps(traj) -> float:
    return max(traj.eps, traj.max_slack())


def max_step_audit(traj, rtol: float = 1e-9):
    """|w_t^i - w_{t+1}^i| < 4 eta / h + sqrt(eps / h), h = min r'' at the two ends.

    Returns the smallest ratio (bound - step) / bound over all (t, i).
    """
    if traj.eta > 0.25:
        raise PreconditionError("max-step bound needs eta <= 1/4")
    W = traj.coords()
    reg = traj.reg
    eps = _effective_eps(traj)
    if reg.is_barrier:
        H = reg.d2r(W)
    else:
        H = np.full_like(W, reg.beta)
    h = np.minimum(H[:-1], H[1:])
    step = np.abs(W[1:] - W[:-1])
    bound = 4 * traj.eta / h + np.sqrt(eps / h)
    ratio = (bound - step) / bound
    bad = np.argwhere(ratio < -rtol)
    if bad.size:
        viol = [(int(t) + 1, int(i), float(step[t, i]), float(bound[t, i])) for t, i in bad[:20]]
        raise BalanceViolation(f"max-step bound violated at {len(bad)} (t, i): {viol}", viol)
    return float(np.min(ratio))


def not_too_far_audit(traj) -> int:
    """Neighbors of a coordinate with eps <= w^nu / (16 c1) are at least half of it.

    Returns the number of (t, i) pairs where the premise held and was checked.
    """
    reg = traj.reg
    if not reg.is_barrier:
        raise ValueError("not-too-far applies to barrier regularizers")
    if traj.eta > 1.0 / (16 * reg.c1):
        raise PreconditionError("not-too-far needs eta <= 1/(16 c1)")
    W = traj.coords()
    eps = _effective_eps(traj)
    premise = eps <= W**reg.nu / (16 * reg.c1)
    checked, viol = 0, []
    n = W.shape[0]
    for t, i in np.argwhere(premise):
        for s in (t - 1, t + 1):
            if 0 <= s < n:
                checked += 1
                if W[s, i] < 0.5 * W[t, i] * (1 - 1e-12):
                    viol.append((int(t) + 1, int(i), int(s) + 1))
    if viol:
        raise BalanceViolation(f"not-too-far violated at {len(viol)} places: {viol[:20]}", viol)
    return checked
