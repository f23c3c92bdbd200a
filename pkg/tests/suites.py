"""Randomized property suites shared by the unit tests and the acceptance run.

Each suite draws its instances from a fixed seed, checks one property on every
instance and returns a :class:`SuiteResult` listing any violations.
"""

from dataclasses import dataclass, field

import numpy as np

import oracles
from omdlab.balance import (balance_report, entropy_gradient_ceiling, max_step_audit, not_too_far_audit,
                            simplex_coordinate_bounds_check, trajectory_balance, trajectory_difference_check)
from omdlab.exceptions import BalanceViolation
from omdlab.geometry import Domain, Point, Regularizer, bregman
from omdlab.subproblem import StepObjective, certify, exact_step
from omdlab.trajectories import run_exact, run_honest_inexact

N = 200

REGS = (Regularizer.neg_entropy(), Regularizer.log_barrier(), Regularizer.tsallis(0.5),
        Regularizer.tsallis(0.3), Regularizer.euclidean(1.0))
BARRIERS = REGS[:4]


@dataclass
class SuiteResult:
    name: str
    instances: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.instances >= N and not self.violations

    def line(self) -> str:
        return f"{self.name}: {self.instances} instances, {len(self.violations)} violations"


def _kw(reg):
    if reg.kind == "tsallis":
        return {"q": reg.q}
    if reg.kind == "euclidean":
        return {"beta": reg.beta}
    return {}


def _interior(rng, d, floor=0.02):
    return rng.dirichlet(np.ones(d)) * (1 - floor) + floor / d


def _losses(rng, T, d):
    return rng.uniform(-1, 1, (T, d))


def _kernel_vector(rng, d):
    v = rng.normal(size=d)
    v -= v.mean()
    return v / np.sum(np.abs(v))


def three_points(seed=1) -> SuiteResult:
    """D(x,y) + D(y,z) - D(x,z) = <grad R(z) - grad R(y), x - y>."""
    res = SuiteResult("three-points identity")
    rng = np.random.default_rng(seed)
    for n in range(N):
        reg = REGS[n % len(REGS)]
        d = int(rng.integers(1, 6))
        x, y, z = (_interior(rng, d) for _ in range(3))
        lhs = bregman(reg, x, y) + bregman(reg, y, z) - bregman(reg, x, z)
        rhs = float((reg.dr(z) - reg.dr(y)) @ (x - y))
        scale = 1.0 + abs(bregman(reg, x, z)) + float(np.sum(np.abs(reg.dr(z)) + np.abs(reg.dr(y))))
        if abs(lhs - rhs) > 1e-11 * scale:
            res.violations.append((n, reg.label, lhs, rhs))
        res.instances += 1
    return res


def _random_exact(rng, n, T=25):
    reg = BARRIERS[n % len(BARRIERS)]
    d = int(rng.integers(2, 5))
    eta = float(rng.uniform(0.02, 0.25))
    return run_exact(Domain.simplex(d), reg, _losses(rng, T, d), eta)


def balance_identity(seed=2) -> SuiteResult:
    """Exact OMD: B^v(t1, t2) = eta <l_{t1:t2}, v>."""
    res = SuiteResult("balance identity")
    rng = np.random.default_rng(seed)
    for n in range(N):
        traj = _random_exact(rng, n)
        v = _kernel_vector(rng, traj.d)
        t1, t2 = sorted(int(t) for t in rng.integers(1, traj.T + 2, size=2))
        lhs = trajectory_balance(traj, v, t1, t2)
        rhs = traj.eta * float(traj.losses[t1 - 1:t2 - 1].sum(axis=0) @ v)
        if abs(lhs - rhs) > 1e-9:
            res.violations.append((n, t1, t2, lhs, rhs))
        res.instances += 1
    return res


def _random_honest(rng, n, T=25, regs=BARRIERS, eta_max=0.25):
    reg = regs[n % len(regs)]
    d = int(rng.integers(2, 5))
    eta = float(rng.uniform(0.01, eta_max))
    eps = float(10 ** rng.uniform(-10, -5))
    L = _losses(rng, T, d)
    return run_honest_inexact(Domain.simplex(d), reg, L, eta, eps, noise_policy="saturating",
                              seed=int(rng.integers(2**31)))


def balance_additivity(seed=3) -> SuiteResult:
    """B(t1, t2) + B(t2, t3) = B(t1, t3) on inexact trajectories."""
    res = SuiteResult("balance additivity")
    rng = np.random.default_rng(seed)
    for n in range(N):
        traj = _random_honest(rng, n)
        v = _kernel_vector(rng, traj.d)
        t1, t2, t3 = sorted(int(t) for t in rng.integers(1, traj.T + 2, size=3))
        a = trajectory_balance(traj, v, t1, t2)
        b = trajectory_balance(traj, v, t2, t3)
        c = trajectory_balance(traj, v, t1, t3)
        G = np.abs(traj.reg.dr_from_log(traj.log_coords())).max()
        if abs(a + b - c) > 1e-12 * max(1.0, G):
            res.violations.append((n, t1, t2, t3, a + b - c))
        res.instances += 1
    return res


def trajectory_difference(seed=4) -> SuiteResult:
    """Approximate balance <= exact balance + (t2 - t1) sqrt(c2 eps / psi^nu)."""
    res = SuiteResult("trajectory-difference bound")
    rng = np.random.default_rng(seed)
    for n in range(N):
        reg = BARRIERS[n % len(BARRIERS)]
        d = int(rng.integers(2, 5))
        eta = float(rng.uniform(0.01, 0.2))
        eps = float(10 ** rng.uniform(-10, -6))
        L = _losses(rng, 25, d)
        dom = Domain.simplex(d)
        exact = run_exact(dom, reg, L, eta)
        approx = run_honest_inexact(dom, reg, L, eta, eps, noise_policy="saturating",
                                    seed=int(rng.integers(2**31)))
        t1, t2 = sorted(int(t) for t in rng.integers(1, 27, size=2))
        psi = float(approx.coords()[t1 - 1:t2].min())
        v = _kernel_vector(rng, d)
        try:
            trajectory_difference_check(exact, approx, v, t1, t2, psi)
        except BalanceViolation as exc:
            res.violations.append((n, str(exc)))
        res.instances += 1
    return res


def gradient_ceiling(seed=5) -> SuiteResult:
    """-r'(w_t^i) <= max{4kd - r'(1/d), -r'(1/2d)} for k-balanced runs from uniform."""
    res = SuiteResult("entropy gradient ceiling")
    rng = np.random.default_rng(seed)
    for n in range(N):
        traj = _random_honest(rng, n, T=40) if n % 2 else _random_exact(rng, n, T=40)
        k = balance_report(traj).k_balanced_at
        try:
            entropy_gradient_ceiling(traj, k)
        except BalanceViolation as exc:
            res.violations.append((n, str(exc)))
        res.instances += 1
    return res


def coordinate_bounds(seed=6) -> SuiteResult:
    """Coordinate-ratio implications of B^i(t1, t2) <= k on the simplex."""
    res = SuiteResult("simplex coordinate bounds")
    rng = np.random.default_rng(seed)
    for n in range(N):
        traj = _random_honest(rng, n) if n % 2 else _random_exact(rng, n)
        d = traj.d
        i_star = int(np.argmin(traj.losses.sum(axis=0)))
        i = int(rng.choice([j for j in range(d) if j != i_star]))
        t1, t2 = sorted(int(t) for t in rng.integers(1, traj.T + 2, size=2))
        v = np.zeros(d)
        v[i_star], v[i] = 1.0, -1.0
        k = max(trajectory_balance(traj, v, t1, t2), 0.0) + float(rng.uniform(0, 0.1))
        try:
            simplex_coordinate_bounds_check(traj, i, i_star, t1, t2, k)
        except BalanceViolation as exc:
            res.violations.append((n, str(exc)))
        res.instances += 1
    return res


def step_audits(seed=7) -> SuiteResult:
    """Max-step and not-too-far audits on inexact runs with eta <= 1/(16 c1)."""
    res = SuiteResult("max-step and not-too-far audits")
    rng = np.random.default_rng(seed)
    for n in range(N):
        reg = BARRIERS[n % len(BARRIERS)]
        traj = _random_honest(rng, n, T=30, regs=(reg,), eta_max=1.0 / (16 * reg.c1))
        try:
            max_step_audit(traj)
            not_too_far_audit(traj)
        except BalanceViolation as exc:
            res.violations.append((n, str(exc)))
        res.instances += 1
    return res


def solver_vs_grid(seed=8) -> SuiteResult:
    """Exact steps match a brute-force grid within 1e-6; lower bounds never exceed it."""
    res = SuiteResult("solver vs grid oracle")
    rng = np.random.default_rng(seed)
    for n in range(N):
        reg = REGS[n % len(REGS)]
        d = 2 + n % 3
        anchor = _interior(rng, d, 0.1)
        loss = rng.uniform(-1, 1, d)
        eta = float(rng.uniform(0.05, 1.0))
        obj = StepObjective(eta, loss, Point.with_logs(anchor), reg, Domain.simplex(d))
        _, cert = exact_step(obj)
        grid_val, _ = oracles.grid_minimum(reg.kind, eta, loss, anchor, **_kw(reg))
        cand = _interior(rng, d, 0.1)
        _, cand_cert = certify(obj, cand, 1.0)
        if abs(cert.value_at_candidate - grid_val) > 1e-6:
            res.violations.append((n, "value", cert.value_at_candidate, grid_val))
        if cert.min_lower_bound > grid_val + 1e-12 or cand_cert.min_lower_bound > grid_val + 1e-12:
            res.violations.append((n, "lower bound", cert.min_lower_bound, cand_cert.min_lower_bound, grid_val))
        res.instances += 1
    return res


ALL = (three_points, balance_identity, balance_additivity, trajectory_difference, gradient_ceiling,
       coordinate_bounds, step_audits, solver_vs_grid)
