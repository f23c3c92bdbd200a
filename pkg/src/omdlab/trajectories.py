"""Exact, honest-inexact and adversarial mirror-descent trajectories, and regret."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .exceptions import (CertificationError, EventNotSatisfied, PreconditionError,
                         ResolutionError, SolverError)
from .geometry import Domain, Point, Regularizer, as_point, kernel_basis
from .instances import HardPolytope, hardness_event, stuck_tau
from .subproblem import DualPoint, StepObjective, _exact_simplex, certify, solve

__all__ = [
    "Trajectory",
    "RegretReport",
    "run_exact",
    "run_honest_inexact",
    "run_ftrl_approx",
    "build_smooth_stuck",
    "build_entropy_stuck",
    "build_dimension_stuck",
    "build_polytope_stuck",
    "regret",
    "best_in_hindsight",
    "RESOLUTION_FLOOR",
    "EXACT_GAP",
]

RESOLUTION_FLOOR = 1e-12
EXACT_GAP = 1e-12


@dataclass(frozen=True, eq=False)
class Trajectory:
    iterates: list
    losses: np.ndarray
    eta: float
    eps: float
    certificates: list
    kind: str
    reg: Regularizer
    dom: Domain
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.losses.shape[0])

    @property
    def d(self) -> int:
        return self.dom.d

    def coords(self) -> np.ndarray:
        """(T+1, d) array of iterates."""
        return np.vstack([p.coords for p in self.iterates])

    def log_coords(self) -> np.ndarray:
        return np.vstack([p.logs() for p in self.iterates])

    def max_slack(self) -> float:
        return max((c.slack for c in self.certificates), default=0.0)

    def slacks(self) -> np.ndarray:
        return np.array([c.slack for c in self.certificates])


@dataclass(frozen=True, eq=False)
class RegretReport:
    cumulative_loss: float
    comparator_loss: float
    regret: float
    comparator: Point
    per_round_regret: np.ndarray

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.per_round_regret)


def _losses(losses, d: int) -> np.ndarray:
    L = getattr(losses, "realized", losses)
    L = np.array(L, dtype=float, copy=True)
    if L.ndim != 2 or L.shape[1] != d:
        raise ValueError(f"losses must be a (T, {d}) array")
    L.setflags(write=False)
    return L


def _start(dom: Domain, reg: Regularizer, w1) -> Point:
    p = dom.uniform() if w1 is None else as_point(w1)
    dom.check_feasible(p)
    if reg.kind == "neg_entropy" and p.log_coords is None:
        p = Point.with_logs(p.coords)
    if reg.is_barrier and not np.all(p.logs() > -np.inf):
        raise PreconditionError("initial point must be interior for a barrier regularizer")
    return p


def _solve_round(obj: StepObjective, t: int):
    try:
        return solve(obj, EXACT_GAP)
    except SolverError as exc:
        exc.round_index = t
        raise


def run_exact(dom: Domain, reg: Regularizer, losses, eta: float, w1=None) -> Trajectory:
    """Exact OMD: every iterate is the certified minimizer of the round objective."""
    L = _losses(losses, dom.d)
    w = _start(dom, reg, w1)
    iterates, certs = [w], []
    for t in range(L.shape[0]):
        w, cert = _solve_round(StepObjective(eta, L[t], w, reg, dom), t + 1)
        iterates.append(w)
        certs.append(cert)
    return Trajectory(iterates, L, float(eta), 0.0, certs, "exact", reg, dom)


# ---------------------------------------------------------------------------
# honest producers
# ---------------------------------------------------------------------------


def _kernel_projector(dom: Domain) -> np.ndarray:
    if dom.kind == "interval":
        return np.ones((1, 1))
    V = kernel_basis(dom)
    Q, _ = np.linalg.qr(V.T)
    return Q


def _random_direction(Q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(Q.shape[1])
    u = Q @ z
    return u / np.linalg.norm(u)


def _max_step(dom: Domain, reg: Regularizer, x: np.ndarray, u: np.ndarray) -> float:
    """Largest s with x + s u feasible and every coordinate >= half its value."""
    if dom.kind == "interval":
        lo, hi = dom.lo, dom.hi
        s = math.inf
        if u[0] > 0:
            s = (hi - x[0]) / u[0]
        elif u[0] < 0:
            s = (x[0] - lo) / -u[0]
        return s
    neg = u < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(0.5 * x[neg] / -u[neg]))


def _saturate(obj: StepObjective, exact: Point, dual: DualPoint, method: str, eps: float,
              rng: np.random.Generator, Q: np.ndarray):
    """Move from the exact point along a random kernel direction until slack is in [eps/2, eps].

    The slack grows roughly like s^2 along the line, so the step is found by
    secant iteration on log(slack) against log(s), safeguarded by bisection.
    """
    x0 = exact.coords
    reg, dom = obj.reg, obj.dom
    entropy = reg.kind == "neg_entropy"
    u0 = _random_direction(Q, rng)
    curv = reg.beta if reg.kind == "euclidean" else float(np.sum(u0 * u0 * reg.d2r(x0)))
    lo_t, hi_t = 0.5 * eps, eps
    target = math.log(0.75 * eps)

    def at(s, u):
        x = x0 + s * u
        if not dual.finite:
            return Point(x), math.inf
        if x.min() > 0:
            # strictly interior: the unchecked slack is safe
            p = Point._fresh(x, np.log(x)) if entropy else Point._fresh(x)
            return p, dual._slack(p, False)
        p = Point.with_logs(x) if entropy else Point(x)
        return p, dual.slack(p)

    for u in (u0, -u0):
        s_max = _max_step(dom, reg, x0, u)
        if not s_max > 0:
            continue
        s_cap = 0.999 * s_max if math.isfinite(s_max) else math.inf
        lo = hi = None          # (log s, log slack) below / above target band
        if math.isfinite(s_cap):
            p, sl = at(s_cap, u)
            if sl < lo_t:
                continue
            if sl <= hi_t:
                return p, dual.certificate(p, method, sl)
            hi = (math.log(s_cap), math.log(sl))
        s = min(math.sqrt(1.5 * eps / curv), 0.5 * s_cap) if curv > 0 else 0.5 * s_cap
        for _ in range(200):
            p, sl = at(s, u)
            if lo_t <= sl <= hi_t:
                return p, dual.certificate(p, method, sl)
            point = (math.log(s), math.log(sl) if sl > 0 else -math.inf)
            if sl < lo_t:
                lo = point
            else:
                hi = point
            if lo is None:
                s = 0.5 * s
                continue
            if hi is None:
                s = 4.0 * s
                continue
            guess = None
            if math.isfinite(lo[1]) and hi[1] > lo[1]:
                guess = lo[0] + (target - lo[1]) * (hi[0] - lo[0]) / (hi[1] - lo[1])
            if guess is None or not (lo[0] < guess < hi[0]):
                guess = 0.5 * (lo[0] + hi[0])
            s = math.exp(guess)
    return None


def _honest_step(obj: StepObjective, eps: float, policy: str, rng, Q):
    if obj.dom.kind in ("simplex", "interval"):
        exact, mu, method = _exact_simplex(obj)
        dual = DualPoint(obj, mu)
    else:
        exact, cert = solve(obj, EXACT_GAP)
        dual, method = DualPoint(obj, cert.multipliers), cert.method
    if policy == "saturating":
        out = _saturate(obj, exact, dual, method, eps, rng, Q)
        if out is not None:
            return out[0], out[1], False
    return exact, dual.certificate(exact, method), policy == "saturating"


def _policy_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed) & (2**64 - 1))))


def run_honest_inexact(dom: Domain, reg: Regularizer, losses, eta: float, eps: float, w1=None,
                       noise_policy: str = "tight", seed: int = 0) -> Trajectory:
    """OMD where every step is a certified eps-minimizer.

    ``tight`` returns the exact solution (slack far below eps/10).
    ``saturating`` perturbs it along a uniformly random kernel direction so
    the certified slack lies in [eps/2, eps].  Rounds where that is not
    possible keep the exact point and are counted in ``meta['fallback_rounds']``.
    """
    if eps < RESOLUTION_FLOOR:
        raise ResolutionError(f"eps={eps:g} is below the certification floor {RESOLUTION_FLOOR:g}")
    if noise_policy not in ("tight", "saturating"):
        raise ValueError(f"unknown noise policy {noise_policy!r}")
    L = _losses(losses, dom.d)
    w = _start(dom, reg, w1)
    rng = _policy_rng(seed)
    Q = _kernel_projector(dom)
    iterates, certs, fallback = [w], [], []
    for t in range(L.shape[0]):
        obj = StepObjective(eta, L[t], w, reg, dom)
        try:
            w, cert, fb = _honest_step(obj, eps, noise_policy, rng, Q)
        except SolverError as exc:
            exc.round_index = t + 1
            raise
        if cert.slack > eps:
            raise CertificationError(f"round {t + 1}: slack {cert.slack:.3e} exceeds eps {eps:.3e}")
        if fb:
            fallback.append(t + 1)
        iterates.append(w)
        certs.append(cert)
    meta = {"noise_policy": noise_policy, "seed": seed, "fallback_rounds": fallback,
            "warning": bool(fallback) and noise_policy == "saturating"}
    return Trajectory(iterates, L, float(eta), float(eps), certs, "honest", reg, dom, meta)


def run_ftrl_approx(dom: Domain, reg: Regularizer, losses, eta: float, eps: float,
                    noise_policy: str = "tight", seed: int = 0) -> Trajectory:
    """Approximate FTRL: each iterate eps-minimizes eta * <L_{1:t}, w> + R(w).

    The first iterate is the regularizer's minimizer, the uniform point.  On a
    simplex-like domain R(w) differs from D_R(w || uniform) by a constant, so
    each round is a mirror step anchored at the uniform point with the
    cumulative loss; certificates carry the same slack.
    """
    if eps < RESOLUTION_FLOOR:
        raise ResolutionError(f"eps={eps:g} is below the certification floor {RESOLUTION_FLOOR:g}")
    if not dom.is_simplex_subset():
        raise PreconditionError("approximate FTRL is implemented for simplex-like domains")
    L = _losses(losses, dom.d)
    u = _start(dom, reg, None)
    rng = _policy_rng(seed)
    Q = _kernel_projector(dom)
    cum = np.zeros(dom.d)
    iterates, certs, fallback = [u], [], []
    for t in range(L.shape[0]):
        cum = cum + L[t]
        obj = StepObjective(eta, cum, u, reg, dom)
        w, cert, fb = _honest_step(obj, eps, noise_policy, rng, Q)
        if cert.slack > eps:
            raise CertificationError(f"round {t + 1}: slack {cert.slack:.3e} exceeds eps {eps:.3e}")
        if fb:
            fallback.append(t + 1)
        iterates.append(w)
        certs.append(cert)
    meta = {"noise_policy": noise_policy, "seed": seed, "fallback_rounds": fallback,
            "warning": bool(fallback) and noise_policy == "saturating"}
    return Trajectory(iterates, L, float(eta), float(eps), certs, "ftrl", reg, dom, meta)


def ftrl_bound(reg: Regularizer, comparator, w1, eta: float, eps: float, T: int) -> float:
    """(R(w*) - R(w1)) / eta + (2 eta + sqrt(2 eps)) T."""
    r_star = math.fsum(reg.r(as_point(comparator).coords).tolist())
    r_one = math.fsum(reg.r(as_point(w1).coords).tolist())
    return (r_star - r_one) / eta + (2 * eta + math.sqrt(2 * eps)) * T


# ---------------------------------------------------------------------------
# adversarial constructors
# ---------------------------------------------------------------------------


def _require(ok: bool, msg: str):
    if not ok:
        raise CertificationError(msg)


def build_smooth_stuck(D: float, beta: float, eps: float, eta: float, T: int) -> Trajectory:
    """Euclidean iterates frozen at D/2 under the constant loss min(sqrt(2 beta eps)/eta, 1)."""
    dom = Domain.interval(0.0, D)
    reg = Regularizer.euclidean(beta)
    ell = min(math.sqrt(2.0 * beta * eps) / eta, 1.0)
    L = np.full((T, 1), ell)
    L.setflags(write=False)
    w = Point([D / 2.0])
    obj = StepObjective(eta, [ell], w, reg, dom)
    ok, cert = certify(obj, w, eps)
    _require(ok, f"frozen point not an eps-minimizer: slack {cert.slack:.3e} > eps {eps:.3e}")
    certs = [cert] * T
    meta = {"loss": ell, "predicted_slack": eta**2 * ell**2 / (2 * beta),
            "predicted_regret": ell * T * D / 2.0, "comparator": Point([0.0])}
    return Trajectory([w] * (T + 1), L, float(eta), float(eps), certs, "adversarial", reg, dom, meta)


def stuck_criterion_value(reg: Regularizer, w: float, eta: float) -> float:
    return 4.0 * eta / reg.c1 * w**reg.nu


def build_entropy_stuck(alpha: float, eps: float, eta: float, T: int, check_threshold: bool = True) -> Trajectory:
    """Two-arm entropy trajectory that follows exact OMD for tau rounds, then freezes.

    Losses are (1, 0) for tau = ceil(log(4 eta / eps) / eta) rounds, then
    (0, 1).  After tau exact steps the first coordinate is at most
    eps / (4 eta), so staying put is an eps-approximate step for the rest.
    """
    if check_threshold and eps < 4 * eta * math.exp(-eta * alpha) * (1 - 1e-12):
        raise PreconditionError(
            f"entropy stuck construction needs eps >= 4*eta*exp(-eta*alpha) "
            f"= {4 * eta * math.exp(-eta * alpha):.3e}; got {eps:.3e}")
    if alpha > T / 2:
        raise PreconditionError("entropy stuck construction needs alpha <= T/2")
    if not eps < 4 * eta:
        raise PreconditionError("entropy stuck construction needs eps < 4*eta")
    tau = stuck_tau(eta, eps)
    if tau >= T:
        raise PreconditionError(f"switch time tau={tau} is not below T={T}")
    dom, reg = Domain.simplex(2), Regularizer.neg_entropy()
    L = np.vstack([np.tile([1.0, 0.0], (tau, 1)), np.tile([0.0, 1.0], (T - tau, 1))])
    L.setflags(write=False)
    w = dom.uniform()
    iterates, certs = [w], []
    for t in range(tau):
        w, cert = _solve_round(StepObjective(eta, L[t], w, reg, dom), t + 1)
        iterates.append(w)
        certs.append(cert)
    frozen = w
    delta = float(frozen.coords[0])
    crit = stuck_criterion_value(reg, delta, eta)
    if not crit <= eps:
        raise CertificationError(f"stuck criterion fails: 4*eta*w = {crit:.3e} > eps {eps:.3e}")
    obj = StepObjective(eta, L[tau], frozen, reg, dom)
    relaxed = eps < RESOLUTION_FLOOR
    ok, cert = certify(obj, frozen, eps)
    if not relaxed:
        _require(ok, f"frozen step slack {cert.slack:.3e} exceeds eps {eps:.3e}")
    else:
        cert = cert.relaxed("analytic: eps below certification floor")
    for t in range(tau, T):
        iterates.append(frozen)
        certs.append(cert)
    head = math.fsum(p.coords[0] for p in iterates[:tau])
    predicted = head + (T - tau) * float(frozen.coords[1]) - min(tau, T - tau)
    meta = {"tau": tau, "frozen": frozen, "delta": delta, "stuck_value": crit,
            "predicted_regret": predicted, "relaxed": relaxed,
            "frozen_rounds": list(range(tau + 1, T + 1))}
    return Trajectory(iterates, L, float(eta), float(eps), certs, "adversarial", reg, dom, meta)


def regularizer_for(nu: float, c1: float) -> Regularizer:
    if nu == 1 and c1 == 1:
        return Regularizer.neg_entropy()
    if nu == 2 and c1 == 1:
        return Regularizer.log_barrier()
    if 1 < nu < 2 and abs(c1 - (2 - nu)) < 1e-12:
        return Regularizer.tsallis(2 - nu)
    raise ValueError(f"no built-in regularizer with nu={nu}, c1={c1}; pass reg explicitly")


def build_dimension_stuck(d: int, nu: float, c1: float, eps: float, eta: float, T: int,
                          reg: Optional[Regularizer] = None) -> Trajectory:
    """Uniform iterates under the constant loss (1, ..., 1, 0)."""
    threshold = 4 * eta**2 / (c1 * d**nu)
    if eps < threshold * (1 - 1e-12):
        raise PreconditionError(
            f"dimension construction needs eps >= 4*eta^2/(c1*d^nu) = {threshold:.3e}; got {eps:.3e}")
    reg = reg or regularizer_for(nu, c1)
    dom = Domain.simplex(d)
    vec = np.ones(d)
    vec[-1] = 0.0
    L = np.tile(vec, (T, 1))
    L.setflags(write=False)
    w = _start(dom, reg, None)
    certs = []
    for t in range(T):
        ok, cert = certify(StepObjective(eta, L[t], w, reg, dom), w, eps)
        _require(ok, f"round {t + 1}: uniform point slack {cert.slack:.3e} > eps {eps:.3e}")
        certs.append(cert)
    e_d = np.zeros(d)
    e_d[-1] = 1.0
    meta = {"predicted_regret": T * (1.0 - 1.0 / d), "comparator": Point(e_d), "threshold": threshold}
    return Trajectory([w] * (T + 1), L, float(eta), float(eps), certs, "adversarial", reg, dom, meta)


def build_polytope_stuck(hard: HardPolytope, losses, eta: float, eps: float,
                         require_event: bool = True) -> Trajectory:
    """Entropy trajectory on the hard polytope that pins the last kernel coefficient.

    Exact steps for the first tau rounds; afterwards each round takes the
    exact step and, when it would raise the coefficient of the last kernel
    vector, resets that coefficient to its previous value.  Every modified
    step is certified at ``eps``.
    """
    if not eps < 4 * eta:
        raise PreconditionError("polytope construction needs eps < 4*eta")
    L = _losses(losses, hard.d)
    m, tau = hard.m, hard.tau
    if require_event and not hardness_event(L, m, tau):
        raise EventNotSatisfied("supplied losses do not satisfy the hardness event")
    dom, reg = hard.domain, Regularizer.neg_entropy()
    V = hard.basis
    w = hard.w1
    iterates, certs, alphas = [w], [], [np.zeros(m + 1)]
    pin_bound = -1.0 / hard.d + math.exp(-m / 8.0)
    modified = []
    for t in range(L.shape[0]):
        obj = StepObjective(eta, L[t], w, reg, dom)
        exact, cert = _solve_round(obj, t + 1)
        a_exact = hard.alpha(exact.coords)
        if t + 1 > tau and a_exact[m] > alphas[-1][m]:
            a_new = a_exact.copy()
            a_new[m] = alphas[-1][m]
            x = exact.coords + (a_new[m] - a_exact[m]) * V[m]
            if not np.all(x > 0):
                raise CertificationError(f"round {t + 1}: modified step leaves the positive orthant")
            cand = Point.with_logs(x)
            ok, cert = certify(obj, cand, eps)
            _require(ok, f"round {t + 1}: modified step slack {cert.slack:.3e} > eps {eps:.3e}")
            exact, a_exact = cand, a_new
            modified.append(t + 1)
        w = exact
        iterates.append(w)
        certs.append(cert)
        alphas.append(a_exact)
    alphas = np.vstack(alphas)
    post = alphas[tau:, m]
    meta = {"tau": tau, "m": m, "alphas": alphas, "modified_rounds": modified,
            "pin_bound": pin_bound, "max_pinned": float(np.max(post)),
            "min_block_coord": float(min(p.coords[5 * m] for p in iterates[tau:])),
            "comparator": Point(np.maximum(hard.comparator(), 0.0)),
            "event": hardness_event(L, m, tau)}
    return Trajectory(iterates, L, float(eta), float(eps), certs, "adversarial", reg, dom, meta)


# ---------------------------------------------------------------------------
# regret
# ---------------------------------------------------------------------------


def best_in_hindsight(dom: Domain, total_loss) -> Point:
    """A domain vertex minimizing <total_loss, w> (lowest index on ties for the simplex)."""
    c = np.asarray(total_loss, dtype=float)
    if dom.kind == "simplex":
        e = np.zeros(dom.d)
        e[int(np.argmin(c))] = 1.0
        return Point(e)
    if dom.kind == "interval":
        return Point([dom.lo if c[0] >= 0 else dom.hi])
    A, b = dom.equality_constraints()
    k, d = A.shape
    if k <= 20 and math.comb(d, k) <= 20000:
        best, best_val = None, math.inf
        for cols in itertools.combinations(range(d), k):
            B = A[:, cols]
            if abs(np.linalg.det(B)) < 1e-12:
                continue
            xb = np.linalg.solve(B, b)
            if np.any(xb < -1e-12):
                continue
            x = np.zeros(d)
            x[list(cols)] = np.maximum(xb, 0.0)
            val = float(c @ x)
            if val < best_val - 1e-12:
                best, best_val = x, val
        if best is not None:
            return Point(best)
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise SolverError(f"best-in-hindsight LP failed: {res.message}")
    return Point(np.maximum(res.x, 0.0))


def regret(traj: Trajectory, comparator=None) -> RegretReport:
    """Regret of the iterates w_1..w_T against a comparator (best in hindsight by default)."""
    L = traj.losses
    W = traj.coords()[:-1]
    if comparator is None:
        comparator = best_in_hindsight(traj.dom, L.sum(axis=0))
    comp = as_point(comparator)
    alg = np.einsum("td,td->t", L, W)
    ref = L @ comp.coords
    per_round = alg - ref
    cum = math.fsum(alg.tolist())
    comp_loss = math.fsum(ref.tolist())
    return RegretReport(cum, comp_loss, cum - comp_loss, comp, per_round)
