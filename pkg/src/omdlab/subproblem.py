"""The per-round mirror-descent objective and its certified solvers.

For a step size ``eta``, loss vector ``l`` and anchor ``a`` (the previous
iterate) the round objective is

    phi(w) = eta * <l, w> + D_R(w || a)

minimized over the decision set.  Every solver returns a
:class:`StepCertificate` whose ``min_lower_bound`` is a provable lower bound
on the minimum, so ``slack`` bounds the suboptimality of the returned point.

Dual certificates
-----------------
For multipliers ``mu`` of the equality constraints ``A w = b`` let ``w(mu)``
minimize the Lagrangian ``L(w, mu) = phi(w) - mu^T (A w - b)`` over the box
(``w >= 0`` or the interval).  Weak duality gives ``L(w(mu), mu) <= min phi``.
Expanding ``phi(c) - L(w(mu), mu)`` around ``w(mu)`` yields

    slack = D_R(c || w(mu)) + <grad_w L(w(mu)), c - w(mu)> + mu^T (A c - b)

where the middle term vanishes on interior coordinates.  All three terms are
computed directly, so small slacks do not suffer from cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .exceptions import InfeasiblePointError, OptimalityGapViolation, SolverError
from .geometry import Domain, Point, Regularizer, as_point, bregman_terms

__all__ = [
    "StepObjective",
    "StepCertificate",
    "objective_eval",
    "objective_grad",
    "exact_step",
    "exact_step_polytope",
    "dual_certificate",
    "DualPoint",
    "certify",
    "approx_optimality_gap",
    "FEASIBILITY_TOL",
]

FEASIBILITY_TOL = 1e-9
FW_MAX_ITER = 1_000_000


@dataclass(frozen=True, eq=False)
class StepObjective:
    eta: float
    loss: np.ndarray
    anchor: Point
    reg: Regularizer
    dom: Domain

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        loss = np.array(self.loss, dtype=float, copy=True).reshape(-1)
        loss.setflags(write=False)
        object.__setattr__(self, "loss", loss)
        anchor = as_point(self.anchor)
        if self.reg.kind == "neg_entropy" and anchor.log_coords is None:
            anchor = Point.with_logs(anchor.coords)
        object.__setattr__(self, "anchor", anchor)
        if loss.shape != (self.dom.d,) or anchor.d != self.dom.d:
            raise ValueError(f"loss/anchor dimension does not match domain dimension {self.dom.d}")
        if self.reg.is_barrier and not np.all(anchor.logs() > -np.inf):
            raise InfeasiblePointError("anchor must be interior for a barrier regularizer", kind="interior")

    @property
    def d(self) -> int:
        return self.dom.d


@dataclass(frozen=True, eq=False)
class StepCertificate:
    """Value at a candidate and a certified lower bound on the round minimum."""

    value_at_candidate: float
    min_lower_bound: float
    slack: float
    method: str
    multipliers: Optional[np.ndarray] = field(default=None, repr=False)
    note: str = ""

    def relaxed(self, note: str) -> "StepCertificate":
        return StepCertificate(self.value_at_candidate, self.min_lower_bound, self.slack,
                               self.method, self.multipliers, note)


def logsumexp(x) -> float:
    x = np.asarray(x, dtype=float)
    top = float(np.max(x))
    return top + math.log(float(np.sum(np.exp(x - top))))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def objective_eval(obj: StepObjective, w, check: bool = True) -> float:
    """Compensated-sum evaluation of ``eta <l, w> + D_R(w || anchor)``."""
    p = as_point(w)
    if check:
        obj.dom.check_feasible(p, FEASIBILITY_TOL)
    lin = obj.eta * obj.loss * p.coords
    terms = bregman_terms(obj.reg, p, obj.anchor)
    return math.fsum(np.concatenate([lin, terms]).tolist())


def _anchor_grad(obj: StepObjective) -> np.ndarray:
    if obj.reg.is_barrier:
        return obj.reg.dr_from_log(obj.anchor.logs())
    return obj.reg.dr(obj.anchor.coords)


def objective_grad(obj: StepObjective, w) -> np.ndarray:
    """Gradient ``eta l + grad R(w) - grad R(anchor)``."""
    p = as_point(w)
    if obj.reg.is_barrier:
        g = obj.reg.dr_from_log(p.logs())
    else:
        g = obj.reg.dr(p.coords)
    return obj.eta * obj.loss + g - _anchor_grad(obj)


def _point_from(reg: Regularizer, coords, logs=None) -> Point:
    if reg.kind == "neg_entropy":
        if logs is None:
            return Point.with_logs(coords)
        return Point(coords, logs)
    return Point(coords)


# ---------------------------------------------------------------------------
# dual point and certificate
# ---------------------------------------------------------------------------


def _dual_point(obj: StepObjective, mu):
    """Box-argmin of the Lagrangian at multipliers ``mu``.

    Returns ``(coords, logs, clipped_grad)`` where ``clipped_grad`` is
    ``grad_w L`` at the returned point (nonzero only on clipped coordinates).
    """
    A, _ = obj.dom.equality_constraints()
    mu = np.asarray(mu, dtype=float).reshape(-1)
    shift = A.T @ mu if A.shape[0] else np.zeros(obj.d)
    g = _anchor_grad(obj) - obj.eta * obj.loss + shift
    reg = obj.reg
    if reg.is_barrier:
        logs = reg.log_inv_dr(g)
        coords = np.exp(logs)
        return coords, logs, np.zeros(obj.d)
    lo, hi = obj.dom.bounds()
    raw = reg.inv_dr(g)
    coords = np.clip(raw, lo, hi)
    clipped = reg.dr(coords) - g
    return coords, None, np.where(coords != raw, clipped, 0.0)


class DualPoint:
    """The Lagrangian box-argmin at fixed multipliers, reusable across candidates."""

    def __init__(self, obj: StepObjective, mu):
        self.obj = obj
        self.mu = np.array(mu, dtype=float).reshape(-1)
        coords, logs, self.grad_l = _dual_point(obj, self.mu)
        self.finite = bool(np.all(np.isfinite(coords)))
        # _dual_point returns new arrays, so they can be frozen in place
        self.point = Point._fresh(coords, logs) if self.finite else None
        self.A, self.b = obj.dom.equality_constraints()

    def slack(self, candidate) -> float:
        if not self.finite:
            return math.inf
        return self._slack(as_point(candidate), True)

    def _slack(self, c: Point, check: bool) -> float:
        parts = bregman_terms(self.obj.reg, c, self.point, check)
        parts = np.concatenate([parts, self.grad_l * (c.coords - self.point.coords)])
        if self.A.shape[0]:
            parts = np.concatenate([parts, self.mu * (self.A @ c.coords - self.b)])
        return max(math.fsum(parts.tolist()), 0.0)

    def certificate(self, candidate, method: str, slack: Optional[float] = None) -> StepCertificate:
        """Certificate for ``candidate``; pass ``slack`` when it was just computed by :meth:`slack`."""
        c = as_point(candidate)
        value = objective_eval(self.obj, c, check=False)
        if slack is None:
            slack = self.slack(c)
        return StepCertificate(value, value - slack, slack, method, self.mu.copy())


def dual_certificate(obj: StepObjective, candidate, mu, method: str) -> StepCertificate:
    """Certificate for ``candidate`` from the dual point at multipliers ``mu``."""
    return DualPoint(obj, mu).certificate(candidate, method)


# ---------------------------------------------------------------------------
# exact solvers
# ---------------------------------------------------------------------------


def _simplex_multiplier(obj: StepObjective, max_iter: int = 200) -> float:
    """Solve sum_i w_i(lambda) = 1 by safeguarded Newton inside a fixed bracket.

    Because the anchor sums to one, ``[eta min l, eta max l]`` always brackets
    the root: at the left end every coordinate is at most its anchor value,
    at the right end at least.
    """
    reg = obj.reg
    if reg.kind == "neg_entropy":
        return float(-logsumexp(obj.anchor.logs() - obj.eta * obj.loss))

    # same map as _dual_point with A = 1^T, minus the bookkeeping
    base = _anchor_grad(obj) - obj.eta * obj.loss
    if reg.is_barrier:
        def total(lam):
            coords = reg.inv_dr(base + lam)
            return float(coords.sum()) - 1.0, coords
    else:
        lo_box, hi_box = obj.dom.bounds()

        def total(lam):
            coords = np.clip(reg.inv_dr(base + lam), lo_box, hi_box)
            return float(coords.sum()) - 1.0, coords

    lo = obj.eta * float(np.min(obj.loss))
    hi = obj.eta * float(np.max(obj.loss))
    bracket = (lo, hi)

    def checked(lam):
        # the endpoints are only evaluated when Newton never saw both signs
        if not (seen_pos and seen_neg):
            f_lo, f_hi = total(bracket[0])[0], total(bracket[1])[0]
            if f_lo > 1e-14 or f_hi < -1e-14:
                raise SolverError(f"simplex multiplier bracket failed: f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e}")
        return lam

    seen_pos = seen_neg = False
    if lo == hi:
        return checked(lo)
    # linearize w_i(lam) around the anchor for the starting guess
    inv_h0 = 1.0 / reg.d2r(obj.anchor.coords)
    lam = float(np.sum(obj.eta * obj.loss * inv_h0) / np.sum(inv_h0))
    if not lo < lam < hi:
        lam = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f, coords = total(lam)
        if f == 0.0:
            return lam
        if f > 0:
            hi, seen_pos = lam, True
        else:
            lo, seen_neg = lam, True
        if hi - lo <= 1e-15 * max(1.0, abs(lam)):
            return checked(lam)
        if np.all(np.isfinite(coords)):
            with np.errstate(divide="ignore"):
                inv_h = np.where(coords > 0, 1.0 / reg.d2r(np.maximum(coords, 1e-300)), 0.0)
            slope = float(np.sum(inv_h))
        else:
            slope = 0.0
        step = lam - f / slope if slope > 0 else None
        if step is None or not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if abs(step - lam) <= 1e-16 * max(1.0, abs(lam)):
            return checked(step)
        lam = step
    raise SolverError(f"simplex multiplier did not converge in {max_iter} iterations")


def _exact_simplex(obj: StepObjective):
    """Exact minimizer over a simplex or interval as ``(point, multipliers, method)``."""
    dom, reg = obj.dom, obj.reg
    if dom.kind == "interval":
        if reg.kind != "euclidean":
            raise ValueError("interval domains support the euclidean regularizer only")
        coords, _, _ = _dual_point(obj, np.zeros(0))
        return Point(coords), np.zeros(0), "closed_form"
    if dom.kind != "simplex":
        raise ValueError("exact_step handles simplex and interval domains; use exact_step_polytope")
    lam = _simplex_multiplier(obj)
    coords, logs, _ = _dual_point(obj, [lam])
    if reg.kind == "neg_entropy":
        # already normalized up to rounding; renormalize in log space
        logs = logs - logsumexp(logs)
        return Point._fresh(np.exp(logs), logs), np.array([lam]), "closed_form"
    return Point._fresh(coords / float(np.sum(coords))), np.array([lam]), "dual_root"


def exact_step(obj: StepObjective):
    """Exact minimizer over a simplex or interval, with certificate.

    Entropy on the simplex is the multiplicative-weights update computed in
    the log domain; other regularizers solve for the simplex multiplier by
    root finding; the Euclidean interval case is a clipped gradient step.
    """
    cand, mu, method = _exact_simplex(obj)
    return cand, dual_certificate(obj, cand, mu, method)


def _project_equalities(obj: StepObjective, coords, weights):
    A, b = obj.dom.equality_constraints()
    resid = b - A @ coords
    M = (A * weights) @ A.T
    diag = np.sqrt(np.maximum(np.diag(M), np.finfo(float).tiny))
    y = np.linalg.solve(M / diag / diag[:, None], resid / diag) / diag
    return coords + weights * (A.T @ y)


def _dual_value(obj: StepObjective, mu) -> float:
    coords, logs, _ = _dual_point(obj, mu)
    if not np.all(np.isfinite(coords)):
        return -math.inf
    A, b = obj.dom.equality_constraints()
    w = _point_from(obj.reg, coords, logs)
    parts = list(obj.eta * obj.loss * coords) + list(bregman_terms(obj.reg, w, obj.anchor))
    parts += list(-mu * (A @ coords - b))
    return math.fsum(parts)


def _newton_dual(obj: StepObjective, slack_target: float = 1e-14, max_iter: int = 200):
    """Damped Newton ascent on the concave dual of a barrier polytope step."""
    reg = obj.reg
    if not reg.is_barrier:
        raise ValueError("the dual Newton solver needs a barrier regularizer")
    A, b = obj.dom.equality_constraints()
    mu = np.zeros(A.shape[0])
    g_val = _dual_value(obj, mu)
    best = None
    for it in range(max_iter):
        coords, logs, _ = _dual_point(obj, mu)
        if np.all(np.isfinite(coords)) and np.all(coords > 0):
            weights = 1.0 / reg.d2r(coords)
            proj = _project_equalities(obj, coords, weights)
            resid = np.abs(b - A @ coords)
            rounding = 64 * np.finfo(float).eps * (np.abs(A) @ coords + np.abs(b))
            cand = None
            if np.all(proj > 0):
                cand = _point_from(reg, proj)
            elif np.all(resid <= rounding):
                # rows carried by tiny coordinates cannot absorb a rounding-level
                # residual; the dual point itself is feasible to rounding
                cand = _point_from(reg, coords, logs)
            if cand is not None:
                cert = dual_certificate(obj, cand, mu, "dual_root")
                if best is None or cert.slack < best[1].slack:
                    best = (cand, cert)
                if cert.slack <= slack_target:
                    break
        else:
            weights = None
        if weights is None:
            raise SolverError("dual point left the regularizer's domain", best_gap=None)
        grad = b - A @ coords
        H = (A * weights) @ A.T
        # rows carried by tiny coordinates make H badly scaled; solve with
        # symmetric Jacobi scaling so those rows still get a usable step
        diag = np.sqrt(np.maximum(np.diag(H), np.finfo(float).tiny))
        Hs = H / diag / diag[:, None]
        try:
            step = np.linalg.solve(Hs, grad / diag) / diag
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Hs, grad / diag, rcond=None)[0] / diag
        decrement = float(grad @ step)
        if decrement <= 1e-30:
            break
        t = 1.0
        while t > 1e-12:
            trial = mu + t * step
            g_trial = _dual_value(obj, trial)
            if g_trial >= g_val + 0.25 * t * decrement or (t == 1.0 and decrement < 1e-20):
                break
            t *= 0.5
        if t <= 1e-12:
            break
        mu = mu + t * step
        g_val = max(g_val, _dual_value(obj, mu))
    if best is None:
        raise SolverError("dual Newton produced no interior candidate")
    return best


def _lmo(obj: StepObjective, grad):
    dom = obj.dom
    if dom.kind == "simplex":
        s = np.zeros(dom.d)
        s[int(np.argmin(grad))] = 1.0
        return s
    A, b = dom.equality_constraints()
    res = linprog(grad, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise SolverError(f"linear minimization oracle failed: {res.message}")
    return np.maximum(res.x, 0.0)


def _frank_wolfe(obj: StepObjective, gap_target: float, max_iter: int = FW_MAX_ITER):
    reg = obj.reg
    x = obj.anchor.coords.copy()
    cap = 0.999 if reg.is_barrier else 1.0
    best_gap = math.inf
    for it in range(max_iter):
        grad = objective_grad(obj, x)
        s = _lmo(obj, grad)
        direction = s - x
        gap = float(-(grad @ direction))
        best_gap = min(best_gap, gap)
        if gap <= gap_target:
            cand = _point_from(reg, x)
            value = objective_eval(obj, cand, check=False)
            # the gap is a difference of O(|grad| |x|) terms; pad by its rounding error
            pad = 4 * np.finfo(float).eps * float(np.abs(grad) @ (np.abs(x) + np.abs(s)) + abs(value))
            gap = max(gap, 0.0) + pad
            return cand, StepCertificate(value, value - gap, gap, "fw_gap")
        # exact line search on the (monotone) directional derivative
        g_max = cap
        if reg.is_barrier:
            neg = direction < 0
            if np.any(neg):
                g_max = min(cap, float(np.min(-0.999 * x[neg] / direction[neg])))

        def deriv(gam):
            return float(objective_grad(obj, x + gam * direction) @ direction)

        if deriv(g_max) <= 0:
            gam = g_max
        else:
            lo, hi = 0.0, g_max
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if deriv(mid) > 0:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 1e-17:
                    break
            gam = lo
        if gam <= 0.0:
            break
        x = x + gam * direction
    raise SolverError(f"Frank-Wolfe stopped after {it + 1} iterations with gap {best_gap:.3e}",
                      best_gap=best_gap)


def exact_step_polytope(obj: StepObjective, gap_target: float, solver: str = "fw",
                        max_iter: int = FW_MAX_ITER):
    """Minimize the round objective over a polytope.

    ``solver="fw"`` runs Frank-Wolfe with exact line search until the duality
    gap is at most ``gap_target`` (certificate ``fw_gap``).  ``solver="newton"``
    maximizes the Lagrange dual for barrier regularizers and certifies through
    the dual point (certificate ``dual_root``); it reaches slacks near machine
    precision that Frank-Wolfe cannot.
    """
    if not gap_target > 0:
        raise ValueError("gap_target must be positive")
    if obj.dom.kind == "interval":
        return exact_step(obj)
    if solver == "fw":
        return _frank_wolfe(obj, gap_target, max_iter)
    if solver == "newton":
        cand, cert = _newton_dual(obj, slack_target=min(gap_target, 1e-14))
        if cert.slack > gap_target:
            raise SolverError(f"dual Newton reached slack {cert.slack:.3e} > {gap_target:.3e}",
                              best_gap=cert.slack)
        return cand, cert
    raise ValueError(f"unknown solver {solver!r}")


def solve(obj: StepObjective, gap_target: float = 1e-12):
    """Exact step on any supported domain (dual Newton for barrier polytopes)."""
    if obj.dom.kind in ("simplex", "interval"):
        return exact_step(obj)
    solver = "newton" if obj.reg.is_barrier else "fw"
    return exact_step_polytope(obj, gap_target, solver=solver)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def certify(obj: StepObjective, candidate, eps: float):
    """Return ``(slack <= eps, certificate)`` for a feasible candidate."""
    cand = as_point(candidate)
    obj.dom.check_feasible(cand, FEASIBILITY_TOL)
    if obj.reg.is_barrier and not np.all(cand.logs() > -np.inf):
        raise InfeasiblePointError("candidate must be interior for a barrier regularizer", kind="interior")
    dom = obj.dom
    if dom.kind == "interval":
        cert = dual_certificate(obj, cand, np.zeros(0), "closed_form")
    elif dom.kind == "simplex":
        lam = _simplex_multiplier(obj)
        method = "closed_form" if obj.reg.kind == "neg_entropy" else "dual_root"
        cert = dual_certificate(obj, cand, [lam], method)
    else:
        cert = None
        if obj.reg.is_barrier:
            try:
                _, ref = _newton_dual(obj)
                cert = dual_certificate(obj, cand, ref.multipliers, "dual_root")
            except SolverError:
                cert = None
        if cert is None:
            ref_point, ref = _frank_wolfe(obj, max(eps / 100.0, 1e-15))
            value = objective_eval(obj, cand, check=False)
            lower = ref.min_lower_bound
            slack = max(value - lower, 0.0)
            cert = StepCertificate(value, value - slack, slack, "fw_gap")
    return cert.slack <= eps, cert


def approx_optimality_gap(obj: StepObjective, candidate, target, eps: float, beta: float,
                          atol: float = 1e-9) -> float:
    """First-order optimality of an eps-minimizer along ``target - candidate``.

    Returns ``<grad phi(candidate), target - candidate>`` and raises
    :class:`OptimalityGapViolation` if it falls below
    ``-max(||target - candidate||_1 sqrt(2 beta eps), 2 eps)`` (minus ``atol``).
    """
    c = as_point(candidate)
    t = as_point(target)
    diff = t.coords - c.coords
    val = float(objective_grad(obj, c) @ diff)
    bound = -max(float(np.sum(np.abs(diff))) * math.sqrt(2.0 * beta * eps), 2.0 * eps)
    if val < bound - atol:
        raise OptimalityGapViolation(
            f"directional derivative {val:.6e} below eps-optimality bound {bound:.6e} "
            f"(eps={eps:g}, beta={beta:g})")
    return val
