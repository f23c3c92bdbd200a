"""Regularizers, Bregman divergences, decision sets and kernel bases.

Every separable regularizer is described by a scalar function ``r`` with
derivatives ``r'`` and ``r''``; ``R(w) = sum_i r(w_i)``.  Barrier kinds carry
the constants ``(nu, c1, c2)`` of the sandwich ``c1/x^nu <= r''(x) <= c2/x^nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .exceptions import DomainError, InfeasiblePointError, RankDeficientError

__all__ = [
    "Regularizer",
    "Domain",
    "Point",
    "as_point",
    "regularizer_derivatives",
    "bregman",
    "bregman_terms",
    "effective_smoothness",
    "kernel_basis",
    "normalize_l1",
]

BARRIER_KINDS = ("neg_entropy", "tsallis", "log_barrier", "custom_barrier")
KINDS = ("euclidean",) + BARRIER_KINDS

# below this a double coordinate is treated as underflowed; log coords take over
_TINY = 1e-290


# --------------------------------------------------------------------------
# Regularizers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Regularizer:
    """A separable (or Euclidean) regularizer.

    Use the named constructors rather than the raw initializer::

        Regularizer.neg_entropy()
        Regularizer.log_barrier()
        Regularizer.tsallis(0.5)
        Regularizer.euclidean(beta=2.0)
        Regularizer.custom_barrier(r, dr, d2r, nu=1.5, c1=0.5, c2=0.5)
    """

    kind: str
    beta: Optional[float] = None
    q: Optional[float] = None
    nu: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    r_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    dr_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    d2r_fn: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "euclidean" and not (self.beta and self.beta > 0):
            raise ValueError("euclidean regularizer needs beta > 0")
        if self.kind == "tsallis" and not (self.q is not None and 0 < self.q < 1):
            raise ValueError("tsallis regularizer needs q in (0, 1)")
        if self.kind == "custom_barrier":
            if None in (self.r_fn, self.dr_fn, self.d2r_fn):
                raise ValueError("custom_barrier needs r, r' and r'' callables")
            if not (self.nu >= 1 and self.c1 > 0 and self.c2 > 0):
                raise ValueError("custom_barrier needs nu >= 1, c1 > 0, c2 > 0")

    # -- constructors -----------------------------------------------------

    @classmethod
    def euclidean(cls, beta: float = 1.0) -> "Regularizer":
        return cls("euclidean", beta=float(beta))

    @classmethod
    def neg_entropy(cls) -> "Regularizer":
        return cls("neg_entropy", nu=1.0, c1=1.0, c2=1.0)

    @classmethod
    def log_barrier(cls) -> "Regularizer":
        return cls("log_barrier", nu=2.0, c1=1.0, c2=1.0)

    @classmethod
    def tsallis(cls, q: float) -> "Regularizer":
        # r'' = q x^(q-2) exactly, so the sandwich is tight with c1 = c2 = q
        q = float(q)
        return cls("tsallis", q=q, nu=2.0 - q, c1=q, c2=q)

    @classmethod
    def custom_barrier(cls, r, dr, d2r, nu, c1, c2) -> "Regularizer":
        return cls("custom_barrier", nu=float(nu), c1=float(c1), c2=float(c2),
                   r_fn=r, dr_fn=dr, d2r_fn=d2r)

    @classmethod
    def from_spec(cls, kind: str, **params) -> "Regularizer":
        if kind == "euclidean":
            return cls.euclidean(params.get("beta", 1.0))
        if kind == "neg_entropy":
            return cls.neg_entropy()
        if kind == "log_barrier":
            return cls.log_barrier()
        if kind == "tsallis":
            return cls.tsallis(params["q"])
        raise ValueError(f"cannot build regularizer {kind!r} from a spec")

    # -- properties -------------------------------------------------------

    @property
    def is_barrier(self) -> bool:
        return self.kind in BARRIER_KINDS

    @property
    def separable(self) -> bool:
        return self.kind != "euclidean"

    @property
    def label(self) -> str:
        if self.kind == "euclidean":
            return f"euclidean(beta={self.beta:g})"
        if self.kind == "tsallis":
            return f"tsallis(q={self.q:g})"
        return self.kind

    # -- scalar function and derivatives (vectorized) ----------------------

    def _check_positive(self, x):
        if self.is_barrier and np.any(~(x > 0)):
            raise DomainError(f"{self.kind} is only defined for x > 0; got min {np.min(x)!r}")

    def r(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "euclidean":
            return 0.5 * self.beta * x * x
        if k == "neg_entropy":
            if np.any(x < 0):
                raise DomainError("negative entropy undefined for x < 0")
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
        if k == "tsallis":
            if np.any(x < 0):
                raise DomainError("tsallis entropy undefined for x < 0")
            return (x - x**self.q) / (1.0 - self.q)
        self._check_positive(x)
        if k == "log_barrier":
            return -np.log(x)
        return np.vectorize(self.r_fn, otypes=[float])(x)

    def dr(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "euclidean":
            return self.beta * x
        self._check_positive(x)
        if k == "neg_entropy":
            return np.log(x) + 1.0
        if k == "log_barrier":
            return -1.0 / x
        if k == "tsallis":
            return (1.0 - self.q * x ** (self.q - 1.0)) / (1.0 - self.q)
        return np.vectorize(self.dr_fn, otypes=[float])(x)

    def d2r(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "euclidean":
            return np.full_like(x, self.beta)
        self._check_positive(x)
        if k == "neg_entropy":
            return 1.0 / x
        if k == "log_barrier":
            return 1.0 / (x * x)
        if k == "tsallis":
            return self.q * x ** (self.q - 2.0)
        return np.vectorize(self.d2r_fn, otypes=[float])(x)

    def dr_from_log(self, log_x):
        """r'(x) evaluated from log x; exact for entropy even when x underflows."""
        log_x = np.asarray(log_x, dtype=float)
        if self.kind == "neg_entropy":
            return log_x + 1.0
        if self.kind == "log_barrier":
            return -np.exp(-log_x)
        return self.dr(np.exp(log_x))

    def inv_dr(self, g):
        """Solve r'(x) = g for x.  Returns +inf where g is above the range of r'."""
        g = np.asarray(g, dtype=float)
        k = self.kind
        if k == "euclidean":
            return g / self.beta
        if k == "neg_entropy":
            return np.exp(g - 1.0)
        if k == "log_barrier":
            if g.max() < 0:
                return -1.0 / g
            with np.errstate(divide="ignore"):
                return np.where(g < 0, -1.0 / np.where(g < 0, g, -1.0), np.inf)
        if k == "tsallis":
            q = self.q
            base = (1.0 - (1.0 - q) * g) / q
            if base.min() > 0:
                return base ** (1.0 / (q - 1.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(base > 0, np.where(base > 0, base, 1.0) ** (1.0 / (q - 1.0)), np.inf)
        return np.vectorize(self._inv_dr_custom, otypes=[float])(g)

    def log_inv_dr(self, g):
        """log of :meth:`inv_dr`, without the round trip through exp for entropy."""
        g = np.asarray(g, dtype=float)
        if self.kind == "neg_entropy":
            return g - 1.0
        with np.errstate(divide="ignore"):
            return np.log(self.inv_dr(g))

    def _inv_dr_custom(self, g: float) -> float:
        # r' is increasing on (0, inf); bracket geometrically then bisect
        lo, hi = 1e-300, 1.0
        while self.dr_fn(hi) < g:
            hi *= 2.0
            if hi > 1e300:
                return math.inf
        if self.dr_fn(lo) > g:
            return lo
        for _ in range(2000):
            mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
            if self.dr_fn(mid) < g:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * hi:
                break
        return 0.5 * (lo + hi)

    def sup_d2r(self, lo, hi):
        """Supremum of r'' over [lo, hi] (elementwise)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.kind == "euclidean":
            return np.full(np.broadcast(lo, hi).shape, self.beta)
        if self.kind != "custom_barrier":
            # built-in barriers have decreasing r''
            return self.d2r(lo)
        out = np.empty(np.broadcast(lo, hi).shape)
        for idx in np.ndindex(out.shape):
            a, b = float(np.broadcast_to(lo, out.shape)[idx]), float(np.broadcast_to(hi, out.shape)[idx])
            grid = np.geomspace(a, b, 257) if a > 0 and b > a else np.array([a, b])
            out[idx] = float(np.max(self.d2r(grid)))
        return out

    def check_sandwich(self, grid=None, rtol: float = 1e-12) -> bool:
        """Spot-check c1/x^nu <= r''(x) <= c2/x^nu on a log-spaced grid in (0, 1]."""
        if not self.is_barrier:
            raise ValueError("sandwich only applies to barrier regularizers")
        x = np.geomspace(1e-8, 1.0, 81) if grid is None else np.asarray(grid, dtype=float)
        h = self.d2r(x)
        lower = self.c1 / x**self.nu
        upper = self.c2 / x**self.nu
        return bool(np.all(h >= lower * (1 - rtol)) and np.all(h <= upper * (1 + rtol)))


def regularizer_derivatives(reg: Regularizer, x: float):
    """Return ``(r(x), r'(x), r''(x))`` as floats."""
    x = float(x)
    if reg.is_barrier and not x > 0:
        raise DomainError(f"{reg.kind} requires x > 0, got {x!r}")
    return float(reg.r(x)), float(reg.dr(x)), float(reg.d2r(x))


# --------------------------------------------------------------------------
# Points
# --------------------------------------------------------------------------


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Point:
    """A decision vector, optionally paired with its natural-log coordinates.

    The log representation lets entropy trajectories carry coordinates of
    order ``exp(-eta * T)`` that would underflow as doubles.
    """

    coords: np.ndarray
    log_coords: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(np.atleast_1d(self.coords)))
        if self.log_coords is not None:
            logs = _frozen(np.atleast_1d(self.log_coords))
            if logs.shape != self.coords.shape:
                raise ValueError("coords and log_coords differ in shape")
            object.__setattr__(self, "log_coords", logs)

    @classmethod
    def _fresh(cls, coords: np.ndarray, log_coords: Optional[np.ndarray] = None) -> "Point":
        """Wrap 1-d float arrays the caller just created, freezing them without a copy."""
        coords.setflags(write=False)
        if log_coords is not None:
            log_coords.setflags(write=False)
        p = object.__new__(cls)
        object.__setattr__(p, "coords", coords)
        object.__setattr__(p, "log_coords", log_coords)
        return p

    @classmethod
    def from_logs(cls, log_coords) -> "Point":
        logs = np.asarray(log_coords, dtype=float)
        return cls(np.exp(logs), logs)

    @classmethod
    def with_logs(cls, coords) -> "Point":
        c = np.asarray(coords, dtype=float)
        with np.errstate(divide="ignore"):
            return cls(c, np.log(c))

    @property
    def d(self) -> int:
        return int(self.coords.shape[0])

    def logs(self) -> np.ndarray:
        if self.log_coords is not None:
            return self.log_coords
        with np.errstate(divide="ignore"):
            return np.log(self.coords)

    def consistent(self, rtol: float = 1e-12) -> bool:
        if self.log_coords is None:
            return True
        mask = self.coords > _TINY
        return bool(np.allclose(np.exp(self.log_coords[mask]), self.coords[mask], rtol=rtol, atol=0.0))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __repr__(self):
        return f"Point({np.array2string(self.coords, precision=6)})"


def as_point(w) -> Point:
    return w if isinstance(w, Point) else Point(np.asarray(w, dtype=float))


# --------------------------------------------------------------------------
# Bregman divergence
# --------------------------------------------------------------------------


def _entropy_kernel(delta):
    """1 - e^delta (1 - delta), accurate near delta = 0."""
    delta = np.asarray(delta, dtype=float)
    if delta.max() < 700.0:
        out = 1.0 - np.exp(delta) * (1.0 - delta)
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            out = 1.0 - np.exp(delta) * (1.0 - delta)
    small = np.abs(delta) < 1e-3
    if small.any():
        d = delta[small]
        out[small] = d * d * (0.5 + d * (1 / 3 + d * (1 / 8 + d * (1 / 30 + d * (1 / 144 + d / 840)))))
    return out


def _log_barrier_kernel(u):
    """u - log(1 + u), accurate near u = 0."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-3
    if not small.any() and u.min() > -1.0:
        return u - np.log1p(u)
    s = np.where(small, u, 0.0)
    series = s * s * (0.5 - s * (1 / 3 - s * (1 / 4 - s * (1 / 5 - s * (1 / 6 - s / 7)))))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = u - np.log1p(u)
    return np.where(small, series, direct)


def _tsallis_kernel(u, q):
    """1 + q u - (1 + u)^q, accurate near u = 0."""
    u = np.asarray(u, dtype=float)
    direct = 1.0 + q * u - np.power(np.maximum(1.0 + u, 0.0), q)
    small = np.abs(u) < 1e-3
    if not small.any():
        return direct
    s = np.where(small, u, 0.0)
    series = np.zeros_like(s)
    coef = q
    for k in range(2, 10):
        coef = coef * (q - k + 1) / k
        series = series - coef * s**k
    return np.where(small, series, direct)


def bregman_terms(reg: Regularizer, w, wp, check: bool = True) -> np.ndarray:
    """Per-coordinate Bregman terms ``D_r(w_i || wp_i)``.

    ``w`` and ``wp`` may be :class:`Point` or arrays.  Entropy uses the log
    coordinates when present, and the 0 log 0 = 0 convention where ``w_i = 0``.
    ``check=False`` skips the domain checks for callers that hold two interior
    points of equal dimension.
    """
    pw, pp = as_point(w), as_point(wp)
    x, y = pw.coords, pp.coords
    k = reg.kind
    if check:
        if x.shape != y.shape:
            raise ValueError("points differ in dimension")
        if k != "euclidean":
            y_pos = y > 0
            if pp.log_coords is not None:
                y_pos = y_pos | np.isfinite(pp.log_coords)
            if not np.all(y_pos):
                raise DomainError(f"reference point must be interior for {k}")
            if np.any(x < 0):
                raise DomainError(f"{k} Bregman divergence undefined for negative coordinates")
    if k == "euclidean":
        diff = x - y
        return 0.5 * reg.beta * diff * diff

    if k == "neg_entropy":
        lx, ly = pw.logs(), pp.logs()
        zero = np.isneginf(lx) if check else None
        if zero is not None and zero.any():
            delta = np.where(zero, 0.0, lx - ly)
            # D = y * (1 - e^delta (1 - delta)); at x = 0 the term is y
            return np.where(zero, y, y * _entropy_kernel(delta))
        return y * _entropy_kernel(lx - ly)
    if k == "log_barrier":
        if check and np.any(x <= 0) and (pw.log_coords is None or np.any(~np.isfinite(pw.log_coords))):
            raise DomainError("log-barrier divergence is infinite at the boundary")
        if pw.log_coords is not None and pp.log_coords is not None:
            u = np.expm1(pw.log_coords - pp.log_coords)
        else:
            u = (x - y) / y
        return _log_barrier_kernel(u)
    if k == "tsallis":
        q = reg.q
        u = (x - y) / y
        return y**q * _tsallis_kernel(u, q) / (1.0 - q)
    # custom barrier: plain definition
    return reg.r(x) - reg.r(y) - reg.dr(y) * (x - y)


def bregman(reg: Regularizer, w, wp) -> float:
    """D_R(w || wp) = R(w) - R(wp) - <grad R(wp), w - wp>, summed with fsum."""
    return math.fsum(bregman_terms(reg, w, wp).tolist())


def effective_smoothness(reg: Regularizer, w1, w2) -> float:
    """Largest r'' over the coordinate segments on which ``w1`` and ``w2`` differ.

    For a degenerate pair (``w1 == w2``) the maximum of r'' over all
    coordinates of ``w1`` is returned.  The Euclidean kind returns beta.
    """
    if reg.kind == "euclidean":
        return float(reg.beta)
    a = as_point(w1).coords
    b = as_point(w2).coords
    differ = a != b
    if not np.any(differ):
        return float(np.max(reg.d2r(a)))
    lo = np.minimum(a, b)[differ]
    hi = np.maximum(a, b)[differ]
    return float(np.max(reg.sup_d2r(lo, hi)))


# --------------------------------------------------------------------------
# Domains
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Domain:
    """A decision set: the simplex, a standard-form polytope, or an interval.

    Polytopes are ``{w : A w = b, w >= 0}``.  An explicit kernel basis may be
    attached (used for structured polytopes whose basis has meaning).
    """

    kind: str
    d: int
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    basis: Optional[np.ndarray] = None
    name: str = ""

    @classmethod
    def simplex(cls, d: int) -> "Domain":
        if d < 1:
            raise ValueError("simplex dimension must be >= 1")
        return cls("simplex", int(d), name=f"simplex({d})")

    @classmethod
    def polytope(cls, A, b, basis=None, name: str = "") -> "Domain":
        A = _frozen(np.atleast_2d(A))
        b = _frozen(np.atleast_1d(b))
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b disagree on the number of rows")
        if basis is not None:
            basis = _frozen(np.atleast_2d(basis))
        return cls("polytope", int(A.shape[1]), A=A, b=b, basis=basis,
                   name=name or f"polytope({A.shape[0]}x{A.shape[1]})")

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Domain":
        if not hi > lo:
            raise ValueError("interval needs hi > lo")
        return cls("interval", 1, lo=float(lo), hi=float(hi), name=f"interval[{lo:g},{hi:g}]")

    @property
    def diameter_l1(self) -> float:
        if self.kind == "interval":
            return self.hi - self.lo
        return 2.0

    @cached_property
    def _equalities(self):
        if self.kind == "simplex":
            A, b = np.ones((1, self.d)), np.ones(1)
        elif self.kind == "polytope":
            A, b = np.asarray(self.A), np.asarray(self.b)
        else:
            A, b = np.zeros((0, 1)), np.zeros(0)
        return _frozen(A), _frozen(b)

    def equality_constraints(self):
        """(A, b) of the equality constraints; the simplex contributes a ones row."""
        return self._equalities

    def bounds(self):
        if self.kind == "interval":
            return np.array([self.lo]), np.array([self.hi])
        return np.zeros(self.d), np.full(self.d, np.inf)

    def uniform(self) -> Point:
        if self.kind == "interval":
            return Point([0.5 * (self.lo + self.hi)])
        return Point.with_logs(np.full(self.d, 1.0 / self.d))

    def violation(self, w, tol: float = 1e-9):
        """Return ``(kind, index, amount)`` of the worst violated constraint, or None."""
        x = as_point(w).coords
        if x.shape != (self.d,):
            raise InfeasiblePointError(f"expected dimension {self.d}, got {x.shape}", kind="shape")
        lo, hi = self.bounds()
        below = lo - x
        i = int(np.argmax(below))
        if below[i] > tol:
            return ("lower_bound", i, float(below[i]))
        above = x - hi
        i = int(np.argmax(above))
        if above[i] > tol:
            return ("upper_bound", i, float(above[i]))
        A, b = self.equality_constraints()
        if A.shape[0]:
            res = np.abs(A @ x - b)
            j = int(np.argmax(res))
            if res[j] > tol * max(1.0, float(np.max(np.abs(b)))):
                return ("equality", j, float(res[j]))
        return None

    def is_feasible(self, w, tol: float = 1e-9) -> bool:
        return self.violation(w, tol) is None

    def check_feasible(self, w, tol: float = 1e-9) -> None:
        v = self.violation(w, tol)
        if v is not None:
            kind, idx, amount = v
            what = "coordinate" if kind != "equality" else "constraint row"
            raise InfeasiblePointError(
                f"point violates {kind} at {what} {idx} by {amount:.3e}", index=idx, kind=kind)

    def is_simplex_subset(self) -> bool:
        """True when every feasible point has coordinate sum 1."""
        if self.kind == "simplex":
            return True
        if self.kind != "polytope":
            return False
        A, b = self.equality_constraints()
        y, *_ = np.linalg.lstsq(A.T, np.ones(self.d), rcond=None)
        return bool(np.allclose(A.T @ y, 1.0, atol=1e-10) and abs(float(y @ b) - 1.0) < 1e-10)


def _dependent_rows(A: np.ndarray, tol: float = 1e-10):
    rows, dependent = [], []
    for i in range(A.shape[0]):
        trial = np.vstack(rows + [A[i]])
        if np.linalg.matrix_rank(trial, tol=tol) > len(rows):
            rows.append(A[i])
        else:
            dependent.append(i)
    return dependent


def kernel_basis(dom: Domain) -> np.ndarray:
    """Basis of ker(A) as the rows of a ``(k, d)`` array.

    The simplex uses ``e_i - e_d``; a domain carrying an explicit basis returns
    it after checking ``A v = 0``; other polytopes use an orthonormal null space.
    """
    if dom.kind == "interval":
        return np.ones((1, 1))
    if dom.kind == "simplex":
        d = dom.d
        V = np.zeros((d - 1, d))
        V[np.arange(d - 1), np.arange(d - 1)] = 1.0
        V[:, d - 1] = -1.0
        return V
    A = np.asarray(dom.A)
    dependent = _dependent_rows(A)
    if dependent:
        raise RankDeficientError(f"A is rank deficient; dependent rows {dependent}", dependent)
    if dom.basis is not None:
        V = np.asarray(dom.basis)
        resid = np.max(np.abs(A @ V.T))
        if resid > 1e-12:
            raise ValueError(f"attached basis does not null A (max |Av| = {resid:.3e})")
        if np.linalg.matrix_rank(V) != V.shape[0] or V.shape[0] != dom.d - A.shape[0]:
            raise ValueError("attached basis is not a basis of ker(A)")
        return V.copy()
    return scipy.linalg.null_space(A).T


def normalize_l1(V) -> np.ndarray:
    V = np.atleast_2d(np.asarray(V, dtype=float))
    return V / np.sum(np.abs(V), axis=1, keepdims=True)
