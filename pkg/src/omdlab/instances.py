"""Loss-stream generators and the structured hard polytope.

Random streams draw each coordinate from its own Philox sub-stream keyed by
``(seed, try_index, coordinate)``, so a stream is a pure function of its spec
and seed, and a prefix of a column can be generated without the rest.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import PreconditionError, SamplingExhausted
from .geometry import Domain, Point, kernel_basis

__all__ = [
    "LossStream",
    "HardPolytope",
    "make_loss_stream",
    "build_hard_polytope",
    "hardness_event",
    "sample_until_event",
    "event_rate",
    "coordinate_rng",
    "stuck_tau",
]


def coordinate_rng(seed: int, sub: int, coord: int) -> np.random.Generator:
    """Counter-based generator for one coordinate of one sampling attempt."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(sub), int(coord)))
    return np.random.Generator(np.random.Philox(ss))


def stuck_tau(eta: float, eps: float) -> int:
    """Switch time ceil(log(4 eta / eps) / eta), with a guard against float noise."""
    return int(math.ceil(math.log(4.0 * eta / eps) / eta - 1e-9))


@dataclass(frozen=True, eq=False)
class LossStream:
    kind: str
    T: int
    realized: np.ndarray
    seed: Optional[int] = None
    spec: dict = field(default_factory=dict)
    bounded: bool = True
    tries: int = 1

    @property
    def d(self) -> int:
        return int(self.realized.shape[1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            write_loss_csv(fh, self.realized)


def write_loss_csv(fh, losses) -> None:
    losses = np.asarray(losses)
    writer = csv.writer(fh, lineterminator="\r\n")
    writer.writerow(["t"] + [f"l{i + 1}" for i in range(losses.shape[1])])
    for t, row in enumerate(losses, start=1):
        writer.writerow([t] + [format(float(x), ".17g") for x in row])


def read_loss_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(x) for x in r[1:]] for r in rows[1:]])


# --------------------------------------------------------------------------
# stream construction
# --------------------------------------------------------------------------


def _draw(dist: dict, rng: np.random.Generator, n: int) -> np.ndarray:
    kind = dist.get("dist", "uniform")
    if kind == "uniform":
        return rng.uniform(dist.get("low", -1.0), dist.get("high", 1.0), size=n)
    if kind == "normal":
        return rng.normal(dist.get("mean", 0.0), dist.get("std", 1.0), size=n)
    if kind == "bernoulli":
        return (rng.random(size=n) < dist.get("p", 0.5)).astype(float)
    if kind == "constant":
        return np.full(n, float(dist.get("value", 0.0)))
    raise ValueError(f"unknown distribution {kind!r}")


def _gaussian_polytope_dists(m: int, eta: float, zeros: bool = False):
    d = 5 * m + 2
    dists = [{"dist": "constant", "value": 0.0}] * m
    dists += [{"dist": "constant", "value": 1.0}] * (3 * m)
    if zeros:
        dists += [{"dist": "constant", "value": 0.0}] * (m + 1)
    else:
        dists += [{"dist": "normal", "mean": 0.0, "std": 1.0}] * m
        dists += [{"dist": "normal", "mean": math.sqrt(eta * d), "std": 1.0}]
    dists += [{"dist": "constant", "value": 0.0}]
    return dists


def _columns(dists, T: int, seed: int, sub: int, rows: Optional[int] = None) -> np.ndarray:
    n = T if rows is None else min(rows, T)
    out = np.empty((n, len(dists)))
    for j, dist in enumerate(dists):
        if dist.get("dist") == "constant":
            out[:, j] = dist.get("value", 0.0)
        else:
            out[:, j] = _draw(dist, coordinate_rng(seed, sub, j), n)
    return out


def _iid_dists(spec: dict):
    if "dists" in spec:
        return list(spec["dists"])
    d = int(spec["d"])
    base = {k: v for k, v in spec.items() if k not in ("kind", "d")}
    base.setdefault("dist", "uniform")
    return [base] * d


def make_loss_stream(spec: dict, T: int, seed: int = 0, sub: int = 0) -> LossStream:
    """Realize a loss stream from a spec dict.

    Spec kinds::

        {"kind": "constant", "vector": [...]}
        {"kind": "switching", "phases": [(length, vector), ...]}
        {"kind": "iid", "d": 4, "dist": "uniform", "low": -1, "high": 1}
        {"kind": "iid", "dists": [{"dist": "normal", "mean": 0, "std": 1}, ...]}
        {"kind": "gaussian_polytope", "m": 16, "eta": 0.1}

    ``gaussian_polytope`` accepts ``"inject": "zeros"`` to replace every
    Gaussian draw with 0 (a degenerate stream used in tests).
    """
    T = int(T)
    if T < 1:
        raise ValueError("T must be >= 1")
    kind = spec.get("kind")
    bounded = True
    if kind == "constant":
        vec = np.asarray(spec["vector"], dtype=float)
        realized = np.tile(vec, (T, 1))
    elif kind == "switching":
        phases = [(int(n), np.asarray(v, dtype=float)) for n, v in spec["phases"]]
        total = sum(n for n, _ in phases)
        if total != T:
            raise ValueError(f"switching phases sum to {total}, expected T={T}")
        realized = np.vstack([np.tile(v, (n, 1)) for n, v in phases if n > 0])
    elif kind == "iid":
        realized = _columns(_iid_dists(spec), T, seed, sub)
        bounded = bool(np.all(np.abs(realized) <= 1.0))
    elif kind == "gaussian_polytope":
        dists = _gaussian_polytope_dists(int(spec["m"]), float(spec["eta"]),
                                         spec.get("inject") == "zeros")
        realized = _columns(dists, T, seed, sub)
        bounded = False
    else:
        raise ValueError(f"unknown loss stream kind {kind!r}")
    if kind in ("constant", "switching") and np.any(np.abs(realized) > 1.0):
        raise ValueError("adversarial loss entries must lie in [-1, 1]")
    realized.setflags(write=False)
    return LossStream(kind, T, realized, seed, dict(spec), bounded)


def switching_spec(phases) -> dict:
    return {"kind": "switching", "phases": [(int(n), list(map(float, v))) for n, v in phases]}


# --------------------------------------------------------------------------
# hard polytope
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HardPolytope:
    m: int
    d: int
    A: np.ndarray
    b: np.ndarray
    w1: Point
    basis: np.ndarray
    tau: int
    eps: float
    eta: float
    domain: Domain

    @property
    def block(self) -> slice:
        """0-based slice of the Gaussian block, coordinates 4m+1 .. 5m+1."""
        return slice(4 * self.m, 5 * self.m + 1)

    def alpha(self, w) -> np.ndarray:
        """Coefficients of ``w - w1`` in the kernel basis."""
        x = np.asarray(w, dtype=float) - self.w1.coords
        coef, *_ = np.linalg.lstsq(self.basis.T, x, rcond=None)
        return coef

    def from_alpha(self, alpha) -> np.ndarray:
        return self.w1.coords + np.asarray(alpha) @ self.basis

    def comparator(self) -> np.ndarray:
        """The point with every coefficient 1/d; it zeroes all coordinates carrying loss."""
        return self.from_alpha(np.full(self.m + 1, 1.0 / self.d))


def hard_polytope_matrix(m: int):
    d = 5 * m + 2
    A = np.zeros((4 * m + 1, d))
    for i in range(m):
        A[i, m + i] = 1.0
        A[i, 2 * m + i] = 1.0
        A[i, 3 * m + i] = -2.0
        A[m + i, m + i] = 1.0
        A[m + i, 2 * m + i] = -1.0
        A[2 * m + i, i] = 1.0
        A[2 * m + i, m + i] = 3.0
        A[2 * m + i, 4 * m + i] = 1.0
        A[3 * m + i, 4 * m + i] = 1.0
        A[3 * m + i, 5 * m] = -1.0
    A[4 * m, 5 * m] = 1.0
    A[4 * m, 5 * m + 1] = 1.0
    V = np.zeros((m + 1, d))
    for i in range(m):
        V[i, i] = 3.0
        V[i, m + i] = -1.0
        V[i, 2 * m + i] = -1.0
        V[i, 3 * m + i] = -1.0
    V[m, :m] = 1.0
    V[m, 5 * m + 1] = 1.0
    V[m, 4 * m:5 * m + 1] = -1.0
    return A, V


def block_size(eps: float, T: Optional[int] = None, horizon_floor: bool = False) -> int:
    m = max(8, int(math.ceil(16.0 * math.log(1.0 / eps) - 1e-9)))
    if horizon_floor:
        if T is None:
            raise ValueError("horizon_floor needs T")
        m = max(m, int(math.ceil(128.0 * math.log(2.0 * T))))
    return m


def build_hard_polytope(eps: float, eta: float, m: Optional[int] = None, T: Optional[int] = None,
                        horizon_floor: bool = False) -> HardPolytope:
    """Structured polytope with d = 5m + 2 on which inexact entropy OMD gets stuck."""
    if not (0 < eps < 4 * eta):
        raise PreconditionError(f"hard polytope needs 0 < eps < 4*eta (eps={eps:g}, 4*eta={4 * eta:g})")
    if m is None:
        m = block_size(eps, T, horizon_floor)
    if m < 1:
        raise ValueError("m must be positive")
    A, V = hard_polytope_matrix(m)
    d = 5 * m + 2
    if d > 1.0 / eta:
        warnings.warn(f"hard polytope has d={d} > 1/eta={1 / eta:g}; the stuck construction "
                      "still runs but the regret scaling assumes d <= 1/eta", stacklevel=2)
    w1 = Point.with_logs(np.full(d, 1.0 / d))
    b = A @ w1.coords
    dom = Domain.polytope(A, b, basis=V, name=f"hard_polytope(m={m})")
    V_checked = kernel_basis(dom)
    if np.max(np.abs(A @ V_checked.T)) > 1e-12 or np.max(np.abs(V.sum(axis=1))) > 1e-12:
        raise AssertionError("hard polytope basis does not null A")
    if not dom.is_feasible(w1, 1e-12):
        raise AssertionError("uniform point infeasible for hard polytope")
    tau = int(math.ceil(3.0 / eta - 1e-9))
    V.setflags(write=False)
    return HardPolytope(m, d, dom.A, dom.b, w1, V, tau, float(eps), float(eta), dom)


def hardness_event(stream, m: int, tau: int) -> bool:
    """Block sum over the first tau rounds is <= 0 and every round's block sum is <= m/16."""
    L = stream.realized if isinstance(stream, LossStream) else np.asarray(stream)
    block = L[:, 4 * m:5 * m + 1].sum(axis=1)
    return bool(block[:tau].sum() <= 0.0 and np.all(block <= m / 16.0))


def _prefix_ok(spec: dict, T: int, seed: int, sub: int, m: int, tau: int) -> bool:
    dists = _gaussian_polytope_dists(m, float(spec["eta"]), spec.get("inject") == "zeros")
    head = _columns(dists, T, seed, sub, rows=tau)
    block = head[:, 4 * m:5 * m + 1].sum(axis=1)
    return bool(block.sum() <= 0.0 and np.all(block <= m / 16.0))


def sample_until_event(spec: dict, max_tries: int, seed: int, T: int, tau: Optional[int] = None):
    """Rejection-sample a gaussian_polytope stream conditioned on the hardness event.

    Attempt ``k`` uses sub-seed ``k``.  The first ``tau`` rounds are drawn
    alone first, so most rejections never generate the full horizon.
    Returns ``(stream, tries)``.
    """
    if max_tries < 1:
        raise ValueError("max_tries must be >= 1")
    m = int(spec["m"])
    if tau is None:
        tau = int(math.ceil(3.0 / float(spec["eta"]) - 1e-9))
    for k in range(max_tries):
        if not _prefix_ok(spec, T, seed, k, m, tau):
            continue
        stream = make_loss_stream(spec, T, seed, sub=k)
        if hardness_event(stream, m, tau):
            return LossStream(stream.kind, stream.T, stream.realized, seed, stream.spec,
                              stream.bounded, tries=k + 1), k + 1
    raise SamplingExhausted(
        f"hardness event not met in {max_tries} tries (empirical rate 0/{max_tries})",
        tries=max_tries, accepted=0)


def event_rate(spec: dict, n_seeds: int, T: int, tau: Optional[int] = None, base_seed: int = 0):
    """Fraction of seeds ``base_seed .. base_seed + n_seeds - 1`` whose stream meets the event.

    Returns ``(rate, accepted_seeds, prefix_passes)``.
    """
    m = int(spec["m"])
    if tau is None:
        tau = int(math.ceil(3.0 / float(spec["eta"]) - 1e-9))
    accepted, prefix = [], 0
    for s in range(base_seed, base_seed + n_seeds):
        if not _prefix_ok(spec, T, s, 0, m, tau):
            continue
        prefix += 1
        if hardness_event(make_loss_stream(spec, T, s), m, tau):
            accepted.append(s)
    return len(accepted) / n_seeds, accepted, prefix
