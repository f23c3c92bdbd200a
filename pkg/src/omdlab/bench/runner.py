"""Build, validate and execute scenarios; write trace/summary CSVs and the SVG."""

import csv
import io
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import balance, instances, trajectories as tj
from ..exceptions import (CertificationError, ConfigError, EventNotSatisfied, OMDError,
                          PreconditionError, SamplingExhausted, SolverError)
from ..geometry import Domain, Point, Regularizer, as_point, bregman
from ..subproblem import StepObjective, certify
from . import thresholds as th
from .config import RUNNERS, Scenario, basic_problems, load, seeds_from_env
from .svg import emit_svg

EXIT_PASS, EXIT_CONFIG, EXIT_FAIL = 0, 1, 2
TRACE_COLUMNS = ("t", "loss_dot_w", "cum_regret", "min_coord", "max_cert_slack_so_far", "balance_stat")
SUMMARY_COLUMNS = ("seed", "T", "final_regret", "max_slack", "min_coord", "loss_balance_alpha",
                   "comparator_loss", "bound", "fallback_rounds", "tries", "passed")
BUILTIN_LOSS_RUNNERS = ("adversarial_smooth_stuck", "adversarial_entropy_stuck",
                        "adversarial_dimension_stuck", "adversarial_double_switch")


# -- object construction -----------------------------------------------------------


def build_regularizer(scn: Scenario) -> Regularizer:
    spec = dict(scn.regularizer)
    return Regularizer.from_spec(spec.pop("kind"), **spec)


def build_hard(scn: Scenario):
    m = scn.domain.get("m")
    return instances.build_hard_polytope(scn.eps, scn.eta, m=None if m is None else int(m))


def build_domain(scn: Scenario) -> Domain:
    spec = scn.domain
    kind = spec["kind"]
    if kind == "simplex":
        return Domain.simplex(int(spec["d"]))
    if kind == "interval":
        return Domain.interval(float(spec.get("lo", 0.0)), float(spec["hi"]))
    if kind == "hard_polytope":
        return build_hard(scn).domain
    raise ValueError(f"unknown domain kind {kind!r}")


def loss_spec(scn: Scenario, d: Optional[int] = None) -> dict:
    spec = dict(scn.losses)
    kind = spec.get("kind")
    if kind == "switching":
        spec["phases"] = [(int(n), list(v)) for n, v in spec["phases"]]
    elif kind == "constant":
        spec["vector"] = list(spec["vector"])
    elif kind == "iid":
        if "d" not in spec and "dists" not in spec and d is not None:
            spec["d"] = d
    elif kind == "gaussian_polytope":
        spec.setdefault("eta", scn.eta)
        if "m" not in spec and d is not None:
            spec["m"] = (d - 2) // 5
    return spec


def entropy_alpha(scn: Scenario) -> float:
    return float(scn.params.get("alpha", scn.T / 3.0))


def double_switch_tau(eta: float, k: float) -> int:
    return int(math.ceil(k / (2.0 * eta) - 1e-9))


# -- validation -----------------------------------------------------------------------


def _check_threshold(problems, ok: bool, what: str, fn, value: float, eps: float):
    if not ok:
        problems.append(f"{what}: {th.formula(fn)} = {value:.6g} is violated by eps = {eps:.6g}")


def validate(scn: Scenario) -> list:
    """Every violated precondition, each naming its threshold formula."""
    problems = basic_problems(scn)
    # numeric checks need a known runner, sane scalars and every section kind
    blocking = (scn.runner not in RUNNERS or not (scn.eta > 0 and math.isfinite(scn.eta))
                or not (scn.eps >= 0 and math.isfinite(scn.eps)) or scn.T < 1
                or any("kind" not in getattr(scn, k) for k in ("domain", "regularizer", "losses")))
    if blocking:
        return problems
    eta, eps, T = scn.eta, scn.eps, scn.T
    try:
        reg = build_regularizer(scn)
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"regularizer not constructible: {exc}")
        reg = None
    try:
        dom = build_domain(scn)
    except (KeyError, TypeError, ValueError, OMDError) as exc:
        problems.append(f"domain not constructible: {exc}")
        dom = None
    if reg is None or dom is None:
        return problems
    d = dom.d
    runner = scn.runner
    lk = scn.losses.get("kind")

    # losses
    if lk == "builtin":
        if runner not in BUILTIN_LOSS_RUNNERS:
            problems.append(f"runner {runner} needs an explicit loss stream, not builtin")
    elif runner in BUILTIN_LOSS_RUNNERS:
        problems.append(f"runner {runner} builds its own losses; set [losses] kind = builtin")
    else:
        try:
            stream = instances.make_loss_stream(loss_spec(scn, d), min(T, 2) if lk == "iid" else T, 0)
            if stream.d != d:
                problems.append(f"loss dimension {stream.d} does not match domain dimension {d}")
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"loss stream not constructible: {exc}")

    if "w1" in scn.params:
        w1 = np.atleast_1d(np.asarray(scn.params["w1"], dtype=float))
        if w1.shape != (d,) or not dom.is_feasible(Point(w1), 1e-9):
            problems.append("params.w1 is not a feasible point of the domain")

    # runner preconditions
    if runner in ("honest_tight", "honest_saturating", "ftrl") and eps < th.RESOLUTION_FLOOR:
        problems.append(f"certification floor: eps >= {th.RESOLUTION_FLOOR:g} is violated by eps = {eps:.6g}")
    if runner == "ftrl":
        if not dom.is_simplex_subset():
            problems.append("ftrl runs on simplex-like domains only")
        if scn.params.get("noise_policy", "saturating") not in ("tight", "saturating"):
            problems.append("params.noise_policy must be tight or saturating")
    if runner == "adversarial_smooth_stuck":
        if dom.kind != "interval" or dom.lo != 0.0:
            problems.append("smooth stuck construction runs on an interval [0, D]")
        if reg.kind != "euclidean":
            problems.append("smooth stuck construction needs the euclidean regularizer")
    if runner in ("adversarial_entropy_stuck", "adversarial_double_switch"):
        if dom.kind != "simplex" or d != 2 or reg.kind != "neg_entropy":
            problems.append(f"{runner} needs neg_entropy on the 2-simplex")
        if not eps < 4 * eta:
            problems.append(f"stuck construction needs eps < 4*eta = {4 * eta:.6g}")
    if runner == "adversarial_entropy_stuck":
        alpha = entropy_alpha(scn)
        lim = th.entropy_lb_eps_min(eta, alpha)
        _check_threshold(problems, eps >= lim * (1 - 1e-12), "entropy lower-bound threshold",
                         th.entropy_lb_eps_min, lim, eps)
        if alpha > T / 2:
            problems.append(f"entropy stuck construction needs alpha <= T/2; alpha = {alpha:g}")
        if 0 < eps < 4 * eta and instances.stuck_tau(eta, eps) >= T:
            problems.append("switch time ceil(log(4 eta/eps)/eta) must be below T")
    if runner == "adversarial_double_switch":
        k = float(scn.params.get("k", 0))
        if not k > 0:
            problems.append("double switch needs params.k > 0")
        else:
            if k > T * eta / 20 * (1 + 1e-12):
                problems.append(f"double switch needs k <= T*eta/20 = {T * eta / 20:g}")
            lim = th.double_switch_eps(eta, k)
            _check_threshold(problems, eps >= lim * (1 - 1e-12), "double switch error level",
                             th.double_switch_eps, lim, eps)
            tau = double_switch_tau(eta, k)
            if T - 5 * tau < 0.75 * T:
                problems.append(f"double switch needs T - 5*tau >= 3T/4 (tau = {tau})")
    if runner == "adversarial_dimension_stuck":
        if dom.kind != "simplex" or not reg.is_barrier:
            problems.append("dimension construction needs a barrier regularizer on the simplex")
        else:
            lim = th.dimension_lb_eps_min(eta, reg.c1, d, reg.nu)
            _check_threshold(problems, eps >= lim * (1 - 1e-12), "dimension lower-bound threshold",
                             th.dimension_lb_eps_min, lim, eps)
    if runner == "adversarial_polytope_stuck":
        if scn.domain.get("kind") != "hard_polytope" or reg.kind != "neg_entropy":
            problems.append("polytope construction needs neg_entropy on a hard_polytope domain")
        if lk != "gaussian_polytope":
            problems.append("polytope construction needs gaussian_polytope losses")
        elif int(loss_spec(scn, d)["m"]) != (d - 2) // 5:
            problems.append("loss block size m does not match the polytope")
        if int(scn.params.get("max_tries", 1)) < 1:
            problems.append("params.max_tries must be >= 1")

    # bound preconditions
    bound = scn.expect.get("bound")
    if bound == "smooth_ub":
        if dom.kind != "interval" or reg.kind != "euclidean":
            problems.append("smooth upper bound is set up for euclidean on an interval")
        else:
            D = dom.hi - dom.lo
            lim = th.smooth_ub_eps_max(D)
            _check_threshold(problems, eps <= lim, "smooth upper-bound threshold", th.smooth_ub_eps_max, lim, eps)
    elif bound == "entropy_ub":
        if dom.kind != "simplex" or reg.kind != "neg_entropy":
            problems.append("entropy upper bound needs neg_entropy on the simplex")
        if eta > 1 / 16:
            problems.append(f"entropy upper bound needs eta <= 1/16, got {eta:g}")
        if T < 3:
            problems.append("entropy upper bound needs T >= 3")
        lim = th.entropy_ub_eps_max(d, eta, T)
        _check_threshold(problems, eps <= th.at_floor(lim), "entropy upper-bound threshold",
                         th.entropy_ub_eps_max, th.at_floor(lim), eps)
    elif bound == "barrier_ub":
        if not (reg.is_barrier and reg.nu > 1):
            problems.append("barrier upper bound needs a barrier regularizer with nu > 1")
        else:
            if eta > th.barrier_eta_max(reg.c1) * (1 + 1e-12):
                problems.append(f"barrier upper bound: {th.formula(th.barrier_eta_max)} "
                                f"= {th.barrier_eta_max(reg.c1):.6g} is violated by eta = {eta:g}")
            lim = th.barrier_ub_eps_max(reg.nu, reg.c1, reg.c2, eta, T, d)
            _check_threshold(problems, eps <= th.at_floor(lim), "barrier upper-bound threshold",
                             th.barrier_ub_eps_max, th.at_floor(lim), eps)
        if not dom.is_simplex_subset() or not dom.is_feasible(dom.uniform(), 1e-9):
            problems.append("barrier upper bound needs a simplex-like domain containing the uniform point")
        if "w1" in scn.params:
            problems.append("barrier upper bound starts at the uniform point; drop params.w1")
    elif bound == "stochastic_ub":
        if dom.kind != "simplex" or reg.kind != "neg_entropy":
            problems.append("stochastic bound needs neg_entropy on the simplex")
        else:
            if T < 256:
                problems.append("stochastic bound needs T >= 256")
            want = th.stochastic_eta(d, T)
            if abs(eta - want) > 1e-12 * want:
                problems.append(f"stochastic bound: {th.formula(th.stochastic_eta)} = {want:.17g}, got {eta:.17g}")
            delta = float(scn.params.get("delta", 0.05))
            lim = th.stochastic_ub_eps_max(delta, d, T)
            _check_threshold(problems, eps <= th.at_floor(lim), "stochastic upper-bound threshold",
                             th.stochastic_ub_eps_max, th.at_floor(lim), eps)
        if lk != "iid":
            problems.append("stochastic bound needs iid losses")
    elif bound == "ftrl" and runner != "ftrl":
        problems.append("the ftrl bound applies to the ftrl runner only")
    return problems


def check(scn: Scenario) -> None:
    problems = validate(scn)
    if problems:
        raise ConfigError("invalid scenario:\n  " + "\n  ".join(problems), problems)


# -- scripted double switch -------------------------------------------------------------


def run_double_switch(eta: float, eps: float, T: int, k: float) -> tj.Trajectory:
    """Two-arm entropy run that gets stuck twice.

    Losses are (0, 1) for 3 tau rounds, (1, 0) for 2 tau rounds, then (0, 1),
    with tau = k / (2 eta).  Rounds 1..tau and 3tau+1..5tau are exact steps;
    every other round repeats the previous iterate, which the stuck criterion
    on the small coordinate makes an eps-approximate step.
    """
    tau = double_switch_tau(eta, k)
    dom, reg = Domain.simplex(2), Regularizer.neg_entropy()
    L = np.vstack([np.tile([0.0, 1.0], (3 * tau, 1)), np.tile([1.0, 0.0], (2 * tau, 1)),
                   np.tile([0.0, 1.0], (T - 5 * tau, 1))])
    L.setflags(write=False)
    w = dom.uniform()
    iterates, certs, stuck = [w], [], []
    frozen_cert = None
    for t in range(T):
        exact_round = t < tau or 3 * tau <= t < 5 * tau
        obj = StepObjective(eta, L[t], w, reg, dom)
        if exact_round:
            w, cert = tj._solve_round(obj, t + 1)
            frozen_cert = None
        else:
            small = float(np.min(w.coords))
            crit = tj.stuck_criterion_value(reg, small, eta)
            stuck.append(crit <= eps)
            if frozen_cert is None or not np.array_equal(L[t], L[t - 1]):
                ok, frozen_cert = certify(obj, w, eps)
                if not ok:
                    raise CertificationError(f"round {t + 1}: frozen step slack {frozen_cert.slack:.3e} > eps")
            cert = frozen_cert
        iterates.append(w)
        certs.append(cert)
    meta = {"tau": tau, "stuck_checks": stuck, "frozen_rounds": T - 3 * tau}
    return tj.Trajectory(iterates, L, float(eta), float(eps), certs, "adversarial", reg, dom, meta)


# -- per-seed execution ---------------------------------------------------------------------


@dataclass
class CellResult:
    seed: int
    trace: np.ndarray                 # (T, 6)
    summary: dict
    checks: list = field(default_factory=list)   # (name, ok, detail)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def _produce(scn: Scenario, seed: int):
    eta, eps, T = scn.eta, scn.eps, scn.T
    runner = scn.runner
    info = {"tries": 1}
    if runner == "adversarial_smooth_stuck":
        dom = build_domain(scn)
        return tj.build_smooth_stuck(dom.hi, build_regularizer(scn).beta, eps, eta, T), info
    if runner == "adversarial_entropy_stuck":
        return tj.build_entropy_stuck(entropy_alpha(scn), eps, eta, T), info
    if runner == "adversarial_dimension_stuck":
        reg = build_regularizer(scn)
        return tj.build_dimension_stuck(int(scn.domain["d"]), reg.nu, reg.c1, eps, eta, T, reg=reg), info
    if runner == "adversarial_double_switch":
        return run_double_switch(eta, eps, T, float(scn.params["k"])), info
    if runner == "adversarial_polytope_stuck":
        hard = build_hard(scn)
        spec = loss_spec(scn, hard.d)
        if scn.params.get("require_event", True):
            stream, tries = instances.sample_until_event(spec, int(scn.params.get("max_tries", 1000)),
                                                         seed, T, hard.tau)
            info["tries"] = tries
            traj = tj.build_polytope_stuck(hard, stream, eta, eps)
        else:
            stream = instances.make_loss_stream(spec, T, seed)
            traj = tj.build_polytope_stuck(hard, stream, eta, eps, require_event=False)
        if not stream.bounded:
            warnings.warn("gaussian losses leave [-1, 1]; regret bounds assuming bounded losses do not apply",
                          stacklevel=2)
        return traj, info
    dom, reg = build_domain(scn), build_regularizer(scn)
    losses = instances.make_loss_stream(loss_spec(scn, dom.d), T, seed)
    w1 = scn.params.get("w1")
    if w1 is not None:
        w1 = Point(np.atleast_1d(np.asarray(w1, dtype=float)))
    if runner == "exact":
        return tj.run_exact(dom, reg, losses, eta, w1), info
    if runner in ("honest_tight", "honest_saturating"):
        policy = runner.split("_", 1)[1]
        return tj.run_honest_inexact(dom, reg, losses, eta, eps, w1, policy, seed), info
    if runner == "ftrl":
        policy = scn.params.get("noise_policy", "saturating")
        return tj.run_ftrl_approx(dom, reg, losses, eta, eps, policy, seed), info
    raise ConfigError(f"unknown runner {runner!r}")


def _comparator(scn: Scenario, traj) -> Point:
    if "comparator" in traj.meta:
        return as_point(traj.meta["comparator"])
    best = tj.best_in_hindsight(traj.dom, traj.losses.sum(axis=0))
    if scn.expect.get("bound") == "barrier_ub":
        gamma = float(scn.params.get("gamma", 1.0 / scn.T))
        return Point((1 - gamma) * best.coords + gamma * traj.dom.uniform().coords)
    return best


def _bound(scn: Scenario, traj, comp: Point):
    name = scn.expect.get("bound")
    if name is None:
        return math.nan
    w1, reg, T, eta, d = traj.iterates[0], traj.reg, traj.T, traj.eta, traj.d
    if name == "smooth_ub":
        D = traj.dom.hi - traj.dom.lo
        return th.smooth_ub_bound(bregman(reg, comp, w1), eta, T, D, reg.beta, scn.eps)
    if name == "entropy_ub":
        return th.omd_bound(math.log(d), eta, T)
    if name == "barrier_ub":
        return th.omd_bound(bregman(reg, comp, w1), eta, T)
    if name == "stochastic_ub":
        return th.stochastic_bound(T, d)
    if name == "ftrl":
        return tj.ftrl_bound(reg, comp, w1, eta, scn.eps, T)
    raise ConfigError(f"unknown bound {name!r}")


def _balance_running(traj) -> np.ndarray:
    V = balance._default_basis(traj.dom)
    V = V / np.sum(np.abs(V), axis=1, keepdims=True)
    P = np.vstack([np.zeros(V.shape[0]), np.cumsum(traj.losses @ V.T, axis=0)])
    spread = np.maximum.accumulate(P, axis=0) - np.minimum.accumulate(P, axis=0)
    return spread.max(axis=1)[1:]


def _min_coord_floor(scn: Scenario, traj):
    v = scn.expect.get("min_coord_ge")
    if v == "psi":
        return balance.psi_floor(traj.reg.nu, traj.reg.c1, traj.eta, traj.T, traj.d)
    return None if v is None else float(v)


def run_cell(scn: Scenario, seed: int) -> CellResult:
    traj, info = _produce(scn, seed)
    comp = _comparator(scn, traj)
    rep = tj.regret(traj, comp)
    W = traj.coords()
    L = traj.losses
    slacks = traj.slacks()
    mins = W.min(axis=1)
    stat = _balance_running(traj)
    trace = np.column_stack([np.arange(1, traj.T + 1, dtype=float),
                             np.einsum("td,td->t", L, W[:-1]),
                             np.cumsum(rep.per_round_regret),
                             mins[:-1],
                             np.maximum.accumulate(slacks) if slacks.size else np.zeros(traj.T),
                             stat])
    bound = _bound(scn, traj, comp)
    max_slack = float(slacks.max()) if slacks.size else 0.0
    summary = {"seed": seed, "T": traj.T, "final_regret": rep.regret, "max_slack": max_slack,
               "min_coord": float(mins.min()), "loss_balance_alpha": float(stat[-1]),
               "comparator_loss": rep.comparator_loss, "bound": bound,
               "fallback_rounds": len(traj.meta.get("fallback_rounds", ())),
               "tries": info["tries"]}
    checks = _seed_checks(scn, traj, rep.regret, bound, max_slack, slacks, mins)
    summary["passed"] = int(all(ok for _, ok, _ in checks))
    return CellResult(seed, trace, summary, checks)


def _seed_checks(scn, traj, reg_value, bound, max_slack, slacks, mins):
    ex = scn.expect
    checks = []

    def add(name, ok, detail):
        checks.append((name, bool(ok), detail))

    relaxed = scn.eps < th.RESOLUTION_FLOOR or bool(traj.meta.get("relaxed"))
    if scn.runner != "exact" and not relaxed:
        add("certified", max_slack <= scn.eps, f"max slack {max_slack:.6g} <= eps {scn.eps:.6g}")
    if "regret_ge" in ex:
        add("regret_ge", reg_value >= ex["regret_ge"], f"regret {reg_value:.10g} >= {ex['regret_ge']:.10g}")
    if "regret_le" in ex:
        add("regret_le", reg_value <= ex["regret_le"], f"regret {reg_value:.10g} <= {ex['regret_le']:.10g}")
    if "bound" in ex:
        atol = float(ex.get("bound_atol", 1e-6))
        add("bound", reg_value <= bound + atol, f"regret {reg_value:.10g} <= {ex['bound']} bound {bound:.10g}")
    if "max_slack_le" in ex:
        add("max_slack_le", max_slack <= ex["max_slack_le"], f"max slack {max_slack:.6g} <= {ex['max_slack_le']:.6g}")
    if "min_slack_ge" in ex:
        lo = float(slacks.min()) if slacks.size else math.nan
        add("min_slack_ge", lo >= ex["min_slack_ge"], f"min slack {lo:.6g} >= {ex['min_slack_ge']:.6g}")
    floor = _min_coord_floor(scn, traj)
    if floor is not None:
        add("min_coord_ge", mins.min() >= floor, f"min coordinate {mins.min():.6g} >= {floor:.6g}")
    if "prediction_fraction" in ex:
        pred = _lower_prediction(traj)
        frac = float(ex["prediction_fraction"])
        add("prediction", reg_value >= frac * pred, f"regret {reg_value:.10g} >= {frac:g} * {pred:.10g}")
    if ex.get("stuck_criterion"):
        ok = _stuck_ok(traj, scn.eps)
        add("stuck_criterion", ok, "4 eta w^nu / c1 <= eps on every frozen round")
    if ex.get("pinned"):
        m = traj.meta
        d = traj.d
        ok = m["min_block_coord"] >= 1.0 / d and m["max_pinned"] <= m["pin_bound"]
        add("pinned", ok, f"min coord {m['min_block_coord']:.6g} >= 1/d = {1 / d:.6g}; "
            f"pinned {m['max_pinned']:.6g} <= {m['pin_bound']:.6g}")
    return checks


def _lower_prediction(traj) -> float:
    """Closed-form lower prediction of a stuck construction's regret."""
    m = traj.meta
    if "delta" in m:
        return (traj.T - 2 * m["tau"]) * (1.0 - m["delta"])
    if "predicted_regret" in m:
        return m["predicted_regret"]
    raise PreconditionError("no closed-form regret prediction for this runner")


def _stuck_ok(traj, eps: float) -> bool:
    m = traj.meta
    if "stuck_checks" in m:
        return all(m["stuck_checks"])
    if "stuck_value" in m:
        return m["stuck_value"] <= eps
    raise PreconditionError("runner has no frozen rounds to check")


# -- orchestration ----------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


@dataclass
class RunResult:
    code: int
    cells: list
    files: list
    lines: list
    aggregate: list = field(default_factory=list)


def _aggregate_checks(scn: Scenario, cells, tries_total: int):
    ex = scn.expect
    out = []
    regs = [c.summary["final_regret"] for c in cells]
    if "mean_regret_ge" in ex:
        mean = math.fsum(regs) / len(regs)
        out.append(("mean_regret_ge", mean >= ex["mean_regret_ge"],
                    f"mean regret {mean:.10g} >= {ex['mean_regret_ge']:.10g}"))
    if "event_rate_ge" in ex:
        rate = len(cells) / tries_total if tries_total else 0.0
        out.append(("event_rate_ge", rate >= ex["event_rate_ge"],
                    f"hardness event rate {rate:.4g} >= {ex['event_rate_ge']:g}"))
    frac = float(ex.get("pass_fraction", 1.0))
    n_pass = sum(c.passed for c in cells)
    out.append(("seeds", n_pass >= frac * len(cells) - 1e-12,
                f"{n_pass}/{len(cells)} seeds passed (need fraction {frac:g})"))
    return out


def _cell_task(args):
    scn, seed = args
    return run_cell(scn, seed)


def execute(scn: Scenario, jobs: int = 1) -> list:
    """Run every seed; results come back in seed-list order."""
    tasks = [(scn, s) for s in scn.seeds]
    if jobs <= 1 or len(tasks) == 1:
        return [_cell_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_cell_task, tasks))


def render(scn: Scenario, cells) -> dict:
    """File name -> contents for every requested output."""
    files = {}
    if "trace_csv" in scn.outputs:
        for c in cells:
            files[f"{scn.name}_seed{c.seed}_trace.csv"] = csv_text(TRACE_COLUMNS, c.trace.tolist())
    if "summary_csv" in scn.outputs:
        rows = [[c.summary[k] for k in SUMMARY_COLUMNS] for c in cells]
        files[f"{scn.name}_summary.csv"] = csv_text(SUMMARY_COLUMNS, rows)
    if "regret_svg" in scn.outputs:
        files[f"{scn.name}_regret.svg"] = emit_svg([c.trace[:, 2] for c in cells], scn.name, scn.eta, scn.eps)
    return files


def resolve_seeds(scn: Scenario, environ=None) -> Scenario:
    env = os.environ if environ is None else environ
    value = env.get("OMDLAB_SEED")
    if value is not None and value.strip():
        return scn.with_seeds(seeds_from_env(value))
    return scn


def run_scenario(scn, out_dir=".", jobs: int = 1, environ=None, stream=None) -> RunResult:
    """Validate, execute and write outputs.  Returns the exit code with details.

    Nothing is written when validation fails or a cell raises.
    """
    stream = sys.stdout if stream is None else stream
    lines = []

    def say(msg):
        lines.append(msg)
        print(msg, file=stream)

    try:
        if not isinstance(scn, Scenario):
            scn = load(scn)
        scn = resolve_seeds(scn, environ)
        check(scn)
    except ConfigError as exc:
        say(f"error: {exc}")
        return RunResult(EXIT_CONFIG, [], [], lines)
    try:
        cells = execute(scn, jobs)
    except SamplingExhausted as exc:
        say(f"FAIL {scn.name}: {exc}; no outputs written")
        return RunResult(EXIT_FAIL, [], [], lines)
    except (CertificationError, EventNotSatisfied, SolverError) as exc:
        where = f" (round {exc.round_index})" if getattr(exc, "round_index", None) else ""
        say(f"FAIL {scn.name}: {exc}{where}; no outputs written")
        return RunResult(EXIT_FAIL, [], [], lines)
    except (PreconditionError, ValueError) as exc:
        say(f"error: {scn.name}: {exc}")
        return RunResult(EXIT_CONFIG, [], [], lines)
    tries_total = sum(c.summary["tries"] for c in cells)
    agg = _aggregate_checks(scn, cells, tries_total)
    for c in cells:
        bad = [f"{n} ({d})" for n, ok, d in c.checks if not ok]
        say(f"seed {c.seed}: regret {c.summary['final_regret']:.10g} "
            + ("ok" if not bad else "failed: " + "; ".join(bad)))
    for name, ok, detail in agg:
        say(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    files = render(scn, cells)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for fname, text in files.items():
        path = os.path.join(out_dir, fname)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    code = EXIT_PASS if all(ok for _, ok, _ in agg) else EXIT_FAIL
    say(f"{scn.name}: {'pass' if code == EXIT_PASS else 'FAIL'} ({len(written)} files in {out_dir})")
    return RunResult(code, cells, written, lines, agg)
