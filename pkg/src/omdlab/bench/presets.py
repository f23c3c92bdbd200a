"""Named desk-scale scenarios, one per bound or construction.

Each preset is a plain ``Scenario``; ``omdlab preset <name>`` runs it and
``omdlab preset <name> --dump`` prints its INI form.
"""

import math

from ..exceptions import ConfigError
from ..instances import block_size, stuck_tau
from . import thresholds as th
from .config import Scenario

SEEDS20 = tuple(range(20))


def _switching(d: int, T: int, head: int):
    """``head`` rounds of e_1, then 1 - e_1 (the adversarial switching stream)."""
    e1 = tuple(1.0 if i == 0 else 0.0 for i in range(d))
    rest = tuple(1.0 - v for v in e1)
    return {"kind": "switching", "phases": ((head, e1), (T - head, rest))}


def smooth_lb() -> Scenario:
    # loss min(sqrt(2 beta eps)/eta, 1) = 0.5 keeps w at D/2; regret vs 0 is 0.5 * T * 0.5
    T, eps = 1000, 0.005
    return Scenario("smooth-lb", "adversarial_smooth_stuck", 0.2, eps, T, (0,),
                    {"kind": "interval", "lo": 0.0, "hi": 1.0}, {"kind": "euclidean", "beta": 1.0},
                    {"kind": "builtin"},
                    expect={"regret_ge": 250.0 - 1e-6, "regret_le": 250.0 + 1e-6,
                            "min_slack_ge": eps - 1e-9, "max_slack_le": eps + 1e-9})


def smooth_ub(eps: float = 1e-6) -> Scenario:
    T = 4096
    return Scenario("smooth-ub", "honest_tight", 1.0 / math.sqrt(T), eps, T, SEEDS20,
                    {"kind": "interval", "lo": 0.0, "hi": 1.0}, {"kind": "euclidean", "beta": 1.0},
                    {"kind": "iid", "d": 1, "dist": "uniform", "low": -1.0, "high": 1.0},
                    expect={"bound": "smooth_ub"})


def entropy_lb() -> Scenario:
    eta, T = 0.1, 600
    alpha = T / 3
    eps = th.entropy_lb_eps_min(eta, alpha)
    return Scenario("entropy-lb", "adversarial_entropy_stuck", eta, eps, T, (0,),
                    {"kind": "simplex", "d": 2}, {"kind": "neg_entropy"}, {"kind": "builtin"},
                    params={"alpha": alpha},
                    expect={"prediction_fraction": 0.9, "regret_ge": T / 4, "stuck_criterion": True})


def entropy_ub() -> Scenario:
    d, eta, T = 4, 0.05, 400
    eps = th.at_floor(th.entropy_ub_eps_max(d, eta, T))
    return Scenario("entropy-ub", "honest_saturating", eta, eps, T, SEEDS20,
                    {"kind": "simplex", "d": d}, {"kind": "neg_entropy"}, _switching(d, T, 3 * T // 8),
                    expect={"bound": "entropy_ub"})


def barrier_ub(kind: str = "log_barrier", q: float = 0.5) -> Scenario:
    d, eta, T = 4, 0.05, 2000
    reg = {"kind": "log_barrier"} if kind == "log_barrier" else {"kind": "tsallis", "q": q}
    nu, c = (2.0, 1.0) if kind == "log_barrier" else (2.0 - q, q)
    eps = th.at_floor(th.barrier_ub_eps_max(nu, c, c, eta, T, d))
    name = "barrier-ub" if kind == "log_barrier" else f"barrier-ub-tsallis{q:g}"
    return Scenario(name, "honest_saturating", eta, eps, T, SEEDS20,
                    {"kind": "simplex", "d": d}, reg, _switching(d, T, 3 * T // 8),
                    expect={"bound": "barrier_ub", "min_coord_ge": "psi"})


def stochastic_ub() -> Scenario:
    d, T = 4, 4096
    delta = 0.05
    eps = th.at_floor(th.stochastic_ub_eps_max(delta, d, T))
    return Scenario("stochastic-ub", "honest_saturating", th.stochastic_eta(d, T), eps, T, SEEDS20,
                    {"kind": "simplex", "d": d}, {"kind": "neg_entropy"},
                    {"kind": "iid", "d": d, "dist": "uniform", "low": -1.0, "high": 1.0},
                    params={"delta": delta},
                    expect={"bound": "stochastic_ub", "pass_fraction": 0.95})


def dimension_lb() -> Scenario:
    d, eta, T = 4, 0.1, 1000
    eps = 0.01
    pred = T * (1 - 1 / d)
    return Scenario("dimension-lb", "adversarial_dimension_stuck", eta, eps, T, (0,),
                    {"kind": "simplex", "d": d}, {"kind": "neg_entropy"}, {"kind": "builtin"},
                    expect={"regret_ge": pred - 1e-9, "regret_le": pred + 1e-9})


def polytope_lb() -> Scenario:
    eta, T, m = 0.1, 3000, 16
    eps = math.exp(-1.0)
    assert block_size(eps) == m
    d = 5 * m + 2
    return Scenario("polytope-lb", "adversarial_polytope_stuck", eta, eps, T, SEEDS20,
                    {"kind": "hard_polytope", "m": m}, {"kind": "neg_entropy"},
                    {"kind": "gaussian_polytope", "m": m, "eta": eta},
                    params={"max_tries": 1000, "require_event": True},
                    expect={"pinned": True, "mean_regret_ge": 0.25 * T * math.sqrt(eta * d) / d,
                            "event_rate_ge": 0.01})


def double_switch() -> Scenario:
    eta, T, k = 0.1, 2000, 10.0
    return Scenario("double-switch", "adversarial_double_switch", eta, th.double_switch_eps(eta, k), T, (0,),
                    {"kind": "simplex", "d": 2}, {"kind": "neg_entropy"}, {"kind": "builtin"},
                    params={"k": k},
                    expect={"regret_ge": 0.75 * T, "stuck_criterion": True})


def ftrl() -> Scenario:
    eta, eps, T = 0.1, 1e-4, 1000
    head = stuck_tau(eta, eps)
    return Scenario("ftrl", "ftrl", eta, eps, T, SEEDS20,
                    {"kind": "simplex", "d": 2}, {"kind": "neg_entropy"}, _switching(2, T, head),
                    params={"noise_policy": "saturating"},
                    expect={"bound": "ftrl"})


PRESETS = {
    "smooth-lb": smooth_lb,
    "smooth-ub": smooth_ub,
    "entropy-lb": entropy_lb,
    "entropy-ub": entropy_ub,
    "barrier-ub": barrier_ub,
    "stochastic-ub": stochastic_ub,
    "dimension-lb": dimension_lb,
    "polytope-lb": polytope_lb,
    "double-switch": double_switch,
    "ftrl": ftrl,
}

DESCRIPTIONS = {
    "smooth-lb": "euclidean on [0,1], constant loss keeps the iterate frozen: regret 0.5*T*0.5",
    "smooth-ub": "euclidean on [0,1], iid uniform losses, tight honest errors under the smooth bound",
    "entropy-lb": "two-arm entropy, losses switch after tau; frozen iterate gives linear regret",
    "entropy-ub": "entropy on the 4-simplex, switching losses, saturating errors at the threshold",
    "barrier-ub": "log-barrier on the 4-simplex, switching losses; iterates stay above psi",
    "stochastic-ub": "entropy on the 4-simplex, iid losses, saturating errors at 1e-12",
    "dimension-lb": "entropy on the 4-simplex frozen at uniform: regret 0.75*T",
    "polytope-lb": "entropy on the hard polytope (m=16), event-conditioned gaussian losses",
    "double-switch": "two-arm entropy stuck twice; recovers in between, then stuck for 3T/4 rounds",
    "ftrl": "approximate FTRL on the entropy-lb style stream at eps=1e-4",
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; valid names: {', '.join(PRESETS)}") from None
