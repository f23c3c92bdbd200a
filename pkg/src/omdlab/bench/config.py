"""Scenario configs: an INI file with fixed sections.

Grammar (keys are case-sensitive)::

    [scenario]            required
    name    = entropy-lb
    runner  = adversarial_entropy_stuck
    eta     = 0.1
    eps     = 8.2446144897542316e-10
    T       = 600
    seeds   = 0, 1, 2
    outputs = trace_csv, summary_csv, regret_svg

    [domain]              kind = simplex (d) | interval (lo, hi) | hard_polytope (m, optional)
    [regularizer]         kind = euclidean (beta) | neg_entropy | log_barrier | tsallis (q)
    [losses]              kind = iid | switching | constant | gaussian_polytope | builtin
    [params]              optional, runner-specific knobs
    [expect]              optional, pass/fail assertions evaluated per seed

Values in the free-form sections are typed by shape: ``true``/``false`` are
booleans, integers and floats parse as numbers, comma lists as tuples, and a
``;``-separated list of ``count: vector`` items as switching phases
(``phases = 150: 1, 0; 250: 0, 1``).  Anything else stays a string.
Floats are written with ``repr`` so a parse/serialize round trip is exact.
"""

import configparser
import math
from dataclasses import dataclass, field, replace

from ..exceptions import ConfigError

RUNNERS = (
    "exact",
    "honest_tight",
    "honest_saturating",
    "ftrl",
    "adversarial_smooth_stuck",
    "adversarial_entropy_stuck",
    "adversarial_dimension_stuck",
    "adversarial_polytope_stuck",
    "adversarial_double_switch",
)
OUTPUTS = ("trace_csv", "summary_csv", "regret_svg")
SECTIONS = ("scenario", "domain", "regularizer", "losses", "params", "expect")
SCENARIO_KEYS = ("name", "runner", "eta", "eps", "T", "seeds", "outputs")

PARAM_KEYS = {
    "w1", "noise_policy", "alpha", "k", "max_tries", "delta", "require_event",
    "gamma", "event_seeds",
}
EXPECT_KEYS = {
    "regret_ge", "regret_le", "mean_regret_ge", "bound", "bound_atol", "max_slack_le",
    "min_slack_ge", "min_coord_ge", "prediction_fraction", "pass_fraction",
    "event_rate_ge", "pinned", "stuck_criterion",
}
BOUNDS = ("smooth_ub", "entropy_ub", "barrier_ub", "stochastic_ub", "ftrl")


@dataclass(frozen=True)
class Scenario:
    name: str
    runner: str
    eta: float
    eps: float
    T: int
    seeds: tuple
    domain: dict
    regularizer: dict
    losses: dict
    params: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)
    outputs: tuple = OUTPUTS

    def with_seeds(self, seeds) -> "Scenario":
        return replace(self, seeds=tuple(int(s) for s in seeds))

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


# -- value codec -------------------------------------------------------------


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return _number(text)
    except ValueError:
        return text


def parse_value(text: str):
    text = text.strip()
    if ":" in text:
        phases = []
        for item in text.split(";"):
            if not item.strip():
                continue
            n, _, vec = item.partition(":")
            try:
                phases.append((int(n), tuple(float(v) for v in vec.split(",") if v.strip())))
            except ValueError as exc:
                raise ConfigError(f"bad phase item {item.strip()!r}") from exc
        return tuple(phases)
    if "," in text:
        return tuple(_scalar(p.strip()) for p in text.split(",") if p.strip())
    return _scalar(text)


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, (tuple, list)):
        if value and isinstance(value[0], (tuple, list)):
            return "; ".join(f"{int(n)}: {format_value(tuple(v))}" for n, v in value)
        # a trailing comma keeps one-element tuples from parsing back as scalars
        body = ", ".join(format_value(v) for v in value)
        return body + "," if len(value) == 1 else body
    return str(value)


# -- parse / serialize ---------------------------------------------------------


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",),
                                   inline_comment_prefixes=None)
    cp.optionxform = str
    return cp


def parse_text(text: str) -> Scenario:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    problems = [f"unknown section [{s}]" for s in cp.sections() if s not in SECTIONS]
    for s in ("scenario", "domain", "regularizer", "losses"):
        if not cp.has_section(s):
            problems.append(f"missing section [{s}]")
    if problems:
        raise ConfigError("; ".join(problems), problems)
    sc = dict(cp.items("scenario"))
    problems += [f"unknown key {k!r} in [scenario]" for k in sc if k not in SCENARIO_KEYS]
    problems += [f"missing key {k!r} in [scenario]" for k in SCENARIO_KEYS[:6] if k not in sc]
    if problems:
        raise ConfigError("; ".join(problems), problems)

    def section(name):
        if not cp.has_section(name):
            return {}
        return {k: parse_value(v) for k, v in cp.items(name)}

    try:
        eta = float(sc["eta"])
        eps = float(sc["eps"])
        T = int(sc["T"])
        seeds = tuple(int(s) for s in sc["seeds"].split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value in [scenario]: {exc}") from exc
    outputs = tuple(o.strip() for o in sc.get("outputs", ",".join(OUTPUTS)).split(",") if o.strip())
    return Scenario(sc["name"].strip(), sc["runner"].strip(), eta, eps, T, seeds,
                    section("domain"), section("regularizer"), section("losses"),
                    section("params"), section("expect"), outputs)


def load(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text)


def serialize(scn: Scenario) -> str:
    lines = ["[scenario]",
             f"name = {scn.name}",
             f"runner = {scn.runner}",
             f"eta = {scn.eta!r}",
             f"eps = {scn.eps!r}",
             f"T = {scn.T}",
             f"seeds = {', '.join(str(s) for s in scn.seeds)}",
             f"outputs = {', '.join(scn.outputs)}"]
    for name in ("domain", "regularizer", "losses", "params", "expect"):
        sect = getattr(scn, name)
        if not sect and name in ("params", "expect"):
            continue
        lines += ["", f"[{name}]"]
        lines += [f"{k} = {format_value(v)}" for k, v in sect.items()]
    return "\n".join(lines) + "\n"


def dump(scn: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(scn))


def seeds_from_env(value: str):
    """Parse OMDLAB_SEED: a single integer or a comma-separated list."""
    try:
        seeds = tuple(int(s) for s in value.split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"OMDLAB_SEED must be integers, got {value!r}") from exc
    if not seeds:
        raise ConfigError("OMDLAB_SEED is empty")
    return seeds


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def basic_problems(scn: Scenario) -> list:
    """Structural checks that need no numerics."""
    out = []
    if scn.runner not in RUNNERS:
        out.append(f"unknown runner {scn.runner!r}; valid: {', '.join(RUNNERS)}")
    if not scn.name or any(c in scn.name for c in "/\\"):
        out.append("name must be non-empty and contain no path separators")
    if not (_finite(scn.eta) and scn.eta > 0):
        out.append(f"eta must be a positive finite number, got {scn.eta!r}")
    if not (_finite(scn.eps) and scn.eps >= 0):
        out.append(f"eps must be a non-negative finite number, got {scn.eps!r}")
    if scn.T < 1:
        out.append(f"T must be >= 1, got {scn.T}")
    if not scn.seeds:
        out.append("seed list is empty")
    if any(s < 0 for s in scn.seeds):
        out.append("seeds must be non-negative")
    if len(set(scn.seeds)) != len(scn.seeds):
        out.append("seeds must be distinct")
    out += [f"unknown output {o!r}; valid: {', '.join(OUTPUTS)}" for o in scn.outputs if o not in OUTPUTS]
    out += [f"unknown key {k!r} in [params]" for k in scn.params if k not in PARAM_KEYS]
    out += [f"unknown key {k!r} in [expect]" for k in scn.expect if k not in EXPECT_KEYS]
    bound = scn.expect.get("bound")
    if bound is not None and bound not in BOUNDS:
        out.append(f"unknown bound {bound!r}; valid: {', '.join(BOUNDS)}")
    for key in ("domain", "regularizer", "losses"):
        if "kind" not in getattr(scn, key):
            out.append(f"[{key}] needs a kind")
    return out

