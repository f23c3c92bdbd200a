"""Scenario configs, presets and the batch runner behind the ``omdlab`` CLI."""

from .config import Scenario, dump, load, parse_text, serialize
from .presets import PRESETS, preset
from .runner import (EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, RunResult, check, run_cell, run_scenario,
                     validate)
from .svg import emit_svg

__all__ = [
    "Scenario", "load", "dump", "parse_text", "serialize", "PRESETS", "preset",
    "run_scenario", "run_cell", "validate", "check", "RunResult", "emit_svg",
    "EXIT_PASS", "EXIT_FAIL", "EXIT_CONFIG",
]
