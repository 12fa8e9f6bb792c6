"""Experiment configuration: sectioned key=value files plus flag overrides.

A config file is plain INI text. Sections group related keys (run,
grid, family, kernel, probes, tolerances); every key has a default, so
an empty config is valid. Command-line flags override file values,
which override defaults. Validation failures raise UsageError, which
the CLI maps to exit code 2.
"""

import configparser
import math
import os
from fractions import Fraction

from .errors import UsageError

SCENARIOS = ("trivial", "translation", "heisenberg", "exp-list", "xst")

DEFAULTS = {
    "run": {
        "scenario": "translation",
        "seed": "0",
        "jobs": "1",
        "out": "",
        "refine": "1",
        "checks": "",
    },
    "grid": {"n": "0", "P": "24", "L": "4.0"},
    "family": {
        "gamma": "",
        "nu": "2",
        "mu0": "1",
        "J": "4",
        "M": "3",
        "a": "0.5",
        "p": "2",
        "grouping": "pure",
        "t_nodes": "12",
        "m_max": "4",
    },
    "kernel": {"manifest": "", "profile": "default"},
    "probes": {"count": "10", "trials": "12", "samples": "20000"},
    "tolerances": {
        "ball_ratio": "0.25",
        "doubling": "0.15",
        "power": "1e-5",
        "adjoint": "1e-8",
        "maximal_slope": "0.05",
    },
}

SCENARIO_DIMS = {
    "trivial": 1,
    "translation": 2,
    "heisenberg": 3,
    "exp-list": 3,
    "xst": 1,
}


def parse_p(text):
    """A single exponent: 'inf', an integer, a float, or a fraction like 4/3."""
    text = text.strip()
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        if "/" in text:
            return Fraction(text)
        if "." in text or "e" in text or "E" in text:
            return float(text)
        return Fraction(int(text))
    except (ValueError, ZeroDivisionError):
        raise UsageError("cannot parse exponent %r" % text)


def parse_p_list(text):
    parts = [s for s in (chunk.strip() for chunk in text.split(",")) if s]
    if not parts:
        raise UsageError("exponent list is empty")
    out = [parse_p(s) for s in parts]
    for p in out:
        if not p > 1:
            raise UsageError("exponents must exceed 1, got %s" % p)
    return out


class ExperimentConfig:
    """Validated bundle of everything a CLI command needs."""

    def __init__(self, values):
        run = values["run"]
        fam = values["family"]
        grid = values["grid"]
        self.scenario = run["scenario"]
        if self.scenario not in SCENARIOS:
            raise UsageError(
                "unknown scenario %r (choose from %s)" % (self.scenario, ", ".join(SCENARIOS))
            )
        self.gamma = fam["gamma"] or self.scenario
        if self.gamma not in SCENARIOS:
            raise UsageError("unknown gamma %r" % self.gamma)
        self.seed = self._int(run["seed"], "seed", low=0)
        self.jobs = self._int(run["jobs"], "jobs", low=1)
        self.refine = self._int(run["refine"], "refine", low=1)
        self.out = run["out"] or os.environ.get("RADONLAB_OUT", "") or "runs"
        self.checks = [s for s in (c.strip() for c in run["checks"].split(",")) if s]
        self.n = self._int(grid["n"], "grid n", low=0) or SCENARIO_DIMS[self.scenario]
        self.P = self._int(grid["P"], "grid P", low=8)
        self.L = self._float(grid["L"], "grid L", positive=True)
        self.nu = self._int(fam["nu"], "nu", low=1)
        self.mu0 = self._int(fam["mu0"], "mu0", low=1)
        if self.mu0 > self.nu:
            raise UsageError("mu0 must be at most nu")
        self.J = self._int(fam["J"], "J", low=0)
        self.M = self._int(fam["M"], "M", low=0)
        self.m_max = self._int(fam["m_max"], "m_max", low=0)
        self.a = self._float(fam["a"], "a", positive=True)
        self.p_list = parse_p_list(fam["p"])
        self.grouping = fam["grouping"]
        if self.grouping not in ("pure", "flag"):
            raise UsageError("grouping must be pure or flag")
        self.t_nodes = self._int(fam["t_nodes"], "t_nodes", low=2)
        self.manifest = values["kernel"]["manifest"]
        if self.manifest and not os.path.exists(self.manifest):
            raise UsageError("kernel manifest %r does not exist" % self.manifest)
        self.kernel_profile = values["kernel"]["profile"]
        self.probe_count = self._int(values["probes"]["count"], "probe count", low=1)
        self.trials = self._int(values["probes"]["trials"], "trials", low=1)
        self.samples = self._int(values["probes"]["samples"], "samples", low=100)
        self.tol = {k: self._float(v, "tolerance %s" % k, positive=True)
                    for k, v in values["tolerances"].items()}

    @staticmethod
    def _int(text, name, low=None):
        try:
            val = int(str(text).strip())
        except ValueError:
            raise UsageError("%s must be an integer, got %r" % (name, text))
        if low is not None and val < low:
            raise UsageError("%s must be at least %d" % (name, low))
        return val

    @staticmethod
    def _float(text, name, positive=False):
        try:
            val = float(str(text).strip())
        except ValueError:
            raise UsageError("%s must be a number, got %r" % (name, text))
        if positive and not val > 0:
            raise UsageError("%s must be positive" % name)
        if not math.isfinite(val):
            raise UsageError("%s must be finite" % name)
        return val

    @property
    def grid_P(self):
        return self.P * self.refine if self.refine > 1 else self.P


def load_config(path=None, overrides=None):
    """Merge defaults, an optional file, and flag overrides, then validate.

    overrides: mapping section -> {key: value} applied last. Unknown
    sections or keys in the file are rejected so typos surface early.
    """
    values = {sec: dict(keys) for sec, keys in DEFAULTS.items()}
    if path:
        if not os.path.exists(path):
            raise UsageError("config file %r does not exist" % path)
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise UsageError("cannot parse config: %s" % exc)
        for section in parser.sections():
            if section not in values:
                raise UsageError("unknown config section [%s]" % section)
            for key, val in parser.items(section):
                if key not in values[section]:
                    raise UsageError("unknown key %r in section [%s]" % (key, section))
                values[section][key] = val
    for section, keys in (overrides or {}).items():
        for key, val in keys.items():
            if val is not None:
                values[section][key] = str(val)
    return ExperimentConfig(values)
