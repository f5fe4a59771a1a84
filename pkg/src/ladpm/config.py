"""Experiment configuration: a JSON document validated before any computation.

Example::

    {
      "seed": 0,
      "out": "runs/gmm",
      "schedule": {"kind": "discrete-vp"},
      "oracle": {"kind": "gmm", "weights": [0.5, 0.5], "means": [[-1], [1]], "variances": [0.04, 0.04]},
      "sampler": {"method": "ddpm", "steps": 100, "num_samples": 20000},
      "metrics": {"projections": 128}
    }
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .analysis import StepParams, parameter_grid
from .errors import ConfigError, LadpmError
from .oracle import EpsilonOracle, GmmTarget, gaussian_oracle, gmm_oracle, noisy_wrapper, point_mass_oracle
from .rng import stream
from .samplers import SamplerConfig
from .schedule import Schedule, schedule_from_dict

TOP_KEYS = {"seed", "out", "schedule", "oracle", "sampler", "metrics", "sweep", "convergence", "theory"}
SCHEDULE_KEYS = {"kind", "num_steps", "beta_min", "beta_max", "t_min"}
ORACLE_KEYS = {
    "point_mass": {"kind", "x0", "noise_scale"},
    "gaussian": {"kind", "mean", "std", "noise_scale"},
    "standard_normal": {"kind", "dim", "noise_scale"},
    "gmm": {"kind", "weights", "means", "variances", "noise_scale"},
}
SAMPLER_KEYS = {"method", "steps", "order", "la_strength", "spacing", "num_samples", "record_trajectories"}
METRICS_KEYS = {"reference_samples", "projections"}
SWEEP_KEYS = {"la_strengths"}
CONVERGENCE_KEYS = {"steps", "methods"}
THEORY_KEYS = {"gamma", "ratio", "phi", "phi_gap", "x_norm_sq", "trials", "mc_points"}
# default [lo, hi, count] axes of the theory grid: 10^4 points
THEORY_AXES = {"gamma": (0.05, 0.95, 10), "ratio": (0.1, 0.99, 10), "phi": (0.0, 0.6, 10), "phi_gap": (0.01, 0.5, 10)}
DEFAULT_TRIALS = 1_000_000

# domain for reference draws, disjoint from chain and oracle streams
_REFERENCE_DOMAIN = 2**33


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


@dataclass
class ExperimentConfig:
    raw: dict[str, Any]
    text: str = ""
    seed: int = 0
    out: str = "out"
    schedule: Schedule | None = None
    target: GmmTarget | None = None
    oracle_block: dict[str, Any] = field(default_factory=dict)
    sampler: dict[str, Any] = field(default_factory=dict)
    metrics: dict[str, Any] = field(default_factory=dict)
    sweep: dict[str, Any] = field(default_factory=dict)
    convergence: dict[str, Any] = field(default_factory=dict)
    theory: dict[str, Any] = field(default_factory=dict)
    theory_axes: dict[str, tuple] = field(default_factory=lambda: dict(THEORY_AXES))

    # -- construction --------------------------------------------------------
    @classmethod
    def from_text(cls, text: str, seed: int | None = None, out: str | None = None) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg}", e.lineno) from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object", 1)
        if seed is not None:
            raw["seed"] = int(seed)
        if out is not None:
            raw["out"] = out
        cfg = cls(raw=raw, text=text)
        cfg._validate()
        return cfg

    @classmethod
    def from_file(cls, path, seed: int | None = None, out: str | None = None) -> "ExperimentConfig":
        with open(path) as fh:
            text = fh.read()
        return cls.from_text(text, seed, out)

    def _err(self, msg: str, key: str | None = None) -> ConfigError:
        return ConfigError(msg, _line_of(self.text, key) if key else None)

    def _check_keys(self, block: dict, allowed: set[str], where: str) -> None:
        if not isinstance(block, dict):
            raise self._err(f"{where} must be an object", where)
        for k in block:
            if k not in allowed:
                raise self._err(f"unknown key {k!r} in {where}; allowed: {sorted(allowed)}", k)

    def _validate(self) -> None:
        raw = self.raw
        self._check_keys(raw, TOP_KEYS, "config")
        self.seed = raw.get("seed", 0)
        if not isinstance(self.seed, int) or self.seed < 0:
            raise self._err("seed must be a non-negative integer", "seed")
        self.out = str(raw.get("out", "out"))

        sch = raw.get("schedule", {})
        self._check_keys(sch, SCHEDULE_KEYS, "schedule")
        try:
            self.schedule = schedule_from_dict(sch)
        except (LadpmError, TypeError) as e:
            raise self._err(f"schedule: {e}", "schedule") from None

        orc = raw.get("oracle", {"kind": "standard_normal"})
        if not isinstance(orc, dict) or orc.get("kind") not in ORACLE_KEYS:
            raise self._err(f"oracle.kind must be one of {sorted(ORACLE_KEYS)}", "oracle")
        self._check_keys(orc, ORACLE_KEYS[orc["kind"]], "oracle")
        try:
            self.target = _target_of(orc)
        except (LadpmError, KeyError, TypeError, ValueError) as e:
            raise self._err(f"oracle: {e}", "oracle") from None
        if orc.get("noise_scale", 0.0) < 0:
            raise self._err("noise_scale must be non-negative", "noise_scale")
        self.oracle_block = orc

        self.sampler = dict(raw.get("sampler", {}))
        self._check_keys(self.sampler, SAMPLER_KEYS, "sampler")
        self.sampler_config()  # validates

        self.metrics = dict(raw.get("metrics", {}))
        self._check_keys(self.metrics, METRICS_KEYS, "metrics")
        self.sweep = dict(raw.get("sweep", {}))
        self._check_keys(self.sweep, SWEEP_KEYS, "sweep")
        self.convergence = dict(raw.get("convergence", {}))
        self._check_keys(self.convergence, CONVERGENCE_KEYS, "convergence")
        self.theory = dict(raw.get("theory", {}))
        self._check_keys(self.theory, THEORY_KEYS, "theory")
        self._validate_theory()

    def _validate_theory(self) -> None:
        th = self.theory
        axes = {}
        for key, default in THEORY_AXES.items():
            v = th.get(key, default)
            if not (isinstance(v, (list, tuple)) and len(v) == 3 and int(v[2]) == v[2] and v[2] >= 1):
                raise self._err(f"theory.{key} must be [lo, hi, count]", key)
            axes[key] = tuple(v)
        self.theory_axes = axes
        try:
            parameter_grid(**axes, x_norm_sq=float(th.get("x_norm_sq", 1.0)))
            for pt in th.get("mc_points", []):
                StepParams(**pt).validate()
        except (ConfigError, TypeError) as e:
            raise self._err(f"theory: {e}", "theory") from None
        trials = th.get("trials", DEFAULT_TRIALS)
        if not isinstance(trials, int) or trials < 2:
            raise self._err("theory.trials must be an integer >= 2", "trials")

    # -- accessors -----------------------------------------------------------
    def sampler_config(self, **overrides) -> SamplerConfig:
        kw = {**self.sampler, "seed": self.seed, **overrides}
        try:
            return SamplerConfig(**kw)
        except (LadpmError, TypeError) as e:
            raise self._err(f"sampler: {e}", "sampler") from None

    def build_oracle(self, seed: int | None = None) -> EpsilonOracle:
        orc, sch = self.oracle_block, self.schedule
        kind = orc["kind"]
        if kind == "point_mass":
            base = point_mass_oracle(orc["x0"], sch)
        elif kind == "gaussian":
            base = gaussian_oracle(orc.get("mean", 0.0), orc.get("std", 1.0), sch)
        elif kind == "standard_normal":
            base = gaussian_oracle(np.zeros(int(orc.get("dim", 1))), 1.0, sch)
        else:
            base = gmm_oracle(self.target, sch)
        scale = float(orc.get("noise_scale", 0.0))
        if scale > 0:
            return noisy_wrapper(base, scale, self.seed if seed is None else seed)
        return base

    def reference_draw(self, n: int, key: int = 0) -> np.ndarray:
        """i.i.d. samples from the analytic target (independent of sampler streams)."""
        return self.target.sample(n, stream(self.seed, _REFERENCE_DOMAIN, key))

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _target_of(orc: dict[str, Any]) -> GmmTarget:
    kind = orc["kind"]
    if kind == "point_mass":
        x0 = np.atleast_1d(np.asarray(orc["x0"], dtype=np.float64))
        return GmmTarget([1.0], [x0], [0.0])
    if kind == "gaussian":
        mean = np.atleast_1d(np.asarray(orc.get("mean", 0.0), dtype=np.float64))
        std = float(orc.get("std", 1.0))
        if std <= 0:
            raise ConfigError("std must be positive")
        return GmmTarget([1.0], [mean], [std**2])
    if kind == "standard_normal":
        dim = int(orc.get("dim", 1))
        if dim < 1:
            raise ConfigError("dim must be >= 1")
        return GmmTarget([1.0], [np.zeros(dim)], [1.0])
    return GmmTarget(orc["weights"], orc["means"], orc["variances"])
