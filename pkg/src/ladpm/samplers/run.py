"""Sampler configuration and the backward-process run loop."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..metrics import SampleSet
from ..oracle import EpsilonOracle
from ..rng import block_normals
from ..schedule import SPACINGS, Schedule, TimeGrid, make_time_grid
from .deis import deis_coeff_table, la_deis_step
from .steps import (
    _xhat,
    la_ddim_step,
    la_ddpm_step,
    la_dpm_solver2_step,
    la_dpm_solver3_step,
    la_spndm_step,
    spndm_first_step,
)

METHODS = ("ddpm", "ddim", "deis_tab", "s_pndm", "dpm_solver2", "dpm_solver3")
STOCHASTIC = frozenset({"ddpm"})

# chains per independent block; fixed so results never depend on --threads
BLOCK_SIZE = 4096


@dataclass
class SamplerConfig:
    """What to run.

    ``la_strength`` is a constant, a sequence of length ``steps`` whose entry
    ``[i - 1]`` is the strength at step i, or a callable ``i -> strength``.
    The strength at the first backward step (i = N) is always 0.
    """

    method: str = "ddim"
    steps: int = 10
    order: int = 2
    la_strength: float | Sequence[float] | Callable[[int], float] = 0.0
    spacing: str = "uniform-t"
    seed: int = 0
    num_samples: int = 1
    record_trajectories: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError("steps must be a positive integer")
        if not 0 <= self.order <= 3:
            raise ConfigError("DEIS order must be in 0..3")
        if self.spacing not in SPACINGS:
            raise ConfigError(f"unknown spacing {self.spacing!r}; expected one of {SPACINGS}")
        if self.num_samples < 1:
            raise ConfigError("num_samples must be >= 1")
        if self.record_trajectories < 0:
            raise ConfigError("record_trajectories must be >= 0")
        if not callable(self.la_strength) and not np.isscalar(self.la_strength):
            vals = np.asarray(self.la_strength, dtype=np.float64)
            if vals.shape != (self.steps,):
                raise ConfigError(f"la_strength sequence needs {self.steps} entries, got {vals.shape}")
        for i in range(1, self.steps + 1):
            if self._raw_strength(i) < 0:
                raise ConfigError(f"la_strength at step {i} is negative")

    def _raw_strength(self, i: int) -> float:
        ls = self.la_strength
        if callable(ls):
            return float(ls(i))
        if np.isscalar(ls):
            return float(ls)
        return float(ls[i - 1])

    def strength(self, i: int) -> float:
        """Lookahead strength at step i (0 at the first step i = N)."""
        return 0.0 if i == self.steps else self._raw_strength(i)

    @property
    def deterministic(self) -> bool:
        return self.method not in STOCHASTIC


@dataclass
class Trajectory:
    """Recorded states for a batch of chains, indexed by step i = 0..N.

    Row i (i >= 1) of ``eps``/``xhat``/``xtilde`` holds the quantities formed
    at z_i.  Row 0 holds the terminal evaluation: eps_hat(z_0, t_0) and the
    output x_hat(z_0, t_0) in both ``xhat`` and ``xtilde``.
    """

    times: np.ndarray  # (N+1,)
    z: np.ndarray  # (N+1, n, d)
    eps: np.ndarray
    xhat: np.ndarray
    xtilde: np.ndarray
    la: np.ndarray = field(default_factory=lambda: np.empty(0))  # (N+1,), 0 at row 0

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def output(self) -> np.ndarray:
        return self.xhat[0]

    def chain(self, k: int) -> "Trajectory":
        return Trajectory(self.times, self.z[:, k], self.eps[:, k], self.xhat[:, k], self.xtilde[:, k], self.la)


def _iterate(cfg: SamplerConfig, oracle: EpsilonOracle, grid: TimeGrid, z, noise, deis_table, record):
    """Walk i = N..1 for one block; ``record`` receives (i, z_i, StepOut)."""
    prev = None
    history: tuple = ()
    m = cfg.method
    for i in range(grid.steps, 0, -1):
        la = cfg.strength(i)
        if m == "ddpm":
            out = la_ddpm_step(z, prev, i, la, oracle, grid, noise[grid.steps - i])
        elif m == "ddim":
            out = la_ddim_step(z, prev, i, la, oracle, grid)
        elif m == "dpm_solver2":
            out = la_dpm_solver2_step(z, prev, i, la, oracle, grid)
        elif m == "dpm_solver3":
            out = la_dpm_solver3_step(z, prev, i, la, oracle, grid)
        elif m == "deis_tab":
            out = la_deis_step(z, history, prev, i, cfg.order, la, oracle, grid, deis_table[i])
        elif i == grid.steps:
            out = spndm_first_step(z, i, oracle, grid)
        else:
            out = la_spndm_step(z, history[0], prev, i, la, oracle, grid)
        if record is not None:
            record(i, z, out)
        z, prev, history = out.z, out.carry, out.history
    return z


def _run_block(cfg, oracle, grid, chains: range, dim: int, deis_table, n_record: int):
    rows = grid.steps + 1 if cfg.method in STOCHASTIC else 1
    normals = block_normals(cfg.seed, chains, rows, dim)
    z = normals[0]
    noise = normals[1:]

    rec = None
    record = None
    if n_record > 0:
        shape = (grid.steps + 1, n_record, dim)
        rec = {k: np.zeros(shape) for k in ("z", "eps", "xhat", "xtilde")}

        def record(i, z_i, out):
            rec["z"][i] = z_i[:n_record]
            rec["eps"][i] = out.eps[:n_record]
            rec["xhat"][i] = out.xhat[:n_record]
            rec["xtilde"][i] = out.xtilde[:n_record]

    z0 = _iterate(cfg, oracle, grid, z, noise, deis_table, record)
    a0, s0 = grid.alphas[0], grid.sigmas[0]
    eps0 = oracle(z0, grid.times[0])
    x_out = _xhat(z0, eps0, a0, s0)
    if rec is not None:
        rec["z"][0] = z0[:n_record]
        rec["eps"][0] = eps0[:n_record]
        rec["xhat"][0] = rec["xtilde"][0] = x_out[:n_record]
    return z0, x_out, rec


def run_sampler(
    config: SamplerConfig,
    oracle: EpsilonOracle,
    schedule: Schedule | TimeGrid,
    dim: int | None = None,
    threads: int = 1,
) -> tuple[SampleSet, Trajectory | None]:
    """Run ``config.num_samples`` independent chains from z_N ~ N(0, I).

    Returns the outputs x_hat(z_0, t_0) as a :class:`SampleSet` and, when
    ``config.record_trajectories > 0``, the trajectory of that many leading
    chains.  The terminal states z_0 are kept in ``provenance["z0"]``.
    """
    grid = schedule if isinstance(schedule, TimeGrid) else make_time_grid(schedule, config.steps, config.spacing)
    if grid.steps != config.steps:
        raise ConfigError(f"grid has {grid.steps} steps but config asks for {config.steps}")
    if dim is None:
        dim = _infer_dim(oracle)
    deis_table = deis_coeff_table(grid, config.order) if config.method == "deis_tab" else None

    n = config.num_samples
    blocks = [range(lo, min(lo + BLOCK_SIZE, n)) for lo in range(0, n, BLOCK_SIZE)]
    n_rec = [max(0, min(config.record_trajectories - b.start, len(b))) for b in blocks]

    def work(k):
        return _run_block(config, oracle.spawn(k), grid, blocks[k], dim, deis_table, n_rec[k])

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(len(blocks))))
    else:
        results = [work(k) for k in range(len(blocks))]

    z0 = np.concatenate([r[0] for r in results])
    out = np.concatenate([r[1] for r in results])
    provenance = {
        "method": config.method,
        "steps": config.steps,
        "order": config.order,
        "la_strength": [config.strength(i) for i in range(config.steps, 0, -1)],
        "spacing": config.spacing,
        "seed": config.seed,
        "z0": z0,
    }
    traj = None
    recs = [r[2] for r in results if r[2] is not None]
    if recs:
        cat = {k: np.concatenate([r[k] for r in recs], axis=1) for k in recs[0]}
        la = np.array([0.0] + [config.strength(i) for i in range(1, grid.steps + 1)])
        traj = Trajectory(grid.times.copy(), cat["z"], cat["eps"], cat["xhat"], cat["xtilde"], la)
    return SampleSet(out, provenance), traj


def _infer_dim(oracle: EpsilonOracle) -> int:
    for attr in ("x0", "mean"):
        v = getattr(oracle, attr, None)
        if v is not None and not callable(v):
            return int(np.size(v))
    target = getattr(oracle, "target", None)
    if target is not None:
        return target.dim
    inner = getattr(oracle, "inner", None)
    if inner is not None:
        return _infer_dim(inner)
    raise ConfigError("cannot infer the data dimension from the oracle; pass dim=")
