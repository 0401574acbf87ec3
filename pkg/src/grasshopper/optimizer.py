"""Ground-state search for H = -P on the lattice model.

Moves exchange one occupied cell with one empty cell. The proposal is a
fixed mixture: with probability ``p_local`` the target is a uniform
offset within Chebyshev distance 2 of a uniform occupied source, otherwise
a uniform cell of the allowed region. Both parts are symmetric, so plain
Metropolis acceptance gives detailed balance with respect to exp(P/T).
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigurationError
from .lattice import SpinConfiguration, total_probability

__all__ = [
    "AnnealSchedule",
    "TemperingConfig",
    "RunRecord",
    "MoveSet",
    "metropolis_sweep",
    "calibrate_schedule",
    "anneal",
    "parallel_tempering",
    "swap_probability",
    "replica_rng",
]

CHUNK = 1 << 16
RECENTRE_EVERY = 100_000


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling ``T <- gamma T`` from ``T_start`` down to ``T_end``.

    A sweep is ``steps_per_temperature`` proposals at one temperature.
    ``max_sweeps`` caps the number of sweeps (``None`` runs to ``T_end``).
    """

    T_start: float
    T_end: float
    steps_per_temperature: int
    cooling_factor: float = 0.95
    max_sweeps: int | None = None

    def __post_init__(self):
        if not (self.T_start > self.T_end > 0):
            raise ConfigurationError("need T_start > T_end > 0")
        if not 0 < self.cooling_factor < 1:
            raise ConfigurationError("cooling factor must lie in (0, 1)")
        if self.steps_per_temperature < 0:
            raise ConfigurationError("steps_per_temperature must be >= 0")
        if self.max_sweeps is not None and self.max_sweeps < 0:
            raise ConfigurationError("max_sweeps must be >= 0")

    @property
    def n_sweeps(self):
        n = int(math.floor(math.log(self.T_end / self.T_start) / math.log(self.cooling_factor) + 1e-9)) + 1
        return n if self.max_sweeps is None else min(n, self.max_sweeps)

    def temperature(self, sweep):
        return self.T_start * self.cooling_factor ** sweep


@dataclass(frozen=True)
class TemperingConfig:
    """Replica temperatures plus swap cadence.

    ``swap_interval`` is the number of proposals each replica makes
    between swap rounds; ``sweeps`` is the number of rounds.
    """

    temperatures: tuple
    swap_interval: int
    sweeps: int = 100

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temperatures)
        object.__setattr__(self, "temperatures", temps)
        if not temps or any(t <= 0 for t in temps):
            raise ConfigurationError("temperatures must be positive")
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise ConfigurationError("temperatures must be strictly ascending")
        if self.swap_interval < 0 or self.sweeps < 0:
            raise ConfigurationError("swap_interval and sweeps must be >= 0")

    @property
    def replicas(self):
        return len(self.temperatures)

    @classmethod
    def geometric(cls, T_low, T_high, replicas, swap_interval, sweeps=100):
        if replicas == 1:
            return cls((T_low,), swap_interval, sweeps)
        return cls(tuple(np.geomspace(T_low, T_high, replicas)), swap_interval, sweeps)


@dataclass
class RunRecord:
    """Outcome of an optimization run.

    ``state`` is the resumable internal state (``None`` once finished
    cleanly and not requested).
    """

    method: str
    dimension: int
    jump: float
    M: int
    lattice: dict
    parameters: dict
    seed: int
    best_probability: float
    best_configuration: SpinConfiguration
    initial_probability: float
    acceptance_trace: list = field(default_factory=list)
    probability_trace: list = field(default_factory=list)
    best_trace: list = field(default_factory=list)
    completed: bool = True
    state: dict | None = None

    def to_json(self):
        return {
            "method": self.method,
            "dimension": self.dimension,
            "d": self.jump,
            "M": self.M,
            "lattice": self.lattice,
            "parameters": self.parameters,
            "seed": self.seed,
            "initial_probability": self.initial_probability,
            "best_probability": self.best_probability,
            "completed": self.completed,
            "acceptance_trace": self.acceptance_trace,
            "probability_trace": self.probability_trace,
            "best_trace": self.best_trace,
        }


def replica_rng(seed, index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index, 0))))


def _coordinator_rng(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0, 1))))


def _rng_from_state(state):
    bg = np.random.PCG64()
    bg.state = state
    return np.random.Generator(bg)


class MoveSet:
    """Precomputed proposal tables for one lattice."""

    def __init__(self, lattice, p_local=0.8):
        if not 0 <= p_local <= 1:
            raise ConfigurationError("p_local must lie in [0, 1]")
        N = lattice.dimension
        local = np.array([v for v in itertools.product(range(-2, 3), repeat=N) if any(v)], dtype=np.int64)
        self.local_offsets = np.ascontiguousarray(local @ lattice.strides)
        self.allowed_cells = np.flatnonzero(lattice.allowed_mask()).astype(np.int64)
        self.p_local = float(p_local)

    def draw(self, rng, M, steps):
        u_kind = rng.random(steps)
        pick = rng.integers(0, M, steps)
        local_pick = rng.integers(0, self.local_offsets.size, steps)
        global_pick = rng.integers(0, self.allowed_cells.size, steps)
        u_accept = rng.random(steps)
        return u_kind, pick, local_pick, global_pick, u_accept


def _run_steps(config, kernel, moves, beta, rng, steps):
    accepted = valid = 0
    dp = 0.0
    done = 0
    while done < steps:
        n = min(CHUNK, steps - done)
        u_kind, pick, local_pick, global_pick, u_accept = moves.draw(rng, config.occupied_count, n)
        a, v, d = _kernels.sweep(
            config.grid, config.cells, config.where, config.allowed, moves.allowed_cells,
            moves.local_offsets, kernel.flat_offsets, kernel.raw, kernel.strides, kernel.reach,
            kernel.dense, kernel.scale, beta, u_kind, pick, local_pick, global_pick, u_accept,
            moves.p_local,
        )
        accepted += a
        valid += v
        dp += d
        done += n
    return accepted, valid, dp


def metropolis_sweep(config, kernel, T, rng, steps=None, moves=None):
    """Run ``steps`` (default M) Metropolis proposals at temperature T in place.

    Returns ``(accepted_count, accumulated dP)``. ``T = 0`` is the greedy
    limit: only non-decreasing moves are taken.
    """
    if T < 0 or math.isnan(T):
        raise ConfigurationError("temperature must be non-negative")
    moves = moves or MoveSet(config.lattice)
    steps = config.occupied_count if steps is None else int(steps)
    beta = np.inf if T == 0 else 1.0 / T
    accepted, _, dp = _run_steps(config, kernel, moves, beta, rng, steps)
    return accepted, dp


def calibrate_schedule(config, kernel, seed=0, probes=1000, start_factor=10.0,
                       end_ratio=1e-4, cooling_factor=0.95, steps_per_temperature=None,
                       max_sweeps=None, moves=None):
    """Default schedule: start at ``start_factor`` times the mean |dP| of valid probe moves."""
    moves = moves or MoveSet(config.lattice)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0, 2))))
    samples = []
    for _ in range(100):
        u_kind, pick, local_pick, global_pick, _ = moves.draw(rng, config.occupied_count, probes)
        out = _kernels.probe(
            config.grid, config.cells, config.allowed, moves.allowed_cells, moves.local_offsets,
            kernel.flat_offsets, kernel.raw, kernel.strides, kernel.reach, kernel.dense,
            kernel.scale, u_kind, pick, local_pick, global_pick, moves.p_local,
        )
        samples.extend(out[out >= 0].tolist())
        if len(samples) >= probes:
            break
    samples = np.asarray(samples[:probes])
    typical = float(samples.mean()) if samples.size else 0.0
    if not typical > 0:
        typical = kernel.scale * float(kernel.raw.sum()) / max(config.occupied_count, 1)
    T_start = start_factor * typical
    return AnnealSchedule(
        T_start=T_start,
        T_end=end_ratio * T_start,
        steps_per_temperature=config.occupied_count if steps_per_temperature is None else int(steps_per_temperature),
        cooling_factor=cooling_factor,
        max_sweeps=max_sweeps,
    )


def _record_base(config, kernel):
    lat = config.lattice
    return dict(dimension=lat.dimension, jump=kernel.jump, M=config.occupied_count, lattice=lat.to_json())


def anneal(initial, kernel, schedule, seed, resume=None, checkpoint=None, checkpoint_every=0,
           should_stop=None, p_local=0.8, verify_every=0):
    """Simulated annealing; the initial configuration is not modified.

    ``checkpoint(state)`` is called every ``checkpoint_every`` sweeps and
    ``should_stop()`` is polled between sweeps; stopping early returns an
    incomplete record whose ``state`` can be passed back as ``resume``.
    """
    moves = MoveSet(initial.lattice, p_local)
    config = initial.copy()
    p0 = total_probability(config, kernel)
    if resume is None:
        rng = replica_rng(seed, 0)
        state = dict(sweep=0, running=p0, best=p0, best_cells=config.cells.tolist(),
                     accepted_since_recentre=0, acceptance=[], probability=[], best_trace=[])
    else:
        config.set_cells(np.asarray(resume["cells"], dtype=np.int64))
        rng = _rng_from_state(resume["rng"])
        state = dict(resume)
        p0 = state["initial_probability"]
    best_cells = np.asarray(state["best_cells"], dtype=np.int64)
    running, best = state["running"], state["best"]
    steps = schedule.steps_per_temperature
    completed = True
    sweep = state["sweep"]

    def snapshot():
        return dict(sweep=sweep, running=running, best=best, best_cells=best_cells.tolist(),
                    accepted_since_recentre=state["accepted_since_recentre"],
                    acceptance=state["acceptance"], probability=state["probability"],
                    best_trace=state["best_trace"], cells=config.cells.tolist(),
                    rng=rng.bit_generator.state, initial_probability=p0)

    while sweep < schedule.n_sweeps:
        if should_stop is not None and should_stop():
            completed = False
            break
        T = schedule.temperature(sweep)
        accepted, valid, dp = _run_steps(config, kernel, moves, 1.0 / T, rng, steps)
        running += dp
        sweep += 1
        state["accepted_since_recentre"] += accepted
        if state["accepted_since_recentre"] >= RECENTRE_EVERY:
            config.recentre()
            state["accepted_since_recentre"] = 0
        if verify_every and sweep % verify_every == 0:
            exact = total_probability(config, kernel)
            if abs(exact - running) > 1e-9:
                raise ArithmeticError(f"running probability drifted by {exact - running!r}")
            running = exact
        if running > best:
            best = running
            best_cells = config.cells.copy()
        state["acceptance"].append(accepted / steps if steps else 0.0)
        state["probability"].append(running)
        state["best_trace"].append(best)
        if checkpoint is not None and checkpoint_every and sweep % checkpoint_every == 0:
            checkpoint(snapshot())

    best_config = SpinConfiguration(config.lattice, np.sort(best_cells), check_normalization=False)
    exact_best = total_probability(best_config, kernel)
    return RunRecord(
        method="anneal",
        parameters=asdict(schedule) | {"p_local": p_local},
        seed=int(seed),
        best_probability=exact_best,
        best_configuration=best_config,
        initial_probability=p0,
        acceptance_trace=list(state["acceptance"]),
        probability_trace=list(state["probability"]),
        best_trace=list(state["best_trace"]),
        completed=completed,
        state=None if completed else snapshot(),
        **_record_base(config, kernel),
    )


def swap_probability(T_a, T_b, P_a, P_b):
    """Metropolis acceptance for exchanging configurations between temperatures a and b."""
    x = (1.0 / T_a - 1.0 / T_b) * (P_b - P_a)
    return 1.0 if x >= 0 else math.exp(x)


def parallel_tempering(initials, kernel, tempering, seed, threads=None, resume=None,
                       checkpoint=None, checkpoint_every=0, should_stop=None, p_local=0.8):
    """Replica-exchange Monte Carlo over ``tempering.temperatures``.

    Replica r owns the stream ``replica_rng(seed, r)`` and, between swap
    rounds, runs ``swap_interval`` proposals at its current temperature.
    Swaps of adjacent temperatures alternate between even and odd pairs
    and exchange configurations, so each temperature keeps its stream.
    The result does not depend on ``threads``.
    """
    R = tempering.replicas
    if len(initials) != R:
        raise ConfigurationError(f"{len(initials)} initial configurations for {R} temperatures")
    moves = MoveSet(initials[0].lattice, p_local)
    configs = [c.copy() for c in initials]
    temps = tempering.temperatures
    if resume is None:
        rngs = [replica_rng(seed, r) for r in range(R)]
        coord = _coordinator_rng(seed)
        running = [total_probability(c, kernel) for c in configs]
        p0 = max(running)
        best_idx = int(np.argmax(running))
        best, best_cells = running[best_idx], configs[best_idx].cells.copy()
        rounds = 0
        acc_trace, prob_trace, best_trace, swaps = [], [], [], [0] * max(R - 1, 0)
        since = [0] * R
    else:
        for c, cells in zip(configs, resume["cells"]):
            c.set_cells(np.asarray(cells, dtype=np.int64))
        rngs = [_rng_from_state(s) for s in resume["rng"]]
        coord = _rng_from_state(resume["coordinator"])
        running = list(resume["running"])
        best, best_cells = resume["best"], np.asarray(resume["best_cells"], dtype=np.int64)
        rounds = resume["sweep"]
        acc_trace, prob_trace, best_trace = resume["acceptance"], resume["probability"], resume["best_trace"]
        swaps, since, p0 = resume["swaps"], resume["since"], resume["initial_probability"]

    steps = tempering.swap_interval

    def work(r):
        return _run_steps(configs[r], kernel, moves, 1.0 / temps[r], rngs[r], steps)

    def snapshot():
        return dict(sweep=rounds, running=list(running), best=best, best_cells=best_cells.tolist(),
                    acceptance=acc_trace, probability=prob_trace, best_trace=best_trace,
                    swaps=list(swaps), since=list(since), cells=[c.cells.tolist() for c in configs],
                    rng=[g.bit_generator.state for g in rngs], coordinator=coord.bit_generator.state,
                    initial_probability=p0)

    completed = True
    workers = max(1, min(R, threads or 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        while rounds < tempering.sweeps:
            if should_stop is not None and should_stop():
                completed = False
                break
            results = list(pool.map(work, range(R))) if workers > 1 else [work(r) for r in range(R)]
            acc_row = []
            for r, (accepted, _, dp) in enumerate(results):
                running[r] += dp
                since[r] += accepted
                if since[r] >= RECENTRE_EVERY:
                    configs[r].recentre()
                    since[r] = 0
                acc_row.append(accepted / steps if steps else 0.0)
            start = rounds % 2
            for a in range(start, R - 1, 2):
                u = coord.random()
                if u < swap_probability(temps[a], temps[a + 1], running[a], running[a + 1]):
                    configs[a], configs[a + 1] = configs[a + 1], configs[a]
                    running[a], running[a + 1] = running[a + 1], running[a]
                    since[a], since[a + 1] = since[a + 1], since[a]
                    swaps[a] += 1
            top = int(np.argmax(running))
            if running[top] > best:
                best, best_cells = running[top], configs[top].cells.copy()
            rounds += 1
            acc_trace.append(acc_row)
            prob_trace.append(list(running))
            best_trace.append(best)
            if checkpoint is not None and checkpoint_every and rounds % checkpoint_every == 0:
                checkpoint(snapshot())

    best_config = SpinConfiguration(configs[0].lattice, np.sort(best_cells), check_normalization=False)
    params = {"temperatures": list(temps), "swap_interval": tempering.swap_interval,
              "sweeps": tempering.sweeps, "p_local": p_local, "swaps_accepted": list(swaps)}
    return RunRecord(
        method="tempering",
        parameters=params,
        seed=int(seed),
        best_probability=total_probability(best_config, kernel),
        best_configuration=best_config,
        initial_probability=p0,
        acceptance_trace=acc_trace,
        probability_trace=prob_trace,
        best_trace=best_trace,
        completed=completed,
        state=None if completed else snapshot(),
        **_record_base(configs[0], kernel),
    )
