import itertools
import json
import math

import numpy as np
import pytest
from scipy import stats

from grasshopper import _kernels
from grasshopper.errors import ConfigurationError
from grasshopper.lattice import Lattice, SpinConfiguration, build_kernel, init_shape, total_probability
from grasshopper.optimizer import (
    AnnealSchedule,
    MoveSet,
    TemperingConfig,
    _run_steps,
    anneal,
    calibrate_schedule,
    metropolis_sweep,
    parallel_tempering,
    replica_rng,
    swap_probability,
)

TOY_D = 2.0


def toy():
    """3x3 allowed block, two occupied cells, h = 2^-1/2 so that M h^2 = 1."""
    lat = Lattice(2, 2 ** -0.5, (13, 13), 5, (0.0, 0.0))
    return lat, build_kernel(lat, TOY_D, 2)


def toy_states(lat):
    block = [lat.flat([5 + i, 5 + j]) for i in range(3) for j in range(3)]
    return [tuple(sorted(p)) for p in itertools.combinations(block, 2)]


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        AnnealSchedule(1.0, 2.0, 10)
    with pytest.raises(ConfigurationError):
        AnnealSchedule(1.0, 0.1, 10, cooling_factor=1.0)
    s = AnnealSchedule(1.0, 0.1, 10, cooling_factor=0.5)
    assert s.n_sweeps == 4
    assert AnnealSchedule(1.0, 0.1, 10, cooling_factor=0.5, max_sweeps=2).n_sweeps == 2


def test_tempering_validation():
    with pytest.raises(ConfigurationError):
        TemperingConfig((2.0, 1.0), 10)
    with pytest.raises(ConfigurationError):
        TemperingConfig((0.0, 1.0), 10)
    t = TemperingConfig.geometric(0.1, 1.0, 4, 10)
    assert t.replicas == 4 and t.temperatures[0] == pytest.approx(0.1)


def test_swap_probability():
    assert swap_probability(0.3, 0.3, 0.2, 0.1) == 1.0
    # higher probability moves to the colder replica for free
    assert swap_probability(0.1, 0.2, 0.1, 0.2) == 1.0
    assert swap_probability(0.1, 0.2, 0.2, 0.1) == pytest.approx(math.exp((10 - 5) * (0.1 - 0.2)))


def test_zero_temperature_at_strict_maximum():
    lat, k = toy()
    best = SpinConfiguration(lat, lat.flat([[5, 5], [7, 7]]))
    p = total_probability(best, k)
    for s in toy_states(lat):
        # single moves reach only states sharing one cell
        if len(set(s) & set(best.cells.tolist())) == 1:
            assert total_probability(SpinConfiguration(lat, list(s)), k) < p
    accepted, dp = metropolis_sweep(best, k, 0.0, replica_rng(0, 0), steps=5000)
    assert accepted == 0 and dp == 0.0
    accepted, _ = metropolis_sweep(best, k, 1e-12, replica_rng(1, 0), steps=5000)
    assert accepted == 0


def test_infinite_temperature_accepts_every_valid_move():
    lat = Lattice.for_problem(2, 0.4, 400, room=1.3)
    k = build_kernel(lat, 0.4, 400)
    c = init_shape(lat, 400, "ball")
    accepted, valid, _ = _run_steps(c, k, MoveSet(lat), 0.0, replica_rng(0, 0), 20000)
    assert valid > 0 and accepted == valid


def test_sweep_deterministic_and_conserving():
    lat = Lattice.for_problem(2, 0.4, 400, room=1.3)
    k = build_kernel(lat, 0.4, 400)
    runs = []
    for _ in range(2):
        c = init_shape(lat, 400, "ball")
        out = [metropolis_sweep(c, k, 1e-4, replica_rng(9, 0)) for _ in range(3)]
        assert c.occupied_count == 400 and int(c.grid.sum()) == 400
        assert np.array_equal(np.flatnonzero(c.where >= 0), np.sort(c.cells))
        runs.append((out, c.cells.copy()))
    assert runs[0][0] == runs[1][0]
    assert np.array_equal(runs[0][1], runs[1][1])


def test_running_probability_integrity():
    lat = Lattice.for_problem(2, 0.4, 400, room=1.3)
    k = build_kernel(lat, 0.4, 400)
    c = init_shape(lat, 400, "random_blob", seed=0)
    p = total_probability(c, k)
    rng = replica_rng(4, 0)
    for T in (1e-3, 1e-4, 1e-5):
        _, dp = metropolis_sweep(c, k, T, rng, steps=4000)
        p += dp
        assert p == pytest.approx(total_probability(c, k), abs=1e-9)


def test_detailed_balance_on_toy_lattice():
    lat, k = toy()
    T = 0.01
    states = toy_states(lat)
    index = {s: i for i, s in enumerate(states)}
    energy = np.array([total_probability(SpinConfiguration(lat, list(s)), k) for s in states])
    target = np.exp((energy - energy.max()) / T)
    target /= target.sum()

    c = SpinConfiguration(lat, list(states[0]))
    moves = MoveSet(lat)
    rng = replica_rng(2024, 0)
    steps, batches = 10 ** 6, 50
    visits = np.zeros((batches, len(states)))
    per_batch = steps // batches
    chunk = 1000
    for b in range(batches):
        for _ in range(per_batch // chunk):
            u_kind, pick, local_pick, global_pick, u_accept = moves.draw(rng, 2, chunk)
            for s in range(chunk):
                sl = slice(s, s + 1)
                _kernels.sweep(c.grid, c.cells, c.where, c.allowed, moves.allowed_cells, moves.local_offsets,
                               k.flat_offsets, k.raw, k.strides, k.reach, k.dense, k.scale, 1.0 / T,
                               u_kind[sl], pick[sl], local_pick[sl], global_pick[sl], u_accept[sl], moves.p_local)
                visits[b, index[tuple(sorted(c.cells.tolist()))]] += 1
    freq = visits / per_batch
    # states of equal probability are pooled, 3 sigma from batch means per level
    levels = np.unique(np.round(energy, 12))
    for e in levels:
        sel = np.round(energy, 12) == e
        pooled = freq[:, sel].sum(axis=1)
        sigma = pooled.std(ddof=1) / math.sqrt(batches)
        assert abs(pooled.mean() - target[sel].sum()) <= 3 * sigma
    # every state individually: batch-means chi-square below its 0.999 quantile
    z = (freq.mean(axis=0) - target) / (freq.std(axis=0, ddof=1) / math.sqrt(batches))
    assert float((z ** 2).sum()) < stats.chi2.ppf(0.999, len(states) - 1)


@pytest.fixture(scope="module")
def small_run():
    lat = Lattice.for_problem(2, 0.4, 900, room=1.3)
    k = build_kernel(lat, 0.4, 900)
    c = init_shape(lat, 900, "ball")
    sched = calibrate_schedule(c, k, seed=0, start_factor=1.0, steps_per_temperature=4000)
    return lat, k, c, sched


def test_calibrated_schedule(small_run):
    _, _, _, sched = small_run
    assert sched.T_end == pytest.approx(1e-4 * sched.T_start)
    assert sched.cooling_factor == 0.95 and sched.T_start > 0


def test_anneal_record(small_run):
    lat, k, c, sched = small_run
    before = c.cells.copy()
    rec = anneal(c, k, sched, seed=3)
    assert np.array_equal(c.cells, before)
    assert rec.completed
    assert rec.best_probability >= rec.initial_probability - 1e-12
    assert rec.best_probability == pytest.approx(total_probability(rec.best_configuration, k), abs=1e-10)
    assert rec.best_probability == pytest.approx(rec.best_trace[-1], abs=1e-10)
    assert all(b >= a for a, b in zip(rec.best_trace, rec.best_trace[1:]))
    assert rec.best_configuration.occupied_count == 900
    assert len(rec.acceptance_trace) == sched.n_sweeps
    again = anneal(c, k, sched, seed=3)
    assert json.dumps(again.to_json()) == json.dumps(rec.to_json())
    assert np.array_equal(again.best_configuration.cells, rec.best_configuration.cells)


def test_anneal_zero_sweeps(small_run):
    lat, k, c, sched = small_run
    zero = AnnealSchedule(sched.T_start, sched.T_end, 1000, max_sweeps=0)
    rec = anneal(c, k, zero, seed=0)
    assert np.array_equal(rec.best_configuration.sorted_cells(), c.sorted_cells())
    assert rec.best_probability == total_probability(c, k)


def test_anneal_verify_mode(small_run):
    lat, k, c, sched = small_run
    short = AnnealSchedule(sched.T_start, sched.T_end, 2000, max_sweeps=20)
    rec = anneal(c, k, short, seed=1, verify_every=5)
    assert rec.completed


def test_anneal_resume_is_exact(small_run):
    lat, k, c, sched = small_run
    short = AnnealSchedule(sched.T_start, sched.T_end, 3000, max_sweeps=30)
    full = anneal(c, k, short, seed=5)
    calls = {"n": 0}

    def stop():
        calls["n"] += 1
        return calls["n"] > 12

    part = anneal(c, k, short, seed=5, should_stop=stop)
    assert not part.completed
    state = json.loads(json.dumps(part.state))
    resumed = anneal(c, k, short, seed=5, resume=state)
    assert resumed.to_json() == full.to_json()
    assert np.array_equal(resumed.best_configuration.cells, full.best_configuration.cells)


def test_checkpoint_callback(small_run):
    lat, k, c, sched = small_run
    short = AnnealSchedule(sched.T_start, sched.T_end, 1000, max_sweeps=10)
    seen = []
    anneal(c, k, short, seed=0, checkpoint=seen.append, checkpoint_every=4)
    assert [s["sweep"] for s in seen] == [4, 8]


def test_tempering_count_mismatch(small_run):
    lat, k, c, _ = small_run
    with pytest.raises(ConfigurationError):
        parallel_tempering([c], k, TemperingConfig((1e-4, 1e-3), 100, 2), seed=0)


def test_single_replica_equals_fixed_temperature_run(small_run):
    lat, k, c, sched = small_run
    T = sched.T_start * 0.1
    rec = parallel_tempering([c], k, TemperingConfig((T,), 2000, 5), seed=7)
    manual = c.copy()
    rng = replica_rng(7, 0)
    p = total_probability(manual, k)
    best = p
    for _ in range(5):
        _, dp = metropolis_sweep(manual, k, T, rng, steps=2000)
        p += dp
        best = max(best, p)
    assert rec.probability_trace[-1][0] == pytest.approx(p, abs=1e-15)
    assert rec.best_trace[-1] == best


def test_tempering_independent_of_threads(small_run):
    lat, k, c, sched = small_run
    temps = TemperingConfig.geometric(sched.T_start * 0.01, sched.T_start, 4, 1500, sweeps=6)
    inits = [c.copy() for _ in range(4)]
    a = parallel_tempering(inits, k, temps, seed=11, threads=1)
    b = parallel_tempering(inits, k, temps, seed=11, threads=4)
    assert a.to_json() == b.to_json()
    assert np.array_equal(a.best_configuration.cells, b.best_configuration.cells)
    assert a.best_probability >= a.initial_probability - 1e-12
    assert all(y >= x for x, y in zip(a.best_trace, a.best_trace[1:]))


def test_tempering_resume_is_exact(small_run):
    lat, k, c, sched = small_run
    temps = TemperingConfig.geometric(sched.T_start * 0.01, sched.T_start, 3, 1000, sweeps=8)
    inits = [c.copy() for _ in range(3)]
    full = parallel_tempering(inits, k, temps, seed=2)
    calls = {"n": 0}

    def stop():
        calls["n"] += 1
        return calls["n"] > 3

    part = parallel_tempering(inits, k, temps, seed=2, should_stop=stop)
    assert not part.completed
    resumed = parallel_tempering(inits, k, temps, seed=2, resume=json.loads(json.dumps(part.state)))
    assert resumed.to_json() == full.to_json()
