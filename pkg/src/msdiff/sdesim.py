"""Euler-Maruyama paths, streaming time averages and first-passage times.

Replicates are stepped together as a vector, one column per replicate, but
every replicate draws its increments from its own counter-based stream, so
results do not depend on which replicates share a batch.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import ModelSpec, ScheduleConfig
from .rng import normal_matrix

CHUNK = 4096
PATH_MAGIC = b"MSPATH01"
DT_DIVISOR = 20.0


class BlowUpError(RuntimeError):
    """A replicate left the guarded domain or became non-finite."""


@dataclass(frozen=True)
class PathSimConfig:
    dt: float
    T: float
    seed: int = 0
    replicate_id: int = 0
    store_path: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and self.T >= 0):
            raise ValueError("need dt > 0 and T >= 0")
        if self.T / self.dt > 2 ** 40:
            raise ValueError("step count exceeds 2^40")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def check(self, spec: ModelSpec, divisor: float = DT_DIVISOR) -> None:
        """Enforce dt <= eps^2 / divisor for models with a fast term."""
        if spec.multiscale and self.dt > spec.eps ** 2 / divisor * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} violates dt <= eps^2/{divisor:g} for eps={spec.eps}")


@dataclass
class ErgodicAccumulator:
    """Left-endpoint Riemann sums of test functions along one path."""

    seed: int
    replicate_id: int
    dt: float
    steps: int = 0
    sum_real: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sum_complex: complex = 0j
    last_state: float = math.nan
    blown_up: bool = False
    path: np.ndarray | None = field(default=None, repr=False)

    @property
    def elapsed(self) -> float:
        return self.steps * self.dt

    def averages(self) -> np.ndarray:
        return self.sum_real / self.elapsed

    def complex_average(self) -> complex:
        return self.sum_complex / self.elapsed


@dataclass(frozen=True)
class FirstPassageRecord:
    target: float
    hit_time: float
    censored: bool
    replicate_id: int = 0


def guard_radius(spec: ModelSpec) -> float:
    return 10.0 * spec.truncation_length()


def _stepper(spec: ModelSpec, dt: float):
    """Return a function x, dW -> next x (dW already scaled by sqrt(dt))."""
    if spec.constant_sigma:
        s = float(np.asarray(spec.sigma(np.zeros(1)))[0])
        if spec.kind == "langevin":
            a, inv = spec.alpha, 1.0 / spec.eps
            c = 1.0 - a * dt
            fd = inv * dt

            def step(x, dw):
                return c * x - fd * np.sin(inv * x) + s * dw
            return step

        def step(x, dw):
            return x + spec.drift(x) * dt + s * dw
        return step

    def step(x, dw):
        return x + spec.drift(x) * dt + spec.sigma(x) * dw
    return step


def simulate_batch(spec: ModelSpec, dt: float, T: float, seed: int,
                   replicate_ids: Sequence[int], tests: Sequence[Callable] = (),
                   store_paths: bool = False, check_dt: bool = True) -> list[ErgodicAccumulator]:
    """Simulate several replicates and accumulate time integrals of each test.

    The complex channel always accumulates exp(iX). Replicates that blow up
    are flagged and their sums set to NaN.
    """
    cfg = PathSimConfig(dt, T, seed)
    if check_dt:
        cfg.check(spec)
    n_steps = cfg.n_steps
    ids = np.asarray(replicate_ids, dtype=np.int64)
    n = ids.size
    x = np.full(n, float(spec.x0))
    sums = np.zeros((len(tests), n))
    cs = np.zeros(n)
    sn = np.zeros(n)
    blown = np.zeros(n, dtype=bool)
    paths = np.empty((n_steps + 1, n)) if store_paths else None
    if store_paths:
        paths[0] = x
    step = _stepper(spec, dt)
    sq = math.sqrt(dt)
    guard = guard_radius(spec)
    with np.errstate(all="ignore"):
        for start in range(0, n_steps, CHUNK):
            m = min(CHUNK, n_steps - start)
            dW = normal_matrix(seed, ids, start, m)
            dW *= sq
            for k in range(m):
                for j, t in enumerate(tests):
                    sums[j] += t(x)
                cs += np.cos(x)
                sn += np.sin(x)
                x = step(x, dW[k])
                if store_paths:
                    paths[start + k + 1] = x
            bad = ~np.isfinite(x) | (np.abs(x) > guard)
            if bad.any():
                blown |= bad
                x[bad] = np.nan
    out = []
    for j in range(n):
        acc = ErgodicAccumulator(int(seed), int(ids[j]), dt, n_steps,
                                 sums[:, j] * dt, complex(cs[j] * dt, sn[j] * dt),
                                 float(x[j]), bool(blown[j]),
                                 None if paths is None else paths[:, j].copy())
        if acc.blown_up:
            acc.sum_real = np.full(len(tests), np.nan)
            acc.sum_complex = complex(np.nan, np.nan)
        out.append(acc)
    return out


def simulate_accumulate(spec: ModelSpec, cfg: PathSimConfig,
                        tests: Sequence[Callable] = ()) -> ErgodicAccumulator:
    """Single replicate; raises BlowUpError instead of flagging."""
    acc = simulate_batch(spec, cfg.dt, cfg.T, cfg.seed, [cfg.replicate_id], tests,
                         store_paths=cfg.store_path)[0]
    if acc.blown_up:
        raise BlowUpError(f"replicate {cfg.replicate_id} left |x| <= {guard_radius(spec):.3g}")
    return acc


def first_passage_batch(spec: ModelSpec, dt: float, T: float, seed: int,
                        replicate_ids: Sequence[int], target: float,
                        check_dt: bool = True) -> list[FirstPassageRecord]:
    """First crossing of ``target`` per replicate, interpolated within the step."""
    cfg = PathSimConfig(dt, T, seed)
    if check_dt:
        cfg.check(spec)
    ids = np.asarray(replicate_ids, dtype=np.int64)
    hit = np.full(ids.size, np.nan)
    if spec.x0 == target:
        return [FirstPassageRecord(target, 0.0, False, int(r)) for r in ids]
    active = np.arange(ids.size)
    x = np.full(ids.size, float(spec.x0))
    step = _stepper(spec, dt)
    sq = math.sqrt(dt)
    n_steps = cfg.n_steps
    with np.errstate(all="ignore"):
        for start in range(0, n_steps, CHUNK):
            if active.size == 0:
                break
            m = min(CHUNK, n_steps - start)
            dW = normal_matrix(seed, ids[active], start, m) * sq
            xa = x[active]
            live = np.ones(active.size, dtype=bool)
            for k in range(m):
                d0 = xa - target
                xa = step(xa, dW[k])
                d1 = xa - target
                crossed = live & (d0 * d1 <= 0.0)
                if crossed.any():
                    frac = d0[crossed] / (d0[crossed] - d1[crossed])
                    hit[active[crossed]] = (start + k + frac) * dt
                    live &= ~crossed
            x[active] = xa
            active = active[live]
    return [FirstPassageRecord(target, float(h) if np.isfinite(h) else T, not np.isfinite(h), int(r))
            for h, r in zip(hit, ids)]


def first_passage(spec: ModelSpec, cfg: PathSimConfig, target: float) -> FirstPassageRecord:
    return first_passage_batch(spec, cfg.dt, cfg.T, cfg.seed, [cfg.replicate_id], target)[0]


def endpoint_tail_statistic(spec: ModelSpec, schedule: ScheduleConfig, delta: float,
                            n_replicates: int, seed: int = 0) -> list[dict]:
    """Fraction of replicates with |X_eps(T_eps)| / sqrt(T_eps) > delta, per eps."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    rows = []
    for eps in schedule.eps_values:
        model = spec.with_eps(eps)
        T = schedule.horizon(eps)
        accs = simulate_batch(model, schedule.dt(eps), T, seed, range(n_replicates))
        ends = np.array([a.last_state for a in accs])
        frac = float(np.mean(np.abs(ends) / math.sqrt(T) > delta))
        rows.append({"eps": eps, "T": T, "fraction": frac,
                     "steps": sum(a.steps for a in accs)})
    return rows


def write_path(path_file, values: np.ndarray) -> None:
    """Binary dump: 8-byte magic, uint64 step count, then step count + 1 float64 values (LE)."""
    values = np.asarray(values, dtype="<f8")
    with open(path_file, "wb") as fh:
        fh.write(PATH_MAGIC)
        fh.write(struct.pack("<Q", values.size - 1))
        fh.write(values.tobytes())


def read_path(path_file) -> np.ndarray:
    with open(path_file, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:8] != PATH_MAGIC:
            raise ValueError("not an MSPATH01 file")
        (steps,) = struct.unpack("<Q", head[8:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != steps + 1:
        raise ValueError(f"expected {steps + 1} values, found {data.size}")
    return data.astype(float)


def write_accumulators_csv(path, accs: Sequence[ErgodicAccumulator], test_names: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "replicate_id", "steps", "elapsed", "last_state", "re_c", "im_c",
                    "blown_up", *[f"sum_{n}" for n in test_names]])
        for a in accs:
            w.writerow([a.seed, a.replicate_id, a.steps, repr(a.elapsed), repr(a.last_state),
                        repr(a.sum_complex.real), repr(a.sum_complex.imag), int(a.blown_up),
                        *[repr(float(v)) for v in a.sum_real]])


def _simulate_block(args):
    spec, dt, T, seed, ids, tests = args
    return simulate_batch(spec, dt, T, seed, ids, tests)


def simulate_replicates(spec: ModelSpec, dt: float, T: float, seed: int, n_replicates: int,
                        tests: Sequence[Callable] = (), workers: int = 1) -> list[ErgodicAccumulator]:
    """Replicates ``0 .. n_replicates - 1``, optionally split over worker processes.

    Results are merged in replicate order regardless of the worker count.
    """
    ids = list(range(n_replicates))
    if workers <= 1 or n_replicates < 2:
        return simulate_batch(spec, dt, T, seed, ids, tests)
    from concurrent.futures import ProcessPoolExecutor

    blocks = [b.tolist() for b in np.array_split(ids, min(workers, n_replicates))]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_simulate_block, [(spec, dt, T, seed, b, tuple(tests)) for b in blocks])
        out = [acc for part in parts for acc in part]
    return sorted(out, key=lambda a: a.replicate_id)
