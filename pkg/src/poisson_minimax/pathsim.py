"""Exact event-driven simulation of the likelihood ratio under H0.

Between events ``log L`` falls linearly at rate ``lambda1 - lambda0``; each
event (rate ``lambda0`` under H0) adds ``log(lambda1/lambda0)``.  Exit times
from an interval are therefore available in closed form: the lower bound is
hit by continuous decay at an analytically solved instant, the upper bound
can only be crossed at an event.  Path integrals of ``L`` are summed segment
by segment with ``(l_start - l_end) / (lambda1 - lambda0)``.

Randomness comes from a counter-based generator: the k-th uniform of path
``i`` is a hash of ``(seed, i, k)``.  A path can be regenerated on its own,
so results do not depend on batching, ordering, or the number of workers.
"""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SolverError
from .model import Model

DEFAULT_MAX_JUMPS = 10**7

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0xD1B54A32D192ED03)
_MASK64 = (1 << 64) - 1


class Side(str, enum.Enum):
    LOWER = "Lower"
    UPPER = "Upper"


@dataclass(frozen=True)
class Interval:
    """Continuation interval (lower, upper) for L, optionally closed on the right.

    ``upper=math.inf`` disables upper exits.
    """

    lower: float
    upper: float
    upper_closed: bool = False

    def __post_init__(self):
        if not (0 < self.lower < self.upper):
            raise PreconditionError(
                f"interval needs 0 < lower < upper, got ({self.lower}, {self.upper})"
            )

    def contains(self, l: float) -> bool:
        if l <= self.lower:
            return False
        return l <= self.upper if self.upper_closed else l < self.upper


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_index: int

    def uniforms(self, count: int, start: int = 0) -> np.ndarray:
        """Uniforms number ``start .. start+count-1`` of this stream, in (0, 1]."""
        counters = np.arange(start, start + count, dtype=np.uint64)
        return counter_uniforms(self.seed, np.full(count, self.stream_index, dtype=np.uint64), counters)


@dataclass(frozen=True)
class ExitRecord:
    tau: float
    side: Side
    l_exit: float
    int_l_dt: float
    n_jumps: int


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def counter_uniforms(seed: int, streams: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Hash ``(seed, stream, counter)`` triples to doubles in (0, 1].

    ``streams`` and ``counters`` broadcast against each other.
    """
    s = np.uint64(int(seed) & _MASK64)
    with np.errstate(over="ignore"):
        key = _mix64(np.asarray(s + _GOLDEN, dtype=np.uint64))
        key = _mix64(key ^ (np.asarray(streams, dtype=np.uint64) * _STREAM_SALT + _GOLDEN))
        x = _mix64(key + (np.asarray(counters, dtype=np.uint64) + np.uint64(1)) * _GOLDEN)
    return ((x >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)


def exponential_waits(seed: int, streams: np.ndarray, counter: int, rate: float) -> np.ndarray:
    """Inverse-transform Exp(rate) variates, the ``counter``-th of each stream."""
    u = counter_uniforms(seed, streams, np.uint64(counter))
    return -np.log(u) / rate


@dataclass
class ExitBatch:
    """Column-wise exit records for paths ``path_ids``."""

    path_ids: np.ndarray
    tau: np.ndarray
    upper: np.ndarray  # bool: exited through the upper bound
    l_exit: np.ndarray
    int_l_dt: np.ndarray
    n_jumps: np.ndarray

    def __len__(self) -> int:
        return len(self.tau)

    @property
    def lower(self) -> np.ndarray:
        return ~self.upper

    def record(self, i: int) -> ExitRecord:
        return ExitRecord(
            tau=float(self.tau[i]),
            side=Side.UPPER if self.upper[i] else Side.LOWER,
            l_exit=float(self.l_exit[i]),
            int_l_dt=float(self.int_l_dt[i]),
            n_jumps=int(self.n_jumps[i]),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "tau", "side", "l_exit", "int_l_dt", "n_jumps"])
            for i in range(len(self)):
                w.writerow([
                    int(self.path_ids[i]),
                    f"{self.tau[i]:.17g}",
                    "Upper" if self.upper[i] else "Lower",
                    f"{self.l_exit[i]:.17g}",
                    f"{self.int_l_dt[i]:.17g}",
                    int(self.n_jumps[i]),
                ])

    @classmethod
    def concat(cls, parts: list["ExitBatch"]) -> "ExitBatch":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                     ("path_ids", "tau", "upper", "l_exit", "int_l_dt", "n_jumps")))


def _check_start(interval: Interval, l0: float) -> None:
    if not interval.contains(l0):
        side = "(A, B]" if interval.upper_closed else "(A, B)"
        raise PreconditionError(
            f"starting value l0={l0} outside {side} = ({interval.lower}, {interval.upper})"
        )


def _simulate_chunk(model, interval, l0, seed, path_ids, max_jumps) -> ExitBatch:
    m = len(path_ids)
    d = model.drift
    lr = model.log_jump
    c0 = math.log(l0)
    log_a = math.log(interval.lower)
    log_b = math.log(interval.upper) if math.isfinite(interval.upper) else math.inf
    lower_val = interval.lower

    tau = np.empty(m)
    upper = np.zeros(m, dtype=bool)
    l_exit = np.empty(m)
    integral = np.zeros(m)
    jumps = np.zeros(m, dtype=np.int64)

    active = np.arange(m)
    t = np.zeros(m)
    n = np.zeros(m, dtype=np.int64)
    k = 0
    while active.size:
        if k >= max_jumps:
            raise SolverError(
                f"path exceeded the jump cap of {max_jumps}",
                paths=path_ids[active][:10].tolist(),
            )
        streams = path_ids[active].astype(np.uint64)
        wait = exponential_waits(seed, streams, k, model.lambda0)
        ta = t[active]
        na = n[active]
        base = c0 + na * lr
        l_now = np.exp(base - d * ta)
        t_hit = (base - log_a) / d
        t_next = ta + wait

        hit = t_next > t_hit
        if hit.any():
            idx = active[hit]
            tau[idx] = t_hit[hit]
            l_exit[idx] = lower_val
            integral[idx] += (l_now[hit] - lower_val) / d
            jumps[idx] = na[hit]

        go = ~hit
        idx = active[go]
        tj = t_next[go]
        l_before = np.exp(base[go] - d * tj)
        integral[idx] += (l_now[go] - l_before) / d
        n_new = na[go] + 1
        log_after = c0 + n_new * lr - d * tj
        t[idx] = tj
        n[idx] = n_new
        out = log_after > log_b if interval.upper_closed else log_after >= log_b
        if out.any():
            oi = idx[out]
            tau[oi] = tj[out]
            upper[oi] = True
            l_exit[oi] = np.exp(log_after[out])
            jumps[oi] = n_new[out]
        active = idx[~out]
        k += 1

    return ExitBatch(path_ids=path_ids.copy(), tau=tau, upper=upper, l_exit=l_exit,
                     int_l_dt=integral, n_jumps=jumps)


def simulate_exits(
    model: Model,
    interval: Interval,
    l0: float,
    n_paths: int,
    seed: int,
    *,
    first_path: int = 0,
    workers: int = 1,
    chunk_size: int = 1 << 18,
    max_jumps: int = DEFAULT_MAX_JUMPS,
) -> ExitBatch:
    """Simulate paths ``first_path .. first_path + n_paths - 1`` to their exit."""
    _check_start(interval, l0)
    if n_paths < 1:
        raise PreconditionError("n_paths must be at least 1")
    ids = np.arange(first_path, first_path + n_paths, dtype=np.int64)
    chunks = [ids[i:i + chunk_size] for i in range(0, n_paths, chunk_size)]
    run = lambda c: _simulate_chunk(model, interval, l0, seed, c, max_jumps)  # noqa: E731
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return parts[0] if len(parts) == 1 else ExitBatch.concat(parts)


def simulate_exit(
    model: Model,
    interval: Interval,
    l0: float,
    rng: RngStream,
    max_jumps: int = DEFAULT_MAX_JUMPS,
) -> ExitRecord:
    """Exit record of the single path identified by ``rng``."""
    batch = simulate_exits(model, interval, l0, 1, rng.seed,
                           first_path=rng.stream_index, max_jumps=max_jumps)
    return batch.record(0)


def exit_from_waits(model: Model, interval: Interval, l0: float, waits) -> ExitRecord:
    """Run one path with explicitly supplied inter-arrival times.

    Follows the same arithmetic as :func:`simulate_exits`; raises
    ``PreconditionError`` if the waits run out before an exit.
    """
    _check_start(interval, l0)
    d = model.drift
    lr = model.log_jump
    c0 = math.log(l0)
    log_a = math.log(interval.lower)
    log_b = math.log(interval.upper) if math.isfinite(interval.upper) else math.inf
    t, n, integral = 0.0, 0, 0.0
    for wait in waits:
        base = c0 + n * lr
        l_now = math.exp(base - d * t)
        t_hit = (base - log_a) / d
        t_next = t + wait
        if t_next > t_hit:
            integral += (l_now - interval.lower) / d
            return ExitRecord(t_hit, Side.LOWER, interval.lower, integral, n)
        integral += (l_now - math.exp(base - d * t_next)) / d
        t, n = t_next, n + 1
        log_after = c0 + n * lr - d * t
        if log_after > log_b or (not interval.upper_closed and log_after == log_b):
            return ExitRecord(t, Side.UPPER, math.exp(log_after), integral, n)
    raise PreconditionError("inter-arrival times exhausted before the path exited")


@dataclass(frozen=True)
class ExitFunctionals:
    """Sample means over exit records with standard errors."""

    p_lower: float
    mean_int_l_minus_1: float
    mean_tau: float
    se_p_lower: float
    se_int_l_minus_1: float
    se_tau: float
    n_paths: int


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return mean, se


def functionals(batch: ExitBatch) -> ExitFunctionals:
    p, se_p = _mean_se(batch.lower.astype(np.float64))
    mi, se_i = _mean_se(batch.int_l_dt - batch.tau)
    mt, se_t = _mean_se(batch.tau)
    return ExitFunctionals(p, mi, mt, se_p, se_i, se_t, len(batch))


def estimate_exit_functionals(
    model: Model,
    interval: Interval,
    l0: float,
    n_paths: int,
    seed: int,
    workers: int = 1,
) -> ExitFunctionals:
    """P0(lower exit), E0 int_0^tau (L_t - 1) dt and E0 tau, each with its standard error."""
    return functionals(simulate_exits(model, interval, l0, n_paths, seed, workers=workers))


def simulate_terminal_likelihood(
    model: Model, horizon: float, n_paths: int, seed: int, first_path: int = 0
) -> np.ndarray:
    """L at a fixed time ``horizon`` (no stopping), using the same event streams."""
    if horizon < 0:
        raise PreconditionError("horizon must be nonnegative")
    ids = np.arange(first_path, first_path + n_paths, dtype=np.int64)
    t = np.zeros(n_paths)
    n = np.zeros(n_paths, dtype=np.int64)
    active = np.arange(n_paths)
    k = 0
    while active.size:
        wait = exponential_waits(seed, ids[active].astype(np.uint64), k, model.lambda0)
        t_next = t[active] + wait
        go = t_next <= horizon
        idx = active[go]
        t[idx] = t_next[go]
        n[idx] += 1
        active = idx
        k += 1
    return np.exp(n * model.log_jump - model.drift * horizon)


def event_times(seed: int, stream_index: int, rate: float, count: int) -> np.ndarray:
    """First ``count`` event times of one stream: cumulative sums of its waits,
    accumulated left to right exactly as the simulator does."""
    out = np.empty(count)
    t = 0.0
    s = np.array([stream_index], dtype=np.uint64)
    for k in range(count):
        t = t + float(exponential_waits(seed, s, k, rate)[0])
        out[k] = t
    return out
