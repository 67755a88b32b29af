"""Slot-level Monte Carlo simulation of correlated slotted Aloha.

Per slot every sensor transmits independently with probability q_i; the slot
delivers a packet iff exactly one sensor transmitted. When sensor j succeeds,
sensor i's AoI resets to 1 with probability c_ji (drawn independently per
receiver and per slot), otherwise it grows by one up to the cap.

Slots are processed in fixed-size chunks with vectorised numpy draws, so the
random stream (and hence every output) depends only on the seed.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .model import NetworkModel, Policy, validate

CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class SimConfig:
    model: NetworkModel
    policy: Policy
    horizon: int = 100_000
    seed: int = 0
    warmup: int = 1_000

    def __post_init__(self) -> None:
        if not isinstance(self.policy, Policy):
            object.__setattr__(self, "policy", Policy(self.policy))
        validate(self.model, self.policy)
        if not (self.horizon > self.warmup >= 0):
            raise ModelError(f"need horizon > warmup >= 0, got horizon={self.horizon}, warmup={self.warmup}")


@dataclass(eq=False)
class SimStats:
    mean_aoi: np.ndarray
    aoi_histogram: np.ndarray  # (n, cap); column k counts slots with AoI k+1
    reset_rate: np.ndarray
    delivered_updates: np.ndarray
    own_successes: np.ndarray
    empirical_ee: np.ndarray
    slots_simulated: int

    CSV_FIELDS = ("sensor", "mean_aoi", "reset_rate", "delivered_updates", "own_successes", "empirical_ee")

    @property
    def network_aoi(self) -> float:
        return float(np.sum(self.mean_aoi))

    @property
    def network_ee(self) -> float:
        return float(np.sum(self.empirical_ee))

    def aoi_distribution(self) -> np.ndarray:
        return self.aoi_histogram / self.aoi_histogram.sum(axis=1, keepdims=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_FIELDS)
        for i in range(self.mean_aoi.shape[0]):
            w.writerow([i, repr(float(self.mean_aoi[i])), repr(float(self.reset_rate[i])),
                        repr(float(self.delivered_updates[i])), repr(float(self.own_successes[i])),
                        repr(float(self.empirical_ee[i]))])
        w.writerow(["network", repr(self.network_aoi), repr(float(np.sum(self.reset_rate))),
                    repr(float(np.sum(self.delivered_updates))), repr(float(np.sum(self.own_successes))),
                    repr(self.network_ee)])
        return buf.getvalue()

    def equals(self, other: SimStats) -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("mean_aoi", "aoi_histogram", "reset_rate", "delivered_updates",
                      "own_successes", "empirical_ee", "slots_simulated")
        )


def _power_draw(model: NetworkModel, q: np.ndarray) -> np.ndarray:
    pw = model.power
    return pw.idle_power + q * (pw.transmit_power - pw.idle_power)


def simulate(config: SimConfig, trace: str | os.PathLike | io.TextIOBase | None = None,
             track_aoi: bool = True) -> SimStats:
    """Run one replication.

    ``trace`` (path or text stream) receives one CSV row per slot:
    slot, transmitters (``;``-joined), successful sensor (or empty), AoI of
    every sensor. ``track_aoi=False`` skips the AoI bookkeeping, leaving
    mean_aoi and the histogram empty (reset counts are unaffected).
    """
    model, q = config.model, config.policy.q
    n, cap = model.n, model.aoi_cap
    C = model.C
    T, warm = int(config.horizon), int(config.warmup)
    rng = np.random.default_rng(config.seed)
    chunk = max(1, CHUNK_ELEMENTS // n)

    hist = np.zeros((n, cap), dtype=np.int64)
    resets = np.zeros(n, dtype=np.int64)
    own = np.zeros(n, dtype=np.int64)
    # AoI(0) = 1 for every sensor, i.e. a virtual reset at slot 0
    last_reset = np.zeros(n, dtype=np.int64)
    offsets = np.arange(n, dtype=np.int64) * cap

    close_trace = False
    tw = None
    if trace is not None:
        if isinstance(trace, (str, os.PathLike)):
            trace = open(trace, "w", newline="")
            close_trace = True
        tw = csv.writer(trace, lineterminator="\n")
        tw.writerow(["slot", "transmitters", "success"] + [f"aoi_{i}" for i in range(n)])

    try:
        start = 1
        while start <= T:
            stop = min(T, start + chunk - 1)
            m = stop - start + 1
            slots = np.arange(start, stop + 1, dtype=np.int64)
            tx = rng.random((m, n)) < q
            ntx = tx.sum(axis=1)
            win_rows = np.flatnonzero(ntx == 1)
            winners = np.argmax(tx[win_rows], axis=1)
            reset = np.zeros((m, n), dtype=bool)
            if win_rows.size:
                reset[win_rows] = rng.random((win_rows.size, n)) < C[winners]

            counted = slots > warm
            if counted.any():
                resets += reset[counted].sum(axis=0)
                np.add.at(own, winners[counted[win_rows]], 1)

            aoi = None
            if track_aoi or tw is not None:
                stamp = np.where(reset, slots[:, None], 0)
                lr = np.maximum(np.maximum.accumulate(stamp, axis=0), last_reset[None, :])
                aoi = np.minimum(slots[:, None] - lr + 1, cap)
                last_reset = lr[-1]
                if counted.any():
                    vals = (aoi[counted] - 1 + offsets[None, :]).ravel()
                    hist += np.bincount(vals, minlength=n * cap).reshape(n, cap)

            if tw is not None:
                wmap = dict(zip(win_rows.tolist(), winners.tolist()))
                for r in range(m):
                    who = ";".join(str(i) for i in np.flatnonzero(tx[r]))
                    tw.writerow([int(slots[r]), who, wmap.get(r, "")] + aoi[r].tolist())
            start = stop + 1
    finally:
        if close_trace:
            trace.close()

    counted_slots = T - warm
    if track_aoi:
        levels = np.arange(1, cap + 1)
        mean = (hist * levels).sum(axis=1) / counted_slots
    else:
        mean = np.full(n, np.nan)
    rate = resets / counted_slots
    return SimStats(
        mean_aoi=mean,
        aoi_histogram=hist,
        reset_rate=rate,
        delivered_updates=resets.astype(float),
        own_successes=own.astype(float),
        empirical_ee=rate / _power_draw(model, q),
        slots_simulated=counted_slots,
    )


def empirical_energy_efficiency(config: SimConfig) -> np.ndarray:
    """Measured delivery rate times the analytic lifetime E / power draw, over E."""
    return simulate(config, track_aoi=False).empirical_ee


def replication_seeds(seed: int, replications: int) -> list[int]:
    """Replication 0 keeps ``seed``; the others get SeedSequence children of it."""
    kids = np.random.SeedSequence(seed).spawn(max(0, replications - 1))
    return [int(seed)] + [int(k.generate_state(1, dtype=np.uint64)[0]) for k in kids]


@dataclass(eq=False)
class Replicated:
    mean: SimStats
    stderr: SimStats
    runs: list[SimStats] = field(default_factory=list)


def _aggregate(runs: list[SimStats], fn) -> SimStats:
    def agg(attr):
        return fn(np.stack([getattr(r, attr).astype(float) for r in runs]))
    return SimStats(
        mean_aoi=agg("mean_aoi"),
        aoi_histogram=agg("aoi_histogram"),
        reset_rate=agg("reset_rate"),
        delivered_updates=agg("delivered_updates"),
        own_successes=agg("own_successes"),
        empirical_ee=agg("empirical_ee"),
        slots_simulated=runs[0].slots_simulated,
    )


def replicate(config: SimConfig, replications: int, threads: int = 1, track_aoi: bool = True) -> Replicated:
    """Independent replications; per-metric mean and standard error (ddof=1)."""
    if replications < 1:
        raise ModelError("replications must be >= 1")
    cfgs = [
        SimConfig(config.model, config.policy, config.horizon, s, config.warmup)
        for s in replication_seeds(config.seed, replications)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda c: simulate(c, track_aoi=track_aoi), cfgs))
    else:
        runs = [simulate(c, track_aoi=track_aoi) for c in cfgs]
    mean = _aggregate(runs, lambda a: a.mean(axis=0))
    if replications == 1:
        se = _aggregate(runs, lambda a: np.zeros(a.shape[1:]))
    else:
        se = _aggregate(runs, lambda a: a.std(axis=0, ddof=1) / np.sqrt(a.shape[0]))
    return Replicated(mean, se, runs)
