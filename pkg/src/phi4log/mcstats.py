"""Seeded random streams, batch-means statistics and the Monte Carlo result type."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

MIN_BATCHES = 16


def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based Philox generator for (seed, stream index).

    Streams depend only on the pair, never on the order in which they are
    created, so results are independent of the thread count.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class McEstimate:
    """Mean, standard error and sample count of a Monte Carlo estimate.

    ``batch_means`` holds the per-batch averages the error is computed from;
    ``warnings`` collects heuristic diagnostics (never fatal).
    """

    mean: float
    stderr: float
    count: int
    seed: int
    batch_means: tuple = ()
    warnings: tuple = field(default=())

    @property
    def n_batches(self) -> int:
        return len(self.batch_means)

    def zscore(self, target: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / self.stderr

    def within(self, target: float, nsigma: float = 3.0) -> bool:
        return abs(self.mean - target) <= nsigma * self.stderr


def from_batches(batch_means, batch_counts, seed: int) -> McEstimate:
    """Combine equally weighted batch means into an estimate."""
    bm = np.asarray(batch_means, dtype=float)
    counts = np.asarray(batch_counts)
    if bm.size < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches, got {bm.size}")
    w = counts / counts.sum()
    mean = float(np.sum(w * bm))
    k = bm.size
    stderr = float(np.sqrt(np.sum(w * (bm - mean) ** 2) / (k - 1)))
    return McEstimate(mean, stderr, int(counts.sum()), int(seed), tuple(bm.tolist()), _diagnose(bm, counts))


def _diagnose(bm: np.ndarray, counts: np.ndarray) -> tuple:
    notes = []
    total = np.sum(bm * counts)
    if total != 0:
        share = np.max(np.abs(bm * counts)) / abs(total)
        if bm.size >= 4 and share > 0.5:
            notes.append(f"one batch carries {share:.0%} of the total: heavy-tailed weights")
    # batch variance growing along the run suggests a nonconvergent integral
    half = bm.size // 2
    if half >= 8:
        v1, v2 = np.var(bm[:half], ddof=1), np.var(bm[half:], ddof=1)
        if v1 > 0 and v2 / v1 > 25:
            notes.append("batch variance grows along the run")
    return tuple(notes)


def split_counts(total: int, n_batches: int) -> list[int]:
    if total <= 0:
        raise ValueError("sample count must be positive")
    if n_batches < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches")
    if total < n_batches:
        raise ValueError(f"{total} samples cannot fill {n_batches} batches")
    base, extra = divmod(total, n_batches)
    return [base + (i < extra) for i in range(n_batches)]


def run_batches(task, counts, seed: int, threads: int = 1) -> list:
    """Evaluate ``task(rng, count)`` per batch, in batch order.

    Batch i always uses ``stream(seed, i)``.
    """
    jobs = [(stream(seed, i), c) for i, c in enumerate(counts)]
    if threads <= 1:
        return [task(rng, c) for rng, c in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda rc: task(*rc), jobs))


def jackknife(func, *batch_arrays) -> tuple[float, float]:
    """Jackknife mean and error of a nonlinear function of batch averages."""
    arrs = [np.asarray(a, dtype=float) for a in batch_arrays]
    k = arrs[0].shape[0]
    full = func(*[a.mean(axis=0) for a in arrs])
    sums = [a.sum(axis=0) for a in arrs]
    loo = np.array([func(*[(s - a[i]) / (k - 1) for s, a in zip(sums, arrs)]) for i in range(k)])
    bias_corrected = k * full - (k - 1) * loo.mean(axis=0)
    err = np.sqrt((k - 1) / k * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return bias_corrected, err
