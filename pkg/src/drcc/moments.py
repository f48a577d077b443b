"""Streaming sample-moment estimation with optional support filtering.

Means and covariances use the 1/N normalization throughout: the guarantees
built on these estimates are stated for the population form, not 1/(N-1).
Updates follow the centered one-pass recurrence (Welford's, generalized to
the full outer-product scatter), so cost per sample is independent of how
many samples came before and accumulation stays stable far from the origin.

Diagonal mode keeps only per-coordinate variance accumulators and treats
cross terms as zero by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_MODES = ("full", "diagonal")


@dataclass(frozen=True)
class Moments:
    """Extracted estimates: covariance is a matrix in full mode, a variance
    vector in diagonal mode; scale is diag(sqrt(variances)) or None."""

    count: int
    mean: np.ndarray
    covariance: np.ndarray
    scale: np.ndarray | None


class MomentState:
    """One-pass accumulator for sample mean and scatter."""

    def __init__(self, dim: int, mode: str = "full"):
        dim = int(dim)
        if dim < 1:
            raise ValueError("dimension must be at least 1")
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
        self.dim = dim
        self.mode = mode
        self.count = 0
        self.mean = np.zeros(dim)
        self._scatter = np.zeros((dim, dim) if mode == "full" else dim)

    def _validated(self, sample):
        sample = np.asarray(sample, dtype=float)
        if sample.shape != (self.dim,):
            raise ValueError(
                f"sample of length {self.dim} required, got shape {sample.shape}"
            )
        if not np.all(np.isfinite(sample)):
            raise ValueError("sample entries must be finite")
        return sample

    def update(self, sample) -> None:
        sample = self._validated(sample)
        self.count += 1
        delta = sample - self.mean
        self.mean += delta / self.count
        delta_post = sample - self.mean
        if self.mode == "full":
            self._scatter += np.outer(delta, delta_post)
        else:
            self._scatter += delta * delta_post

    def update_filtered(self, sample, support) -> bool:
        sample = self._validated(sample)
        if not support.contains(sample):
            return False
        self.update(sample)
        return True

    def update_many(self, samples) -> None:
        """Ingest a batch; equivalent to updating row by row."""
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != self.dim:
            raise ValueError("batch must be (n_samples, dim)")
        if samples.shape[0] == 0:
            return
        if not np.all(np.isfinite(samples)):
            raise ValueError("sample entries must be finite")
        chunk = MomentState(self.dim, self.mode)
        chunk.count = samples.shape[0]
        chunk.mean = samples.mean(axis=0)
        centered = samples - chunk.mean
        if self.mode == "full":
            chunk._scatter = centered.T @ centered
        else:
            chunk._scatter = (centered * centered).sum(axis=0)
        self._merge_in_place(chunk)

    def merge(self, other: "MomentState") -> "MomentState":
        """Combined state, as if fed both streams back to back."""
        if not isinstance(other, MomentState):
            raise ValueError("can only merge another MomentState")
        if other.dim != self.dim or other.mode != self.mode:
            raise ValueError("merge needs matching dimension and mode")
        out = MomentState(self.dim, self.mode)
        out.count = self.count
        out.mean = self.mean.copy()
        out._scatter = self._scatter.copy()
        out._merge_in_place(other)
        return out

    def _merge_in_place(self, other: "MomentState") -> None:
        if other.count == 0:
            return
        if self.count == 0:
            self.count = other.count
            self.mean = other.mean.copy()
            self._scatter = other._scatter.copy()
            return
        total = self.count + other.count
        delta = other.mean - self.mean
        correction = self.count * other.count / total
        if self.mode == "full":
            self._scatter += other._scatter + correction * np.outer(delta, delta)
        else:
            self._scatter += other._scatter + correction * delta * delta
        self.mean += delta * (other.count / total)
        self.count = total

    def extract(self) -> Moments:
        if self.count == 0:
            raise ValueError("no samples ingested yet")
        if self.mode == "full":
            cov = self._scatter / self.count
            cov = 0.5 * (cov + cov.T)
            return Moments(self.count, self.mean.copy(), cov, None)
        var = np.maximum(self._scatter / self.count, 0.0)
        return Moments(self.count, self.mean.copy(), var, np.diag(np.sqrt(var)))


def ingest_csv(state: MomentState, path) -> int:
    """Feed a CSV of samples (one per row, optional header) into ``state``.

    Returns the number of rows ingested.
    """
    rows = []
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        for i, row in enumerate(reader):
            if not row:
                continue
            if i == 0:
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    continue  # header line
            else:
                rows.append([float(v) for v in row])
    for row in rows:
        if len(row) != state.dim:
            raise ValueError(
                f"CSV row has {len(row)} columns, state expects {state.dim}"
            )
    if rows:
        state.update_many(np.asarray(rows))
    return len(rows)
