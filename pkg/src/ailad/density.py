"""Density of the agent's recent metric vectors (normalized space).

The estimate fills in the agent-density term of the discriminator. Two
estimators share one interface: a Gaussian KDE with Scott's-rule bandwidths
(default) and a diagonal Gaussian fit.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

N_MIN = 32
LOG_FLOOR = -30.0
SIGMA_FLOOR = 1e-3
LOG_2PI = np.log(2.0 * np.pi)


class InsufficientSamples(ValueError):
    pass


class MetricBuffer:
    """FIFO ring buffer of normalized metric vectors."""

    def __init__(self, capacity: int = 2048, dim: int = 7):
        self.capacity = int(capacity)
        self.dim = int(dim)
        self._data = np.zeros((self.capacity, self.dim))
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def add(self, m) -> None:
        self._data[self.inserted % self.capacity] = m
        self.inserted += 1

    def contents(self) -> np.ndarray:
        """Stored vectors, oldest first."""
        n = len(self)
        if self.inserted <= self.capacity:
            return self._data[:n].copy()
        start = self.inserted % self.capacity
        return np.concatenate([self._data[start:], self._data[:start]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"m{i}" for i in range(self.dim)])
        w.writerows(self.contents().tolist())
        return buf.getvalue()


@dataclass(frozen=True)
class DensityModel:
    samples: np.ndarray
    bandwidth: np.ndarray
    log_floor: float = LOG_FLOOR
    kind: str = "kde"
    # diagonal-gaussian parameters (kind == "gaussian")
    mean: np.ndarray = None
    std: np.ndarray = None

    def log_density(self, m) -> np.ndarray:
        return log_density(self, m)


def scott_bandwidth(x: np.ndarray) -> np.ndarray:
    n, d = x.shape
    sigma = np.maximum(x.std(axis=0), SIGMA_FLOOR)
    return sigma * n ** (-1.0 / (d + 4))


def fit(buffer, kind: str = "kde", n_min: int = N_MIN) -> DensityModel:
    """Snapshot the buffer into an immutable density model."""
    x = buffer.contents() if isinstance(buffer, MetricBuffer) else np.asarray(buffer, dtype=float)
    if x.ndim != 2 or len(x) < n_min:
        raise InsufficientSamples(f"need >= {n_min} samples, have {len(x)}")
    if kind == "kde":
        return DensityModel(samples=x.copy(), bandwidth=scott_bandwidth(x))
    if kind == "gaussian":
        std = np.maximum(x.std(axis=0), SIGMA_FLOOR)
        return DensityModel(samples=x.copy(), bandwidth=std, kind="gaussian",
                            mean=x.mean(axis=0), std=std)
    raise ValueError(f"unknown density kind {kind!r}")


def log_density(model: DensityModel, m) -> np.ndarray:
    """Log density at one query (returns float) or a batch of queries (returns array)."""
    q = np.asarray(m, dtype=float)
    single = q.ndim == 1
    q = q[None, :] if single else q
    if model.kind == "gaussian":
        u = (q - model.mean) / model.std
        out = -0.5 * (u * u).sum(axis=1) - np.log(model.std).sum() - 0.5 * q.shape[1] * LOG_2PI
    else:
        h = model.bandwidth
        xs = model.samples / h
        qs = q / h
        # squared distances via the expansion |a-b|^2 = |a|^2 + |b|^2 - 2ab
        d2 = (qs * qs).sum(1)[:, None] + (xs * xs).sum(1)[None, :] - 2.0 * qs @ xs.T
        d2 = np.maximum(d2, 0.0)
        n, d = xs.shape
        norm = -np.log(n) - np.log(h).sum() - 0.5 * d * LOG_2PI
        out = logsumexp(-0.5 * d2, axis=1) + norm
    out = np.maximum(np.nan_to_num(out, nan=model.log_floor, neginf=model.log_floor), model.log_floor)
    return float(out[0]) if single else out
