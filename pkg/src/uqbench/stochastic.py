"""The data-driven input layer: the sample set Theta, its generation or
ingestion from CSV, and empirical raw moments.

The synthetic default distributions are stand-ins used when no sample
archive is supplied; they are config-exposed and make no claim to equal
any published data set.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from pathlib import Path

import numpy as np
import scipy.stats
import yaml

from .physics import ConfigError, UncertainInput

_COLUMNS = ("omega1", "omega2", "omega3")


class SampleError(ValueError):
    """Raised for malformed or out-of-range sample data."""


@dataclasses.dataclass(frozen=True)
class MarginalSpec:
    """One input dimension: family name, parameters, truncation bounds."""

    family: str                # "uniform" | "truncnorm"
    params: tuple[float, ...]  # uniform: (lo, hi); truncnorm: (mean, std, lo, hi)

    def __post_init__(self):
        if self.family == "uniform":
            lo, hi = self.params
            if not lo < hi:
                raise ConfigError(f"uniform bounds must satisfy lo < hi, got {self.params}")
        elif self.family == "truncnorm":
            _, std, lo, hi = self.params
            if std <= 0 or not lo < hi:
                raise ConfigError(f"bad truncnorm parameters {self.params}")
        else:
            raise ConfigError(f"unsupported distribution family {self.family!r}")

    @property
    def support(self) -> tuple[float, float]:
        if self.family == "uniform":
            return self.params
        return self.params[2], self.params[3]

    def _frozen(self):
        if self.family == "uniform":
            lo, hi = self.params
            return scipy.stats.uniform(loc=lo, scale=hi - lo)
        mean, std, lo, hi = self.params
        return scipy.stats.truncnorm((lo - mean) / std, (hi - mean) / std,
                                     loc=mean, scale=std)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self._frozen().rvs(size=n, random_state=rng)

    def cdf(self, x) -> np.ndarray:
        return self._frozen().cdf(x)


@dataclasses.dataclass(frozen=True)
class DistributionSpec:
    """Per-dimension marginal descriptors for (omega1, omega2, omega3)."""

    marginals: tuple[MarginalSpec, MarginalSpec, MarginalSpec]

    def __post_init__(self):
        lo1, _ = self.marginals[0].support
        lo2, _ = self.marginals[1].support
        lo3, hi3 = self.marginals[2].support
        if lo1 < -1.0 or lo2 <= 0.0 or lo3 <= 0.0 or hi3 >= 1.0:
            raise ConfigError("marginal supports violate the input invariants")

    @classmethod
    def default(cls) -> "DistributionSpec":
        return cls((
            MarginalSpec("truncnorm", (0.0, 0.15, -0.45, 0.45)),
            MarginalSpec("uniform", (1.5, 4.5)),
            MarginalSpec("truncnorm", (0.15, 0.03, 0.05, 0.30)),
        ))

    @classmethod
    def from_file(cls, path) -> "DistributionSpec":
        raw = yaml.safe_load(Path(path).read_text())
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "DistributionSpec":
        marginals = []
        for name in _COLUMNS:
            if name not in raw:
                raise ConfigError(f"distribution spec misses {name!r}")
            entry = raw[name]
            marginals.append(MarginalSpec(entry["family"], tuple(entry["params"])))
        return cls(tuple(marginals))

    def to_dict(self) -> dict:
        return {name: {"family": m.family, "params": list(m.params)}
                for name, m in zip(_COLUMNS, self.marginals)}


def _validate_samples(samples: np.ndarray, origin: str):
    checks = (
        (samples[:, 0] < -1.0, "omega1 >= -1"),
        (samples[:, 1] <= 0.0, "omega2 > 0"),
        (samples[:, 2] <= 0.0, "0 < omega3 < 1"),
        (samples[:, 2] >= 1.0, "0 < omega3 < 1"),
    )
    for bad, invariant in checks:
        if np.any(bad):
            row = int(np.argmax(bad))
            raise SampleError(
                f"{origin}: sample {row} value {samples[row]} violates {invariant}")


@dataclasses.dataclass(frozen=True)
class SampleSet:
    """Immutable sample matrix of shape (N, 3) with provenance."""

    samples: np.ndarray
    provenance: str

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] < 1:
            raise SampleError(f"samples must have shape (N>=1, 3), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise SampleError("samples contain non-finite values")
        _validate_samples(s, self.provenance)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def input(self, i: int) -> UncertainInput:
        return UncertainInput(*self.samples[i])

    def save(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_COLUMNS)
            for row in self.samples:
                writer.writerow([repr(float(x)) for x in row])


def load_samples(path) -> SampleSet:
    """Read a 3-column CSV (header optional); row order is preserved."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            row = [c.strip() for c in row if c.strip() != ""]
            if not row:
                continue
            if lineno == 1 and any(not _is_number(c) for c in row):
                if [c.lower() for c in row] != list(_COLUMNS):
                    raise SampleError(
                        f"{path}:{lineno}: header must be {','.join(_COLUMNS)}")
                continue
            if len(row) != 3 or any(not _is_number(c) for c in row):
                raise SampleError(f"{path}:{lineno}: expected 3 numeric columns, got {row}")
            rows.append([float(c) for c in row])
    if not rows:
        raise SampleError(f"{path}: no samples found")
    return SampleSet(np.array(rows), provenance=f"loaded:{path.name}")


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def generate_samples(spec: DistributionSpec, n: int, seed: int) -> SampleSet:
    """Draw n independent samples; reproducible for a fixed seed."""
    if n < 1:
        raise SampleError(f"sample count must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    cols = [m.sample(n, rng) for m in spec.marginals]
    return SampleSet(np.column_stack(cols),
                     provenance=f"generated(seed={seed}, n={n})")


def raw_moments(sample_set: SampleSet, dim: int, k_max: int) -> np.ndarray:
    """E[omega_dim^k] for k = 0..k_max, compensated summation per order."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    x = sample_set.samples[:, dim - 1]
    n = x.size
    out = np.empty(k_max + 1)
    out[0] = 1.0
    power = np.ones_like(x)
    for k in range(1, k_max + 1):
        power = power * x
        out[k] = math.fsum(power) / n
    return out


def bounding_box(sample_set: SampleSet, margin: float = 0.0):
    """Componentwise (lo, hi) of the samples, optionally widened by a
    fraction of each range on both sides."""
    lo = sample_set.samples.min(axis=0)
    hi = sample_set.samples.max(axis=0)
    span = hi - lo
    return lo - margin * span, hi + margin * span


def to_unit_cube(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return (np.asarray(points, dtype=float) - lo) / (hi - lo)


def from_unit_cube(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return lo + np.asarray(points, dtype=float) * (hi - lo)
