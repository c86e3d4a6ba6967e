"""Alternate time encodings: cyclic trig pair, random Fourier features, Time2Vec.

These are drop-in replacements for the learned time encoder in ablation runs,
and the cyclic pair doubles as the target space of the circular regression
baseline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timecore import MINUTES_PER_DAY, ClockTime, MinuteLike, _minutes

DEFAULT_RFF_DIM = 512


def cyclic_encode(t: MinuteLike) -> np.ndarray:
    """Map a time to (cos th, sin th) with th = 2*pi*minutes/1440.

    The full 2*pi sweep closes the circle, so 23:59 and 00:00 land next to
    each other instead of at opposite ends of a line.
    """
    theta = 2.0 * np.pi * _minutes(t) / MINUTES_PER_DAY
    return np.array([np.cos(theta), np.sin(theta)])


def cyclic_decode(c: float, s: float) -> ClockTime:
    """Invert cyclic_encode, rounding to the nearest minute mod 1440."""
    if c == 0.0 and s == 0.0:
        raise ValueError("cannot decode the zero vector to a time")
    theta = np.arctan2(s, c) % (2.0 * np.pi)
    minutes = int(round(theta * MINUTES_PER_DAY / (2.0 * np.pi))) % MINUTES_PER_DAY
    return ClockTime(minutes)


@dataclass(frozen=True)
class RffParams:
    """Fixed random Fourier map z(x) = sqrt(2/Dr) * cos(Wx + b) over x=(hour, minute)."""

    projection: np.ndarray  # (Dr, 2)
    offsets: np.ndarray  # (Dr,)
    sigma: float = 1.0

    def __post_init__(self) -> None:
        w = np.asarray(self.projection, dtype=np.float64)
        b = np.asarray(self.offsets, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != 2 or b.shape != (w.shape[0],):
            raise ValueError(f"inconsistent RFF shapes {w.shape} / {b.shape}")
        if w.shape[0] < 1:
            raise ValueError("RFF output dim must be >= 1")
        if self.sigma <= 0.0:
            raise ValueError(f"bandwidth sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "projection", w)
        object.__setattr__(self, "offsets", b)

    @property
    def dim(self) -> int:
        return self.projection.shape[0]


def rff_init(seed: int, dim: int = DEFAULT_RFF_DIM, sigma: float = 1.0) -> RffParams:
    """Sample a fixed projection N(0, 1/sigma^2) and uniform phase offsets."""
    rng = np.random.Generator(np.random.PCG64(seed))
    projection = rng.normal(0.0, 1.0 / sigma, size=(dim, 2))
    offsets = rng.uniform(0.0, 2.0 * np.pi, size=dim)
    return RffParams(projection=projection, offsets=offsets, sigma=sigma)


def rff_encode(p: RffParams, t: ClockTime) -> np.ndarray:
    """Encode (hour, minute) through the fixed Fourier map; entries in +/- sqrt(2/Dr)."""
    x = np.array([float(t.hour), float(t.minute)])
    return np.sqrt(2.0 / p.dim) * np.cos(p.projection @ x + p.offsets)


@dataclass(frozen=True)
class Time2VecParams:
    """Frequencies and phases; component 0 is linear, the rest are sinusoids."""

    omegas: np.ndarray
    phis: np.ndarray

    def __post_init__(self) -> None:
        om = np.asarray(self.omegas, dtype=np.float64)
        ph = np.asarray(self.phis, dtype=np.float64)
        if om.ndim != 1 or om.shape != ph.shape:
            raise ValueError(f"inconsistent Time2Vec shapes {om.shape} / {ph.shape}")
        if om.shape[0] < 2:
            raise ValueError("Time2Vec needs >= 2 components (one linear, one periodic)")
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "phis", ph)

    @property
    def dim(self) -> int:
        return self.omegas.shape[0]


def t2v_init(seed: int, dim: int = 64) -> Time2VecParams:
    """Frequencies scaled to the day cycle, phases uniform; deterministic by seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    omegas = rng.normal(0.0, 2.0 * np.pi / MINUTES_PER_DAY, size=dim)
    phis = rng.uniform(0.0, 2.0 * np.pi, size=dim)
    return Time2VecParams(omegas=omegas, phis=phis)


def t2v_encode(p: Time2VecParams, t: MinuteLike) -> np.ndarray:
    """Component 0 = w0*t + phi0 on raw minutes; the rest = sin(wi*t + phi_i)."""
    m = _minutes(t)
    out = np.sin(p.omegas * m + p.phis)
    out[0] = p.omegas[0] * m + p.phis[0]
    return out
