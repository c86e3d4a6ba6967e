"""Synthetic feature generator with planted, controllable time structure.

Each feature vector mixes two kinds of coordinates. Unambiguous dims are
fixed linear projections of (cos 2*pi*t/1440, sin 2*pi*t/1440), so they pin
down the exact position on the day circle. Confuser dims carry only
sin(pi*t/1440), which is identical for t and its solar mirror 1440-t; they
model the sunrise/sunset light ambiguity. confuser_strength sets the
fraction of confuser dims and also scales the unambiguous amplitude down by
(1 - strength): a heavily confused feature space should not keep loud clean
coordinates.

Generation is counter-based (one Philox stream per class keyed by the spec
seed), so per-class generation could run in parallel and still be
bit-identical to the sequential run.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .timecore import (
    MINUTES_PER_DAY,
    ClockTime,
    Dataset,
    FeatureRecord,
    TimeLabelSpace,
)

# stream indices for the per-spec Philox keys
_STREAM_PROTO = 0xA0
_STREAM_ANCHOR = 0xA1
_STREAM_CLASS_BASE = 0x100


@dataclass(frozen=True)
class SynthSpec:
    samples_per_class: int
    num_classes: int = 24
    dim: int = 32
    noise_sigma: float = 0.05
    confuser_strength: float = 0.2
    skew: Optional[tuple] = None  # per-class count multipliers
    seed: int = 0

    def __post_init__(self) -> None:
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.dim < 4:
            raise ValueError("feature dim must be >= 4")
        if MINUTES_PER_DAY % self.num_classes != 0 or self.num_classes < 2:
            raise ValueError(f"num_classes {self.num_classes} must divide 1440")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.confuser_strength <= 1.0:
            raise ValueError("confuser_strength must be in [0, 1]")
        if self.skew is not None:
            skew = tuple(float(w) for w in self.skew)
            if len(skew) != self.num_classes:
                raise ValueError(
                    f"skew needs {self.num_classes} weights, got {len(skew)}"
                )
            if any(w < 0 for w in skew):
                raise ValueError("skew weights must be >= 0")
            object.__setattr__(self, "skew", skew)

    @property
    def confuser_dims(self) -> int:
        return int(round(self.confuser_strength * self.dim))

    @property
    def clean_dims(self) -> int:
        return self.dim - self.confuser_dims

    def class_count(self, cls: int) -> int:
        w = 1.0 if self.skew is None else self.skew[cls]
        return int(round(self.samples_per_class * w))


def _stream(seed: int, lane: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=np.array([seed & 0xFFFFFFFFFFFFFFFF, lane], dtype=np.uint64))
    )


def _mirror_signal(minutes: np.ndarray) -> np.ndarray:
    # sin(pi*t/1440) evaluated through min(t, 1440-t) so t and its mirror get
    # bit-identical values, not merely close ones
    folded = np.minimum(minutes, MINUTES_PER_DAY - minutes)
    return np.sin(np.pi * folded / MINUTES_PER_DAY)


def generate(spec: SynthSpec) -> Dataset:
    """Build the dataset described by spec; a pure function of its fields."""
    proto_rng = _stream(spec.seed, _STREAM_PROTO)
    # fixed per-dim directions for the clean block and gains for the confusers
    angles = proto_rng.uniform(0.0, 2.0 * np.pi, size=spec.clean_dims)
    clean_proj = np.stack([np.cos(angles), np.sin(angles)], axis=0)  # (2, clean)
    confuser_gain = proto_rng.uniform(0.5, 1.5, size=spec.confuser_dims)
    clean_amp = 1.0 - spec.confuser_strength

    anchor_rng = _stream(spec.seed, _STREAM_ANCHOR)
    anchor_lat = anchor_rng.uniform(-60.0, 60.0, size=spec.num_classes)
    anchor_lon = anchor_rng.uniform(-170.0, 170.0, size=spec.num_classes)

    bin_w = MINUTES_PER_DAY // spec.num_classes
    records = []
    for cls in range(spec.num_classes):
        n = spec.class_count(cls)
        if n == 0:
            continue
        rng = _stream(spec.seed, _STREAM_CLASS_BASE + cls)
        minutes = rng.integers(cls * bin_w, (cls + 1) * bin_w, size=n)
        theta = 2.0 * np.pi * minutes / MINUTES_PER_DAY
        clean = clean_amp * np.stack([np.cos(theta), np.sin(theta)], axis=1) @ clean_proj
        confuser = _mirror_signal(minutes.astype(np.float64))[:, None] * confuser_gain
        feats = np.concatenate([clean, confuser], axis=1)
        if spec.noise_sigma > 0.0:
            feats = feats + rng.normal(0.0, spec.noise_sigma, size=feats.shape)
        lats = np.clip(anchor_lat[cls] + rng.normal(0.0, 0.3, size=n), -89.9, 89.9)
        lons = (anchor_lon[cls] + rng.normal(0.0, 0.3, size=n) + 180.0) % 360.0 - 180.0
        months = rng.integers(1, 13, size=n)
        bright_noise = rng.normal(0.0, 8.0, size=n)
        brightness = np.clip(
            255.0 * _mirror_signal(minutes.astype(np.float64)) + bright_noise, 0.0, 255.0
        )
        for i in range(n):
            records.append(
                FeatureRecord(
                    id=f"synth-{spec.seed}-{cls:02d}-{i:05d}",
                    features=feats[i],
                    time=ClockTime(int(minutes[i])),
                    lat=float(lats[i]),
                    lon=float(lons[i]),
                    date=f"2024-{int(months[i]):02d}-15",
                    brightness=float(brightness[i]),
                )
            )
    if not records:
        raise ValueError("spec produced zero records (all skew weights zero?)")
    return Dataset(dim=spec.dim, records=tuple(records))


def _day_heavy_skew(num_classes: int = 24) -> tuple:
    # daytime classes keep full weight, deep night drops to a tenth
    weights = []
    for c in range(num_classes):
        hour = (c + 0.5) * 24.0 / num_classes
        if 8.0 <= hour <= 18.0:
            weights.append(1.0)
        elif 5.0 <= hour < 8.0 or 18.0 < hour <= 21.0:
            weights.append(0.5)
        else:
            weights.append(0.1)
    return tuple(weights)


def standard_suites() -> Dict[str, SynthSpec]:
    """Named fixed-seed suites used by the tests and the CLI."""
    return {
        "separable": SynthSpec(
            samples_per_class=200,
            num_classes=24,
            dim=32,
            noise_sigma=0.05,
            confuser_strength=0.2,
            seed=11,
        ),
        "confuser": SynthSpec(
            samples_per_class=200,
            num_classes=24,
            dim=32,
            noise_sigma=0.1,
            confuser_strength=0.9,
            seed=13,
        ),
        "skewed": SynthSpec(
            samples_per_class=200,
            num_classes=24,
            dim=32,
            noise_sigma=0.05,
            confuser_strength=0.2,
            skew=_day_heavy_skew(24),
            seed=17,
        ),
    }
