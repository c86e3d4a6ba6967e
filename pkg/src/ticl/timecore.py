"""Clock arithmetic, label spaces, and the feature-record model shared by every module.

Times live on a 1440-minute cycle. Distances are circular: the gap between
23:59 and 00:00 is one minute, and no two times are ever more than 720
minutes apart.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

MINUTES_PER_DAY = 1440

_CLOCK_RE = re.compile(r"^(\d{1,2}):(\d{2})$")


@dataclass(frozen=True, order=True)
class ClockTime:
    """A wall-clock time stored as integer minutes since midnight."""

    minute_of_day: int

    def __post_init__(self) -> None:
        m = self.minute_of_day
        if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
            raise ValueError(f"minute_of_day must be an integer, got {m!r}")
        if not 0 <= m < MINUTES_PER_DAY:
            raise ValueError(f"minute_of_day {m} outside [0, {MINUTES_PER_DAY})")
        object.__setattr__(self, "minute_of_day", int(m))

    @property
    def hour(self) -> int:
        return self.minute_of_day // 60

    @property
    def minute(self) -> int:
        return self.minute_of_day % 60

    def format(self) -> str:
        return f"{self.hour:02d}:{self.minute:02d}"

    def __str__(self) -> str:
        return self.format()


def parse_clock(text: str) -> ClockTime:
    """Parse an "HH:MM" string into a ClockTime.

    Raises ValueError naming the offending field when the hour or minute is
    out of range or the string is not of the expected shape.
    """
    m = _CLOCK_RE.match(text.strip())
    if m is None:
        raise ValueError(f"malformed clock string {text!r}, expected HH:MM")
    hour, minute = int(m.group(1)), int(m.group(2))
    if not 0 <= hour <= 23:
        raise ValueError(f"hour {hour} out of range 00..23 in {text!r}")
    if not 0 <= minute <= 59:
        raise ValueError(f"minute {minute} out of range 00..59 in {text!r}")
    return ClockTime(60 * hour + minute)


MinuteLike = Union[ClockTime, int, float]


def _minutes(t: MinuteLike) -> float:
    return float(t.minute_of_day) if isinstance(t, ClockTime) else float(t)


def circular_diff(a: MinuteLike, b: MinuteLike) -> float:
    """Shortest distance in minutes around the 1440-minute cycle; in [0, 720]."""
    d = abs(_minutes(a) - _minutes(b)) % MINUTES_PER_DAY
    return min(d, MINUTES_PER_DAY - d)


@dataclass(frozen=True)
class TimeLabelSpace:
    """Partition of the day into C equal bins, optionally crossed with extra factors.

    Extra factors (e.g. month with cardinality 12) multiply the label space;
    flat indices are row-major with the hour factor varying fastest.
    """

    num_classes: int
    attribute_factors: tuple = ()

    def __post_init__(self) -> None:
        c = self.num_classes
        if not isinstance(c, (int, np.integer)) or c < 2:
            raise ValueError(f"num_classes must be an integer >= 2, got {c!r}")
        if MINUTES_PER_DAY % c != 0:
            raise ValueError(f"num_classes {c} must divide {MINUTES_PER_DAY}")
        factors = tuple((str(name), int(card)) for name, card in self.attribute_factors)
        for name, card in factors:
            if card < 1:
                raise ValueError(f"factor {name!r} has cardinality {card} < 1")
        object.__setattr__(self, "attribute_factors", factors)

    @property
    def bin_minutes(self) -> int:
        return MINUTES_PER_DAY // self.num_classes

    @property
    def total_classes(self) -> int:
        total = self.num_classes
        for _, card in self.attribute_factors:
            total *= card
        return total

    def flat_index(self, time_class: int, factor_values: Sequence[int] = ()) -> int:
        """Row-major flat index over (factors..., hour class), hour fastest."""
        if len(factor_values) != len(self.attribute_factors):
            raise ValueError(
                f"expected {len(self.attribute_factors)} factor values, "
                f"got {len(factor_values)}"
            )
        if not 0 <= time_class < self.num_classes:
            raise ValueError(f"time class {time_class} outside [0, {self.num_classes})")
        flat = 0
        for value, (name, card) in zip(factor_values, self.attribute_factors):
            if not 0 <= value < card:
                raise ValueError(f"factor {name!r} value {value} outside [0, {card})")
            flat = flat * card + value
        return flat * self.num_classes + time_class

    def unflatten(self, flat: int) -> tuple:
        """Inverse of flat_index: returns (time_class, factor_values tuple)."""
        if not 0 <= flat < self.total_classes:
            raise ValueError(f"flat index {flat} outside [0, {self.total_classes})")
        time_class = flat % self.num_classes
        rest = flat // self.num_classes
        values = []
        for _, card in reversed(self.attribute_factors):
            values.append(rest % card)
            rest //= card
        return time_class, tuple(reversed(values))


def class_of(t: ClockTime, space: TimeLabelSpace) -> int:
    """Hour-factor class index of t: floor(minute_of_day / bin width)."""
    return t.minute_of_day // space.bin_minutes


def class_midpoint(idx: int, space: TimeLabelSpace) -> float:
    """Midpoint of bin idx in minutes of day.

    Returned as a real number because odd bin widths (C=96, C=288) put the
    midpoint on a half minute.
    """
    if not 0 <= idx < space.num_classes:
        raise ValueError(f"class index {idx} outside [0, {space.num_classes})")
    w = space.bin_minutes
    return idx * w + w / 2


def one_hot(idx: int, num_classes: int) -> np.ndarray:
    """Unit indicator vector of length num_classes with a 1 at idx."""
    if not 0 <= idx < num_classes:
        raise ValueError(f"index {idx} outside [0, {num_classes})")
    v = np.zeros(num_classes, dtype=np.float64)
    v[idx] = 1.0
    return v


@dataclass(frozen=True)
class FeatureRecord:
    """One observation: a precomputed feature vector plus its capture metadata."""

    id: str
    features: np.ndarray
    time: ClockTime
    lat: Optional[float] = None
    lon: Optional[float] = None
    date: Optional[str] = None
    brightness: Optional[float] = None

    def __post_init__(self) -> None:
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 1:
            raise ValueError(f"features for {self.id!r} must be 1-D, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError(f"non-finite feature value in record {self.id!r}")
        object.__setattr__(self, "features", f)
        if self.lat is not None and not -90.0 <= float(self.lat) <= 90.0:
            raise ValueError(f"lat {self.lat} outside [-90, 90] in record {self.id!r}")
        if self.lon is not None and not -180.0 <= float(self.lon) <= 180.0:
            raise ValueError(f"lon {self.lon} outside [-180, 180] in record {self.id!r}")
        if self.brightness is not None and not 0.0 <= float(self.brightness) <= 255.0:
            raise ValueError(
                f"brightness {self.brightness} outside [0, 255] in record {self.id!r}"
            )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of records sharing one feature dimension.

    Record order is load-bearing: file formats align feature rows to metadata
    lines by position.
    """

    dim: int
    records: tuple

    def __post_init__(self) -> None:
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        if self.dim < 1:
            raise ValueError(f"feature dim must be >= 1, got {self.dim}")
        for r in records:
            if r.features.shape[0] != self.dim:
                raise ValueError(
                    f"record {r.id!r} has dim {r.features.shape[0]}, dataset declares {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def feature_matrix(self) -> np.ndarray:
        """Records stacked as an (N, D) float64 matrix in record order."""
        if not self.records:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([r.features for r in self.records])

    def minutes(self) -> np.ndarray:
        """Minute-of-day of every record, in record order."""
        return np.array([r.time.minute_of_day for r in self.records], dtype=np.float64)

    def labels(self, space: TimeLabelSpace) -> np.ndarray:
        """Hour-factor class index of every record, in record order."""
        return np.array([class_of(r.time, space) for r in self.records], dtype=np.int64)


def dataset_from_records(records: Iterable[FeatureRecord]) -> Dataset:
    """Build a Dataset, taking D from the first record."""
    records = tuple(records)
    if not records:
        raise ValueError("cannot build a dataset from zero records")
    return Dataset(dim=records[0].features.shape[0], records=records)
