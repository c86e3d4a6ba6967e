"""Dataset curation operators: quality screens, outlier scans, splits.

These run before any training. They operate on metadata and raw grayscale
frames, never on learned embeddings, so a curation pass is reproducible
without a model checkpoint.

Conventions fixed here and relied on by the tests:
  - SNR blocks are full 16x16 tiles only; edge remainders are ignored by the
    noise floor but still count toward the total variance.
  - DBSCAN neighborhoods use closed balls (distance <= eps) and the minimum
    point count includes the point itself. Clusters are numbered in scan
    order; a border point reachable from several clusters keeps the first
    cluster that claimed it.
  - Splitting is largest-remainder per class, so class proportions are
    preserved to within one sample.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .timecore import (
    MINUTES_PER_DAY,
    ClockTime,
    Dataset,
    FeatureRecord,
    TimeLabelSpace,
)

SNR_BLOCK = 16
NOISE_FLOOR_FRACTION = 0.10
NIGHT_HOURS = frozenset({22, 23, 0, 1, 2, 3})
NIGHT_BRIGHTNESS_LIMIT = 100.0
POLAR_LATITUDE = 75.0


class SnrError(ValueError):
    """SNR undefined for this image; reason is 'noiseless' or 'no-signal'."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class GrayImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) float64 in [0, 255]

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {px.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if px.size == 0:
            raise ValueError("image must have at least one pixel")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 255.0:
            raise ValueError("pixel values must be finite and within [0, 255]")
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class SnrReport:
    snr_db: float
    signal_var: float
    noise_var: float
    blocks_used: int


@dataclass(frozen=True)
class DbscanConfig:
    eps: float = 10.0
    min_pts: int = 100

    def __post_init__(self) -> None:
        if self.eps <= 0.0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


def mean_brightness(image: GrayImage) -> float:
    return float(image.pixels.mean())


def night_brightness_flag(
    record: FeatureRecord,
    night_hours: frozenset = NIGHT_HOURS,
    brightness_limit: float = NIGHT_BRIGHTNESS_LIMIT,
    polar_latitude: float = POLAR_LATITUDE,
) -> str:
    """'review' for suspiciously bright night frames, else 'keep'.

    High-latitude records are exempt: polar summer nights genuinely stay
    bright. A missing latitude gets no such benefit of the doubt.
    """
    if record.brightness is None:
        raise ValueError(f"record {record.id} has no brightness value")
    if record.time.hour not in night_hours:
        return "keep"
    if record.brightness < brightness_limit:
        return "keep"
    if record.lat is not None and abs(record.lat) >= polar_latitude:
        return "keep"
    return "review"


def snr_estimate(image: GrayImage) -> SnrReport:
    """Block-based SNR in dB, treating the quietest tiles as pure noise.

    The image is tiled into full 16x16 blocks. The mean variance of the
    lowest-variance 10% of blocks (at least one) is the noise floor; signal
    variance is total pixel variance minus that floor, so the two always
    sum back to the total exactly.
    """
    ny = image.height // SNR_BLOCK
    nx = image.width // SNR_BLOCK
    if ny == 0 or nx == 0:
        raise ValueError(
            f"image {image.width}x{image.height} too small for "
            f"{SNR_BLOCK}x{SNR_BLOCK} blocks"
        )
    tiles = (
        image.pixels[: ny * SNR_BLOCK, : nx * SNR_BLOCK]
        .reshape(ny, SNR_BLOCK, nx, SNR_BLOCK)
        .transpose(0, 2, 1, 3)
        .reshape(ny * nx, SNR_BLOCK * SNR_BLOCK)
    )
    block_vars = tiles.var(axis=1)
    k = max(1, math.ceil(NOISE_FLOOR_FRACTION * block_vars.size))
    noise_var = float(np.sort(block_vars)[:k].mean())
    total_var = float(image.pixels.var())
    signal_var = total_var - noise_var
    if noise_var == 0.0:
        raise SnrError(
            "noiseless", "noise floor is zero; SNR is unbounded for this image"
        )
    if signal_var <= 0.0:
        raise SnrError(
            "no-signal",
            f"signal variance {signal_var:.6g} is not positive "
            f"(total {total_var:.6g}, noise {noise_var:.6g})",
        )
    return SnrReport(
        snr_db=10.0 * math.log10(signal_var / noise_var),
        signal_var=signal_var,
        noise_var=noise_var,
        blocks_used=k,
    )


def dbscan(points: np.ndarray, config: DbscanConfig) -> np.ndarray:
    """Labels for each point: cluster ids 0.. in scan order, -1 for noise."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be 2-D (n, dim), got shape {pts.shape}")
    n = pts.shape[0]
    labels = np.full(n, -2, dtype=np.int64)  # -2 marks "not yet visited"
    if n == 0:
        return labels
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    within = d2 <= config.eps * config.eps  # closed ball, includes self
    neighbor_counts = within.sum(axis=1)

    cluster = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        if neighbor_counts[i] < config.min_pts:
            labels[i] = -1
            continue
        labels[i] = cluster
        queue = deque(np.flatnonzero(within[i]))
        while queue:
            j = queue.popleft()
            if labels[j] == -1:
                labels[j] = cluster  # border point, was provisionally noise
            if labels[j] != -2:
                continue
            labels[j] = cluster
            if neighbor_counts[j] >= config.min_pts:
                queue.extend(np.flatnonzero(within[j]))
        cluster += 1
    return labels


def hourly_outlier_scan(dataset: Dataset, config: DbscanConfig) -> List[str]:
    """Flag each record 'majority' or 'outlier' within its hour bucket.

    Records sharing an hour-of-day are clustered by feature distance; only
    members of the bucket's largest cluster count as majority. Buckets where
    everything is noise have no majority at all.
    """
    flags = ["outlier"] * len(dataset.records)
    by_hour: Dict[int, List[int]] = {}
    for idx, rec in enumerate(dataset.records):
        by_hour.setdefault(rec.time.hour, []).append(idx)
    for hour in sorted(by_hour):
        idxs = by_hour[hour]
        feats = np.stack([dataset.records[i].features for i in idxs], axis=0)
        labels = dbscan(feats, config)
        clustered = labels[labels >= 0]
        if clustered.size == 0:
            continue
        # ties go to the lower cluster id, i.e. the earliest-seeded cluster
        majority = int(np.bincount(clustered).argmax())
        for pos, i in enumerate(idxs):
            if labels[pos] == majority:
                flags[i] = "majority"
    return flags


def _parse_ratio(ratio) -> float:
    """Accept '9:1', (9, 1), or a bare test fraction; return test fraction."""
    if isinstance(ratio, str):
        parts = ratio.split(":")
        if len(parts) != 2:
            raise ValueError(f"ratio {ratio!r} is not of the form TRAIN:TEST")
        train_w, test_w = (float(p) for p in parts)
    elif isinstance(ratio, (tuple, list)) and len(ratio) == 2:
        train_w, test_w = (float(p) for p in ratio)
    else:
        frac = float(ratio)
        if not 0.0 < frac < 1.0:
            raise ValueError("bare ratio must be a test fraction in (0, 1)")
        return frac
    if train_w <= 0.0 or test_w <= 0.0:
        raise ValueError("ratio weights must both be positive")
    return test_w / (train_w + test_w)


def stratified_split(
    dataset: Dataset, ratio, seed: int, space: TimeLabelSpace
) -> Tuple[Dataset, Dataset]:
    """Deterministic class-stratified (train, test) partition.

    Test counts per class come from largest-remainder rounding of the exact
    proportional share, so every class is represented within one sample of
    its ideal count and the global ratio is hit exactly when divisible.
    """
    test_frac = _parse_ratio(ratio)
    labels = dataset.labels(space)
    n = len(dataset.records)
    total_test = int(round(n * test_frac))

    per_class: Dict[int, List[int]] = {}
    for idx, lab in enumerate(labels):
        per_class.setdefault(int(lab), []).append(idx)
    classes = sorted(per_class)

    ideal = {c: len(per_class[c]) * test_frac for c in classes}
    counts = {c: math.floor(ideal[c]) for c in classes}
    leftover = total_test - sum(counts.values())
    if leftover > 0:
        by_remainder = sorted(
            classes, key=lambda c: (-(ideal[c] - counts[c]), c)
        )
        for c in by_remainder[:leftover]:
            counts[c] += 1
    elif leftover < 0:
        by_remainder = sorted(classes, key=lambda c: (ideal[c] - counts[c], c))
        for c in by_remainder[:(-leftover)]:
            if counts[c] > 0:
                counts[c] -= 1

    rng = np.random.Generator(np.random.PCG64(seed))
    test_idx: List[int] = []
    for c in classes:
        order = rng.permutation(len(per_class[c]))
        chosen = [per_class[c][j] for j in order[: counts[c]]]
        test_idx.extend(chosen)
    test_set = frozenset(test_idx)

    train_recs = tuple(
        r for i, r in enumerate(dataset.records) if i not in test_set
    )
    test_recs = tuple(r for i, r in enumerate(dataset.records) if i in test_set)
    return (
        Dataset(dim=dataset.dim, records=train_recs),
        Dataset(dim=dataset.dim, records=test_recs),
    )


def utc_to_local_approx(utc: ClockTime, lon: float) -> ClockTime:
    """Shift UTC by the longitude's nearest whole-hour solar offset."""
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"longitude {lon} out of range [-180, 180]")
    offset_hours = round(lon / 15.0)
    return ClockTime((utc.minute_of_day + 60 * offset_hours) % MINUTES_PER_DAY)


def brightness_by_hour(
    dataset: Dataset,
) -> List[Tuple[int, int, Optional[float], Optional[float]]]:
    """Per-hour (hour, count, mean, std) rows; empty hours report None stats."""
    buckets: Dict[int, List[float]] = {h: [] for h in range(24)}
    for rec in dataset.records:
        if rec.brightness is not None:
            buckets[rec.time.hour].append(rec.brightness)
    rows: List[Tuple[int, int, Optional[float], Optional[float]]] = []
    for h in range(24):
        vals = buckets[h]
        if not vals:
            rows.append((h, 0, None, None))
        else:
            arr = np.asarray(vals, dtype=np.float64)
            rows.append((h, len(vals), float(arr.mean()), float(arr.std())))
    return rows


def read_pgm(path) -> GrayImage:
    """Read a binary PGM (P5) file with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated header at byte {start}")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ValueError(f"{path}: expected magic P5, got {magic!r}")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise ValueError(f"{path}: malformed header: {exc}") from exc
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ValueError(
            f"{path}: expected {expected} raster bytes at offset {pos}, "
            f"got {len(raster)}"
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(width=width, height=height, pixels=pixels.astype(np.float64))


def write_pgm(path, image: GrayImage) -> None:
    """Write a GrayImage as binary PGM (P5), rounding to 8-bit levels."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    body = np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8).tobytes()
    from .io import atomic_write_bytes

    atomic_write_bytes(path, header + body)
