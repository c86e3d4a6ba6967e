"""Time-based retrieval: exact cosine gallery search and its evaluation suite.

The search is deliberately brute force. At desk scale (M well below 1e5) an
exact scan is cheap, and exactness is what makes the oracle tests and the
tie rule (descending similarity, then ascending insertion index) meaningful.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .model import ModelParams, image_embed, image_embed_rows
from .timecore import ClockTime, Dataset, circular_diff

POSITIVE_WINDOW_MINUTES = 30.0
JOINT_GEO_THRESHOLD = 0.01

TIME_BIN_MINUTES = 30
# log-spaced degree bins for L1 coordinate error; last bin is open-ended
GEO_BIN_EDGES = (0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, float("inf"))


@dataclass(frozen=True)
class GalleryIndex:
    """Unit-row embedding matrix plus row-aligned metadata; read-only after build."""

    embeddings: np.ndarray  # (M, K)
    minutes: np.ndarray  # (M,) int
    lats: np.ndarray  # (M,) float, nan when missing
    lons: np.ndarray  # (M,) float, nan when missing
    ids: tuple

    def __post_init__(self) -> None:
        e = np.asarray(self.embeddings, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] == 0:
            raise ValueError("gallery embeddings must be a non-empty (M, K) matrix")
        norms = np.linalg.norm(e, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError("gallery rows must be unit vectors")
        m = e.shape[0]
        ids = tuple(str(i) for i in self.ids)
        if not (
            len(ids) == m
            and self.minutes.shape == (m,)
            and self.lats.shape == (m,)
            and self.lons.shape == (m,)
        ):
            raise ValueError("metadata length does not match gallery size")
        object.__setattr__(self, "embeddings", e)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return self.embeddings.shape[0]


@dataclass(frozen=True)
class RetrievedItem:
    id: str
    similarity: float
    minute: int
    lat: float  # nan when missing
    lon: float  # nan when missing
    gallery_pos: int


@dataclass(frozen=True)
class Histogram:
    """Bin edges (len n+1, last may be inf) and integer counts (len n)."""

    edges: tuple
    counts: tuple
    excluded: int = 0

    @property
    def total(self) -> int:
        return int(sum(self.counts))


@dataclass(frozen=True)
class RetrievalReport:
    recall_at_k: Dict[int, float]
    time_error_histogram: Histogram
    geo_error_histogram: Histogram
    joint_hit_rate: float


def build_index(params: ModelParams, dataset: Dataset) -> GalleryIndex:
    """Embed every record; row i of the index is image_embed(record i)."""
    if len(dataset) == 0:
        raise ValueError("cannot index an empty dataset")
    embeddings = image_embed_rows(params, dataset.feature_matrix())
    return GalleryIndex(
        embeddings=embeddings,
        minutes=np.array([r.time.minute_of_day for r in dataset.records], dtype=np.int64),
        lats=np.array(
            [np.nan if r.lat is None else float(r.lat) for r in dataset.records]
        ),
        lons=np.array(
            [np.nan if r.lon is None else float(r.lon) for r in dataset.records]
        ),
        ids=tuple(r.id for r in dataset.records),
    )


def query_embedding(
    index: GalleryIndex,
    q: np.ndarray,
    k: int,
    exclude_id: Optional[str] = None,
) -> List[RetrievedItem]:
    """Exact top-k scan by cosine; ties broken by ascending insertion index."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    sims = index.embeddings @ np.asarray(q, dtype=np.float64)
    order = np.argsort(-sims, kind="stable")
    out: List[RetrievedItem] = []
    for pos in order:
        pos = int(pos)
        if exclude_id is not None and index.ids[pos] == exclude_id:
            continue
        out.append(
            RetrievedItem(
                id=index.ids[pos],
                similarity=float(sims[pos]),
                minute=int(index.minutes[pos]),
                lat=float(index.lats[pos]),
                lon=float(index.lons[pos]),
                gallery_pos=pos,
            )
        )
        if len(out) == k:
            break
    return out


def query(
    index: GalleryIndex,
    features: np.ndarray,
    params: ModelParams,
    k: int,
    exclude_id: Optional[str] = None,
) -> List[RetrievedItem]:
    """Embed a raw feature vector and run the exact top-k scan."""
    return query_embedding(index, image_embed(params, features), k, exclude_id)


def _query_items(
    index: GalleryIndex,
    queries: Dataset,
    params: ModelParams,
    k: int,
    exclude_self: bool,
) -> List[List[RetrievedItem]]:
    q_rows = image_embed_rows(params, queries.feature_matrix())
    return [
        query_embedding(
            index, q_rows[i], k, exclude_id=queries.records[i].id if exclude_self else None
        )
        for i in range(len(queries))
    ]


def recall_at_k(
    index: GalleryIndex,
    queries: Dataset,
    params: ModelParams,
    k: int,
    exclude_self: bool = False,
) -> float:
    """Fraction of queries with a retrieved item within 30 circular minutes."""
    if len(queries) == 0:
        raise ValueError("no queries")
    hits = 0
    for record, items in zip(
        queries.records, _query_items(index, queries, params, k, exclude_self)
    ):
        if any(
            circular_diff(item.minute, record.time) <= POSITIVE_WINDOW_MINUTES
            for item in items
        ):
            hits += 1
    return hits / len(queries)


def _bin_index(edges: Sequence[float], value: float) -> int:
    # half-open bins [lo, hi); the final bin also absorbs its upper edge
    for i in range(len(edges) - 1):
        if edges[i] <= value < edges[i + 1]:
            return i
    return len(edges) - 2


def error_distributions(
    index: GalleryIndex,
    queries: Dataset,
    params: ModelParams,
    top_n: int = 100,
    exclude_self: bool = False,
) -> Tuple[Histogram, Histogram]:
    """Binned time and geo errors over each query's top-n retrieved items.

    Items or queries lacking coordinates are left out of the geo histogram
    and surface in its excluded count, so the two histograms always account
    for the same number of retrieved items.
    """
    if len(queries) == 0:
        raise ValueError("no queries")
    time_edges = tuple(float(v) for v in range(0, 721, TIME_BIN_MINUTES))
    time_counts = np.zeros(len(time_edges) - 1, dtype=np.int64)
    geo_counts = np.zeros(len(GEO_BIN_EDGES) - 1, dtype=np.int64)
    excluded = 0
    for record, items in zip(
        queries.records, _query_items(index, queries, params, top_n, exclude_self)
    ):
        for item in items:
            time_counts[_bin_index(time_edges, circular_diff(item.minute, record.time))] += 1
            if (
                record.lat is None
                or record.lon is None
                or np.isnan(item.lat)
                or np.isnan(item.lon)
            ):
                excluded += 1
                continue
            l1 = abs(item.lat - record.lat) + abs(item.lon - record.lon)
            geo_counts[_bin_index(GEO_BIN_EDGES, l1)] += 1
    return (
        Histogram(edges=time_edges, counts=tuple(int(v) for v in time_counts)),
        Histogram(
            edges=GEO_BIN_EDGES,
            counts=tuple(int(v) for v in geo_counts),
            excluded=excluded,
        ),
    )


def joint_geo_time_hit(
    index: GalleryIndex,
    queries: Dataset,
    params: ModelParams,
    exclude_self: bool = False,
) -> float:
    """Fraction of queries whose top-1 is within 0.01 L1 degrees and 30 minutes.

    A query or hit lacking coordinates cannot satisfy the geo threshold and
    counts as a miss.
    """
    if len(queries) == 0:
        raise ValueError("no queries")
    hits = 0
    for record, items in zip(
        queries.records, _query_items(index, queries, params, 1, exclude_self)
    ):
        if not items:
            continue
        top = items[0]
        if circular_diff(top.minute, record.time) > POSITIVE_WINDOW_MINUTES:
            continue
        if record.lat is None or record.lon is None or np.isnan(top.lat) or np.isnan(top.lon):
            continue
        if abs(top.lat - record.lat) + abs(top.lon - record.lon) <= JOINT_GEO_THRESHOLD:
            hits += 1
    return hits / len(queries)


def retrieval_report(
    index: GalleryIndex,
    queries: Dataset,
    params: ModelParams,
    ks: Sequence[int] = (1, 5, 10, 20, 50, 100),
    top_n: int = 100,
    exclude_self: bool = False,
) -> RetrievalReport:
    recalls = {
        int(k): recall_at_k(index, queries, params, int(k), exclude_self) for k in ks
    }
    time_hist, geo_hist = error_distributions(
        index, queries, params, top_n, exclude_self
    )
    return RetrievalReport(
        recall_at_k=recalls,
        time_error_histogram=time_hist,
        geo_error_histogram=geo_hist,
        joint_hit_rate=joint_geo_time_hit(index, queries, params, exclude_self),
    )


def write_recall_csv(recalls: Dict[int, float], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "recall"])
        for k in sorted(recalls):
            writer.writerow([k, f"{recalls[k]:.6f}"])


def write_histogram_csv(hist: Histogram, path) -> None:
    """Rows of (bin_lo, bin_hi, count); a trailing row reports exclusions."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for i, count in enumerate(hist.counts):
            hi = hist.edges[i + 1]
            writer.writerow(
                [f"{hist.edges[i]:g}", "inf" if hi == float("inf") else f"{hi:g}", count]
            )
        writer.writerow(["excluded", "", hist.excluded])
