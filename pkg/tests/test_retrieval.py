import numpy as np
import pytest

from conftest import make_dataset, make_params
from ticl.model import normalize_rows
from ticl.retrieval import (
    GEO_BIN_EDGES,
    GalleryIndex,
    build_index,
    error_distributions,
    joint_geo_time_hit,
    query,
    query_embedding,
    recall_at_k,
    retrieval_report,
    write_histogram_csv,
    write_recall_csv,
)
from ticl.timecore import TimeLabelSpace


def make_index(rng, n, k, minutes=None, lats=None, lons=None, ids=None):
    emb = normalize_rows(rng.normal(size=(n, k)))
    if minutes is None:
        minutes = rng.integers(0, 1440, size=n)
    return GalleryIndex(
        embeddings=emb,
        minutes=np.asarray(minutes, dtype=np.float64),
        lats=np.full(n, np.nan) if lats is None else np.asarray(lats, float),
        lons=np.full(n, np.nan) if lons is None else np.asarray(lons, float),
        ids=tuple(ids if ids else (f"g{i}" for i in range(n))),
    )


class TestIndex:
    def test_rejects_non_unit_rows(self):
        emb = np.ones((2, 3))
        with pytest.raises(ValueError):
            GalleryIndex(
                embeddings=emb,
                minutes=np.zeros(2),
                lats=np.full(2, np.nan),
                lons=np.full(2, np.nan),
                ids=("a", "b"),
            )

    def test_rejects_mismatched_lengths(self, rng):
        emb = normalize_rows(rng.normal(size=(3, 4)))
        with pytest.raises(ValueError):
            GalleryIndex(
                embeddings=emb,
                minutes=np.zeros(2),
                lats=np.full(3, np.nan),
                lons=np.full(3, np.nan),
                ids=("a", "b", "c"),
            )

    def test_build_index_from_dataset(self, rng):
        p = make_params(seed=50, num_classes=4, feature_dim=5, embed_dim=6)
        ds = make_dataset(
            rng.integers(0, 1440, size=8), rng.normal(size=(8, 5)),
            lats=[10.0] * 8, lons=[20.0] * 8,
        )
        index = build_index(p, ds)
        assert index.embeddings.shape == (8, 6)
        assert np.allclose(np.linalg.norm(index.embeddings, axis=1), 1.0, atol=1e-9)
        assert index.ids == tuple(r.id for r in ds.records)


class TestQueryOracle:
    def test_matches_exhaustive_scan_on_1000_vectors(self, rng):
        n, k_dim = 1000, 24
        index = make_index(rng, n, k_dim)
        for trial in range(40):
            q = normalize_rows(rng.normal(size=(1, k_dim)))[0]
            items = query_embedding(index, q, k=10)
            sims = index.embeddings @ q
            order = np.argsort(-sims, kind="stable")[:10]
            assert [it.gallery_pos for it in items] == [int(i) for i in order]
            for it in items:
                assert it.similarity == pytest.approx(float(sims[it.gallery_pos]), abs=1e-12)
            # returned best-first
            sims_out = [it.similarity for it in items]
            assert sims_out == sorted(sims_out, reverse=True)

    def test_duplicate_rows_tie_to_lower_position(self, rng):
        n, k_dim = 50, 8
        emb = normalize_rows(rng.normal(size=(n, k_dim)))
        emb[37] = emb[5]  # exact duplicate later in the gallery
        index = GalleryIndex(
            embeddings=emb,
            minutes=np.zeros(n),
            lats=np.full(n, np.nan),
            lons=np.full(n, np.nan),
            ids=tuple(f"g{i}" for i in range(n)),
        )
        items = query_embedding(index, emb[5], k=2)
        assert items[0].gallery_pos == 5
        assert items[1].gallery_pos == 37

    def test_exclude_id(self, rng):
        index = make_index(rng, 20, 6)
        q = index.embeddings[3]
        top = query_embedding(index, q, k=1)[0]
        assert top.gallery_pos == 3
        top2 = query_embedding(index, q, k=1, exclude_id="g3")[0]
        assert top2.gallery_pos != 3

    def test_k_larger_than_gallery(self, rng):
        index = make_index(rng, 5, 6)
        items = query_embedding(index, index.embeddings[0], k=50)
        assert len(items) == 5

    def test_query_via_features(self, rng):
        p = make_params(seed=51, num_classes=4, feature_dim=5, embed_dim=6)
        index = make_index(rng, 30, 6)
        items = query(index, rng.normal(size=5), p, k=3)
        assert len(items) == 3


class TestRecall:
    def test_window_boundary(self, rng):
        p = make_params(seed=52, num_classes=4, feature_dim=5, embed_dim=6)
        queries = make_dataset([600], rng.normal(size=(1, 5)))
        at_30 = make_index(rng, 1, 6, minutes=[630])
        at_31 = make_index(rng, 1, 6, minutes=[631])
        assert recall_at_k(at_30, queries, p, k=1) == 1.0
        assert recall_at_k(at_31, queries, p, k=1) == 0.0

    def test_wraparound_positive(self, rng):
        p = make_params(seed=53, num_classes=4, feature_dim=5, embed_dim=6)
        queries = make_dataset([1435], rng.normal(size=(1, 5)))
        index = make_index(rng, 1, 6, minutes=[5])  # 10 minutes across midnight
        assert recall_at_k(index, queries, p, k=1) == 1.0

    def test_monotone_in_k(self, rng):
        p = make_params(seed=54, num_classes=4, feature_dim=5, embed_dim=8)
        index = make_index(rng, 200, 8)
        queries = make_dataset(
            rng.integers(0, 1440, size=30), rng.normal(size=(30, 5))
        )
        vals = [recall_at_k(index, queries, p, k=k) for k in (1, 5, 20, 100, 200)]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_exclude_self_changes_the_answer(self, rng):
        p = make_params(seed=55, num_classes=4, feature_dim=5, embed_dim=6)
        feats = rng.normal(size=(1, 5))
        queries = make_dataset([600], feats, ids=["q0"])
        index = build_index(p, make_dataset([600, 200], np.vstack([feats, rng.normal(size=(1, 5))]), ids=["q0", "far"]))
        assert recall_at_k(index, queries, p, k=1, exclude_self=False) == 1.0
        assert recall_at_k(index, queries, p, k=1, exclude_self=True) == 0.0


class TestDistributions:
    def test_time_and_geo_binning_hand_case(self, rng):
        p = make_params(seed=56, num_classes=4, feature_dim=5, embed_dim=6)
        # top_n covers the whole gallery, so ranking cannot change the bins
        minutes = [600, 645, 1080, 1439]
        # circular errors vs query 600: 0, 45, 480, 601
        lats = [10.0, 10.0, 10.004, np.nan]
        lons = [20.0, 20.003, 20.0, np.nan]
        # L1 errors vs (10, 20): 0.0, 0.003, 0.004, missing
        index = make_index(rng, 4, 6, minutes=minutes, lats=lats, lons=lons)
        queries = make_dataset([600], rng.normal(size=(1, 5)), lats=[10.0], lons=[20.0])
        time_hist, geo_hist = error_distributions(index, queries, p, top_n=4)

        want_time = np.zeros(24, dtype=int)
        want_time[0] = 1   # 0 min
        want_time[1] = 1   # 45 min
        want_time[16] = 1  # 480 min
        want_time[20] = 1  # 601 min
        assert np.array_equal(time_hist.counts, want_time)
        assert time_hist.excluded == 0

        want_geo = np.zeros(len(GEO_BIN_EDGES) - 1, dtype=int)
        want_geo[0] = 1  # exact match -> [0, 1e-3)
        want_geo[1] = 2  # 0.003 and 0.004 -> [1e-3, 1e-2)
        assert np.array_equal(geo_hist.counts, want_geo)
        assert geo_hist.excluded == 1

    def test_antipodal_error_lands_in_last_bin(self, rng):
        p = make_params(seed=57, num_classes=4, feature_dim=5, embed_dim=6)
        index = make_index(rng, 1, 6, minutes=[720])
        queries = make_dataset([0], rng.normal(size=(1, 5)))
        time_hist, _ = error_distributions(index, queries, p, top_n=1)
        assert time_hist.counts[-1] == 1  # 720 absorbed by the final bin


class TestJointHit:
    def run_single(self, rng, gallery_minute, g_lat, g_lon, q_minute=600,
                   q_lat=10.0, q_lon=20.0):
        p = make_params(seed=58, num_classes=4, feature_dim=5, embed_dim=6)
        index = make_index(
            rng, 1, 6, minutes=[gallery_minute],
            lats=[g_lat], lons=[g_lon],
        )
        queries = make_dataset(
            [q_minute], rng.normal(size=(1, 5)), lats=[q_lat], lons=[q_lon]
        )
        return joint_geo_time_hit(index, queries, p)

    def test_hit(self, rng):
        assert self.run_single(rng, 610, 10.004, 20.005) == 1.0

    def test_geo_threshold_inclusive(self, rng):
        assert self.run_single(rng, 600, 10.01, 20.0) == 1.0  # L1 exactly 0.01

    def test_time_miss(self, rng):
        assert self.run_single(rng, 700, 10.0, 20.0) == 0.0

    def test_geo_miss(self, rng):
        assert self.run_single(rng, 600, 10.02, 20.0) == 0.0

    def test_missing_geo_is_miss(self, rng):
        assert self.run_single(rng, 600, np.nan, np.nan) == 0.0


class TestReportAndFiles:
    def test_report_shape(self, rng, tmp_path):
        p = make_params(seed=59, num_classes=4, feature_dim=5, embed_dim=8)
        gallery = make_dataset(
            rng.integers(0, 1440, size=50), rng.normal(size=(50, 5)),
            lats=rng.uniform(-60, 60, size=50), lons=rng.uniform(-170, 170, size=50),
        )
        queries = make_dataset(
            rng.integers(0, 1440, size=10), rng.normal(size=(10, 5)),
            lats=rng.uniform(-60, 60, size=10), lons=rng.uniform(-170, 170, size=10),
        )
        index = build_index(p, gallery)
        report = retrieval_report(index, queries, p, ks=(1, 5, 10), top_n=20)
        assert set(report.recall_at_k) == {1, 5, 10}
        assert report.time_error_histogram.total == 10 * 20
        assert 0.0 <= report.joint_hit_rate <= 1.0

        write_recall_csv(report.recall_at_k, tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().strip().split("\n")
        assert lines[0] == "k,recall"
        assert len(lines) == 4

        write_histogram_csv(report.geo_error_histogram, tmp_path / "g.csv")
        glines = (tmp_path / "g.csv").read_text().strip().split("\n")
        assert glines[0] == "bin_lo,bin_hi,count"
        assert glines[-1].startswith("excluded")
