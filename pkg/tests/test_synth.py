import numpy as np
import pytest

from ticl.synth import SynthSpec, _mirror_signal, generate, standard_suites
from ticl.timecore import MINUTES_PER_DAY, TimeLabelSpace


class TestSpecValidation:
    def test_defaults_are_valid(self):
        spec = SynthSpec(samples_per_class=5)
        assert spec.num_classes == 24 and spec.dim == 32

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(samples_per_class=0),
            dict(samples_per_class=5, dim=3),
            dict(samples_per_class=5, num_classes=7),   # 1440 % 7 != 0
            dict(samples_per_class=5, num_classes=1),
            dict(samples_per_class=5, noise_sigma=-0.1),
            dict(samples_per_class=5, confuser_strength=1.1),
            dict(samples_per_class=5, confuser_strength=-0.1),
            dict(samples_per_class=5, skew=(1.0, 2.0)),  # wrong length
            dict(samples_per_class=5, num_classes=4, skew=(1.0, 1.0, -1.0, 1.0)),
        ],
    )
    def test_bad_specs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SynthSpec(**kwargs)

    def test_dim_split(self):
        spec = SynthSpec(samples_per_class=5, dim=32, confuser_strength=0.2)
        assert spec.confuser_dims == 6
        assert spec.clean_dims == 26
        full = SynthSpec(samples_per_class=5, dim=10, confuser_strength=1.0)
        assert full.clean_dims == 0


class TestGeneration:
    def test_bit_identical_across_calls(self):
        spec = SynthSpec(samples_per_class=10, num_classes=8, dim=12, seed=42)
        a, b = generate(spec), generate(spec)
        assert len(a.records) == len(b.records)
        for ra, rb in zip(a.records, b.records):
            assert ra.id == rb.id
            assert ra.time.minute_of_day == rb.time.minute_of_day
            assert np.array_equal(ra.features, rb.features)
            assert ra.lat == rb.lat and ra.lon == rb.lon
            assert ra.date == rb.date and ra.brightness == rb.brightness

    def test_seed_changes_output(self):
        base = dict(samples_per_class=10, num_classes=8, dim=12)
        a = generate(SynthSpec(seed=1, **base))
        b = generate(SynthSpec(seed=2, **base))
        assert not np.array_equal(a.feature_matrix(), b.feature_matrix())

    def test_counts_and_label_coverage(self):
        spec = SynthSpec(samples_per_class=7, num_classes=12, dim=8, seed=3)
        ds = generate(spec)
        assert len(ds.records) == 7 * 12
        labels = ds.labels(TimeLabelSpace(12))
        assert np.all(np.bincount(labels, minlength=12) == 7)

    def test_minutes_stay_inside_their_bin(self):
        spec = SynthSpec(samples_per_class=20, num_classes=24, dim=8, seed=5)
        ds = generate(spec)
        width = MINUTES_PER_DAY // 24
        for r in ds.records:
            cls = int(r.id.split("-")[2])
            assert cls * width <= r.time.minute_of_day < (cls + 1) * width

    def test_skew_scales_counts(self):
        spec = SynthSpec(
            samples_per_class=10, num_classes=4, dim=8,
            skew=(2.0, 1.0, 0.25, 0.0), seed=4,
        )
        ds = generate(spec)
        labels = ds.labels(TimeLabelSpace(4))
        counts = np.bincount(labels, minlength=4)
        # round(10 * w) per class; the zero-weight class vanishes
        assert list(counts) == [20, 10, 2, 0]

    def test_all_zero_skew_raises(self):
        spec = SynthSpec(
            samples_per_class=5, num_classes=4, dim=8, skew=(0.0,) * 4,
        )
        with pytest.raises(ValueError, match="zero records"):
            generate(spec)

    def test_metadata_ranges(self):
        ds = generate(SynthSpec(samples_per_class=30, num_classes=6, dim=8, seed=6))
        for r in ds.records:
            assert -89.9 <= r.lat <= 89.9
            assert -180.0 <= r.lon < 180.0
            assert r.date.startswith("2024-") and r.date.endswith("-15")
            assert 0.0 <= r.brightness <= 255.0

    def test_noiseless_confuser_block_is_exactly_mirror_symmetric(self):
        # with sigma=0 the confuser coordinates of t and 1440-t must be
        # bit-identical, which is the whole point of the folded evaluation
        spec = SynthSpec(
            samples_per_class=1, num_classes=24, dim=10,
            noise_sigma=0.0, confuser_strength=1.0, seed=7,
        )
        ds = generate(spec)
        by_minute = {r.time.minute_of_day: r.features for r in ds.records}
        for t, feats in by_minute.items():
            mirror = (MINUTES_PER_DAY - t) % MINUTES_PER_DAY
            sig_t = _mirror_signal(np.array([float(t)]))[0]
            sig_m = _mirror_signal(np.array([float(mirror)]))[0]
            assert sig_t == sig_m  # exact, not approx
        # and the planted feature matches the signal times a fixed gain
        t0 = min(by_minute)
        gains = by_minute[t0] / _mirror_signal(np.array([float(t0)]))[0]
        t1 = max(by_minute)
        expect = gains * _mirror_signal(np.array([float(t1)]))[0]
        assert np.allclose(by_minute[t1], expect, atol=1e-12)

    def test_mirror_signal_fold(self):
        # explicit fold: same value at t and 1440 - t for every minute
        t = np.arange(0, MINUTES_PER_DAY, dtype=np.float64)
        sig = _mirror_signal(t)
        flipped = _mirror_signal((MINUTES_PER_DAY - t) % MINUTES_PER_DAY)
        assert np.array_equal(sig, flipped)
        assert sig[0] == 0.0
        assert sig[720] == pytest.approx(1.0)

    def test_confuser_block_is_rank_one_clean_block_is_not(self):
        # confuser coordinates are gain * mirror_signal(t): dividing them out
        # must leave one shared gain row; clean coordinates genuinely move
        spec = SynthSpec(
            samples_per_class=1, num_classes=24, dim=16,
            noise_sigma=0.0, confuser_strength=0.5, seed=8,
        )
        clean = spec.clean_dims
        ds = generate(spec)
        rows = []
        for r in ds.records:
            sig = _mirror_signal(np.array([float(r.time.minute_of_day)]))[0]
            if sig > 0.05:
                rows.append(r.features[clean:] / sig)
        gains = np.stack(rows)
        assert np.allclose(gains, gains[0], atol=1e-10)
        feats = ds.feature_matrix()[:, :clean]
        assert np.linalg.matrix_rank(feats, tol=1e-8) == 2

    def test_zero_sigma_features_are_pure_signal(self):
        spec = SynthSpec(
            samples_per_class=3, num_classes=4, dim=8,
            noise_sigma=0.0, confuser_strength=0.25, seed=9,
        )
        ds = generate(spec)
        # records sharing a minute must share features exactly
        seen = {}
        for r in ds.records:
            t = r.time.minute_of_day
            if t in seen:
                assert np.array_equal(seen[t], r.features)
            seen[t] = r.features


class TestSuites:
    def test_names_and_seeds(self):
        suites = standard_suites()
        assert set(suites) == {"separable", "confuser", "skewed"}
        assert suites["separable"].seed == 11
        assert suites["confuser"].seed == 13
        assert suites["skewed"].seed == 17

    def test_confuser_suite_is_mostly_ambiguous(self):
        s = suites = standard_suites()["confuser"]
        assert s.confuser_strength == 0.9
        assert s.confuser_dims > s.clean_dims

    def test_skewed_suite_depletes_night(self):
        s = standard_suites()["skewed"]
        ds = generate(s)
        labels = ds.labels(TimeLabelSpace(24))
        counts = np.bincount(labels, minlength=24)
        assert counts[2] < counts[12]  # deep night much thinner than midday
        assert counts[2] == 20  # 200 * 0.1
