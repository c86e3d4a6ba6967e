import sys

import numpy as np
import pytest

from ticl.model import init_params
from ticl.timecore import ClockTime, Dataset, FeatureRecord


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, printed after the test summary."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num, label, ok in sorted(results):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {num}: {label}")


def make_params(
    seed=0,
    num_classes=6,
    feature_dim=8,
    embed_dim=8,
    time_hidden=(8,),
    adaptor_hidden=(8,),
    activation="gelu-approx",
    perturb_biases=True,
):
    """Small random model; biases nudged off zero so relu paths stay live."""
    params = init_params(
        seed=seed,
        num_classes=num_classes,
        feature_dim=feature_dim,
        embed_dim=embed_dim,
        time_hidden=time_hidden,
        adaptor_hidden=adaptor_hidden,
        activation=activation,
    )
    if perturb_biases:
        rng = np.random.Generator(np.random.PCG64(seed + 9000))
        for mlp in (params.time_encoder, params.adaptor):
            for layer in mlp.layers:
                layer.bias[...] += rng.normal(0.0, 0.1, size=layer.bias.shape)
    return params


def make_records(minutes, features, ids=None, lats=None, lons=None, brightness=None):
    n = len(minutes)
    recs = []
    for i in range(n):
        recs.append(
            FeatureRecord(
                id=ids[i] if ids else f"r{i:04d}",
                features=np.asarray(features[i], dtype=np.float64),
                time=ClockTime(int(minutes[i])),
                lat=None if lats is None else lats[i],
                lon=None if lons is None else lons[i],
                brightness=None if brightness is None else brightness[i],
            )
        )
    return recs


def make_dataset(minutes, features, **kw) -> Dataset:
    recs = make_records(minutes, features, **kw)
    return Dataset(dim=recs[0].features.shape[0], records=tuple(recs))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
