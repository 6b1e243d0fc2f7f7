import math

import pytest

import doseconf as dc


@pytest.fixture(scope="module")
def fitted():
    data = dc.split_dataset(dc.generate(1, 1, n=400, seed=3), (0.5, 0.25, 0.25), seed=3)
    train, cal, test = data.part("train"), data.part("cal"), data.part("test")
    model = dc.fit_cadrf(train, n_rounds=50, seed=3)
    return train, cal, test, model


def test_generate_and_split():
    data = dc.generate(3, 2, n=200, seed=7)
    assert len(data) == 200
    assert data.dim == len(data.x(0)) >= 1
    assert data.split() is None
    parts = dc.split_dataset(data, seed=1).split()
    assert len(parts["train"]) + len(parts["cal"]) + len(parts["test"]) == 200
    with pytest.raises(ValueError):
        dc.generate(9, 1)


def test_weighted_quantile_matches_rank():
    scores = [4.0, 1.0, 3.0, 2.0]
    w = [0.2] * 4
    assert dc.weighted_quantile(scores, w, 0.2, 0.5) == 3.0
    assert math.isinf(dc.weighted_quantile(scores, w, 0.2, 0.9))
    assert dc.standard_radius([1.0, 2.0, 3.0, 4.0], 0.5) == 3.0


def test_intervals(fitted):
    _, cal, test, model = fitted
    scores = dc.calibrate_standard(model, cal)
    x, t = test.x(0), test.t(0)
    iv = dc.predict_interval_standard(model, scores, x, t, 0.1)
    same = dc.predict_interval_weighted(model, cal, lambda x, t: 1.0, x, t, 0.1)
    assert iv == same
    assert iv.lower < model.predict(x, t) < iv.upper


def test_cps_band_contains_center(fitted):
    _, cal, test, model = fitted
    x, t = test.x(0), test.t(0)
    dist = dc.cps_predictive_distribution(model, cal, lambda x, t: 1.0, x, t, phi=0.5)
    lo_q, hi_q = dist.cdf(-1e9, 0.0), dist.cdf(1e9, 1.0)
    assert lo_q == 0.0 and hi_q <= 1.0
    band = dist.interval(0.2)
    assert band.lower <= band.upper


def test_propensity_and_weights(fitted):
    train, cal, _, _ = fitted
    oracle = dc.OraclePropensity(1, 1)
    est = dc.PropensityEstimator.fit(train, cal, seed=0, n_rounds=30)
    x, t = cal.x(0), cal.t(0)
    assert oracle.density(x, t) == pytest.approx(dc.oracle_propensity(1, 1, x, t))
    assert est.density(x, t) > 0.0
    bounds = dc.TreatmentBounds(-10.0, 10.0)
    assert dc.w_global(0.5, 0.0, bounds) == 2.0
    cfg = dc.KernelConfig.from_sigma(1.0)
    assert dc.w_local(1.0, 1.0, cfg) == 1.0
    assert dc.effective_sample_size([1.0, 1.0, 1.0]) == pytest.approx(3.0)


def test_kde_integrates_to_one():
    kde = dc.kde_fit([0.0, 0.5, 1.0, 2.0])
    step = 0.01
    total = sum(kde.density(-10 + i * step) for i in range(2400)) * step
    assert total == pytest.approx(1.0, abs=1e-3)


def test_run_experiment():
    report = dc.run_experiment(setup=1, scenario=1, seeds=2, n=200, grid=5, methods="standard_cp",
                               alphas=[0.1], threads=1)
    assert len(report["rows"]) == 2
    assert report["failed_seeds"] == []
    assert 0.0 <= report["rows"][0]["mean_coverage"] <= 1.0
