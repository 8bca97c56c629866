import math

import numpy as np
import pytest
from scipy import stats

from signvote.oracles import (
    BIMODAL_MEAN,
    BIMODAL_STD,
    CRITICAL_SNR,
    Logistic,
    NoiseModel,
    Quadratic,
    bimodal_counterexample,
    bimodal_oracle,
    logistic_oracle,
    make_logistic_dataset,
    quadratic_oracle,
    snr_profile,
)


def test_quadratic_noiseless():
    sg = quadratic_oracle([2.0, -3.0], NoiseModel("none"), np.random.default_rng(0))
    assert sg.values.tolist() == [2.0, -3.0]
    assert sg.true_gradient.tolist() == [2.0, -3.0]


def test_quadratic_spec():
    q = Quadratic(4, NoiseModel("gaussian", 0.5))
    spec = q.spec(np.ones(4))
    assert (spec.f_star, spec.f0, spec.L1, spec.f_gap) == (0.0, 2.0, 4.0, 2.0)
    assert spec.noise_sigma.tolist() == [0.5] * 4


def test_quadratic_unbiased():
    rng = np.random.default_rng(1)
    q = Quadratic(1000)
    x = np.linspace(-1, 1, 1000)
    draws = 10_000
    total = np.zeros(1000)
    for _ in range(draws):
        total += q.sample(x, rng).values - x
    mean = total / draws
    assert np.all(np.abs(mean) <= 4 / math.sqrt(draws))


def test_votes_at_optimum_are_fair_coins():
    rng = np.random.default_rng(2)
    q = Quadratic(100_000)
    plus = float(np.mean(q.sample(np.zeros(100_000), rng).values >= 0))
    assert abs(plus - 0.5) <= 4 * math.sqrt(0.25 / 100_000)


@pytest.mark.parametrize("kind", ["gaussian", "uniform"])
def test_noise_symmetric_and_variance_bounded(kind):
    rng = np.random.default_rng(3)
    trials = 200_000
    sigma = 1.7
    z = NoiseModel(kind, sigma).sample(rng, trials)
    for t in (0.5, 1.0, 2.0):
        up, down = np.mean(z > t * sigma), np.mean(z < -t * sigma)
        se = math.sqrt(2 * max(up, down) / trials)
        assert abs(up - down) <= 4 * se
    assert z.var() <= sigma**2 * (1 + 5 / math.sqrt(trials))


def test_batch_noise_becomes_more_gaussian():
    rng = np.random.default_rng(4)
    noise = NoiseModel("bimodal_counterexample")
    obj = bimodal_counterexample()
    skews, kurts = [], []
    for n in (1, 16, 256):
        z = np.array([obj.sample(np.zeros(1), rng, n).values[0] for _ in range(20_000)]) - BIMODAL_MEAN
        skews.append(abs(stats.skew(z)))
        kurts.append(abs(stats.kurtosis(z)))
    assert skews[0] > skews[1] > skews[2]
    assert kurts[0] > kurts[1] > kurts[2]
    assert noise.std(1)[0] == pytest.approx(BIMODAL_STD)


def test_bimodal_oracle():
    assert 0.1 * 50 + 0.9 * -1 == pytest.approx(BIMODAL_MEAN) == pytest.approx(4.1)
    rng = np.random.default_rng(5)
    draws = bimodal_oracle(rng, 100_000)
    assert set(np.unique(draws)) == {-1.0, 50.0}
    frac = float(np.mean(draws == -1.0))
    assert abs(frac - 0.9) <= 0.004
    obj = bimodal_counterexample()
    sg = obj.sample(np.zeros(1), rng)
    assert sg.true_gradient.tolist() == [pytest.approx(4.1)]
    assert sg.values[0] in (pytest.approx(-1.0), pytest.approx(50.0))
    assert not NoiseModel("bimodal_counterexample").unimodal_symmetric


def test_logistic_dataset_is_reproducible():
    a = make_logistic_dataset(3, 200, 5, 0.1)
    b = make_logistic_dataset(3, 200, 5, 0.1)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
    c = make_logistic_dataset(4, 200, 5, 0.1)
    assert not np.array_equal(a.features, c.features)
    assert set(np.unique(a.labels)) <= {-1.0, 1.0}


def test_logistic_full_batch_is_exact():
    obj = Logistic(make_logistic_dataset(0, 300, 6))
    x = np.linspace(-0.5, 0.5, 6)
    sg = logistic_oracle(obj, x, 300, np.random.default_rng(0))
    assert np.array_equal(sg.values, sg.true_gradient)
    with pytest.raises(ValueError):
        logistic_oracle(obj, x, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        logistic_oracle(obj, x, 301, np.random.default_rng(0))


def test_logistic_gradient_matches_finite_differences():
    obj = Logistic(make_logistic_dataset(1, 100, 4))
    x = np.array([0.3, -0.2, 0.1, 0.0])
    h = 1e-6
    fd = [(obj.value(x + h * e) - obj.value(x - h * e)) / (2 * h) for e in np.eye(4)]
    assert obj.gradient(x) == pytest.approx(fd, abs=1e-7)


def test_logistic_size_one_batches_average_to_full_gradient():
    obj = Logistic(make_logistic_dataset(2, 150, 5))
    x = np.full(5, 0.2)
    per_example = obj.example_gradients(x)
    assert per_example.mean(axis=0) == pytest.approx(obj.gradient(x), abs=1e-15)


def test_logistic_batch_noise_shrinks_like_inverse_sqrt():
    obj = Logistic(make_logistic_dataset(5, 20_000, 3))
    x = np.zeros(3)
    rng = np.random.default_rng(6)
    sds = {}
    for n in (10, 40):
        draws = np.array([obj.sample(x, rng, n).values for _ in range(4000)])
        sds[n] = draws.std(axis=0)
    ratio = sds[10] / sds[40]
    assert np.all(np.abs(ratio - 2.0) < 0.2)
    assert np.all(obj.empirical_sigma(x) <= obj.sigma())


def test_snr_profile_examples():
    S, H = snr_profile([2.0], [1.0])
    assert S.tolist() == [2.0] and H.tolist() == [0]
    S, H = snr_profile([CRITICAL_SNR], [1.0])
    assert H.size == 0
    S, H = snr_profile(np.zeros(3), np.ones(3))
    assert S.tolist() == [0, 0, 0] and H.size == 0
    S, H = snr_profile([1.0, 0.0], [0.0, 0.0])
    assert S[0] == math.inf and S[1] == 0.0 and H.tolist() == [0]
