import math

import numpy as np
import pytest

from pinflip import exact, metastability, spectral
from pinflip.errors import ValidationError
from pinflip.metastability import (
    _ConditionedSampler,
    exit_time_experiment,
    exponential_fit,
    predicted_exit_scale,
    sample_conditioned,
    well_spec,
)
from pinflip.model import ModelParams, landmarks
from pinflip.phase import activation_energy


def test_well_spec():
    spec = well_spec(ModelParams(8, 6.0, 3.0))
    assert spec.well == "E1" and not spec.localized  # G(3) > F(6)
    spec = well_spec(ModelParams(8, 20.0, 2.4))
    assert spec.well == "E2" and spec.localized
    with pytest.raises(ValidationError):
        well_spec(ModelParams(8, 1.0, 0.5))  # E = 0, no two-well structure
    with pytest.raises(ValidationError):
        well_spec(ModelParams(2, 6.0, 0.2))


def test_conditioned_samples_satisfy_predicate():
    pr = ModelParams(10, 6.0, 3.0)
    spec = well_spec(pr)
    sampler = _ConditionedSampler(pr, spec.beta_star)
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = sampler.sample_E1(rng)
        assert landmarks(p).l_max <= spec.beta_star * 10
    for _ in range(200):
        p = sampler.sample_E2(rng)
        assert landmarks(p).l_max > spec.beta_star * 10


def _chi2(counts, probs, total):
    mask = probs > 0
    assert counts[~mask].sum() == 0
    exp = total * probs[mask]
    big = exp >= 5
    stat = float(((counts[mask][big] - exp[big]) ** 2 / exp[big]).sum())
    return stat, int(big.sum())


def test_conditioned_sampler_chi_square(enum_model):
    lam, sig = 6.0, 3.0
    _, beta = activation_energy(lam, sig)
    pr = ModelParams(8, lam, sig)
    em = enum_model(8)
    sampler = _ConditionedSampler(pr, beta)
    probs = em.probs(pr)
    in_e1 = np.array([lm.l_max <= beta * 8 for lm in em.landmarks])
    pe1 = np.where(in_e1, probs, 0.0)
    pe1 /= pe1.sum()
    pe2 = np.where(~in_e1, probs, 0.0)
    pe2 /= pe2.sum()
    rng = np.random.default_rng(5)
    M = 40000
    c1 = np.zeros(len(em.paths))
    c2 = np.zeros(len(em.paths))
    c3 = np.zeros(len(em.paths))
    for _ in range(M):
        c1[em.index[sampler.sample_E1(rng)]] += 1
        c2[em.index[sampler.sample_E2(rng)]] += 1
        c3[em.index[sampler._sample_E2_direct(rng)]] += 1
    for counts, p in ((c1, pe1), (c2, pe2), (c3, pe2)):
        stat, dof = _chi2(counts, p, M)
        assert stat < dof + 5.0 * math.sqrt(2.0 * dof)


def test_rejection_rate_matches_well_mass():
    pr = ModelParams(10, 20.0, 2.4)  # deep localized: E2 is rare
    spec = well_spec(pr)
    w = exact.bottleneck_weights(pr, spec.beta_star)
    mu2 = math.exp(w.log_Z_E2 - w.log_Z)
    sampler = _ConditionedSampler(pr, spec.beta_star)
    rng = np.random.default_rng(3)
    attempts = 0
    draws = 300
    for _ in range(draws):
        n = 0
        while True:
            n += 1
            p = sampler.table.sample(rng)
            zeros = [x for x, v in enumerate(p.heights) if v == 0]
            if max(b - a for a, b in zip(zeros, zeros[1:])) // 2 > spec.beta_star * 10:
                break
        attempts += n
    emp = draws / attempts  # geometric acceptance probability
    se = mu2 / math.sqrt(draws)
    assert abs(emp - mu2) < 4.0 * se + 0.01


def test_sample_conditioned_api():
    pr = ModelParams(8, 6.0, 3.0)
    rng = np.random.default_rng(1)
    p = sample_conditioned(pr, "E1", rng)
    assert landmarks(p).l_max <= well_spec(pr).beta_star * 8
    with pytest.raises(ValidationError):
        sample_conditioned(pr, "E3", rng)


def test_exponential_fit_synthetic():
    rng = np.random.default_rng(0)
    t = rng.exponential(2.0, 10000)
    fit = exponential_fit(t)
    assert fit.rate == pytest.approx(0.5, rel=0.03)
    assert fit.ks < 1.949 / math.sqrt(10000)
    assert fit.ci95[0] < fit.rate < fit.ci95[1]


def test_exponential_fit_censoring():
    rng = np.random.default_rng(1)
    full = rng.exponential(1.0, 5000)
    cens_mask = full > 2.0
    fit = exponential_fit(full[~cens_mask], np.full(cens_mask.sum(), 2.0))
    assert fit.rate == pytest.approx(1.0, rel=0.05)
    assert fit.censored_n == int(cens_mask.sum())


def test_exponential_fit_degenerate_inputs():
    fit = exponential_fit(np.full(100, 3.0))
    assert fit.ks > 0.35  # deterministic times: clear rejection
    rng = np.random.default_rng(2)
    mix = np.concatenate([rng.exponential(1.0, 500), rng.exponential(50.0, 500)])
    fit = exponential_fit(mix)
    assert fit.ks > 1.949 / math.sqrt(1000)  # rejection at level 0.001
    with pytest.raises(ValidationError):
        exponential_fit(np.array([1.0]))


def test_exit_time_experiment_quick():
    pr = ModelParams(10, 20.0, 2.4)
    gap = spectral.spectral_gap(spectral.build_generator(pr))
    ex = exit_time_experiment(pr, 150, 2024, reference_scale=1.0 / gap)
    assert ex.well == "E2" and ex.regime == "localized"
    assert (ex.exit_times > 0).all()
    assert 1.0 / (2.5 * gap) <= ex.fit.mean <= 2.5 / gap
    assert ex.fit.ks < 0.15


def test_exit_time_censoring_recorded():
    pr = ModelParams(10, 20.0, 2.4)
    ex = exit_time_experiment(pr, 60, 7, horizon=50.0)
    assert ex.fit.censored_n > 0
    assert ex.fit.censored_n + ex.fit.n == 60


def test_predicted_exit_scale_order_of_magnitude():
    # the two-state reduced rate underestimates the first-exit time by a
    # stable factor ~15-25 at desk sizes (within-well relaxation is not yet
    # separated); the forecast is kept as an order-of-magnitude guard
    pr = ModelParams(10, 20.0, 2.4)
    pred = predicted_exit_scale(pr)
    ex = exit_time_experiment(pr, 100, 99)
    assert pred < ex.fit.mean < 100.0 * pred


@pytest.mark.slow
def test_exit_law_sharpens_with_size():
    # KS against the fitted exponential stays at the noise floor and does
    # not degrade as N grows along 8, 10, 12 (200 replicas: noise ~ 0.05)
    ks = []
    for N, reps in ((8, 200), (10, 200), (12, 200)):
        ex = exit_time_experiment(ModelParams(N, 20.0, 2.6), reps, 4242)
        ks.append(ex.fit.ks)
    assert all(v < 0.12 for v in ks)
    assert ks[-1] <= ks[0] + 0.05
