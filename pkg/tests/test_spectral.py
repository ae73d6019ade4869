import math

import numpy as np
import pytest

from pinflip import exact, spectral
from pinflip.errors import CapacityError, ValidationError
from pinflip.model import ModelParams, PathConfig, landmarks
from pinflip.phase import activation_energy


def h_zero_subset(p):
    return landmarks(p).H == 0


def test_two_state_chain():
    for lam in (0.5, 1.0, 3.0):
        for sig in (0.0, 1.0, 3.0):
            gen = spectral.build_generator(ModelParams(2, lam, sig))
            assert gen.n_states == 2
            e = math.exp(sig)
            r = gen.rates.toarray()
            vals = sorted([r[0, 1], r[1, 0]])
            assert vals == pytest.approx(
                sorted([e / (lam + e), lam / (lam + e)]), abs=1e-14
            )
            gap = spectral.spectral_gap(gen)
            # 2-state closed form: gap = p + q = 1 here
            assert gap == pytest.approx(r[0, 1] + r[1, 0], abs=1e-12)
            assert gap == pytest.approx(1.0, abs=1e-12)


def test_generator_reversibility_and_structure():
    gen = spectral.build_generator(ModelParams(8, 6.0, 3.0))
    assert gen.n_states == 1430
    assert gen.reversibility_defect() < 1e-12
    # canonical indexing: state 0 is the zigzag (lexicographically first)
    assert gen.path(0) == PathConfig.zigzag(8)
    with pytest.raises(ValidationError):
        spectral.build_generator(ModelParams(4, 1.0, 0.0), subset=lambda p: False)


def test_gap_matches_dense_eig_of_rate_matrix():
    gen = spectral.build_generator(ModelParams(6, 4.0, 1.0))
    gap = spectral.spectral_gap(gen)
    R = gen.rates.toarray()
    np.fill_diagonal(R, -R.sum(axis=1))
    w = np.sort(-np.linalg.eigvals(R).real)
    assert gap == pytest.approx(w[1], abs=1e-9)


def test_iterative_solver_agrees_with_dense():
    gen = spectral.build_generator(ModelParams(8, 4.0, 1.0))
    dense = spectral.spectral_gap(gen)
    iterative = spectral.spectral_gap(gen, dense_cutoff=10)
    assert iterative == pytest.approx(dense, rel=1e-8)


def test_wilson_bound_small_sizes():
    for n in (3, 5, 8):
        for sig in (0.5, 1.0, 2.0):
            gen = spectral.build_generator(
                ModelParams(n, 0.0, sig), subset=h_zero_subset
            )
            assert spectral.spectral_gap(gen) >= spectral.wilson_bound(n) - 1e-12


def test_rayleigh_variational_principle():
    gen = spectral.build_generator(ModelParams(6, 4.0, 1.0))
    gap = spectral.spectral_gap(gen)
    rng = np.random.default_rng(3)
    for _ in range(5):
        f = rng.standard_normal(gen.n_states)
        _, _, quot = spectral.dirichlet_rayleigh(gen, f)
        assert quot >= gap - 1e-9
    # the second eigenvector achieves the gap
    vec = spectral.second_eigenvector(gen)
    _, _, quot = spectral.dirichlet_rayleigh(gen, vec)
    assert quot == pytest.approx(gap, rel=1e-6)
    with pytest.raises(ValidationError):
        spectral.dirichlet_rayleigh(gen, np.ones(gen.n_states))


def test_indicator_quotient_is_bottleneck_ratio():
    lam, sig = 6.0, 3.0
    _, beta = activation_energy(lam, sig)
    pr = ModelParams(8, lam, sig)
    gen = spectral.build_generator(pr)
    labels = spectral.two_set_labels(gen, beta)
    f = np.array([1.0 if l == 1 else 0.0 for l in labels])
    dirich, var, quot = spectral.dirichlet_rayleigh(gen, f)
    w = exact.bottleneck_weights(pr, beta)
    mu1 = math.exp(w.log_Z_E1 - w.log_Z)
    mu2 = math.exp(w.log_Z_E2 - w.log_Z)
    assert var == pytest.approx(mu1 * mu2, rel=1e-10)
    assert dirich == pytest.approx(math.exp(w.log_flow), rel=1e-10)


def test_bottleneck_bound_below_exact():
    for N in (6, 8):
        for lam, sig in [(6.0, 3.0), (6.0, 1.2), (3.0, 0.5)]:
            _, beta = activation_energy(lam, sig)
            if beta is None or exact._part_cap(beta * N, N) < 1:
                continue
            pr = ModelParams(N, lam, sig)
            bound = spectral.bottleneck_bound(pr, beta)
            t_rel = 1.0 / spectral.spectral_gap(spectral.build_generator(pr))
            assert bound <= t_rel + 1e-9


def test_flow_dominates_single_transition_bound():
    # the exact boundary flow is at least the one-flip-per-boundary-state
    # lower bound used to control the reduced two-set gap
    for N, lam, sig in [(8, 6.0, 3.0), (10, 6.0, 1.2), (40, 6.0, 3.0)]:
        _, beta = activation_energy(lam, sig)
        pr = ModelParams(N, lam, sig)
        w = exact.bottleneck_weights(pr, beta)
        e2 = math.exp(2.0 * sig / N)
        r101 = e2 / (lam + e2)
        lower = math.log(r101) + w.log_Z_boundary - w.log_Z
        assert w.log_flow >= lower - 1e-12


def test_bottleneck_bound_grows_in_slow_phase():
    # the polynomial prefactor makes the bound dip around N=10; the
    # exponential growth dominates from N ~ 12 on and the overall log-slope
    # is positive
    lam, sig = 6.0, 3.0
    _, beta = activation_energy(lam, sig)
    Ns = (6, 16, 24, 40, 80)
    bounds = [spectral.bottleneck_bound(ModelParams(N, lam, sig), beta) for N in Ns]
    tail = bounds[1:]
    assert all(b > a for a, b in zip(tail, tail[1:]))
    slope = np.polyfit(np.log(Ns), np.log(bounds), 1)[0]
    assert slope > 0


def test_fa_bound_below_exact():
    for lam, sig in [(6.0, 0.3), (1.0, 1.0), (6.0, 3.0)]:
        pr = ModelParams(6, lam, sig)
        gen = spectral.build_generator(pr)
        t_rel = 1.0 / spectral.spectral_gap(gen)
        for a in (0.25, 0.5):
            assert spectral.fa_bound(pr, gen, a=a) <= t_rel + 1e-9


def test_product_chain_identity():
    pr = ModelParams(6, 4.0, 1.0)

    def subset_xy(x, y):
        def f(p):
            lm = landmarks(p)
            return lm.L == 2 * x and lm.R == 2 * y

        return f

    for x, y in [(2, 4), (3, 3), (2, 5)]:
        sub = spectral.build_generator(pr, subset=subset_xy(x, y))
        gap_sub = spectral.spectral_gap(sub) if sub.n_states >= 2 else math.inf
        factors = []
        if x >= 2:
            factors.append(
                spectral.spectral_gap(
                    spectral.build_generator(ModelParams(x, 4.0, 1.0 * x / 6))
                )
            )
        if 6 - y >= 2:
            factors.append(
                spectral.spectral_gap(
                    spectral.build_generator(ModelParams(6 - y, 4.0, (6 - y) / 6.0))
                )
            )
        if y - x >= 3:
            factors.append(
                spectral.spectral_gap(
                    spectral.build_generator(
                        ModelParams(y - x, 0.0, (y - x) / 6.0), subset=h_zero_subset
                    )
                )
            )
        if factors:
            assert gap_sub == pytest.approx(min(factors), abs=1e-9)


def test_reduced_two_set_enum_vs_dp():
    lam, sig = 6.0, 3.0
    _, beta = activation_energy(lam, sig)
    pr = ModelParams(8, lam, sig)
    enum = spectral.reduced_chain(pr, "two_set", beta_star=beta, method="enum")
    dp = spectral.reduced_chain(pr, "two_set", beta_star=beta, method="dp")
    assert np.allclose(enum.pi_bar, dp.pi_bar, rtol=1e-10)
    assert np.allclose(enum.rates, dp.rates, rtol=1e-9)
    # 2-state reduction gap equals the indicator Rayleigh quotient
    gen = spectral.build_generator(pr)
    f = np.array(
        [1.0 if l == 1 else 0.0 for l in spectral.two_set_labels(gen, beta)]
    )
    _, _, quot = spectral.dirichlet_rayleigh(gen, f)
    assert enum.gap() == pytest.approx(quot, rel=1e-10)


def test_reduced_lr_enum_vs_dp():
    for N, lam, sig in [(6, 4.0, 1.0), (7, 4.0, 1.0), (8, 6.0, 3.0)]:
        pr = ModelParams(N, lam, sig)
        enum = spectral.reduced_chain(pr, "lr", method="enum")
        dp = spectral.reduced_chain(pr, "lr", method="dp")
        assert enum.labels == dp.labels
        assert np.allclose(enum.pi_bar, dp.pi_bar, rtol=1e-10)
        assert np.allclose(enum.rates, dp.rates, rtol=1e-9)
        assert dp.pi_bar.sum() == pytest.approx(1.0, abs=1e-12)
        assert dp.reversibility_defect() < 1e-12


def test_starred_reduced_chain_nearest_neighbor_support():
    red = spectral.reduced_chain(ModelParams(8, 4.0, 1.0), "lr", method="enum")
    for i, li in enumerate(red.labels):
        for j, lj in enumerate(red.labels):
            if red.rates[i, j] > 0:
                assert abs(li[0] - lj[0]) <= 1 and abs(li[1] - lj[1]) <= 1


def test_jerrum_checks():
    _, beta = activation_energy(6.0, 3.0)
    for pr, part, b in [
        (ModelParams(6, 4.0, 1.0), "lr", None),
        (ModelParams(8, 6.0, 3.0), "two_set", beta),
        (ModelParams(6, 6.0, 3.0), "two_set", beta),
    ]:
        rep = spectral.jerrum_check(pr, part, beta_star=b)
        assert rep.holds
        assert rep.rhs <= rep.gap + 1e-9
    trivial = spectral.jerrum_check(ModelParams(5, 4.0, 1.0), "trivial")
    assert trivial.holds
    assert trivial.rhs == pytest.approx(trivial.gap, rel=1e-10)


def test_star_chain():
    # N=2: no removable moves
    assert spectral.star_chain_gap(ModelParams(2, 1.0, 0.0)) == pytest.approx(
        1.0, abs=1e-12
    )
    for N, lam, sig in [(6, 6.0, 3.0), (8, 4.0, 1.0)]:
        full = spectral.spectral_gap(spectral.build_generator(ModelParams(N, lam, sig)))
        star = spectral.star_chain_gap(ModelParams(N, lam, sig))
        assert star <= full + 1e-9
    with pytest.raises(CapacityError):
        spectral.star_chain_gap(ModelParams(13, 1.0, 0.0))


def test_cheeger_two_state_closed_form():
    _, beta = activation_energy(6.0, 3.0)
    red = spectral.reduced_chain(
        ModelParams(8, 6.0, 3.0), "two_set", beta_star=beta, method="dp"
    )
    cb = spectral.cheeger_bound(red)
    flow = red.flow(0, 1)
    pmin = red.pi_bar.min()
    assert cb == pytest.approx((flow / pmin) ** 2 / 2.0, rel=1e-12)
    assert cb <= red.gap() + 1e-12


def test_cheeger_lr_reduced():
    red = spectral.reduced_chain(ModelParams(8, 4.0, 0.3), "lr", method="enum")
    cb = spectral.cheeger_bound(red)
    assert cb <= red.gap() + 1e-12
    # up-set family of the 5x5 grid poset
    assert len(spectral._upsilon_upsets(red.labels)) > 50


def test_surrogate_weight_band():
    for N in (20, 40, 60):
        pr = ModelParams(N, 4.0, 0.3)
        red = spectral.lr_reduced_chain_dp(pr)
        pbar = spectral.lr_surrogate_weight(pr)
        logs = [
            math.log(red.pi_bar[i]) - pbar[lab] for i, lab in enumerate(red.labels)
        ]
        assert math.exp(max(logs) - min(logs)) < 10.0


def test_tv_mixing_two_state():
    t = spectral.tv_mixing_exact(ModelParams(2, 1.0, 0.0), 0.25)
    assert t == pytest.approx(math.log(2.0), rel=2e-4)
    with pytest.raises(CapacityError):
        spectral.tv_mixing_exact(ModelParams(7, 1.0, 0.0), 0.25)
    with pytest.raises(ValidationError):
        spectral.tv_mixing_exact(ModelParams(3, 1.0, 0.0), 1.5)


def test_tv_mixing_epsilon_slope():
    pr = ModelParams(4, 1.0, 0.0)
    t_rel = 1.0 / spectral.spectral_gap(spectral.build_generator(pr))
    t1 = spectral.tv_mixing_exact(pr, 1e-2)
    t2 = spectral.tv_mixing_exact(pr, 1e-4)
    assert (t2 - t1) == pytest.approx(t_rel * math.log(100.0), rel=0.05)
