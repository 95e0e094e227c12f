import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpsolvency.domain import ValidationError
from hpsolvency.engine import EmpiricalDistribution
from hpsolvency.risk import (
    RiskConfig,
    bootstrap_standard_errors,
    loss_sample,
    quantile_position,
    scr,
    tvar,
    var,
)
from hpsolvency.rng import DOMAIN_BOOTSTRAP, Stream

from oracles import brute_tvar, brute_var

samples = st.lists(st.floats(-1e9, 1e9, allow_nan=False), min_size=1, max_size=200)
alphas = st.integers(1, 999).map(lambda m: m / 1000)


class TestEstimators:
    def test_examples(self):
        v = np.arange(1.0, 101.0)
        assert var(v, 0.95) == 95.0
        assert tvar(v, 0.95) == 98.0
        assert var(np.array([3.0, 1.0, 2.0]), 0.5) == 2.0

    @given(st.floats(-1e6, 1e6), st.integers(1, 50), alphas)
    def test_constant_sample(self, c, n, a):
        v = np.full(n, c)
        assert var(v, a) == c and tvar(v, a) == c

    def test_empty_tail_returns_max(self):
        assert tvar(np.array([1.0, 5.0, 2.0]), 0.999) == 5.0

    def test_decimal_alpha_position(self):
        assert quantile_position(100, 0.95) == 95
        assert quantile_position(1000, 0.995) == 995
        assert quantile_position(3, 0.001) == 1

    def test_errors(self):
        with pytest.raises(ValidationError):
            var(np.array([]), 0.5)
        with pytest.raises(ValidationError):
            var(np.array([1.0]), 1.0)
        with pytest.raises(ValidationError):
            tvar(np.array([1.0, np.nan]), 0.5)

    def test_accepts_empirical_distribution(self):
        d = EmpiricalDistribution(np.array([4.0, 1.0, 3.0, 2.0]), 0, "Z")
        assert var(d, 0.5) == 2.0 and tvar(d, 0.5) == 3.5

    @given(samples, st.integers(1, 999))
    def test_brute_force_oracle(self, xs, m):
        a = m / 1000
        assert var(np.array(xs), a) == brute_var(xs, m, 1000)
        assert tvar(np.array(xs), a) == brute_tvar(xs, m, 1000)

    @given(samples, alphas)
    def test_tvar_dominates_var(self, xs, a):
        assert tvar(np.array(xs), a) >= var(np.array(xs), a)

    @given(samples, alphas, alphas)
    def test_monotone_in_alpha(self, xs, a, b):
        lo, hi = sorted((a, b))
        v = np.array(xs)
        assert var(v, lo) <= var(v, hi)
        assert tvar(v, lo) <= tvar(v, hi)


class TestScr:
    def test_constant_profit(self):
        rep = scr(np.full(50, 7.0), RiskConfig(alpha=0.9, n_bootstrap=0))
        assert rep.scr == -7.0 and rep.var == -7.0

    def test_hand_examples(self):
        u = np.array([-10.0, 0.0, 10.0, 20.0])
        assert list(loss_sample(u)) == [-20.0, -10.0, 0.0, 10.0]
        q = scr(u, RiskConfig(alpha=0.75, basis="quantile_of_loss"))
        assert q.var == 0.0 and q.scr == 0.0 and math.copysign(1.0, q.var) == 1.0
        e = scr(u, RiskConfig(alpha=0.75, basis="unexpected_loss"))
        assert e.scr == 5.0 and e.mean_u == 5.0

    def test_report_fields(self):
        rep = scr(np.arange(-50.0, 50.0), RiskConfig(alpha=0.9, seed=3))
        d = rep.to_dict()
        assert set(d) >= {"alpha", "var", "tvar", "scr_basis", "scr", "mean_u", "se_var", "se_tvar", "seed"}
        assert d["tvar"] >= d["var"] and d["se_var"] > 0 and d["n"] == 100

    def test_nan_standard_errors_become_null(self):
        d = scr(np.array([1.0, 2.0]), RiskConfig(n_bootstrap=1)).to_dict()
        assert d["se_var"] is None and d["se_tvar"] is None

    def test_config_validation(self):
        for bad in ({"alpha": 0.0}, {"alpha": 1.0}, {"basis": "median"}, {"n_bootstrap": -1}):
            with pytest.raises(ValidationError):
                RiskConfig(**bad)

    @given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=100), st.integers(-10**6, 10**6), alphas)
    def test_translation(self, xs, c, a):
        u = np.array(xs, dtype=float)
        base = scr(u, RiskConfig(alpha=a, n_bootstrap=0, basis="unexpected_loss"))
        moved = scr(u + c, RiskConfig(alpha=a, n_bootstrap=0, basis="unexpected_loss"))
        assert moved.var == base.var - c
        assert moved.scr == base.scr

    @given(samples, st.floats(-1e6, 1e6), alphas)
    def test_translation_of_var_any_floats(self, xs, c, a):
        u = np.array(xs)
        shifted = u + c
        # the shifted sample is what it is after rounding; VaR picks the same order statistic
        k = quantile_position(u.size, a)
        assert var(0.0 - shifted, a) == np.sort(0.0 - shifted)[k - 1]
        assert var(0.0 - shifted, a) == (0.0 - np.sort(u)[::-1] - c)[k - 1]

    @given(samples, st.floats(1e-3, 1e3), alphas)
    def test_var_homogeneity(self, xs, lam, a):
        v = np.array(xs)
        assert var(lam * v, a) == lam * var(v, a)

    @given(samples, st.integers(-8, 8), alphas)
    def test_tvar_homogeneity_binary_scales(self, xs, e, a):
        lam = 2.0**e
        v = np.array(xs)
        assert tvar(lam * v, a) == lam * tvar(v, a)

    @given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=80), st.integers(1, 1000), st.integers(1, 999))
    def test_tvar_homogeneity_is_exact_before_rounding(self, xs, lam, m):
        # lam * v is exact here, so TVaR(lam * v) is the rounded value of lam times the exact tail mean
        v = np.array(xs, dtype=float)
        xs_sorted = sorted(xs)
        k = min(max(-(-m * len(xs) // 1000), 1), len(xs))
        tail = xs_sorted[k:] or xs_sorted[-1:]
        exact = Fraction(lam) * Fraction(sum(tail), len(tail))
        assert tvar(lam * v, m / 1000) == float(exact)


class TestBootstrap:
    def test_matches_explicit_resampling(self, rng):
        loss = np.sort(rng.normal(size=300))
        a, n_b, seed = 0.95, 30, 77
        se_v, se_t = bootstrap_standard_errors(loss, a, n_b, seed)
        stats_v, stats_t = [], []
        for b in range(n_b):
            u = Stream(seed, scenario=b, member=0, domain=DOMAIN_BOOTSTRAP).uniform(loss.size)
            idx = np.minimum((u * loss.size).astype(np.int64), loss.size - 1)
            resample = loss[idx]
            stats_v.append(var(resample, a))
            stats_t.append(tvar(resample, a))
        assert math.isclose(se_v, np.std(stats_v, ddof=1), rel_tol=1e-12)
        assert math.isclose(se_t, np.std(stats_t, ddof=1), rel_tol=1e-12)

    def test_seeded(self, rng):
        loss = np.sort(rng.normal(size=500))
        assert bootstrap_standard_errors(loss, 0.99, 50, 1) == bootstrap_standard_errors(loss, 0.99, 50, 1)
        assert bootstrap_standard_errors(loss, 0.99, 50, 1) != bootstrap_standard_errors(loss, 0.99, 50, 2)

    def test_scale_is_plausible(self):
        # SE of the median of n standard normals is about sqrt(pi / 2n)
        loss = np.sort(Stream(3).uniform(4000))
        from scipy.stats import norm

        loss = norm.ppf(loss)
        se_v, _ = bootstrap_standard_errors(np.sort(loss), 0.5, 200, 5)
        assert 0.6 < se_v / math.sqrt(math.pi / (2 * 4000)) < 1.5
