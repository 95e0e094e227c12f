import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from hpsolvency import rng
from hpsolvency.rng import Stream, categorical_index, philox4x32, split_seed, stream_words

from oracles import negbin_pmf

U = np.uint64


class TestPhilox:
    # published known-answer vectors for Philox4x32-10
    @pytest.mark.parametrize(
        "ctr, key, expected",
        [
            ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
            (
                (0xFFFFFFFF,) * 4,
                (0xFFFFFFFF,) * 2,
                (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD),
            ),
            (
                (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
                (0xA4093822, 0x299F31D0),
                (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
            ),
        ],
    )
    def test_known_answers(self, ctr, key, expected):
        out = philox4x32(*(U(c) for c in ctr), *(U(k) for k in key))
        assert tuple(int(w) for w in out) == expected

    def test_split_seed(self):
        k0, k1 = split_seed(0x0123456789ABCDEF)
        assert (int(k0), int(k1)) == (0x89ABCDEF, 0x01234567)
        with pytest.raises(ValueError):
            split_seed(-1)
        with pytest.raises(ValueError):
            split_seed(2**64)

    def test_stream_words_separate_domains(self):
        a = stream_words(5, 7, rng.DOMAIN_SIMULATION)
        b = stream_words(5, 7, rng.DOMAIN_HISTORY)
        assert a[:2] == b[:2] and a[2] != b[2]
        with pytest.raises(ValueError):
            stream_words(2**48, 0, 0)


class TestStream:
    def test_same_key_same_sequence(self):
        a = Stream(42, scenario=3, member=9).uniform(1000)
        b = Stream(42, scenario=3, member=9).uniform(1000)
        assert np.array_equal(a, b)

    def test_substreams_differ(self):
        base = Stream(42, 3, 9).uniform(100)
        for other in (Stream(43, 3, 9), Stream(42, 4, 9), Stream(42, 3, 10), Stream(42, 3, 9, rng.DOMAIN_BOOTSTRAP)):
            assert not np.array_equal(base, other.uniform(100))

    def test_chunked_draws_continue_the_sequence(self):
        s = Stream(1)
        first = np.concatenate([s.uniform(10), s.uniform(15)])
        assert np.array_equal(first, Stream(1).uniform(25))
        assert s.counter == 25

    def test_uniform_open_interval_and_moments(self):
        u = Stream(7).uniform(200_000)
        assert u.min() > 0.0 and u.max() < 1.0
        assert stats.kstest(u, "uniform").pvalue > 1e-3


class TestNormal:
    def test_ziggurat_distribution(self):
        k0, k1 = split_seed(2024)
        c1, c2, c3 = stream_words(0, 0, rng.DOMAIN_SEVERITY_PROBE)
        ctr = 0
        x = np.empty(200_000)
        for t in range(x.size):
            x[t], ctr = rng.normal(k0, k1, c1, c2, c3, ctr)
        assert stats.kstest(x, "norm").pvalue > 1e-3
        assert abs(x.mean()) < 4 / math.sqrt(x.size)
        assert abs(x.var() - 1.0) < 0.02
        # the tail beyond the base layer must be reached
        assert np.sum(np.abs(x) > rng._ZIG_R) > 0

    def test_table_layers_are_decreasing(self):
        assert np.all(np.diff(rng.ZIG_X[: rng._ZIG_LAYERS]) < 0)


class TestGamma:
    @pytest.mark.parametrize("shape", [0.3, 1.0, 2.0, 7.5])
    def test_distribution(self, shape):
        g = Stream(11, member=int(shape * 10)).gamma(shape, 2.0, 200_000)
        assert np.all(g > 0)
        assert stats.kstest(g, stats.gamma(shape, scale=2.0).cdf).pvalue > 1e-3

    def test_branch_and_severity_matches_marginals(self):
        cum = np.cumsum([0.5, 0.3, 0.2])
        shape = np.array([0.7, 2.0, 5.0])
        k0, k1 = split_seed(99)
        c1, c2, c3 = stream_words(0, 0, 0)
        ctr = 0
        n = 150_000
        js = np.empty(n, dtype=np.int64)
        gs = np.empty(n)
        for t in range(n):
            js[t], gs[t], ctr = rng.branch_and_severity(cum, shape, k0, k1, c1, c2, c3, ctr)
        freq = np.bincount(js, minlength=3) / n
        assert np.allclose(freq, [0.5, 0.3, 0.2], atol=4 * math.sqrt(0.25 / n))
        for j in range(3):
            assert stats.kstest(gs[js == j], stats.gamma(shape[j]).cdf).pvalue > 1e-3


class TestNegBin:
    @pytest.mark.parametrize("mu, size", [(0.4, 0.8), (3.0, 1.5), (60.0, 2.0)])
    def test_pmf(self, mu, size):
        n = 200_000
        draws = Stream(5, member=int(mu * 10)).negbin(mu, size, n)
        top = int(mu * 4 + 30)
        obs = np.bincount(np.minimum(draws, top), minlength=top + 1)
        exp = np.array([negbin_pmf(k, mu, size) for k in range(top)])
        exp = np.append(exp, 1 - exp.sum()) * n
        keep = exp > 20
        o = np.append(obs[keep], obs[~keep].sum())
        e = np.append(exp[keep], exp[~keep].sum())
        chi2 = np.sum((o - e) ** 2 / e)
        assert stats.chi2.sf(chi2, len(e) - 1) > 1e-3

    def test_zero_mean(self):
        assert np.all(Stream(1).negbin(0.0, 1.0, 100) == 0)

    def test_poisson_moments(self):
        x = Stream(3).poisson(25.0, 200_000)
        assert abs(x.mean() - 25.0) < 4 * math.sqrt(25.0 / x.size)
        assert abs(x.var() / 25.0 - 1.0) < 0.02


class TestCategorical:
    @given(
        st.lists(st.floats(0.0, 10.0), min_size=1, max_size=80).filter(lambda w: sum(w) > 0),
        st.floats(0.0, 1.0, exclude_max=True),
    )
    def test_index_matches_linear_scan(self, weights, u):
        cum = np.cumsum(np.asarray(weights, dtype=float))
        target = u * cum[-1]
        expected = next((j for j in range(cum.size) if target < cum[j]), cum.size - 1)
        assert categorical_index(cum, u) == expected

    def test_degenerate_probabilities(self):
        assert np.all(Stream(8).categorical([1.0, 0.0, 0.0], 1000) == 0)

    def test_frequencies(self):
        p = np.array([0.1, 0.2, 0.3, 0.4])
        n = 200_000
        counts = np.bincount(Stream(4).categorical(p, n), minlength=4)
        assert stats.chisquare(counts, p * n).pvalue > 1e-3
