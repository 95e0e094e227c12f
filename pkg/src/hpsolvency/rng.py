"""Counter-based random streams and the samplers built on them.

Every draw is a pure function of ``(seed, domain, scenario, member, counter)``:
the Philox4x32-10 block cipher maps that tuple to 128 random bits. A stream
therefore needs no shared state, and a simulation split across any number of
workers reproduces the same numbers bit for bit.

Counter layout (four 32-bit words)::

    c0 = draw counter within the substream
    c1 = member position
    c2 = low 32 bits of the scenario index
    c3 = high 16 bits of the scenario index | domain << 16

The key is the 64-bit master seed split into two 32-bit words.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)
_SH16 = np.uint64(16)
_SH7 = np.uint64(7)
_TWO_M53 = 2.0**-53

# Stream domains keep unrelated uses of one seed from sharing random numbers.
DOMAIN_SIMULATION = 0
DOMAIN_HISTORY = 1
DOMAIN_BOOTSTRAP = 2
DOMAIN_SEVERITY_PROBE = 3


@njit(cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds. All arguments are uint64 holding 32-bit words."""
    for r in range(10):
        if r > 0:
            k0 = (k0 + _W0) & MASK32
            k1 = (k1 + _W1) & MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = (p1 >> _SH32) ^ c1 ^ k0
        n1 = p1 & MASK32
        n2 = (p0 >> _SH32) ^ c3 ^ k1
        n3 = p0 & MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
    return c0, c1, c2, c3


def split_seed(seed):
    """Return the two 32-bit key words of a 64-bit seed."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32)


def stream_words(scenario, member, domain):
    """Counter words c1, c2, c3 identifying one substream."""
    scenario = int(scenario)
    if not 0 <= scenario < 2**48:
        raise ValueError("scenario index must be in [0, 2**48)")
    if not 0 <= int(member) < 2**32:
        raise ValueError("member position must be in [0, 2**32)")
    if not 0 <= int(domain) < 2**16:
        raise ValueError("domain must be in [0, 2**16)")
    return (
        np.uint64(member),
        np.uint64(scenario & 0xFFFFFFFF),
        np.uint64((scenario >> 32) | (int(domain) << 16)),
    )


@njit(cache=True)
def uniform(k0, k1, c1, c2, c3, ctr):
    """One double in the open interval (0, 1); returns ``(u, next_ctr)``."""
    w0, w1, _, _ = philox4x32(np.uint64(ctr), c1, c2, c3, k0, k1)
    bits = ((w0 << _SH32) | w1) >> _SH11
    return (np.float64(bits) + 0.5) * _TWO_M53, ctr + 1


# -- normal and gamma ----------------------------------------------------------
#
# Standard normals come from a 128-layer ziggurat (Marsaglia and Tsang) with
# the layer index and the value taken from independent words (Doornik's
# ZIGNOR variant). Words are used as 32-bit uniforms here; the resolution of
# 2**-32 is far below anything the samplers can resolve statistically.

_ZIG_LAYERS = 128
_ZIG_R = 3.442619855899
_ZIG_V = 9.91256303526217e-3
_TWO_M32 = 2.0**-32
_TWO_M25 = 2.0**-25
_LOW7 = np.uint64(127)


def _ziggurat_tables():
    x = np.zeros(_ZIG_LAYERS + 1)
    f = math.exp(-0.5 * _ZIG_R * _ZIG_R)
    x[0] = _ZIG_V / f
    x[1] = _ZIG_R
    for i in range(2, _ZIG_LAYERS):
        x[i] = math.sqrt(-2.0 * math.log(_ZIG_V / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    ratio = x[1:] / x[:-1]
    return x, ratio


ZIG_X, ZIG_RATIO = _ziggurat_tables()


@njit(cache=True, inline="always")
def u32(w):
    """A 32-bit word as a double in (0, 1)."""
    return (np.float64(w) + 0.5) * _TWO_M32


@njit(cache=True)
def _normal_tail(neg, k0, k1, c1, c2, c3, ctr):
    while True:
        w0, w1, w2, w3 = philox4x32(np.uint64(ctr), c1, c2, c3, k0, k1)
        ctr += 1
        x = math.log(u32(w0)) / _ZIG_R
        y = math.log(u32(w1))
        if -2.0 * y >= x * x:
            return (x - _ZIG_R if neg else _ZIG_R - x), ctr


@njit(cache=True)
def _normal_slow(w_val, w_layer, w_wedge, k0, k1, c1, c2, c3, ctr):
    """Ziggurat continuation after a fast-path miss on ``(w_val, w_layer)``."""
    while True:
        u = 2.0 * u32(w_val) - 1.0
        i = np.int64(w_layer & _LOW7)
        if abs(u) < ZIG_RATIO[i]:
            return u * ZIG_X[i], ctr
        if i == 0:
            return _normal_tail(u < 0.0, k0, k1, c1, c2, c3, ctr)
        x = u * ZIG_X[i]
        f0 = math.exp(-0.5 * (ZIG_X[i] * ZIG_X[i] - x * x))
        f1 = math.exp(-0.5 * (ZIG_X[i + 1] * ZIG_X[i + 1] - x * x))
        if f1 + u32(w_wedge) * (f0 - f1) < 1.0:
            return x, ctr
        w_val, w_layer, w_wedge, _ = philox4x32(np.uint64(ctr), c1, c2, c3, k0, k1)
        ctr += 1


@njit(cache=True, inline="always")
def _normal_words(w_val, w_layer, w_wedge, k0, k1, c1, c2, c3, ctr):
    """Normal from three words; draws further blocks only off the fast path (about 1% of calls)."""
    u = 2.0 * u32(w_val) - 1.0
    i = np.int64(w_layer & _LOW7)
    if abs(u) < ZIG_RATIO[i]:
        return u * ZIG_X[i], ctr
    return _normal_slow(w_val, w_layer, w_wedge, k0, k1, c1, c2, c3, ctr)


@njit(cache=True)
def normal(k0, k1, c1, c2, c3, ctr):
    """Standard normal by ziggurat; one block in the common case."""
    w0, w1, w2, _ = philox4x32(np.uint64(ctr), c1, c2, c3, k0, k1)
    return _normal_words(w0, w1, w2, k0, k1, c1, c2, c3, ctr + 1)


@njit(cache=True, inline="always")
def _mt_accept(x, u, d):
    """Marsaglia-Tsang acceptance; returns ``v`` (> 0) on acceptance, else 0."""
    v = 1.0 + x / math.sqrt(9.0 * d)
    if v <= 0.0:
        return 0.0
    v = v * v * v
    if u < 1.0 - 0.0331 * (x * x) * (x * x):
        return v
    if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
        return v
    return 0.0


@njit(cache=True)
def _gamma_loop(a, k0, k1, c1, c2, c3, ctr):
    """Gamma(a >= 1) by Marsaglia-Tsang; one block per attempt in the common case."""
    d = a - 1.0 / 3.0
    while True:
        w0, w1, w2, w3 = philox4x32(np.uint64(ctr), c1, c2, c3, k0, k1)
        ctr += 1
        x, ctr = _normal_words(w0, w1, w2, k0, k1, c1, c2, c3, ctr)
        v = _mt_accept(x, u32(w3), d)
        if v > 0.0:
            return d * v, ctr


@njit(cache=True)
def standard_gamma(shape, k0, k1, c1, c2, c3, ctr):
    """Gamma(shape, scale=1) by Marsaglia-Tsang, boosted for shape < 1."""
    if shape < 1.0:
        u, ctr = uniform(k0, k1, c1, c2, c3, ctr)
        g, ctr = _gamma_loop(shape + 1.0, k0, k1, c1, c2, c3, ctr)
        return g * u ** (1.0 / shape), ctr
    return _gamma_loop(shape, k0, k1, c1, c2, c3, ctr)


@njit(cache=True)
def branch_and_severity(cum, shape, k0, k1, c1, c2, c3, ctr):
    """One episode: branch index from ``cum`` and a Gamma(shape[j], 1) draw.

    The first block supplies the branch uniform, the ziggurat words and the
    acceptance uniform, so most episodes cost a single block.
    """
    w0, w1, w2, w3 = philox4x32(np.uint64(ctr), c1, c2, c3, k0, k1)
    ctr += 1
    j = categorical_index(cum, u32(w0))
    a = shape[j]
    if a >= 1.0:
        d = a - 1.0 / 3.0
        x, ctr = _normal_words(w1, w2, w3, k0, k1, c1, c2, c3, ctr)
        # the layer uses the low 7 bits of w2; acceptance takes the other 25
        v = _mt_accept(x, (np.float64(w2 >> _SH7) + 0.5) * _TWO_M25, d)
        if v > 0.0:
            return j, d * v, ctr
    g, ctr = standard_gamma(a, k0, k1, c1, c2, c3, ctr)
    return j, g, ctr


@njit(cache=True)
def poisson(lam, k0, k1, c1, c2, c3, ctr):
    """Poisson draw: CDF inversion below 30, PTRS (Hormann 1993) above."""
    if lam <= 0.0:
        return 0, ctr
    if lam < 30.0:
        u, ctr = uniform(k0, k1, c1, c2, c3, ctr)
        k = 0
        p = math.exp(-lam)
        cdf = p
        while u > cdf:
            k += 1
            p *= lam / k
            if p == 0.0:
                break
            cdf += p
        return k, ctr
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u, ctr = uniform(k0, k1, c1, c2, c3, ctr)
        v, ctr = uniform(k0, k1, c1, c2, c3, ctr)
        u -= 0.5
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k), ctr
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)) <= (
            -lam + k * loglam - math.lgamma(k + 1.0)
        ):
            return int(k), ctr


# Above this mean, NegBin inversion walks too many cells; use Gamma-Poisson.
NEGBIN_INVERSION_MAX_MEAN = 40.0


@njit(cache=True)
def negbin_constants(mu, size):
    """``(P[N=0], mu / (size + mu))``, the inputs of :func:`negbin_pq`."""
    return math.exp(-size * math.log1p(mu / size)), mu / (size + mu)


@njit(cache=True)
def negbin_table(mu, size):
    p0 = np.empty(mu.shape[0])
    q = np.empty(mu.shape[0])
    for i in range(mu.shape[0]):
        p0[i], q[i] = negbin_constants(mu[i], size)
    return p0, q


@njit(cache=True)
def negbin(mu, size, k0, k1, c1, c2, c3, ctr):
    """NegBin draw with mean ``mu`` and size ``size`` (variance mu + mu^2/size)."""
    p0, q = negbin_constants(mu, size)
    return negbin_pq(mu, size, p0, q, k0, k1, c1, c2, c3, ctr)


@njit(cache=True)
def negbin_pq(mu, size, p0, q, k0, k1, c1, c2, c3, ctr):
    """:func:`negbin` with its per-mean constants precomputed."""
    if mu <= 0.0:
        return 0, ctr
    if mu > NEGBIN_INVERSION_MAX_MEAN:
        g, ctr = standard_gamma(size, k0, k1, c1, c2, c3, ctr)
        return poisson(g * mu / size, k0, k1, c1, c2, c3, ctr)
    p = p0
    u, ctr = uniform(k0, k1, c1, c2, c3, ctr)
    k = 0
    cdf = p
    while u > cdf:
        p *= (k + size) / (k + 1.0) * q
        k += 1
        if p == 0.0:
            break
        cdf += p
    return k, ctr


@njit(cache=True, inline="always")
def categorical_index(cum, u):
    """First ``j`` with ``u * cum[-1] < cum[j]`` (the last index if none).

    Short rows count the thresholds passed without branching, which is
    faster than a search whose branches the CPU cannot predict.
    """
    n = cum.shape[0]
    target = u * cum[n - 1]
    if n <= 64:
        j = 0
        for k in range(n - 1):
            j += target >= cum[k]
        return j
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if target < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def categorical(cum, k0, k1, c1, c2, c3, ctr):
    """Index (0-based) drawn from a cumulative probability row."""
    u, ctr = uniform(k0, k1, c1, c2, c3, ctr)
    return categorical_index(cum, u), ctr


# -- vector front ends used by Stream ----------------------------------------


@njit(cache=True)
def _fill_uniform(out, k0, k1, c1, c2, c3, ctr):
    for t in range(out.shape[0]):
        out[t], ctr = uniform(k0, k1, c1, c2, c3, ctr)
    return ctr


@njit(cache=True)
def _fill_negbin(out, mu, size, k0, k1, c1, c2, c3, ctr):
    for t in range(out.shape[0]):
        out[t], ctr = negbin(mu, size, k0, k1, c1, c2, c3, ctr)
    return ctr


@njit(cache=True)
def _fill_categorical(out, cum, k0, k1, c1, c2, c3, ctr):
    for t in range(out.shape[0]):
        out[t], ctr = categorical(cum, k0, k1, c1, c2, c3, ctr)
    return ctr


@njit(cache=True)
def _fill_gamma(out, shape, scale, k0, k1, c1, c2, c3, ctr):
    for t in range(out.shape[0]):
        g, ctr = standard_gamma(shape, k0, k1, c1, c2, c3, ctr)
        out[t] = g * scale
    return ctr


@njit(cache=True)
def _fill_poisson(out, lam, k0, k1, c1, c2, c3, ctr):
    for t in range(out.shape[0]):
        out[t], ctr = poisson(lam, k0, k1, c1, c2, c3, ctr)
    return ctr


class Stream:
    """A sequential view of one substream.

    Draws advance an internal counter; two ``Stream`` objects built from the
    same ``(seed, scenario, member, domain)`` yield identical sequences.
    """

    def __init__(self, seed: int, scenario: int = 0, member: int = 0, domain: int = DOMAIN_SIMULATION):
        self.seed = int(seed)
        self.scenario = int(scenario)
        self.member = int(member)
        self.domain = int(domain)
        self._key = split_seed(seed)
        self._words = stream_words(scenario, member, domain)
        self.counter = 0

    def _args(self):
        return (*self._key, *self._words, np.int64(self.counter))

    def uniform(self, size: int | None = None):
        out = np.empty(1 if size is None else size)
        self.counter = int(_fill_uniform(out, *self._args()))
        return out[0] if size is None else out

    def negbin(self, mu: float, size_param: float, size: int | None = None):
        out = np.empty(1 if size is None else size, dtype=np.int64)
        self.counter = int(_fill_negbin(out, float(mu), float(size_param), *self._args()))
        return int(out[0]) if size is None else out

    def poisson(self, lam: float, size: int | None = None):
        out = np.empty(1 if size is None else size, dtype=np.int64)
        self.counter = int(_fill_poisson(out, float(lam), *self._args()))
        return int(out[0]) if size is None else out

    def categorical(self, probs, size: int | None = None):
        cum = np.cumsum(np.asarray(probs, dtype=np.float64))
        out = np.empty(1 if size is None else size, dtype=np.int64)
        self.counter = int(_fill_categorical(out, cum, *self._args()))
        return int(out[0]) if size is None else out

    def gamma(self, shape: float, scale: float = 1.0, size: int | None = None):
        out = np.empty(1 if size is None else size)
        self.counter = int(_fill_gamma(out, float(shape), float(scale), *self._args()))
        return float(out[0]) if size is None else out

    def __repr__(self):
        return (
            f"Stream(seed={self.seed}, scenario={self.scenario}, member={self.member}, "
            f"domain={self.domain}, counter={self.counter})"
        )
