"""Response distributions on the 5-level ACR scale.

The Generalised Score Distribution (GSD) is parameterised by a mean ``psi``
in [1, 5] and a confidence ``rho`` in [0, 1] that is linear in the variance.
Below the binomial cutoff ``C(psi)`` it is a reparameterised beta-binomial;
above it, a mixture of the shifted binomial and the minimum-variance
distribution. The discretised normal used by Ordered Probit and SLI is
computed from CDF differences.

All functions accept scalars; ``gsd_pmf`` and ``discretized_normal_pmf`` also
broadcast over arrays and return an array with a trailing axis of length 5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

#: The response categories 1..5.
SCORES = np.arange(1, 6)
N_CATEGORIES = 5

_BINOM4 = np.array([1.0, 4.0, 6.0, 4.0, 1.0])


@dataclass(frozen=True)
class GsdParams:
    psi: float
    rho: float

    def __post_init__(self):
        if not 1.0 <= self.psi <= 5.0:
            raise ValueError(f"psi must lie in [1, 5]; got {self.psi}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1]; got {self.rho}")


@dataclass(frozen=True)
class ProbitParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive; got {self.sigma}")


@dataclass(frozen=True)
class SliParams:
    mos: float
    s2: float
    sigma_eff: float


@dataclass(frozen=True)
class VarianceBounds:
    v_min: float
    v_max: float
    c_cutoff: float


def _check_psi(psi):
    psi = np.asarray(psi, dtype=float)
    if np.any((psi < 1.0) | (psi > 5.0)) or np.any(np.isnan(psi)):
        raise ValueError("psi must lie in [1, 5]")
    return psi


def _bounds(psi):
    v_min = (np.ceil(psi) - psi) * (psi - np.floor(psi))
    v_max = (psi - 1.0) * (5.0 - psi)
    width = v_max - v_min
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(width > 0, 0.75 * v_max / np.where(width > 0, width, 1.0), 0.75)
    return v_min, v_max, c


def variance_bounds(psi: float) -> VarianceBounds:
    """Smallest and largest variance of a {1..5} distribution with mean ``psi``.

    Also returns the cutoff ``C(psi)``, the confidence at which the GSD
    variance equals that of the shifted Binomial(4, (psi - 1) / 4). At
    ``psi`` in {1, 5} the interval collapses and the cutoff is fixed at 3/4.
    """
    psi = _check_psi(psi)
    v_min, v_max, c = _bounds(psi)
    return VarianceBounds(float(v_min), float(v_max), float(c))


def shifted_binomial_pmf(psi):
    """Binomial(4, (psi - 1) / 4) shifted onto 1..5."""
    psi = np.asarray(psi, dtype=float)[..., None]
    k = np.arange(5)
    p = (psi - 1.0) / 4.0
    return _BINOM4 * p**k * (1.0 - p) ** (4 - k)


def _min_variance_pmf(psi):
    # [1 - |k - psi|]_+ : mass on floor(psi) and ceil(psi)
    psi = np.asarray(psi, dtype=float)[..., None]
    return np.clip(1.0 - np.abs(SCORES - psi), 0.0, None)


def _beta_binomial_branch(psi, rho, c):
    # Product form with the common factor rho cancelled between the first
    # numerator factor(s) and the first denominator factor, so rho = 0 is exact.
    a1 = (psi - 1.0) / 4.0
    b1 = (5.0 - psi) / 4.0
    d = c - rho
    a = a1 * rho
    b = b1 * rho
    out = np.empty(psi.shape + (5,))
    den = (rho + d) * (rho + 2 * d) * (rho + 3 * d)
    for k in range(1, 6):
        num = _BINOM4[k - 1]
        n_up = k - 1  # factors (a + i d), i = 0..k-2
        n_down = 5 - k  # factors (b + j d), j = 0..4-k
        if n_up:
            num = num * a1
            for i in range(1, n_up):
                num = num * (a + i * d)
        if n_down:
            num = num * b1
            for j in range(1, n_down):
                num = num * (b + j * d)
        if n_up and n_down:
            num = num * rho
        out[..., k - 1] = num / den
    return out


def gsd_pmf(psi, rho=None):
    """Probability mass function of GSD(psi, rho) over scores 1..5.

    ``psi`` may be a :class:`GsdParams`, in which case ``rho`` is omitted.
    ``rho == C(psi)`` is evaluated on the mixture branch.
    """
    if isinstance(psi, GsdParams):
        psi, rho = psi.psi, psi.rho
    psi = _check_psi(psi)
    rho = np.asarray(rho, dtype=float)
    if np.any((rho < 0.0) | (rho > 1.0)) or np.any(np.isnan(rho)):
        raise ValueError("rho must lie in [0, 1]")
    psi, rho = np.broadcast_arrays(psi, rho)
    v_min, v_max, c = _bounds(psi)

    binom = shifted_binomial_pmf(psi)
    point = _min_variance_pmf(psi)
    one_minus_c = 1.0 - c
    with np.errstate(divide="ignore", invalid="ignore"):
        w_point = np.where(one_minus_c > 0, (rho - c) / one_minus_c, 1.0)
        w_binom = np.where(one_minus_c > 0, (1.0 - rho) / one_minus_c, 0.0)
    mixture = w_point[..., None] * point + w_binom[..., None] * binom

    low = rho < c
    if np.any(low):
        # evaluate with rho clipped so the unused lanes stay finite
        bb = _beta_binomial_branch(psi, np.where(low, rho, 0.0), c)
        out = np.where(low[..., None], bb, mixture)
    else:
        out = mixture

    degenerate = v_max <= 0.0
    if np.any(degenerate):
        out = np.where(degenerate[..., None], point, out)
    return out


def gsd_moments(psi, rho=None) -> tuple[float, float]:
    """Closed-form mean and variance of GSD(psi, rho)."""
    if isinstance(psi, GsdParams):
        psi, rho = psi.psi, psi.rho
    psi_a = _check_psi(psi)
    v_min, v_max, _ = _bounds(psi_a)
    var = rho * v_min + (1.0 - rho) * v_max
    if np.ndim(var) == 0:
        return float(psi_a), float(var)
    return psi_a, var


def rho_from_variance(psi: float, variance: float) -> float:
    """Invert the variance line: the ``rho`` giving variance ``variance`` at ``psi``."""
    b = variance_bounds(psi)
    if b.v_max <= b.v_min:
        raise ValueError(f"variance interval is degenerate at psi={psi}")
    tol = 1e-12
    if not b.v_min - tol <= variance <= b.v_max + tol:
        raise ValueError(
            f"variance {variance} outside [{b.v_min}, {b.v_max}] for psi={psi}"
        )
    rho = (b.v_max - variance) / (b.v_max - b.v_min)
    return min(1.0, max(0.0, rho))


def _interval_prob(lo, hi):
    # P(lo < Z <= hi) for standard normal Z, using the upper tail when lo > 0
    # so that right-tail categories keep full relative precision.
    upper = lo > 0
    return np.where(upper, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


def discretized_normal_pmf(mu, sigma):
    """N(mu, sigma^2) discretised at the half-integers and censored to 1..5."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise ValueError("sigma must be positive")
    mu, sigma = np.broadcast_arrays(mu, sigma)
    cuts = (np.array([1.5, 2.5, 3.5, 4.5]) - mu[..., None]) / sigma[..., None]
    out = np.empty(mu.shape + (5,))
    out[..., 0] = ndtr(cuts[..., 0])
    for k in range(1, 4):
        out[..., k] = _interval_prob(cuts[..., k - 1], cuts[..., k])
    out[..., 4] = ndtr(-cuts[..., 3])
    return out


def pmf_moments(probs) -> tuple:
    """Mean and variance of a distribution (or stack of them) on 1..5."""
    probs = np.asarray(probs, dtype=float)
    mean = probs @ SCORES
    dev = SCORES - np.asarray(mean)[..., None]
    var = np.sum(probs * dev * dev, axis=-1)
    if np.ndim(mean) == 0:
        return float(mean), float(var)
    return mean, var


def sample(probs, n: int, stream: np.random.Generator) -> np.ndarray:
    """Draw category counts of an ``n``-response sample from ``probs``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p / p.sum()
    return stream.multinomial(n, p)


def sample_many(probs, n: int, streams) -> np.ndarray:
    """One sample of size ``n`` per stream, stacked as rows."""
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    p = p / p.sum()
    out = np.empty((len(streams), 5), dtype=np.int64)
    for i, g in enumerate(streams):
        out[i] = g.multinomial(n, p)
    return out


# defaults reproduce the standard GSD parameter-map curves
GSD_MAP_PSI = (1.1, 1.4, 2.1, 2.6, 3.0, 3.9, 4.7)
GSD_MAP_RHO = (0.01, 0.1, 0.4, 0.6, 0.85, 0.92, 1.0)
PROBIT_MAP_MU = (1.1, 1.4, 2.1, 2.6, 3.0, 3.9, 4.7)
PROBIT_MAP_SIGMA = (0.1, 0.3, 0.5, 0.8, 1.2, 2.0, 4.0)


def parameter_space_map(model: str, param1, param2) -> list[tuple[float, float, float, float]]:
    """Moments of the distributions induced on 1..5 by a parameter grid.

    ``param1``/``param2`` are (psi, rho) for ``"gsd"`` and (mu, sigma) for
    ``"probit"``. Every combination is evaluated; rows are
    ``(param1, param2, E(U), V(U))`` ordered by ``param1`` then ``param2``.
    """
    p1 = np.asarray(param1, dtype=float).ravel()
    p2 = np.asarray(param2, dtype=float).ravel()
    g1, g2 = np.meshgrid(p1, p2, indexing="ij")
    if model == "gsd":
        probs = gsd_pmf(g1, g2)
    elif model == "probit":
        probs = discretized_normal_pmf(g1, g2)
    else:
        raise ValueError(f"unknown model {model!r}; expected 'gsd' or 'probit'")
    mean, var = pmf_moments(probs.reshape(-1, 5))
    return [
        (float(a), float(b), float(m), float(v))
        for a, b, m, v in zip(g1.ravel(), g2.ravel(), mean, var)
    ]


def default_map_grid(model: str, sweep: str = "param2"):
    """Default grid for :func:`parameter_space_map`.

    ``sweep="param2"`` fixes each of a handful of ``param1`` values and sweeps
    ``param2``; ``sweep="param1"`` does the converse.
    """
    if model == "gsd":
        fixed1, fixed2 = GSD_MAP_PSI, GSD_MAP_RHO
        sweep1 = np.round(np.arange(1.01, 5.0, 0.05), 10)
        sweep2 = np.round(np.arange(0.0, 1.0 + 1e-9, 0.05), 10)
    elif model == "probit":
        fixed1, fixed2 = PROBIT_MAP_MU, PROBIT_MAP_SIGMA
        sweep1 = np.round(np.arange(0.0, 6.0 + 1e-9, 0.05), 10)
        sweep2 = np.round(np.exp(np.linspace(math.log(0.05), math.log(5.0), 41)), 10)
    else:
        raise ValueError(f"unknown model {model!r}")
    if sweep == "param2":
        return np.array(fixed1), sweep2
    return sweep1, np.array(fixed2)
