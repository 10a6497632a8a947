"""Bootstrapped G-test of goodness of fit and p-value summaries."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy
from scipy.stats import norm

from .dataio import DEFAULT_MC, derive_stream
from .distributions import sample_many
from .estimation import as_counts, batch_fitter

SIGNIFICANCE = 0.05
DEFAULT_BIN_WIDTH = 0.05
DEFAULT_INSPECTION_RANGE = (0.0, 0.2)
REPLICATE_BLOCK = 1000


def default_alpha_grid() -> np.ndarray:
    return np.round(np.arange(1, 1001) / 1000, 3)


@dataclass(frozen=True)
class GofResult:
    stimulus_id: str
    model: str
    t_statistic: float
    p_value: float
    mc: int
    seed: int

    def as_row(self) -> dict:
        return {
            "stimulus_id": self.stimulus_id,
            "model": self.model,
            "t": self.t_statistic,
            "p_value": self.p_value,
            "mc": self.mc,
            "seed": self.seed,
        }


def g_statistic(counts, fitted) -> float:
    """G statistic ``sum n_k ln(n_k / (n p_k))`` with ``0 ln 0 = 0``.

    Clamped at zero, since it is ``n`` times a Kullback-Leibler divergence and
    only rounding can push it below. ``+inf`` when an observed category has
    zero fitted probability.
    """
    t = _g_many(np.asarray(counts, dtype=float)[None, :], np.asarray(fitted, dtype=float)[None, :])
    return float(t[0])


def _g_many(counts, fitted):
    n = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(counts > 0, xlogy(counts, counts / (n * fitted)), 0.0)
    t = terms.sum(axis=1)
    return np.maximum(t, 0.0)


def _replicate_block(fitter, probs, n, seed, stimulus_id, start, stop):
    streams = [derive_stream(seed, stimulus_id, r) for r in range(start, stop)]
    m = sample_many(probs, n, streams)
    q = fitter(m)
    return _g_many(m.astype(float), q)


def bootstrap_statistics(counts, model="gsd", mc: int = DEFAULT_MC, seed: int = 0,
                         stimulus_id: str = "", threads: int = 1):
    """Observed G statistic and the ``mc`` parametric-bootstrap replicates.

    Replicate ``r`` is drawn from ``derive_stream(seed, stimulus_id, r)``, so
    the replicate vector does not depend on ``threads``.
    """
    if mc < 1:
        raise ValueError("mc must be >= 1")
    c = as_counts(counts)
    n = int(c.sum())
    fitter = batch_fitter(model)
    fitted = fitter(c[None, :])[0]
    t = g_statistic(c, fitted)
    blocks = [(s, min(s + REPLICATE_BLOCK, mc)) for s in range(0, mc, REPLICATE_BLOCK)]
    args = [(fitter, fitted, n, seed, stimulus_id, s, e) for s, e in blocks]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _replicate_block(*a), args))
    else:
        parts = [_replicate_block(*a) for a in args]
    return t, np.concatenate(parts), fitted


def bootstrap_gof(counts, model="gsd", mc: int = DEFAULT_MC, seed: int = 0,
                  stimulus_id: str = "", threads: int = 1) -> GofResult:
    """Bootstrap p-value of the G-test for one stimulus.

    The model is refitted to every bootstrap sample with the same (corrected)
    estimator used on the observed counts; ``p = mean(T_r >= T)``.
    """
    t, t_rep, _ = bootstrap_statistics(counts, model, mc, seed, stimulus_id, threads)
    p = float(np.count_nonzero(t_rep >= t)) / mc
    name = model if isinstance(model, str) else getattr(model, "__name__", "custom")
    return GofResult(str(stimulus_id), name, t, p, int(mc), int(seed))


def gof_batch(dataset, model="gsd", mc: int = DEFAULT_MC, seed: int = 0, threads: int = 1) -> list[GofResult]:
    """:func:`bootstrap_gof` for every stimulus of a dataset, in input order."""
    items = list(dataset)

    def run(item):
        sid, counts = item
        return bootstrap_gof(counts, model, mc, seed, sid)

    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, items))
    return [run(it) for it in items]


# --------------------------------------------------------------- summaries

def _check_pvalues(p_values):
    p = np.asarray(p_values, dtype=float).ravel()
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    return p


@dataclass(frozen=True)
class Histogram:
    bin_start: np.ndarray
    count: np.ndarray
    bin_width: float
    significance: float
    reference_count: float  # 5% of all stimuli

    def rows(self) -> list[dict]:
        return [
            {"bin_start": float(b), "bin_end": float(min(b + self.bin_width, 1.0)), "count": int(c)}
            for b, c in zip(self.bin_start, self.count)
        ]

    @property
    def total(self) -> int:
        return int(self.count.sum())


def pvalue_histogram(p_values, bin_width: float = DEFAULT_BIN_WIDTH) -> Histogram:
    """Counts of p-values per bin of ``[0, 1]``; the last bin is closed."""
    p = _check_pvalues(p_values)
    n_bins = round(1.0 / bin_width)
    if n_bins < 1 or abs(n_bins * bin_width - 1.0) > 1e-9:
        raise ValueError("bin_width must divide 1 evenly")
    idx = np.minimum(np.floor(p * n_bins + 1e-9).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    starts = np.round(np.arange(n_bins) * bin_width, 12)
    return Histogram(starts, counts, float(bin_width), SIGNIFICANCE, SIGNIFICANCE * len(p))


@dataclass(frozen=True)
class PPPlotData:
    alpha: np.ndarray
    theoretical_cdf: np.ndarray
    ecdf: np.ndarray
    significance_line: np.ndarray
    n_stimuli: int
    confidence: float
    inspection_range: tuple
    verdict: bool

    def rows(self) -> list[dict]:
        return [
            {"alpha": float(a), "theoretical_cdf": float(t), "ecdf": float(e), "significance_line": float(s)}
            for a, t, e, s in zip(self.alpha, self.theoretical_cdf, self.ecdf, self.significance_line)
        ]


def pp_plot(p_values, alpha_grid=None, confidence: float = 0.95,
            inspection_range: tuple = DEFAULT_INSPECTION_RANGE) -> PPPlotData:
    """ECDF of p-values against the uniform CDF with a one-sided band.

    The band is ``alpha + z * sqrt(alpha (1 - alpha) / S)`` with ``z`` the
    one-sided normal quantile at ``confidence`` and ``S`` the number of
    stimuli. ``verdict`` is true when the ECDF stays on or below the band for
    every alpha in ``inspection_range``: the p-values do not contradict the
    model.
    """
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    p = np.sort(_check_pvalues(p_values))
    alpha = default_alpha_grid() if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    s = len(p)
    if s:
        ecdf = np.searchsorted(p, alpha, side="right") / s
        z = norm.ppf(confidence)
        line = alpha + z * np.sqrt(alpha * (1 - alpha) / s)
    else:
        ecdf = np.zeros_like(alpha)
        line = np.full_like(alpha, np.nan)
    lo, hi = inspection_range
    window = (alpha >= lo) & (alpha <= hi)
    verdict = bool(s) and bool(np.all(ecdf[window] <= line[window] + 1e-12))
    return PPPlotData(alpha, alpha.copy(), ecdf, line, s, confidence, tuple(inspection_range), verdict)


def kolmogorov_distance(p_values) -> float:
    """Sup distance between the p-value ECDF and the uniform CDF."""
    p = np.sort(_check_pvalues(p_values))
    s = len(p)
    i = np.arange(1, s + 1)
    return float(max(np.max(i / s - p), np.max(p - (i - 1) / s)))
