"""Does a model fitted to small subsamples describe the large sample better
than the subsamples' own empirical distribution?

Subsamples of size ``n_small`` are drawn from the raw EPMF of a large sample.
For each, the log-likelihood ratio ``W_r`` of the fitted model against the
subsample's corrected EPMF is evaluated on the large sample. The signs of the
``W_r`` give ``p_m - p_e`` and a normal-approximation 95% interval.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataio import DEFAULT_MC, derive_stream
from .distributions import sample_many
from .estimation import as_counts, batch_fitter

W_INFINITY = 1e10
Z_95 = 1.96
REPLICATE_BLOCK = 1000

MODEL_BETTER = "model_better"
EMPIRICAL_BETTER = "empirical_better"
NO_DIFFERENCE = "no_significant_difference"


@dataclass(frozen=True)
class ComparisonResult:
    stimulus_id: str
    model: str
    n_large: int
    n_small: int
    mc: int
    seed: int
    p_m_hat: float
    p_e_hat: float
    diff: float
    ci_low: float
    ci_high: float
    verdict: str
    w_positive: int
    w_negative: int
    w_zero: int
    w_infinite: int

    def as_row(self) -> dict:
        return dict(self.__dict__)


def verdict_from_ci(ci_low: float, ci_high: float) -> str:
    if ci_low > 0:
        return MODEL_BETTER
    if ci_high < 0:
        return EMPIRICAL_BETTER
    return NO_DIFFERENCE


def comparison_ci(p_m_hat: float, p_e_hat: float, mc: int) -> tuple[float, float]:
    """95% interval ``(L, R)`` for ``p_m - p_e`` estimated from ``mc`` replicates."""
    if mc < 1:
        raise ValueError("mc must be >= 1")
    if p_m_hat < 0 or p_e_hat < 0 or p_m_hat + p_e_hat > 1 + 1e-12:
        raise ValueError("need p_m_hat, p_e_hat >= 0 with p_m_hat + p_e_hat <= 1")
    d = p_m_hat - p_e_hat
    half = Z_95 * np.sqrt(max(p_m_hat + p_e_hat - d * d, 0.0) / mc)
    return float(d - half), float(d + half)


def w_statistic(large, model_probs, empirical_probs) -> float:
    """``sum_{N_k > 0} N_k (ln q_k - ln v_k)`` over the large-sample counts.

    An observed category with zero empirical probability makes the empirical
    likelihood vanish; that returns the stand-in ``W_INFINITY`` (``-W_INFINITY``
    for a zero model probability, and 0 when both vanish).
    """
    w = _w_many(np.asarray(large, dtype=float),
                np.asarray(model_probs, dtype=float)[None, :],
                np.asarray(empirical_probs, dtype=float)[None, :])
    return float(w[0])


def _w_many(large, q, v):
    obs = large > 0
    q_zero = np.any((q <= 0) & obs, axis=1)
    v_zero = np.any((v <= 0) & obs, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(obs, large * (np.log(q) - np.log(v)), 0.0)
    w = terms.sum(axis=1)
    w = np.where(v_zero & ~q_zero, W_INFINITY, w)
    w = np.where(q_zero & ~v_zero, -W_INFINITY, w)
    w = np.where(q_zero & v_zero, 0.0, w)
    return w


def occupies_neighbouring(counts) -> np.ndarray:
    """True for rows whose responses fall in one category or two adjacent ones."""
    occ = np.asarray(counts) > 0
    k = occ.sum(axis=-1)
    adjacent = np.any(occ[..., :-1] & occ[..., 1:], axis=-1)
    return (k == 1) | ((k == 2) & adjacent)


def _empirical_many(m, corrected):
    n = m.sum(axis=1, keepdims=True)
    if corrected:
        return (m + 0.5) / (n + 2.5)
    return m / n


def subsample_w(large, model="gsd", n_small: int = 24, mc: int = DEFAULT_MC, seed: int = 0,
                stimulus_id: str = "", threads: int = 1, corrected: bool = True) -> np.ndarray:
    """The ``mc`` values ``W_r`` for one large sample."""
    big = as_counts(large)
    n_big = int(big.sum())
    if not 1 <= n_small < n_big:
        raise ValueError(f"n_small must lie in [1, {n_big}); got {n_small}")
    if mc < 1:
        raise ValueError("mc must be >= 1")
    fitter = batch_fitter(model)
    raw = big / n_big
    big_f = big.astype(float)
    gsd_rule = model == "gsd"

    def block(bounds):
        start, stop = bounds
        streams = [derive_stream(seed, stimulus_id, r) for r in range(start, stop)]
        m = sample_many(raw, n_small, streams)
        q = fitter(m)
        v = _empirical_many(m, corrected)
        w = _w_many(big_f[None, :], q, v)
        if gsd_rule:
            w[occupies_neighbouring(m)] = 0.0
        return w

    blocks = [(s, min(s + REPLICATE_BLOCK, mc)) for s in range(0, mc, REPLICATE_BLOCK)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, blocks))
    else:
        parts = [block(b) for b in blocks]
    return np.concatenate(parts)


def summarise_w(w, mc: int):
    pos = int(np.count_nonzero(w > 0))
    neg = int(np.count_nonzero(w < 0))
    zero = int(len(w) - pos - neg)
    inf = int(np.count_nonzero(np.abs(w) >= W_INFINITY))
    p_m, p_e = pos / mc, neg / mc
    lo, hi = comparison_ci(p_m, p_e, mc)
    return p_m, p_e, lo, hi, pos, neg, zero, inf


def compare_vs_empirical(large, n_small: int, model: str = "gsd", mc: int = DEFAULT_MC,
                         seed: int = 0, stimulus_id: str = "", threads: int = 1,
                         corrected: bool = True) -> ComparisonResult:
    """Run the bootstrapping effectiveness test on one large sample.

    ``model`` is ``"gsd"`` or ``"sli"`` (any fitter name works). For the GSD a
    subsample confined to one category or two neighbouring ones scores
    ``W_r = 0``. ``corrected=False`` compares against the raw subsample EPMF.
    """
    w = subsample_w(large, model, n_small, mc, seed, stimulus_id, threads, corrected)
    p_m, p_e, lo, hi, pos, neg, zero, inf = summarise_w(w, mc)
    return ComparisonResult(
        stimulus_id=str(stimulus_id), model=str(model), n_large=int(np.sum(large)),
        n_small=int(n_small), mc=int(mc), seed=int(seed),
        p_m_hat=p_m, p_e_hat=p_e, diff=p_m - p_e, ci_low=lo, ci_high=hi,
        verdict=verdict_from_ci(lo, hi),
        w_positive=pos, w_negative=neg, w_zero=zero, w_infinite=inf,
    )


def compare_batch(dataset, n_small: int, model: str = "gsd", mc: int = DEFAULT_MC,
                  seed: int = 0, threads: int = 1) -> list[ComparisonResult]:
    items = list(dataset)

    def run(item):
        sid, counts = item
        return compare_vs_empirical(counts, n_small, model, mc, seed, sid)

    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, items))
    return [run(it) for it in items]


def difference_histogram(results, bin_width: float = 0.1) -> list[dict]:
    """Per-bin counts of ``p_m - p_e`` split into significant and insignificant.

    Bins tile ``[-1, 1]``; the last bin is closed. See :func:`verdict_totals`
    for the significant totals on either side of zero.
    """
    n_bins = round(2.0 / bin_width)
    if abs(n_bins * bin_width - 2.0) > 1e-9:
        raise ValueError("bin_width must divide 2 evenly")
    sig = np.zeros(n_bins, dtype=int)
    insig = np.zeros(n_bins, dtype=int)
    for r in results:
        i = min(int(np.floor((r.diff + 1.0) / bin_width + 1e-9)), n_bins - 1)
        if r.verdict == NO_DIFFERENCE:
            insig[i] += 1
        else:
            sig[i] += 1
    rows = []
    for i in range(n_bins):
        start = round(-1.0 + i * bin_width, 12)
        rows.append({
            "bin_start": start,
            "bin_end": round(start + bin_width, 12),
            "significant": int(sig[i]),
            "insignificant": int(insig[i]),
        })
    return rows


def verdict_totals(results) -> dict:
    out = {MODEL_BETTER: 0, EMPIRICAL_BETTER: 0, NO_DIFFERENCE: 0}
    for r in results:
        out[r.verdict] += 1
    return out
