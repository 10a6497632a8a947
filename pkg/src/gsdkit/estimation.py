"""Maximum-likelihood fitting of GSD, Ordered Probit and SLI to one stimulus.

Every fitter takes a length-5 count vector. The GSD and SLI estimators carry
small-sample corrections: the GSD search is restricted to parameters whose two
most probable categories hold at most ``1 - 1/n`` of the mass, and the SLI
standard deviation is floored. Batch variants (``*_many``) fit a stack of
count vectors at once and are what the bootstrap loops use.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri, xlogy

from .distributions import (
    SCORES,
    GsdParams,
    ProbitParams,
    SliParams,
    discretized_normal_pmf,
    gsd_pmf,
)

# GSD grid resolution
PSI_STEP = 0.01
RHO_STEP = 0.005

# Ordered Probit search box
PROBIT_MU_BOUNDS = (-2.0, 8.0)
PROBIT_SIGMA_BOUNDS = (0.02, 10.0)
PROBIT_MU_STEP = 0.05
PROBIT_LOG_SIGMA_STEP = 0.05
PROBIT_MAXITER = 200
PROBIT_TOL = 1e-8

SIGMA_CAP = PROBIT_SIGMA_BOUNDS[1]

MODELS = ("gsd", "probit", "sli")


@dataclass(frozen=True)
class FitResult:
    model: str
    params: object
    probs: np.ndarray
    log_likelihood: float

    def as_row(self) -> dict:
        row = {"model": self.model}
        if isinstance(self.params, GsdParams):
            row.update(psi=self.params.psi, rho=self.params.rho)
        elif isinstance(self.params, ProbitParams):
            row.update(mu=self.params.mu, sigma=self.params.sigma)
        elif isinstance(self.params, SliParams):
            row.update(mos=self.params.mos, s2=self.params.s2, sigma_eff=self.params.sigma_eff)
        for k, p in enumerate(self.probs, start=1):
            row[f"p{k}"] = float(p)
        row["log_likelihood"] = self.log_likelihood
        return row


def as_counts(counts) -> np.ndarray:
    c = np.asarray(counts)
    if c.shape != (5,):
        raise ValueError(f"counts must have 5 entries; got shape {c.shape}")
    if not np.all(np.equal(np.mod(c, 1), 0)) or np.any(c < 0):
        raise ValueError("counts must be non-negative integers")
    c = c.astype(np.int64)
    if c.sum() < 1:
        raise ValueError("counts must contain at least one response")
    return c


def _as_count_matrix(counts) -> np.ndarray:
    c = np.asarray(counts)
    if c.ndim != 2 or c.shape[1] != 5:
        raise ValueError("expected an (m, 5) array of counts")
    c = c.astype(np.int64)
    if np.any(c < 0) or np.any(c.sum(axis=1) < 1):
        raise ValueError("every row needs non-negative counts and at least one response")
    return c


def log_likelihood(probs, counts) -> float:
    """Multinomial log-likelihood kernel ``sum n_k ln p_k`` (zero counts skipped).

    Returns ``-inf`` when an observed category has zero probability.
    """
    p = np.asarray(probs, dtype=float)
    n = np.asarray(counts, dtype=float)
    with np.errstate(divide="ignore"):
        return float(np.sum(xlogy(n, p)))


def corrected_empirical_pmf(counts) -> np.ndarray:
    """Empirical PMF with half a response added to every category."""
    c = as_counts(counts)
    return (c + 0.5) / (c.sum() + 2.5)


def empirical_pmf(counts) -> np.ndarray:
    c = as_counts(counts)
    return c / c.sum()


def p_max(probs) -> float:
    """Combined probability of the two most probable categories."""
    p = np.sort(np.asarray(probs, dtype=float), axis=-1)
    out = p[..., -1] + p[..., -2]
    return float(out) if np.ndim(out) == 0 else out


def pmax_bound(n) -> float:
    """Upper limit on :func:`p_max` for a sample of size ``n``.

    ``1 - 1/n`` for ``n >= 2``. At ``n = 1`` that limit is 0, which no
    distribution meets, so the ``n = 2`` limit of 1/2 is used instead.
    """
    n = np.asarray(n, dtype=float)
    return np.maximum(1.0 - 1.0 / n, 0.5)


# ---------------------------------------------------------------------- GSD

class GsdGrid:
    """Immutable table of GSD PMFs on the (psi, rho) fitting grid.

    Points whose PMF has a zero entry are dropped: their two largest
    categories always hold the full mass, so no sample size admits them.
    Points are ordered by psi then rho, so ``argmax`` breaks ties toward the
    smaller psi and then the smaller rho.
    """

    def __init__(self, psi_step: float = PSI_STEP, rho_step: float = RHO_STEP):
        n_psi = int(round(4.0 / psi_step)) + 1
        n_rho = int(round(1.0 / rho_step)) + 1
        psi = np.round(np.linspace(1.0, 5.0, n_psi), 10)
        rho = np.round(np.linspace(0.0, 1.0, n_rho), 10)
        gp, gr = np.meshgrid(psi, rho, indexing="ij")
        probs = gsd_pmf(gp.ravel(), gr.ravel())
        keep = np.all(probs > 0, axis=1)
        self.psi = gp.ravel()[keep]
        self.rho = gr.ravel()[keep]
        self.probs = probs[keep]
        self.log_probs = np.log(self.probs)
        self.p_max = p_max(self.probs)
        for a in (self.psi, self.rho, self.probs, self.log_probs, self.p_max):
            a.setflags(write=False)
        self._masks: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.psi)

    def feasible(self, n: int) -> np.ndarray:
        """Indices of grid points allowed for sample size ``n``."""
        idx = self._masks.get(n)
        if idx is None:
            idx = np.flatnonzero(self.p_max <= pmax_bound(n) + 1e-12)
            with self._lock:
                self._masks[n] = idx
        return idx

    def best_index(self, counts) -> np.ndarray:
        """Grid index of the constrained maximum for each row of ``counts``."""
        counts = _as_count_matrix(counts)
        out = np.empty(len(counts), dtype=np.int64)
        totals = counts.sum(axis=1)
        for n in np.unique(totals):
            rows = np.flatnonzero(totals == n)
            idx = self.feasible(int(n))
            logp = self.log_probs[idx]
            logp_t = np.ascontiguousarray(logp.T)
            for start in range(0, len(rows), 256):
                chunk = rows[start:start + 256]
                out[chunk] = idx[_constrained_argmax(counts[chunk].astype(float), logp, logp_t)]
        return out


def _constrained_argmax(counts, logp, logp_t):
    # BLAS screens the grid; candidates within rounding distance of the best
    # are rescored by an elementwise sum in fixed category order, so the
    # winner does not depend on batch shape. Ties go to the lowest index.
    ll = counts @ logp_t
    best = ll.max(axis=1)
    tol = 1e-9 * (1.0 + np.abs(best))
    rows, cand = np.nonzero(ll >= (best - tol)[:, None])
    exact = np.zeros(len(rows))
    for k in range(5):
        exact += counts[rows, k] * logp[cand, k]
    order = np.lexsort((cand, -exact, rows))
    first = np.ones(len(order), dtype=bool)
    first[1:] = rows[order][1:] != rows[order][:-1]
    return cand[order][first]


@lru_cache(maxsize=None)
def default_grid() -> GsdGrid:
    return GsdGrid()


class _FitCache:
    """Thread-safe memo from count vectors to fitted PMFs.

    Fits are pure functions of the counts, so sharing results between threads
    and runs cannot change any output.
    """

    def __init__(self, max_size: int = 2_000_000):
        self._data: dict[bytes, np.ndarray] = {}
        self._lock = threading.Lock()
        self.max_size = max_size

    def lookup(self, counts: np.ndarray, compute) -> np.ndarray:
        keys = [row.tobytes() for row in counts]
        out = np.empty((len(counts), 5))
        missing: dict[bytes, list[int]] = {}
        for i, key in enumerate(keys):
            hit = self._data.get(key)
            if hit is None:
                missing.setdefault(key, []).append(i)
            else:
                out[i] = hit
        if missing:
            firsts = [rows[0] for rows in missing.values()]
            fitted = compute(counts[firsts])
            with self._lock:
                if len(self._data) + len(missing) > self.max_size:
                    self._data.clear()
                for (key, rows), probs in zip(missing.items(), fitted):
                    probs.setflags(write=False)
                    self._data[key] = probs
                    out[rows] = probs
        return out

    def clear(self):
        with self._lock:
            self._data.clear()


_GSD_CACHE = _FitCache()
_PROBIT_CACHE = _FitCache()


def fit_gsd(counts, grid: GsdGrid | None = None) -> FitResult:
    """Constrained grid MLE of (psi, rho)."""
    c = as_counts(counts)
    grid = grid or default_grid()
    i = int(grid.best_index(c[None, :])[0])
    probs = grid.probs[i].copy()
    params = GsdParams(float(grid.psi[i]), float(grid.rho[i]))
    return FitResult("gsd", params, probs, log_likelihood(probs, c))


def fit_gsd_many(counts, grid: GsdGrid | None = None) -> np.ndarray:
    """Fitted GSD PMFs, one row per count vector."""
    counts = _as_count_matrix(counts)
    if grid is not None:
        return grid.probs[grid.best_index(counts)]
    g = default_grid()
    return _GSD_CACHE.lookup(counts, lambda c: [p.copy() for p in g.probs[g.best_index(c)]])


# ----------------------------------------------------------- Ordered Probit

@lru_cache(maxsize=None)
def _probit_grid():
    lo, hi = PROBIT_MU_BOUNDS
    mu = np.round(np.linspace(lo, hi, int(round((hi - lo) / PROBIT_MU_STEP)) + 1), 10)
    slo, shi = np.log(PROBIT_SIGMA_BOUNDS)
    n_sig = int(np.floor((shi - slo) / PROBIT_LOG_SIGMA_STEP + 1e-9)) + 1
    sigma = np.exp(slo + PROBIT_LOG_SIGMA_STEP * np.arange(n_sig))
    sigma = np.append(sigma[sigma < PROBIT_SIGMA_BOUNDS[1]], PROBIT_SIGMA_BOUNDS[1])
    gm, gs = np.meshgrid(mu, sigma, indexing="ij")
    with np.errstate(divide="ignore"):
        logp = np.log(discretized_normal_pmf(gm.ravel(), gs.ravel()))
    return gm.ravel(), gs.ravel(), logp


def _probit_nll(x, counts):
    mu, sigma = x
    if not sigma > 0:
        return np.inf
    return -log_likelihood(discretized_normal_pmf(mu, sigma), counts)


def fit_probit(counts) -> FitResult:
    """MLE of the latent normal (mu, sigma) inside the bounded search box.

    A coarse grid (mu step 0.05, log-sigma step 0.05) seeds a bounded
    Nelder-Mead refinement. The refinement is kept only if it improves the
    likelihood, so boundary solutions stay on the box.

    When several grid points share the maximal likelihood (a sample on one
    score leaves mu free within half a step of it), the seed is the tied point
    with mu closest to the sample mean, then the smallest sigma. The fit is
    thereby equivariant under reversing the scale.
    """
    c = as_counts(counts)
    gm, gs, logp = _probit_grid()
    with np.errstate(invalid="ignore"):
        ll = np.where(c > 0, c * logp, 0.0).sum(axis=1)
    best_ll = ll.max()
    tied = np.flatnonzero(ll >= best_ll - 1e-12 * (1.0 + abs(best_ll)))
    mos = float(c @ SCORES) / c.sum()
    i = int(tied[np.lexsort((gs[tied], np.round(np.abs(gm[tied] - mos), 9)))[0]])
    x0 = np.array([gm[i], gs[i]])
    best = (float(ll[i]), x0)
    res = minimize(
        _probit_nll,
        x0,
        args=(c,),
        method="Nelder-Mead",
        bounds=[PROBIT_MU_BOUNDS, PROBIT_SIGMA_BOUNDS],
        options={"maxiter": PROBIT_MAXITER, "xatol": PROBIT_TOL, "fatol": PROBIT_TOL},
    )
    if np.isfinite(res.fun) and -res.fun > best[0]:
        best = (-float(res.fun), np.asarray(res.x, dtype=float))
    mu, sigma = (float(v) for v in best[1])
    probs = discretized_normal_pmf(mu, sigma)
    return FitResult("probit", ProbitParams(mu, sigma), probs, log_likelihood(probs, c))


def fit_probit_many(counts) -> np.ndarray:
    counts = _as_count_matrix(counts)
    return _PROBIT_CACHE.lookup(counts, lambda c: [fit_probit(row).probs for row in c])


# ---------------------------------------------------------------------- SLI

def sigma_floor(n: int) -> float:
    """Lower limit on the SLI standard deviation for a sample of size ``n``.

    ``1 / (2 Q(1 - 1/(2n)))`` with ``Q`` the standard-normal quantile. With
    that standard deviation a normal centred on a score puts ``1 - 1/n`` of its
    mass on that score. ``n = 1`` would give infinity and is capped at 10.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1:
        return SIGMA_CAP
    return float(1.0 / (2.0 * ndtri(1.0 - 1.0 / (2.0 * n))))


def _edge_sigma(mos, n):
    # smallest sigma keeping the censored end category at or below 1 - 1/n
    q = ndtri(1.0 - 1.0 / n) if n > 2 else 0.0
    dist = np.maximum(1.5 - mos, mos - 4.5)
    if dist <= 0:
        return 0.0
    if q <= 0:
        return SIGMA_CAP
    return min(float(dist / q), SIGMA_CAP)


def _sli_params(counts) -> SliParams:
    n = int(counts.sum())
    mos = float(counts @ SCORES) / n
    if n > 1:
        s2 = float(counts @ (SCORES - mos) ** 2) / (n - 1)
    else:
        s2 = 0.0
    sigma = max(np.sqrt(s2), sigma_floor(n))
    # the floor alone cannot cap an end category when the MOS is within half a
    # point of 1 or 5 (the censored tail adds mass); widen further there
    sigma = max(sigma, _edge_sigma(mos, n))
    return SliParams(mos, s2, float(sigma))


def fit_sli(counts) -> FitResult:
    """Discretised normal with the sample mean and (floored) sample std. dev."""
    c = as_counts(counts)
    params = _sli_params(c)
    probs = discretized_normal_pmf(params.mos, params.sigma_eff)
    return FitResult("sli", params, probs, log_likelihood(probs, c))


def fit_sli_many(counts) -> np.ndarray:
    counts = _as_count_matrix(counts)
    out = np.empty((len(counts), 5))
    for i, row in enumerate(counts):
        p = _sli_params(row)
        out[i] = discretized_normal_pmf(p.mos, p.sigma_eff)
    return out


_FITTERS = {"gsd": fit_gsd, "probit": fit_probit, "sli": fit_sli}
_BATCH_FITTERS = {"gsd": fit_gsd_many, "probit": fit_probit_many, "sli": fit_sli_many}


def fit(counts, model: str) -> FitResult:
    try:
        return _FITTERS[model](counts)
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}") from None


def batch_fitter(model):
    """Batch fitter for a model name; callables are passed through."""
    if callable(model):
        return model
    try:
        return _BATCH_FITTERS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}") from None
