"""Synthetic studies drawn from the GSD."""

from __future__ import annotations

import numpy as np

from .dataio import Dataset, derive_stream
from .distributions import gsd_pmf
from .estimation import p_max, pmax_bound

SIM_NAMESPACE = "simulate:"


def draw_feasible_params(n: int, stream: np.random.Generator, max_tries: int = 10_000):
    """(psi, rho) uniform on the region where ``p_max <= 1 - 1/n``."""
    bound = float(pmax_bound(n))
    for _ in range(max_tries):
        psi = stream.uniform(1.0, 5.0)
        rho = stream.uniform(0.0, 1.0)
        if p_max(gsd_pmf(psi, rho)) <= bound:
            return float(psi), float(rho)
    raise RuntimeError("no feasible (psi, rho) found")


def simulate_study(n_stimuli: int, n_responses: int, seed: int, prefix: str = "sim",
                   feasible_n: int | None = None):
    """Synthetic dataset of GSD-distributed stimuli.

    Stimulus ``i`` gets id ``f"{prefix}{i:04d}"``. Its parameters and counts
    come from streams keyed ``"simulate:" + id`` (replicates 0 and 1), which
    never coincide with the bootstrap streams of the stimulus itself, so a
    study is reproducible from ``seed`` alone. Parameters are drawn from the
    feasible region for ``feasible_n`` (default ``n_responses``).

    Returns ``(dataset, params)``; ``params`` lists the true ``(psi, rho)``.
    """
    feasible_n = feasible_n or n_responses
    stimuli, params = [], []
    for i in range(n_stimuli):
        sid = f"{prefix}{i:04d}"
        key = SIM_NAMESPACE + sid
        psi, rho = draw_feasible_params(feasible_n, derive_stream(seed, key, 0))
        counts = derive_stream(seed, key, 1).multinomial(n_responses, gsd_pmf(psi, rho))
        stimuli.append((sid, counts.astype(np.int64)))
        params.append((psi, rho))
    return Dataset(stimuli, name=f"simulated-{seed}", source_format="counts"), params
