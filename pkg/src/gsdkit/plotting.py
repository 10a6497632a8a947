"""Matplotlib renderings of p-value histograms, P-P plots and comparison
histograms, written as self-contained, byte-reproducible SVG."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")

import matplotlib as mpl  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

_RC = {
    "svg.hashsalt": "gsdkit",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

MARKER_COLOR = (0.75, 0.0, 0.75)
BAR_COLOR = (0.204, 0.541, 0.741)
INSIG_COLOR = (0.55, 0.7, 0.9)
SIG_COLOR = (0.886, 0.29, 0.2)


def _figure(width=4.5, height=3.0):
    fig = Figure(figsize=(width, height))
    ax = fig.add_subplot(1, 1, 1)
    return fig, ax


def _to_svg(fig) -> str:
    buf = io.StringIO()
    with mpl.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "gsdkit"})
    return buf.getvalue()


def _empty(ax, message="no data"):
    ax.text(0.5, 0.5, message, ha="center", va="center", transform=ax.transAxes, gid="notice")


def _histogram(ax, hist):
    if hist.total == 0:
        _empty(ax)
    ax.bar(hist.bin_start, hist.count, width=hist.bin_width, align="edge",
           color=BAR_COLOR, edgecolor="white", linewidth=0.5, gid="bars")
    ax.axvline(hist.significance, color=MARKER_COLOR, linewidth=2.5, gid="significance-marker")
    if hist.total:
        ax.axhline(hist.reference_count, color="black", linestyle="--", linewidth=0.8,
                   gid="reference-level")
    ax.set_xlim(0, 1)
    ax.set_xlabel("p-value")
    ax.set_ylabel("number of stimuli")


def _ppplot(ax, pp):
    series = pp if isinstance(pp, (list, tuple)) else [pp]
    lo, hi = series[0].inspection_range if series else (0.0, 0.2)
    ax.plot([0, 1], [0, 1], color="black", linewidth=1.0, gid="diagonal")
    if not series or all(s.n_stimuli == 0 for s in series):
        _empty(ax)
    for i, s in enumerate(series):
        if s.n_stimuli == 0:
            continue
        label = getattr(s, "label", None) or f"series {i + 1}"
        ax.step(s.alpha, s.ecdf, where="post", linewidth=1.2, label=label, gid=f"ecdf-{i}")
        ax.plot(s.alpha, s.significance_line, color="grey", linestyle=":", linewidth=1.0,
                gid=f"significance-line-{i}")
    ax.set_xlim(lo, hi)
    ax.set_ylim(0, max(hi * 1.5, 0.05))
    ax.set_xlabel("theoretical uniform CDF")
    ax.set_ylabel("p-value ECDF")
    if len(series) > 1:
        ax.legend(frameon=False)


def _difference(ax, rows):
    if not rows or sum(r["significant"] + r["insignificant"] for r in rows) == 0:
        _empty(ax)
    if rows:
        starts = np.array([r["bin_start"] for r in rows])
        width = rows[0]["bin_end"] - rows[0]["bin_start"]
        sig = np.array([r["significant"] for r in rows])
        insig = np.array([r["insignificant"] for r in rows])
        ax.bar(starts, sig, width=width, align="edge", color=SIG_COLOR, gid="significant")
        ax.bar(starts, insig, width=width, align="edge", bottom=sig, color=INSIG_COLOR,
               gid="insignificant")
    ax.axvline(0.0, color="black", linewidth=1.0, gid="zero-line")
    ax.set_xlim(-1, 1)
    ax.set_xlabel("p_m - p_e")
    ax.set_ylabel("number of stimuli")


def _parammap(ax, rows):
    if not rows:
        _empty(ax)
    psi = np.linspace(1, 5, 401)
    v_min = (np.ceil(psi) - psi) * (psi - np.floor(psi))
    v_max = (psi - 1) * (5 - psi)
    ax.fill_between(psi, v_min, v_max, color=MARKER_COLOR, alpha=0.15, linewidth=0, gid="admissible")
    if rows:
        arr = np.array(rows, dtype=float)
        for key in np.unique(arr[:, 0]):
            sel = arr[:, 0] == key
            ax.plot(arr[sel, 2], arr[sel, 3], linewidth=1.0)
    ax.set_xlim(0.8, 5.2)
    ax.set_xlabel("E(U)")
    ax.set_ylabel("V(U)")


_KINDS = {"histogram": _histogram, "ppplot": _ppplot, "difference": _difference, "parammap": _parammap}


def figure_for(plot_data, kind: str):
    try:
        draw = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {sorted(_KINDS)}") from None
    with mpl.rc_context(_RC):
        fig, ax = _figure()
        draw(ax, plot_data)
        fig.tight_layout()
    return fig


def render_svg(plot_data, kind: str) -> str:
    """SVG document for a histogram, P-P plot, comparison histogram or map.

    ``plot_data`` is a :class:`~gsdkit.gof.Histogram` for ``"histogram"``,
    one or more :class:`~gsdkit.gof.PPPlotData` for ``"ppplot"``, the rows of
    :func:`~gsdkit.bootstrap_eval.difference_histogram` for ``"difference"``
    and :func:`~gsdkit.distributions.parameter_space_map` rows for
    ``"parammap"``. Identical input gives byte-identical output.
    """
    return _to_svg(figure_for(plot_data, kind))


def save_svg(plot_data, kind: str, path) -> None:
    text = render_svg(plot_data, kind)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
