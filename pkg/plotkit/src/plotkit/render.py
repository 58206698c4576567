"""Figure rendering from simulator CSV files.

Six figure kinds cover the standard views of the simulation output:

==========  ============================================================
kind        inputs
==========  ============================================================
decay       decay.csv [+ decay_analytic.csv overlay]   (semi-log)
saturation  sweep/saturation.csv with a p_in axis      (log-log)
g2          g2.csv                                     (bars vs lag)
blink       blink.csv [+ blink_fit.csv overlay]        (linear)
blink-log   same as blink                              (semi-log)
heatmap     sweep.csv over two swept axes              (log-log map)
==========  ============================================================

Rendering is deterministic: a pinned style sheet, the Agg backend, and
scrubbed output metadata make the same inputs produce the same bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, read_table

__all__ = ["FigureRecipe", "render", "FIGURE_KINDS"]

_STYLE = resources.files("plotkit") / "style" / "paper.mplstyle"

#: axes a heatmap may span, with display labels
_AXIS_LABELS = {
    "gamma_nr": "non-radiative rate (1/ns)",
    "gamma_sf": "spin-flip rate (1/ns)",
    "purcell": "Purcell factor",
    "period_t": "repetition period (ns)",
    "p_in": "mean pairs per pulse",
}


@dataclass(frozen=True)
class FigureRecipe:
    """What to draw: figure kind, input CSV paths, output image path."""

    kind: str
    inputs: tuple[str, ...]
    out: str
    emission_class: str = "X"
    title: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r} "
                f"(expected one of {sorted(FIGURE_KINDS)})"
            )
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _empty_axes(ax, message: str) -> None:
    ax.text(
        0.5, 0.5, f"no data\n({message})",
        ha="center", va="center", transform=ax.transAxes, color="0.4",
    )


def _save(fig, out: str) -> None:
    ext = os.path.splitext(out)[1].lower()
    metadata: dict | None
    if ext == ".png":
        metadata = {"Software": None}
    elif ext == ".pdf":
        metadata = {"CreationDate": None, "Producer": None, "Creator": None}
    elif ext == ".svg":
        metadata = {"Date": None}
    else:
        metadata = None
    fig.savefig(out, metadata=metadata)
    plt.close(fig)


def _draw_decay(ax, recipe: FigureRecipe) -> None:
    _, decay = read_table(recipe.inputs[0], expect="decay")
    t = np.asarray(decay["t_ns"], dtype=float)
    y = np.asarray(decay["normalized"], dtype=float)
    if t.size == 0 or not np.any(y > 0):
        _empty_axes(ax, "empty decay histogram")
    else:
        ax.semilogy(t, np.where(y > 0, y, np.nan), color="C0", label="simulated")
        for path in recipe.inputs[1:]:
            _, overlay = read_table(path, expect="decay_analytic")
            ax.semilogy(
                overlay["t_ns"], overlay["normalized"],
                color="C3", linestyle="--", label="analytic",
            )
        ax.legend()
    ax.set_xlabel("time in period (ns)")
    ax.set_ylabel("normalized counts")


def _sweep_series(path: str, cls: str, x_axis: str):
    _, table = read_table(path, expect="sweep")
    mask = [c == cls for c in table["class"]]
    x = [v for v, m in zip(table[x_axis], mask) if m]
    y = [v for v, m in zip(table["p_out"], mask) if m]
    err = [v for v, m in zip(table["stderr"], mask) if m]
    return np.asarray(x, float), np.asarray(y, float), np.asarray(err, float)


def _draw_saturation(ax, recipe: FigureRecipe) -> None:
    drew = False
    for cls, style in (("X", "-o"), ("XX", "--s")):
        x, y, err = _sweep_series(recipe.inputs[0], cls, "p_in")
        keep = y > 0
        if keep.any():
            ax.errorbar(
                x[keep], y[keep], yerr=err[keep], fmt=style,
                label=cls, capsize=2,
            )
            drew = True
    if drew:
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.legend()
    else:
        _empty_axes(ax, "no emission rows")
    ax.set_xlabel(_AXIS_LABELS["p_in"])
    ax.set_ylabel("photons per cycle")


def _draw_g2(ax, recipe: FigureRecipe) -> None:
    _, table = read_table(recipe.inputs[0], expect="g2")
    tau = np.asarray(table["tau_ns"], dtype=float)
    norm = np.asarray(table["normalized"], dtype=float)
    raw = np.asarray(table["raw"], dtype=float)
    if tau.size == 0 or not np.any(raw > 0):
        _empty_axes(ax, "no coincidences")
        ax.set_ylabel("g2")
    else:
        values, label = (norm, "g2 (plateau-normalized)")
        if not np.any(norm > 0):
            values, label = (raw, "coincidences")
        width = tau[1] - tau[0] if tau.size > 1 else 1.0
        ax.bar(tau, values, width=width, color="C0", linewidth=0)
        ax.set_ylabel(label)
    ax.set_xlabel("delay (ns)")


def _blink_fit_curves(path: str, x: np.ndarray):
    _, fits = read_table(path, expect="blink_fit")
    curves = []
    for i, order in enumerate(fits["order"]):
        model = fits["a_fast"][i] * np.exp(-fits["gamma_fast_per_period"][i] * x)
        if fits["a_slow"][i] is not None:
            model = model + fits["a_slow"][i] * np.exp(
                -fits["gamma_slow_per_period"][i] * x
            )
        curves.append((int(order), model))
    return curves


def _draw_blink(ax, recipe: FigureRecipe, log_scale: bool) -> None:
    _, table = read_table(recipe.inputs[0], expect="blink")
    lengths = np.asarray(table["run_length_periods"], dtype=float)
    counts = np.asarray(table["count"], dtype=float)
    if lengths.size == 0:
        _empty_axes(ax, "no dark runs")
    else:
        ax.bar(lengths, counts, width=0.9, color="C0", linewidth=0)
        if log_scale:
            ax.set_yscale("log")
        for path in recipe.inputs[1:]:
            grid = np.linspace(lengths.min(), lengths.max(), 256)
            for order, model in _blink_fit_curves(path, grid):
                style = "--" if order == 1 else "-"
                ax.plot(grid, model, style, color="C3", label=f"order-{order} fit")
        if len(recipe.inputs) > 1:
            ax.legend()
    ax.set_xlabel("dark-run length (periods)")
    ax.set_ylabel("runs")


def _draw_heatmap(ax, recipe: FigureRecipe) -> None:
    cls = recipe.emission_class
    _, table = read_table(recipe.inputs[0], expect="sweep")
    mask = [c == cls for c in table["class"]]
    if not any(mask):
        _empty_axes(ax, f"no rows for class {cls}")
        return
    candidates = ("gamma_nr", "gamma_sf", "purcell", "period_t", "p_in")
    varying = []
    for name in candidates:
        values = {v for v, m in zip(table[name], mask) if m and v is not None}
        if len(values) > 1:
            varying.append(name)
    if len(varying) != 2:
        raise SchemaError(
            f"heatmap needs exactly two swept axes, found {varying or 'none'}"
        )
    x_name, y_name = varying
    xs = sorted({v for v, m in zip(table[x_name], mask) if m})
    ys = sorted({v for v, m in zip(table[y_name], mask) if m})
    grid = np.full((len(ys), len(xs)), np.nan)
    for x, y, p, m in zip(table[x_name], table[y_name], table["p_out"], mask):
        if m:
            grid[ys.index(y), xs.index(x)] = p
    # cell edges as geometric midpoints (axes are log-spaced)
    def edges(values):
        v = np.asarray(values, dtype=float)
        if v.size == 1:
            return np.array([v[0] * 0.9, v[0] * 1.1])
        inner = np.sqrt(v[:-1] * v[1:])
        return np.concatenate(([v[0] ** 2 / inner[0]], inner, [v[-1] ** 2 / inner[-1]]))

    mesh = ax.pcolormesh(edges(xs), edges(ys), grid, shading="flat")
    ax.set_xscale("log")
    ax.set_yscale("log")
    plt.colorbar(mesh, ax=ax, label=f"photons per cycle ({cls})")
    if {x_name, y_name} == {"gamma_nr", "period_t"}:
        # guide diagonal where the non-radiative rate equals the repetition rate
        span = np.array([min(xs), max(xs)], dtype=float)
        ax.plot(span, 1.0 / span, color="white", linewidth=1.2)
        ax.set_xlim(edges(xs)[0], edges(xs)[-1])
        ax.set_ylim(edges(ys)[0], edges(ys)[-1])
    ax.set_xlabel(_AXIS_LABELS[x_name])
    ax.set_ylabel(_AXIS_LABELS[y_name])


FIGURE_KINDS = {
    "decay": lambda ax, r: _draw_decay(ax, r),
    "saturation": lambda ax, r: _draw_saturation(ax, r),
    "g2": lambda ax, r: _draw_g2(ax, r),
    "blink": lambda ax, r: _draw_blink(ax, r, log_scale=False),
    "blink-log": lambda ax, r: _draw_blink(ax, r, log_scale=True),
    "heatmap": lambda ax, r: _draw_heatmap(ax, r),
}


def render(recipe: FigureRecipe) -> str:
    """Validate inputs, draw the figure, and write it to ``recipe.out``."""
    for path in recipe.inputs:
        if not os.path.exists(path):
            raise FileNotFoundError(path)
    with plt.style.context(str(_STYLE)):
        fig, ax = plt.subplots()
        try:
            FIGURE_KINDS[recipe.kind](ax, recipe)
            if recipe.title:
                ax.set_title(recipe.title)
            _save(fig, recipe.out)
        except Exception:
            plt.close(fig)
            raise
    return recipe.out
