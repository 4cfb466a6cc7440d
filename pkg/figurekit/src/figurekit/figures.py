"""The six figure renderers.

Every renderer reads one or more ``pairtrade`` CSVs from the input
directory, draws a matplotlib figure, writes it to the output path and
returns a :class:`RenderResult`.  Fitted-exponent annotations quote the
exponent strings from the exponents CSVs verbatim (no reformatting), so a
figure's annotations can be checked for exact agreement with the tables it
was rendered from.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
# SVG element ids are salted hashes; pin the salt so output is reproducible
matplotlib.rcParams["svg.hashsalt"] = "figurekit"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .io import FigureInputError, Table, load_table  # noqa: E402

__all__ = ["FIGURE_IDS", "FigureInputError", "RenderResult", "render"]


@dataclass(frozen=True)
class RenderResult:
    figure_id: str
    output_path: str
    annotations: tuple[str, ...]


SUMMARY_COLS = ("sweep_value", "sigma2", "H", "K", "mean_wealth")
EXPONENT_COLS = ("observable", "band_lo", "band_hi", "exponent", "intercept")

_IMPACT_STYLE = {"linear": dict(color="tab:blue"), "sqrt": dict(color="tab:red")}


def _save(fig, output_path: Path) -> None:
    # strip volatile metadata so identical inputs give identical bytes
    metadata = {"Date": None} if output_path.suffix == ".svg" else {}
    fig.savefig(output_path, dpi=150, metadata=metadata)
    plt.close(fig)


def _fit_segments(table: Table, observable: str):
    """Yield (lo, hi, exponent_float, intercept_float, exponent_string)."""
    for row in table.rows():
        if row["observable"] != observable:
            continue
        yield (float(row["band_lo"]), float(row["band_hi"]),
               float(row["exponent"]), float(row["intercept"]),
               row["exponent"])


def _overlay_fits(ax, exponents: Table, observable: str, label: str,
                  x: np.ndarray, annotations: list[str]) -> None:
    for lo, hi, exp, intercept, exp_str in _fit_segments(exponents, observable):
        xs = x[(x >= lo) & (x <= hi)]
        if xs.size < 2:
            continue
        ax.plot(xs, 10.0 ** intercept * xs ** exp, "k--", linewidth=1)
        text = f"{label} ~ N^{exp_str}"
        annotations.append(text)
        ax.annotate(text, (xs[-1], 10.0 ** intercept * xs[-1] ** exp),
                    fontsize=7, ha="left")


def _scaling_figure(input_dir: Path, output_path: Path, figure_id: str,
                    observables: tuple[str, ...], ylabel: str,
                    impacts: tuple[str, ...]) -> RenderResult:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    annotations: list[str] = []
    for impact in impacts:
        summary = load_table(input_dir / f"summary_{impact}.csv",
                             ("sweep_value",) + observables)
        x = np.array(summary.floats("sweep_value"))
        exponents_path = input_dir / f"exponents_{impact}.csv"
        exponents = (load_table(exponents_path, EXPONENT_COLS)
                     if exponents_path.is_file() else None)
        for obs, marker in zip(observables, "os^"):
            y = np.array(summary.floats(obs))
            keep = y > 0  # log axes: nonpositive points cannot be drawn
            ax.plot(x[keep], y[keep], marker=marker, linestyle="-",
                    label=f"{obs} ({impact})", **_IMPACT_STYLE[impact])
            if exponents is not None:
                _overlay_fits(ax, exponents, obs, f"{obs} ({impact})",
                              x[keep], annotations)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, output_path)
    return RenderResult(figure_id, str(output_path), tuple(annotations))


def _render_f1(input_dir: Path, output_path: Path) -> RenderResult:
    series = load_table(input_dir / "series.csv", ("t", "price"))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(series.floats("t"), series.floats("price"), linewidth=0.7)
    ax.set_xlabel("t")
    ax.set_ylabel("mid price")
    fig.tight_layout()
    _save(fig, output_path)
    return RenderResult("f1", str(output_path), ())


def _render_f4(input_dir: Path, output_path: Path) -> RenderResult:
    return _scaling_figure(input_dir, output_path, "f4",
                           ("sigma2", "H"), "sigma2, H",
                           ("linear", "sqrt"))


def _render_f5(input_dir: Path, output_path: Path) -> RenderResult:
    return _scaling_figure(input_dir, output_path, "f5",
                           ("K",), "K", ("linear", "sqrt"))


def _render_f6(input_dir: Path, output_path: Path) -> RenderResult:
    return _scaling_figure(input_dir, output_path, "f6",
                           ("mean_wealth",), "mean wealth", ("sqrt",))


def _render_f9(input_dir: Path, output_path: Path) -> RenderResult:
    table = load_table(input_dir / "puj.csv",
                       ("u", "p_pos", "p_zero", "p_neg"))
    u = np.array(table.floats("u"))
    width = 0.27
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for k, (col, label) in enumerate(
        (("p_pos", "up"), ("p_zero", "flat"), ("p_neg", "down"))
    ):
        ax.bar(u + (k - 1) * width, table.floats(col), width=width, label=label)
    ax.set_xlabel("history state u")
    ax.set_ylabel("sign frequency of the next return")
    ax.set_xticks(u)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, output_path)
    return RenderResult("f9", str(output_path), ())


def _render_f11(input_dir: Path, output_path: Path) -> RenderResult:
    summary = load_table(input_dir / "washout_summary.csv",
                         ("ps", "n_pair", "mean_time"))
    exponents_path = input_dir / "exponents_washout.csv"
    exponents = (load_table(exponents_path, ("ps", "exponent", "intercept"))
                 if exponents_path.is_file() else None)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    annotations: list[str] = []
    ps_values = sorted(set(summary.strings("ps")), key=float)
    for ps in ps_values:
        keep = [i for i, v in enumerate(summary.strings("ps")) if v == ps]
        x = np.array([summary.floats("n_pair")[i] for i in keep])
        y = np.array([summary.floats("mean_time")[i] for i in keep])
        order = np.argsort(x)
        ax.plot(x[order], y[order], marker="o", label=f"washout {ps}%")
        if exponents is None:
            continue
        for row in exponents.rows():
            if row["ps"] != ps:
                continue
            exp, intercept = float(row["exponent"]), float(row["intercept"])
            ax.plot(x[order], 10.0 ** intercept * x[order] ** exp,
                    "k--", linewidth=1)
            text = f"t'({ps}%) ~ N^{row['exponent']}"
            annotations.append(text)
            ax.annotate(text, (x[order][-1], y[order][-1]), fontsize=7)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("mean washout time")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, output_path)
    return RenderResult("f11", str(output_path), tuple(annotations))


_RENDERERS = {
    "f1": _render_f1,
    "f4": _render_f4,
    "f5": _render_f5,
    "f6": _render_f6,
    "f9": _render_f9,
    "f11": _render_f11,
}

FIGURE_IDS = tuple(_RENDERERS)


def render(figure_id: str, input_dir: str | Path,
           output_path: str | Path) -> RenderResult:
    if figure_id not in _RENDERERS:
        raise FigureInputError(
            f"unknown figure id {figure_id!r}; known: {', '.join(FIGURE_IDS)}"
        )
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise FigureInputError(f"input directory not found: {input_dir}")
    return _RENDERERS[figure_id](input_dir, Path(output_path))
