"""
SVG figures and the markdown summary of a run.

Figures are written with the Agg backend, svg.hashsalt set to the config hash
and no Date metadata, so identical runs give identical bytes.
"""

from pathlib import Path
from typing import Dict, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from domain.effective import EffectiveHamiltonian
from hj.experiment import ExperimentTable
from minmax.invariants import SpectralSequence
from shared.constants import TOOL_VERSION


def _save_svg(fig, path: Path, config_hash: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": config_hash, "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_curves(curves: Dict[str, EffectiveHamiltonian], path: Path, config_hash: str,
                title: str = "") -> Path:
    """h-bar(p) of every backend on one axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in sorted(curves):
        curve = curves[name]
        ax.plot(curve.nodes(), curve.values, label=f"{name} (err {curve.error_estimate:.1e})")
        if curve.c_minus is not None and curve.c_plus is not None:
            ax.fill_between(curve.nodes(), curve.c_minus, curve.c_plus, alpha=0.2)
    ax.set_xlabel("p")
    ax.set_ylabel("H-bar(p)")
    ax.set_title(title or "Effective Hamiltonian")
    ax.legend(loc="best", fontsize="small")
    return _save_svg(fig, path, config_hash)


def plot_experiment(table: ExperimentTable, path: Path, config_hash: str) -> Path:
    """e_k(t) against t for every k, with the fitted lines eps_k t."""
    fig, ax = plt.subplots(figsize=(6, 4))
    t = np.concatenate([[0.0], table.times])
    for i, k in enumerate(table.ks):
        line, = ax.plot(table.times, table.errors[i], "o", label=f"k={k}, eps={table.rates[i]:.3g}")
        ax.plot(t, table.rates[i] * t, "--", color=line.get_color())
    ax.set_xlabel("t")
    ax.set_ylabel("sup |u_k - u-bar|")
    ax.set_title(f"Homogenization error, {table.metadata.get('field', '')}")
    ax.legend(loc="best", fontsize="small")
    return _save_svg(fig, path, config_hash)


def plot_c_pm(sequence: SpectralSequence, path: Path, config_hash: str,
              reference: Optional[EffectiveHamiltonian] = None) -> Path:
    """(1/k) c-(phi^k) and (1/k) c+(phi^k), with max and min of a reference curve."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sequence.ks, sequence.c_plus, "o-", label="c+/k")
    ax.plot(sequence.ks, sequence.c_minus, "s-", label="c-/k")
    if reference is not None:
        ax.axhline(float(np.max(reference.values)), linestyle=":", color="k", label=f"max {reference.backend}")
        ax.axhline(float(np.min(reference.values)), linestyle="-.", color="k", label=f"min {reference.backend}")
    ax.set_xlabel("k")
    ax.set_xticks(sequence.ks)
    ax.set_title(f"Spectral invariants of iterates, {sequence.metadata.get('field', '')}")
    ax.legend(loc="best", fontsize="small")
    return _save_svg(fig, path, config_hash)


def _markdown_table(frame) -> str:
    columns = list(frame.columns)
    lines = ["| " + " | ".join(columns) + " |", "|" + "---|" * len(columns)]
    for row in frame.itertuples(index=False):
        cells = [f"{v:.4g}" if isinstance(v, float) else str(v) for v in row]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)


def render_summary(output_dir: Path, name: str, config_hash: str, sections: Dict[str, object]) -> Path:
    """
    summary.md with one section per operation.

    sections maps a heading to a DataFrame (rendered as a table) or a string.
    """
    output_dir.mkdir(parents=True, exist_ok=True)
    md_path = output_dir / "summary.md"
    with open(md_path, "w", encoding="utf-8") as f:
        f.write(f"# effham run: {name}\n")
        f.write(f"config hash `{config_hash}`, effham {TOOL_VERSION}\n\n")
        for heading, body in sections.items():
            f.write(f"## {heading}\n")
            if hasattr(body, "itertuples"):
                f.write(_markdown_table(body) if len(body) else "_empty_")
            else:
                f.write(str(body))
            f.write("\n\n")
    return md_path
