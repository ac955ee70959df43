"""Render the standard figure set from a completed run directory.

One image per available dataset; datasets whose command was never run are
skipped with a listed reason.  Styling is fixed so that re-rendering the same
run directory reproduces the images pixel for pixel.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .run_directory import RunDirectory, RunDirectoryError

# fractions of the per-grid maximum used for every contour plot, so overlaid
# densities from different sources are directly comparable
CONTOUR_LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_SOURCE_STYLE = {
    "galerkin": {"color": "tab:red", "marker": "o", "label": "Galerkin"},
    "edmd": {"color": "tab:blue", "marker": "^", "label": "EDMD"},
}


def _save(fig, path: Path) -> None:
    # a null CreationDate keeps PDF output reproducible; PNG carries no date
    fig.savefig(path, metadata={"CreationDate": None} if path.suffix == ".pdf" else None)
    plt.close(fig)


def _contour(ax, grid, color, label=None):
    levels = [f * grid.values.max() for f in CONTOUR_LEVELS]
    mesh = np.meshgrid(*grid.axes, indexing="ij")
    contour_set = ax.contour(mesh[0], mesh[1], grid.values, levels=levels, colors=color, linewidths=1.0)
    if label is not None:
        ax.plot([], [], color=color, label=label)  # legend proxy
    return contour_set


def render_eigenvalues(run: RunDirectory, out: Path, fmt: str) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    for source, spectrum in run.eigenvalues():
        style = _SOURCE_STYLE.get(source, {"color": "k", "marker": "x", "label": source})
        ax.scatter(
            spectrum.real,
            spectrum.imag,
            s=28,
            facecolors="none",
            edgecolors=style["color"],
            marker=style["marker"],
            label=style["label"],
        )
    ax.axvline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.set_title("Operator spectrum")
    ax.legend(loc="upper right")
    path = out / f"fig1_eigenvalues.{fmt}"
    _save(fig, path)
    return path


def render_state_error(run: RunDirectory, out: Path, fmt: str) -> Path:
    times, err_galerkin, err_edmd = run.state_error()
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    floor = 1e-16
    ax.semilogy(times, np.maximum(err_galerkin, floor), color="tab:blue", label="Galerkin")
    ax.semilogy(times, np.maximum(err_edmd, floor), color="tab:red", label="EDMD")
    ax.set_xlabel("propagation time [s]")
    ax.set_ylabel("state error")
    ax.set_title("Flow-map accuracy vs reference integration")
    ax.legend(loc="lower right")
    path = out / f"fig2_state_error.{fmt}"
    _save(fig, path)
    return path


def render_pdf_surface(run: RunDirectory, out: Path, fmt: str) -> Path:
    ko, _ = run.pdf_pair()
    samples = run.mc_samples()
    fig = plt.figure(figsize=(9.0, 4.0))
    left = fig.add_subplot(1, 2, 1)
    left.scatter(samples[:, 0], samples[:, 1], s=1.5, color="tab:blue", alpha=0.35, rasterized=True)
    left.set_xlabel("x1")
    left.set_ylabel("x2")
    left.set_xlim(ko.axes[0][0], ko.axes[0][-1])
    left.set_ylim(ko.axes[1][0], ko.axes[1][-1])
    left.set_title(f"Monte Carlo samples at t = {ko.meta.get('tf', '?')} s")
    right = fig.add_subplot(1, 2, 2, projection="3d")
    mesh = np.meshgrid(*ko.axes, indexing="ij")
    stride = max(1, ko.values.shape[0] // 75)
    right.plot_surface(
        mesh[0][::stride, ::stride],
        mesh[1][::stride, ::stride],
        ko.values[::stride, ::stride],
        cmap="viridis",
        linewidth=0,
        antialiased=False,
    )
    right.set_xlabel("x1")
    right.set_ylabel("x2")
    right.set_title("propagated density")
    path = out / f"fig3_pdf_surface.{fmt}"
    _save(fig, path)
    return path


def render_pdf_contours(run: RunDirectory, out: Path, fmt: str) -> Path:
    ko, mc = run.pdf_pair()
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.6), sharex=True, sharey=True)
    _contour(axes[0], mc, "tab:blue")
    axes[0].set_title("Monte Carlo")
    _contour(axes[1], ko, "tab:red")
    axes[1].set_title("Koopman inverse map")
    _contour(axes[2], mc, "tab:blue", label="MC")
    _contour(axes[2], ko, "tab:red", label="KO")
    axes[2].set_title("overlay")
    axes[2].legend(loc="upper right")
    for ax in axes:
        ax.set_xlabel("x1")
    axes[0].set_ylabel("x2")
    path = out / f"fig4_pdf_contours.{fmt}"
    _save(fig, path)
    return path


def render_recursive(run: RunDirectory, out: Path, fmt: str) -> Path:
    legs = run.recursive_legs()
    fig, axes = plt.subplots(1, len(legs), figsize=(3.4 * len(legs), 3.4), sharex=True, sharey=True)
    axes = np.atleast_1d(axes)
    for ax, (t, grid) in zip(axes, legs):
        _contour(ax, grid, "tab:red")
        ax.set_title(f"t = {t:g} s")
        ax.set_xlabel("x1")
    axes[0].set_ylabel("x2")
    path = out / f"fig5_recursive.{fmt}"
    _save(fig, path)
    return path


_RENDERERS = [
    ("eigen", render_eigenvalues),
    ("propagate-state", render_state_error),
    ("propagate-pdf", render_pdf_surface),
    ("propagate-pdf", render_pdf_contours),
    ("recursive", render_recursive),
]


def render_all(run: RunDirectory, out: Path, image_format: str = "png"):
    """Render every figure whose dataset exists in the run directory.

    Returns ``(written, skipped)``: image paths plus (name, reason) pairs for
    datasets whose command was never run.
    """
    if image_format not in ("png", "pdf"):
        raise ValueError("format must be 'png' or 'pdf'")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    skipped = []
    with plt.rc_context(_STYLE):
        for command, renderer in _RENDERERS:
            if not run.has(command):
                skipped.append(
                    (renderer.__name__, f"run directory has no '{command}' results")
                )
                continue
            written.append(renderer(run, out, image_format))
    return written, skipped


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="koprop-render", description="render figures from a koprop run directory"
    )
    parser.add_argument("run_dir", help="directory written by koprop commands")
    parser.add_argument("--out", default=None, help="image directory (default <run-dir>/figures)")
    parser.add_argument("--format", default="png", choices=("png", "pdf"))
    args = parser.parse_args(argv)
    try:
        run = RunDirectory.discover(args.run_dir)
        out = Path(args.out) if args.out else Path(args.run_dir) / "figures"
        written, skipped = render_all(run, out, args.format)
    except RunDirectoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    for name, reason in skipped:
        print(f"skipped {name}: {reason}")
    if not written:
        print("error: no renderable datasets in the run directory", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
