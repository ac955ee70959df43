"""Command-line front end wiring the modules into reproducible experiments.

One command per process; everything is computed first and written at the
end of the run, so a failed run leaves no partial outputs.  Each command
echoes its fully resolved configuration to ``resolved_config_<cmd>.json``
and merges its artifact list into ``manifest.json``, which is the contract
the figure-rendering package consumes.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 input/output error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .basis import Quadrature, default_quadrature
from .config import ExperimentConfig, load_config, resolve_config
from .dynamics import generate_snapshots
from .errors import ConfigError, KopropError, NumericsError
from .koopman import KoopmanModel, write_eigenvalues_csv
from .reduce import ReductionConfig, credible_region, reduce_logpdf
from .updf import (
    GridEvaluation,
    evaluate_on_grid,
    log_gaussian,
    propagate_logpdf_inverse,
    propagate_pdf_inverse,
)
from .validate import (
    density_estimate,
    eigenvalue_report,
    grid_l2,
    max_pointwise,
    mc_propagate,
    state_error_series,
)

__all__ = ["main"]


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _update_manifest(outdir: Path, command: str, resolved: dict, artifacts: dict) -> None:
    manifest_path = outdir / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    manifest[command] = {"config": resolved, "artifacts": artifacts}
    _write_json(manifest_path, manifest)
    _write_json(outdir / f"resolved_config_{command}.json", resolved)


def _build_models(config: ExperimentConfig, which: str = "both"):
    """Construct the requested Koopman models ('galerkin', 'edmd', 'both')."""
    system = config.build_system()
    basis = config.build_basis()
    quad = default_quadrature(basis, config.basis.quadrature_points)
    models = {}
    if which in ("galerkin", "both"):
        models["galerkin"] = KoopmanModel.from_galerkin(system, basis, quad)
    if which in ("edmd", "both"):
        e = config.koopman.edmd
        snapshots = generate_snapshots(
            system, basis.domain, e.samples, e.dt, e.seed, basis=basis
        )
        models["edmd"] = KoopmanModel.from_snapshots(snapshots, basis)
    return system, basis, models


def cmd_eigen(config: ExperimentConfig, outdir: Path) -> None:
    """Spectra of both constructions plus an assignment-distance report."""
    _, _, models = _build_models(config, "both")
    report = eigenvalue_report(
        models["galerkin"].eigenvalues,
        models["edmd"].eigenvalues,
        metadata={
            "order": config.basis.order,
            "edmd_samples": config.koopman.edmd.samples,
            "edmd_dt": config.koopman.edmd.dt,
            "edmd_seed": config.koopman.edmd.seed,
        },
    )
    outdir.mkdir(parents=True, exist_ok=True)
    write_eigenvalues_csv(outdir / "eigenvalues_galerkin.csv", models["galerkin"].eigenvalues, "galerkin")
    write_eigenvalues_csv(outdir / "eigenvalues_edmd.csv", models["edmd"].eigenvalues, "edmd")
    report.save(outdir / "eigen_report.json")
    _update_manifest(
        outdir,
        "eigen",
        resolve_config(config),
        {
            "eigenvalues": ["eigenvalues_galerkin.csv", "eigenvalues_edmd.csv"],
            "report": "eigen_report.json",
        },
    )


def cmd_propagate_state(config: ExperimentConfig, outdir: Path) -> None:
    """State-propagation error of both constructions vs the reference."""
    system, _, models = _build_models(config, "both")
    t = config.times
    times = np.linspace(t.start, t.stop, t.count)
    x0 = np.asarray(config.prior.mean, dtype=float)
    err_galerkin = state_error_series(models["galerkin"], system, x0, times)
    err_edmd = state_error_series(models["edmd"], system, x0, times)
    outdir.mkdir(parents=True, exist_ok=True)
    with (outdir / "state_error.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "err_galerkin", "err_edmd"])
        for row in zip(times, err_galerkin, err_edmd):
            writer.writerow([repr(float(v)) for v in row])
    _update_manifest(
        outdir,
        "propagate-state",
        resolve_config(config),
        {"state_error": "state_error.csv"},
    )


def cmd_propagate_pdf(config: ExperimentConfig, outdir: Path) -> None:
    """Single-leg density propagation with the Monte Carlo oracle."""
    if len(config.schedule.legs) != 1:
        raise ConfigError("propagate-pdf expects exactly one schedule leg")
    tf = float(config.schedule.legs[0])
    system, _, models = _build_models(config, config.koopman.source)
    model = models[config.koopman.source]
    prior = config.build_prior()
    axes = config.grid_axes()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ko_raw = evaluate_on_grid(
            lambda pts: propagate_pdf_inverse(model, prior, tf, pts),
            axes,
            normalize=False,
        )
    mass = ko_raw.integral()
    if not mass > 0:
        raise NumericsError("propagated density has non-positive mass on the grid")
    ko = GridEvaluation(axes=ko_raw.axes, values=ko_raw.values / mass, normalized=True)

    ensemble = mc_propagate(
        prior, system, tf, config.mc.samples, config.mc.seed, max_step=config.mc.max_step
    )
    mc = density_estimate(ensemble, axes, bandwidth=config.mc.bandwidth)

    comparison = {
        "relative_l2": grid_l2(ko, mc),
        "max_pointwise": max_pointwise(ko, mc),
        "ko_raw_mass": ko_raw.integral(),
        "tf": tf,
        "koopman_source": config.koopman.source,
        "mc_samples": config.mc.samples,
        "mc_seed": config.mc.seed,
    }
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {"tf": tf, "source": config.koopman.source}
    ko.to_csv(outdir / "pdf_ko.csv", metadata={**meta, "route": "inverse-map"})
    mc.to_csv(outdir / "pdf_mc.csv", metadata={**meta, "route": "monte-carlo-kde"})
    ensemble.save_csv(outdir / "mc_samples.csv", limit=config.mc.sample_export)
    _write_json(outdir / "comparison.json", comparison)
    _update_manifest(
        outdir,
        "propagate-pdf",
        resolve_config(config),
        {
            "pdf_grids": [
                {"file": "pdf_ko.csv", "role": "ko", "tf": tf},
                {"file": "pdf_mc.csv", "role": "mc", "tf": tf},
            ],
            "mc_samples": "mc_samples.csv",
            "comparison": "comparison.json",
        },
    )


def cmd_recursive(config: ExperimentConfig, outdir: Path) -> None:
    """Multi-leg propagation with a polynomial reduction between legs."""
    legs = [float(v) for v in config.schedule.legs]
    if len(legs) < 2:
        raise ConfigError("recursive expects a schedule with at least two legs")
    system, basis, models = _build_models(config, config.koopman.source)
    model = models[config.koopman.source]
    prior = config.build_prior()
    axes = config.grid_axes()

    current = log_gaussian(prior)
    grids = []
    diagnostics = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grids.append(evaluate_on_grid(current, axes, log_density=True))
        for index, leg in enumerate(legs):
            frozen = current

            def composite(pts, _frozen=frozen, _leg=leg):
                return propagate_logpdf_inverse(model, _frozen, _leg, pts)

            grids.append(evaluate_on_grid(composite, axes, log_density=True))
            if index < len(legs) - 1:
                region = credible_region(composite, basis.domain)
                settings = ReductionConfig(
                    order=config.reduction.order,
                    sample_count=config.reduction.samples,
                    region=region,
                    seed=config.reduction.seed + index,
                    level_window=config.reduction.level_window,
                    map_order=basis.order,
                )
                current = reduce_logpdf(composite, settings)
                diagnostics.append(
                    {
                        "leg": index + 1,
                        "region_lower": region.lower.tolist(),
                        "region_upper": region.upper.tolist(),
                        **current.diagnostics,
                    }
                )

    outdir.mkdir(parents=True, exist_ok=True)
    boundary_times = np.concatenate(([0.0], np.cumsum(legs)))
    grid_entries = []
    for k, grid in enumerate(grids):
        name = f"pdf_leg_{k:03d}.csv"
        grid.to_csv(outdir / name, metadata={"t": float(boundary_times[k]), "leg": k})
        grid_entries.append({"file": name, "t": float(boundary_times[k]), "leg": k})
    for diag in diagnostics:
        _write_json(outdir / f"reduction_leg_{diag['leg']:03d}.json", diag)
    _update_manifest(
        outdir,
        "recursive",
        resolve_config(config),
        {
            "pdf_legs": grid_entries,
            "reductions": [f"reduction_leg_{d['leg']:03d}.json" for d in diagnostics],
        },
    )


def cmd_snapshots(config: ExperimentConfig, outdir: Path) -> None:
    """Generate and persist a snapshot training set."""
    system = config.build_system()
    basis = config.build_basis()
    e = config.koopman.edmd
    snapshots = generate_snapshots(system, basis.domain, e.samples, e.dt, e.seed, basis=basis)
    outdir.mkdir(parents=True, exist_ok=True)
    snapshots.save_csv(outdir / "snapshots.csv")
    _update_manifest(
        outdir,
        "snapshots",
        resolve_config(config),
        {"snapshots": "snapshots.csv", "metadata": "snapshots.meta.json"},
    )


_COMMANDS = {
    "eigen": cmd_eigen,
    "propagate-state": cmd_propagate_state,
    "propagate-pdf": cmd_propagate_pdf,
    "recursive": cmd_recursive,
    "snapshots": cmd_snapshots,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koprop",
        description="Koopman flow approximation and density propagation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="YAML config file")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override every stochastic seed")
        p.add_argument("--mc-samples", type=int, default=None, help="Monte Carlo sample count")
        p.add_argument("--order", type=int, default=None, help="basis truncation order")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        overrides = {
            "basis.order": args.order,
            "mc.samples": args.mc_samples,
            "output.directory": args.out,
        }
        if args.seed is not None:
            overrides["mc.seed"] = args.seed
            overrides["reduction.seed"] = args.seed
            overrides["koopman.edmd.seed"] = args.seed
        config = load_config(args.config, overrides={k: v for k, v in overrides.items() if v is not None})
        if config.output.directory is None:
            raise ConfigError("an output directory is required (--out or output.directory)")
        outdir = Path(config.output.directory)
        _COMMANDS[args.command](config, outdir)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except (KopropError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
