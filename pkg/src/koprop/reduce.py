"""Least-squares polynomial order reduction of propagated log-densities.

Pulling a quadratic log-density back through an order-``p`` polynomial map
yields an order-``2p`` composite; repeating that would blow up the
representation order.  The cure is non-intrusive regression: sample the
composite where the probability mass lives, fit a low-order monomial
polynomial by least squares, and carry the fitted :class:`PolyLogPdf` into
the next propagation leg.

Fitting happens in box-scaled coordinates for conditioning; the returned
coefficients are mapped back to original state units exactly (an affine
substitution preserves total degree).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BoxDomain, enumerate_indices
from .errors import RankDeficiencyError
from .updf import PolyLogPdf

__all__ = [
    "ReductionConfig",
    "build_design_matrix",
    "fit_coefficients",
    "reduce_logpdf",
    "credible_region",
]

RCOND = 1e-12


@dataclass(frozen=True)
class ReductionConfig:
    """Settings for one reduction: target order, sampling, and region.

    ``sample_count`` must cover the monomial count; when the order of the
    map that produced the composite is known, the target order is required
    to stay below twice that (beyond it the "reduction" would not reduce).
    ``level_window``, when set, restricts the fit to samples whose value is
    within that window of the sampled maximum, i.e. to the region where the
    density is non-negligible, instead of the full bounding box.
    """

    order: int
    sample_count: int
    region: BoxDomain
    seed: int
    level_window: float | None = None
    holdout_fraction: float = 0.2
    map_order: int | None = None

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("target order must be at least 1")
        if self.map_order is not None and not self.order < 2 * self.map_order:
            raise ValueError(
                f"target order {self.order} must stay below twice the map "
                f"order ({2 * self.map_order})"
            )
        needed = math.comb(self.region.dimension + self.order, self.region.dimension)
        if self.sample_count < needed:
            raise ValueError(
                f"sample_count {self.sample_count} is below the number of "
                f"monomials {needed}"
            )
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in [0, 1)")
        if self.level_window is not None and not self.level_window > 0:
            raise ValueError("level_window must be positive when given")


def build_design_matrix(samples, order: int) -> np.ndarray:
    """Monomial design matrix: entry (j, k) is monomial_k(sample_j).

    Columns follow the graded lexicographic monomial ordering; column 0 is
    the constant term.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    exponents = enumerate_indices(pts.shape[1], order)
    return np.prod(pts[:, None, :] ** exponents[None, :, :], axis=2)


def fit_coefficients(design: np.ndarray, values, *, rcond: float = RCOND) -> np.ndarray:
    """Least-squares coefficients via orthogonal factorization.

    Raises :class:`RankDeficiencyError` when the design matrix has
    effective rank below its column count at the relative cutoff.
    """
    design = np.asarray(design, dtype=float)
    values = np.asarray(values, dtype=float).reshape(-1)
    if design.shape[0] != values.size:
        raise ValueError("design rows and value count differ")
    coeffs, _, rank, _ = np.linalg.lstsq(design, values, rcond=rcond)
    if rank < design.shape[1]:
        raise RankDeficiencyError(
            f"design matrix rank {rank} < {design.shape[1]} columns; draw more "
            "samples or lower the target order"
        )
    return coeffs


def _affine_transform_1d(max_degree: int, scale: float, shift: float) -> np.ndarray:
    """Matrix T with u^k = sum_m T[m, k] x^m for u = (x - shift) / scale."""
    t = np.zeros((max_degree + 1, max_degree + 1))
    for k in range(max_degree + 1):
        for m in range(k + 1):
            t[m, k] = math.comb(k, m) * (-shift) ** (k - m) / scale**k
    return t


def _coefficients_to_state_units(
    exponents: np.ndarray, coeffs: np.ndarray, region: BoxDomain
) -> np.ndarray:
    """Rewrite a polynomial in box-scaled coordinates as one in state units."""
    n = region.dimension
    order = int(exponents.sum(axis=1).max()) if exponents.size else 0
    dense = np.zeros((order + 1,) * n)
    dense[tuple(exponents.T)] = coeffs
    for axis in range(n):
        t = _affine_transform_1d(order, region.halfwidth[axis], region.center[axis])
        dense = np.moveaxis(np.tensordot(t, dense, axes=([1], [axis])), 0, axis)
    return dense[tuple(exponents.T)]


def reduce_logpdf(f, config: ReductionConfig) -> PolyLogPdf:
    """Fit a low-order polynomial to a log-density over the sampling region.

    Samples are drawn uniformly from ``config.region`` (seeded, hence
    bit-reproducible); with ``level_window`` set, draws whose value falls
    more than the window below the running maximum are rejected so the fit
    concentrates on the credible set.  A held-out fraction of the samples
    yields the reported relative RMS error.
    """
    rng = np.random.default_rng(config.seed)
    region = config.region
    total = config.sample_count

    if config.level_window is None:
        samples = region.sample(rng, total)
        values = np.asarray(f(samples), dtype=float).reshape(-1)
        if not np.isfinite(values).all():
            raise ValueError("log-density returned non-finite values on the region")
    else:
        kept_pts: list[np.ndarray] = []
        kept_vals: list[np.ndarray] = []
        best = -np.inf
        kept = 0
        for attempt in range(64):
            batch = region.sample(rng, max(total, 256))
            vals = np.asarray(f(batch), dtype=float).reshape(-1)
            finite = np.isfinite(vals)
            batch, vals = batch[finite], vals[finite]
            if vals.size:
                best = max(best, float(vals.max()))
            mask = vals >= best - config.level_window
            kept_pts.append(batch[mask])
            kept_vals.append(vals[mask])
            kept += int(mask.sum())
            if kept >= total:
                break
        else:
            raise ValueError(
                "level-window rejection sampling failed to collect enough "
                "samples; the window may be too tight for the region"
            )
        samples = np.concatenate(kept_pts)
        values = np.concatenate(kept_vals)
        # earlier batches may have used a stale maximum; re-filter once
        mask = values >= best - config.level_window
        samples, values = samples[mask][:total], values[mask][:total]
        if samples.shape[0] < total:
            raise ValueError("rejection sampling lost too many samples on re-filter")

    n_hold = int(round(config.holdout_fraction * total))
    n_fit = total - n_hold
    scaled = region.to_unit(samples)
    design = build_design_matrix(scaled[:n_fit], config.order)
    coeffs_scaled = fit_coefficients(design, values[:n_fit])

    fitted_fit = design @ coeffs_scaled
    value_range = float(values.max() - values.min()) or 1.0
    rms_fit = float(np.sqrt(np.mean((fitted_fit - values[:n_fit]) ** 2)))
    diagnostics = {
        "sample_count": int(total),
        "fit_count": int(n_fit),
        "holdout_count": int(n_hold),
        "value_range": value_range,
        "rms_fit": rms_fit,
        "rms_fit_relative": rms_fit / value_range,
        "condition": float(np.linalg.cond(design)),
        "level_window": config.level_window,
    }
    if n_hold:
        held = build_design_matrix(scaled[n_fit:], config.order) @ coeffs_scaled
        rms_hold = float(np.sqrt(np.mean((held - values[n_fit:]) ** 2)))
        diagnostics["rms_holdout"] = rms_hold
        diagnostics["rms_holdout_relative"] = rms_hold / value_range

    exponents = enumerate_indices(region.dimension, config.order)
    coeffs = _coefficients_to_state_units(exponents, coeffs_scaled, region)
    return PolyLogPdf(
        indices=exponents,
        coefficients=coeffs,
        region=region,
        constant_mode=True,
        diagnostics=diagnostics,
    )


def credible_region(
    f,
    search_box: BoxDomain,
    *,
    level_offset: float = 25.0,
    grid_points: int = 101,
    pad_cells: int = 1,
) -> BoxDomain:
    """Bounding box of the superlevel set ``f >= max - level_offset``.

    ``f`` is a log-density; the default offset keeps roughly everything
    above ~1e-11 of the peak.  The scan uses a coarse tensor grid over
    ``search_box`` and pads the detected box by whole cells.
    """
    axes = [
        np.linspace(search_box.lower[j], search_box.upper[j], grid_points)
        for j in range(search_box.dimension)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    values = np.asarray(f(points), dtype=float)
    finite = np.isfinite(values)
    if not finite.any():
        raise ValueError("log-density is non-finite everywhere on the search box")
    mask = values >= values[finite].max() - level_offset
    hits = points[mask]
    lower = np.empty(search_box.dimension)
    upper = np.empty(search_box.dimension)
    for j in range(search_box.dimension):
        cell = axes[j][1] - axes[j][0]
        lower[j] = max(hits[:, j].min() - pad_cells * cell, search_box.lower[j])
        upper[j] = min(hits[:, j].max() + pad_cells * cell, search_box.upper[j])
        if not lower[j] < upper[j]:
            lower[j], upper[j] = search_box.lower[j], search_box.upper[j]
    return BoxDomain(lower, upper)
