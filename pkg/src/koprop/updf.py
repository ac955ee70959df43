"""Probability densities and their propagation through Koopman flow maps.

Two propagation routes are implemented:

* *observable route*: the density is projected onto the basis once
  (:func:`pdf_observable_row`) and then propagated like any other observable.
  Truncation can make the result locally negative; values are reported raw.
* *inverse-map route* (default): the propagated density at ``x`` is the
  prior evaluated at the backward image of ``x``.  For divergence-free
  dynamics no Jacobian factor is needed, and the result is non-negative by
  construction.

For exponential-family priors the same pull-back can be done on the
log-density ("modulo an additive constant"), represented as a dense
multivariate polynomial (:class:`PolyLogPdf`).  Exponentiation always
happens after subtracting the maximum, which the additive-constant freedom
makes exact rather than approximate.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .basis import BasisSet, BoxDomain, Quadrature
from .errors import GridValueError
from .koopman import FlowMap, KoopmanModel, inverse_flow

__all__ = [
    "GaussianPdf",
    "PolyLogPdf",
    "GridEvaluation",
    "log_gaussian",
    "pdf_observable_row",
    "propagate_pdf_observable",
    "propagate_pdf_inverse",
    "propagate_logpdf_inverse",
    "evaluate_on_grid",
    "trapezoid_nd",
]

# level offset defining the "credible box" attached to Gaussian log-densities;
# exp(-25) is ~1.4e-11 of the peak, a little over seven sigma in 1-d
CREDIBLE_LEVEL_OFFSET = 25.0


def trapezoid_nd(values: np.ndarray, axes) -> float:
    """Trapezoidal integral of a tensor grid over its axes."""
    out = np.asarray(values, dtype=float)
    for axis in range(len(axes) - 1, -1, -1):
        out = np.trapezoid(out, x=axes[axis], axis=axis)
    return float(out)


@dataclass(frozen=True)
class GaussianPdf:
    """Multivariate normal density with full covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape must match the mean dimension")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
            raise ValueError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)
        log_norm = 0.5 * mean.size * np.log(2.0 * np.pi) + np.log(
            np.diag(chol)
        ).sum()
        object.__setattr__(self, "_log_norm", float(log_norm))

    @property
    def dimension(self) -> int:
        return self.mean.size

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        finite = np.isfinite(pts).all(axis=1)
        delta = np.where(finite[:, None], pts - self.mean, 0.0)
        z = solve_triangular(self._chol, delta.T, lower=True)
        out = -0.5 * np.einsum("ij,ij->j", z, z) - self._log_norm
        out[~finite] = -np.inf
        return out[0] if single else out

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def __call__(self, x) -> np.ndarray:
        return self.pdf(x)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        z = rng.standard_normal((count, self.dimension))
        return self.mean + z @ self._chol.T


@dataclass(frozen=True)
class PolyLogPdf:
    """A log-density as a dense multivariate polynomial, modulo a constant.

    ``indices`` are monomial exponents (graded lexicographic) and
    ``coefficients`` their weights in original state units.  ``region`` is
    the box on which the representation was built (its validity/support
    region); evaluation outside it is allowed.  Non-finite inputs map to
    ``-inf`` (zero density), which keeps pulled-back evaluations at wildly
    extrapolated points harmless.
    """

    indices: np.ndarray
    coefficients: np.ndarray
    region: BoxDomain
    constant_mode: bool = True
    diagnostics: dict | None = None

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        coeffs = np.asarray(self.coefficients, dtype=float)
        if indices.ndim != 2 or coeffs.ndim != 1 or indices.shape[0] != coeffs.size:
            raise ValueError("indices must be (k, n) and coefficients (k,)")
        if not np.isfinite(coeffs).all():
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return int(self.indices.sum(axis=1).max())

    @property
    def dimension(self) -> int:
        return self.indices.shape[1]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        with np.errstate(invalid="ignore", over="ignore"):
            design = np.prod(pts[:, None, :] ** self.indices[None, :, :], axis=2)
            out = design @ self.coefficients
        bad = ~np.isfinite(out)
        if bad.any():
            out = np.where(bad, -np.inf, out)
        return out[0] if single else out

    def to_dict(self) -> dict:
        return {
            "terms": [
                {"exponents": idx.tolist(), "coefficient": float(c)}
                for idx, c in zip(self.indices, self.coefficients)
            ],
            "region_lower": self.region.lower.tolist(),
            "region_upper": self.region.upper.tolist(),
            "constant_mode": self.constant_mode,
            "diagnostics": self.diagnostics,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, payload: dict) -> "PolyLogPdf":
        indices = np.array([t["exponents"] for t in payload["terms"]], dtype=np.int64)
        coeffs = np.array([t["coefficient"] for t in payload["terms"]], dtype=float)
        return cls(
            indices=indices,
            coefficients=coeffs,
            region=BoxDomain(payload["region_lower"], payload["region_upper"]),
            constant_mode=bool(payload.get("constant_mode", True)),
            diagnostics=payload.get("diagnostics"),
        )


def log_gaussian(gaussian: GaussianPdf) -> PolyLogPdf:
    """Quadratic log-density of a Gaussian with the value-zero-at-mean
    convention (the normalizing constant is dropped)."""
    cov = gaussian.covariance
    cond = float(np.linalg.cond(cov))
    if not np.isfinite(cond) or cond > 1e12:
        raise ValueError(
            f"covariance condition number {cond:.3e} too large for a stable "
            "log-density representation"
        )
    n = gaussian.dimension
    factor = cho_factor(cov)
    precision = cho_solve(factor, np.eye(n))
    mu = gaussian.mean
    from .basis import enumerate_indices

    indices = enumerate_indices(n, 2)
    coeffs = np.zeros(indices.shape[0])
    pmu = precision @ mu
    for row, idx in enumerate(indices):
        total = int(idx.sum())
        if total == 0:
            coeffs[row] = -0.5 * float(mu @ pmu)
        elif total == 1:
            i = int(np.flatnonzero(idx)[0])
            coeffs[row] = float(pmu[i])
        else:
            nz = np.flatnonzero(idx)
            if nz.size == 1:
                i = int(nz[0])
                coeffs[row] = -0.5 * precision[i, i]
            else:
                i, j = (int(nz[0]), int(nz[1]))
                coeffs[row] = -precision[i, j]
    sigma = np.sqrt(np.diag(cov))
    halfwidth = np.sqrt(2.0 * CREDIBLE_LEVEL_OFFSET) * sigma
    region = BoxDomain(mu - halfwidth, mu + halfwidth)
    return PolyLogPdf(indices=indices, coefficients=coeffs, region=region)


def pdf_observable_row(pdf, basis: BasisSet, quad: Quadrature) -> np.ndarray:
    """Basis coefficients of a density treated as a scalar observable.

    The quadrature must resolve the density: a rule sized for polynomial
    products is far too coarse for a narrow Gaussian, so callers should pass
    a dense rule (say 80+ points per dimension for priors much narrower than
    the box).
    """
    values = np.asarray(pdf(quad.nodes), dtype=float).reshape(-1)
    return basis.evaluate(quad.nodes) @ (quad.weights * values)


def propagate_pdf_observable(
    model: KoopmanModel, row: np.ndarray, duration: float, x
) -> np.ndarray:
    """Density propagated as an observable through the lifted flow.

    A density pushes forward along the *inverted* lifted flow (the value at
    ``x`` now is the value a ``duration`` ago at the backward image of
    ``x``), so the projected row rides ``exp(-duration * diag(lam))``; the
    forward exponent would transport the density backward in time.  The
    result is not guaranteed non-negative; truncation artifacts are reported
    raw (no clamping).
    """
    flow = FlowMap(model, -duration, observable=np.atleast_2d(row))
    out = flow(x)
    return out[..., 0] if out.ndim > 1 else out[0]


def propagate_pdf_inverse(model: KoopmanModel, prior, duration: float, x) -> np.ndarray:
    """Pull-back propagation: prior evaluated at the backward image of x."""
    return np.asarray(prior(inverse_flow(model, x, duration)))


def propagate_logpdf_inverse(model: KoopmanModel, zeta, duration: float, x) -> np.ndarray:
    """Same pull-back on a log-density (modulo an additive constant)."""
    return np.asarray(zeta(inverse_flow(model, x, duration)))


@dataclass(frozen=True)
class GridEvaluation:
    """Density values sampled on a rectangular tensor grid."""

    axes: tuple
    values: np.ndarray
    normalized: bool

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        values = np.asarray(self.values, dtype=float)
        if values.shape != tuple(a.size for a in axes):
            raise ValueError("value grid shape must match the axes")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    def integral(self) -> float:
        return trapezoid_nd(self.values, self.axes)

    def to_csv(self, path, metadata: dict | None = None) -> None:
        """Write ``x1,..,xn,density`` rows (row-major over the tensor grid)
        plus a ``.meta.json`` sidecar holding axes and provenance."""
        path = Path(path)
        n = self.dimension
        header = [f"x{j+1}" for j in range(n)] + ["density"]
        mesh = np.meshgrid(*self.axes, indexing="ij")
        columns = [m.ravel() for m in mesh] + [self.values.ravel()]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in zip(*columns):
                writer.writerow([repr(float(v)) for v in row])
        meta = {
            "axes": [a.tolist() for a in self.axes],
            "normalized": self.normalized,
        }
        if metadata:
            meta.update(metadata)
        path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path) -> "GridEvaluation":
        path = Path(path)
        meta = json.loads(path.with_suffix(".meta.json").read_text())
        axes = tuple(np.asarray(a, dtype=float) for a in meta["axes"])
        shape = tuple(a.size for a in axes)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(axes=axes, values=data[:, -1].reshape(shape), normalized=bool(meta["normalized"]))


def _format_offenders(flat_indices, axes, shape, limit=5):
    parts = []
    for flat in flat_indices[:limit]:
        multi = np.unravel_index(flat, shape)
        point = tuple(float(axes[d][multi[d]]) for d in range(len(axes)))
        parts.append(str(point))
    suffix = "" if len(flat_indices) <= limit else f" (and {len(flat_indices) - limit} more)"
    return ", ".join(parts) + suffix


def evaluate_on_grid(
    f,
    axes,
    *,
    normalize: bool = True,
    log_density: bool = False,
) -> GridEvaluation:
    """Tensor-evaluate a density (or log-density) over per-dimension axes.

    Log-density input is exponentiated after subtracting the grid maximum,
    so any additive constant cancels exactly and overflow cannot occur.
    ``-inf`` log values are legitimate (zero density); any other non-finite
    result raises :class:`GridValueError` listing the offending grid points.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    for a in axes:
        if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
            raise ValueError("each axis must be 1-d, strictly increasing, length >= 2")
    shape = tuple(a.size for a in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    raw = np.asarray(f(points), dtype=float).reshape(shape)
    if log_density:
        finite = raw[np.isfinite(raw)]
        if finite.size == 0:
            raise GridValueError("all log-density values on the grid are non-finite")
        values = np.exp(raw - finite.max())
    else:
        values = raw
    bad = np.flatnonzero(~np.isfinite(values.ravel()))
    if bad.size:
        raise GridValueError(
            "non-finite grid values at "
            + _format_offenders(bad, axes, shape)
        )
    if normalize:
        if (values < 0).any():
            raise GridValueError(
                "cannot normalize a grid with negative values; pass "
                "normalize=False for signed (observable-route) data"
            )
        mass = trapezoid_nd(values, axes)
        if not mass > 0:
            raise GridValueError("grid mass is not positive; cannot normalize")
        values = values / mass
    return GridEvaluation(axes=axes, values=values, normalized=normalize)
