"""Koopman matrix construction, spectral analysis, and polynomial flow maps.

Two routes produce the operator matrix on a Legendre basis:

* Galerkin projection of the generator: ``K[i, j] = <d L_i / d t, L_j>``
  with the time derivative expanded through the dynamics,
  ``d L_i / d t = sum_l (dL_i/dx_l) f_l``.  ``K`` is continuous-time.
* A least-squares fit to snapshot pairs (extended dynamic mode
  decomposition), which yields the discrete-time matrix for the snapshot
  step and converts to continuous time through the principal matrix
  logarithm.

The left eigendecomposition ``V K = diag(lam) V`` turns propagation into a
diagonal phase rotation: any observable row ``h`` flows as
``h V^-1 exp(dt * diag(lam)) V L(x)``.  :class:`FlowMap` packages that
product as a single real matrix so grids of points can be pushed through
cheaply, forward or backward in time.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .basis import BasisSet, BoxDomain, Quadrature, default_quadrature
from .dynamics import SnapshotSet, SystemModel
from .errors import (
    ConditioningWarning,
    EigendecompositionError,
    ImaginaryPartWarning,
    MatrixLogBranchError,
    NumericsError,
    RankDeficiencyError,
)

__all__ = [
    "galerkin_koopman",
    "edmd_koopman",
    "discrete_to_continuous",
    "eigendecompose",
    "observable_matrix_galerkin",
    "observable_matrix_edmd",
    "identity_observable",
    "KoopmanModel",
    "FlowMap",
    "forward_flow",
    "inverse_flow",
    "write_eigenvalues_csv",
]

PINV_RCOND = 1e-12


def identity_observable(x) -> np.ndarray:
    """The observable that extracts the state itself."""
    return np.asarray(x, dtype=float)


def galerkin_koopman(
    system: SystemModel, basis: BasisSet, quad: Quadrature | None = None
) -> np.ndarray:
    """Continuous-time Koopman matrix by Galerkin projection.

    Row ``i`` holds the basis coefficients of ``d L_i / d t``; the row of the
    constant function is identically zero.  The default quadrature is exact
    for polynomial dynamics up to cubic at the default rule size.
    """
    if system.dimension != basis.dimension:
        raise ValueError("system and basis dimensions differ")
    if quad is None:
        quad = default_quadrature(basis)
    values, gradients = basis.evaluate_with_gradient(quad.nodes)
    f = np.asarray(system.rhs(0.0, quad.nodes), dtype=float)
    ddt = np.einsum("inq,qn->iq", gradients, f)
    return (ddt * quad.weights) @ values.T


def edmd_koopman(snapshots: SnapshotSet, basis: BasisSet, *, rcond: float = PINV_RCOND) -> np.ndarray:
    """Discrete-time Koopman matrix fit to snapshot pairs by least squares.

    Minimizes ``|| L(Y) - K L(X) ||_F`` through the Gram accumulations
    ``G = (1/M) sum L(x) L(x)^T`` and ``A = (1/M) sum L(y) L(x)^T`` with
    ``K = A G^+``.  Rank deficiency of ``G`` beyond the relative singular
    value cutoff is reported with the effective rank.
    """
    m = snapshots.count
    if m < basis.size:
        raise ValueError(
            f"EDMD needs at least as many snapshot pairs as basis functions: "
            f"{m} < {basis.size}"
        )
    lx = basis.evaluate(snapshots.x)
    # y snapshots may drift slightly outside the training box; that is
    # expected for orbits near the boundary, so no extrapolation warning.
    ly = basis.evaluate(snapshots.y, warn_outside=False)
    gram = lx @ lx.T / m
    cross = ly @ lx.T / m
    u, s, vt = np.linalg.svd(gram)
    if s[0] <= 0.0:
        raise RankDeficiencyError("snapshot Gram matrix is identically zero")
    keep = s > rcond * s[0]
    rank = int(keep.sum())
    if rank < basis.size:
        warnings.warn(
            ConditioningWarning(
                f"snapshot Gram matrix is rank deficient: effective rank {rank} "
                f"of {basis.size}; modes below the {rcond:.0e} cutoff were dropped"
            )
        )
    gram_pinv = (vt[keep].T / s[keep]) @ u[:, keep].T
    return cross @ gram_pinv


def discrete_to_continuous(
    discrete: np.ndarray,
    dt: float,
    *,
    branch_tol: float = 1e-10,
    roundtrip_tol: float = 1e-8,
) -> np.ndarray:
    """Continuous-time generator ``log(discrete) / dt`` via eigendecomposition.

    Requires the discrete matrix to keep its spectrum away from the closed
    negative real axis (principal logarithm).  Note the usual sampling
    restriction: eigenvalue phases must satisfy ``|Im log| < pi``, i.e. the
    snapshot step must resolve the fastest captured frequency.  The result is
    verified by exponentiating back to the discrete matrix.
    """
    if dt == 0.0:
        raise ValueError("dt must be nonzero")
    discrete = np.asarray(discrete, dtype=float)
    mu, vecs = np.linalg.eig(discrete)
    near_branch = (np.abs(mu) < 1e-300) | (
        (mu.real <= 0.0) & (np.abs(mu.imag) <= branch_tol * np.abs(mu))
    )
    if near_branch.any():
        offender = mu[near_branch][0]
        raise MatrixLogBranchError(
            f"eigenvalue {offender!r} of the discrete matrix lies on or near "
            "the negative real axis; the principal matrix logarithm is undefined"
        )
    log_mu = np.log(mu)
    log_mat = (vecs * log_mu) @ np.linalg.inv(vecs)
    scale = np.linalg.norm(log_mat, "fro")
    leak = np.linalg.norm(log_mat.imag, "fro") / max(scale, 1e-300)
    if leak > 1e-8:
        warnings.warn(
            ImaginaryPartWarning(
                f"matrix logarithm carried relative imaginary residual {leak:.3e}"
            )
        )
    generator = log_mat.real / dt
    back = expm(generator * dt)
    denom = max(np.linalg.norm(discrete, "fro"), 1e-300)
    residual = np.linalg.norm(back - discrete, "fro") / denom
    if residual > roundtrip_tol:
        raise NumericsError(
            f"matrix-log round trip failed: exp(K dt) differs from the discrete "
            f"matrix by relative Frobenius error {residual:.3e}"
        )
    return generator


def eigendecompose(
    matrix: np.ndarray,
    *,
    cond_limit: float = 1e12,
    residual_tol: float = 1e-8,
):
    """Left eigendecomposition ``V K = diag(lam) V`` with sorted spectrum.

    Rows of ``V`` are unit-norm left eigenvectors; conjugate pairs are
    adjacent (positive imaginary part first).  Returns ``(V, lam, cond)``
    where ``cond`` is the condition number of ``V``.  Raises
    :class:`EigendecompositionError` when the residual exceeds
    ``residual_tol * ||K||_F`` or the eigenbasis is numerically singular.
    """
    matrix = np.asarray(matrix, dtype=float)
    lam, cols = np.linalg.eig(matrix.T)
    vectors = cols.T
    order = np.lexsort((-lam.imag, lam.real, np.abs(lam.imag)))
    lam = lam[order]
    vectors = vectors[order]
    vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    scale = max(np.linalg.norm(matrix, "fro"), 1e-300)
    residual = np.linalg.norm(vectors @ matrix - lam[:, None] * vectors, "fro")
    if residual > residual_tol * scale:
        raise EigendecompositionError(
            f"left-eigenvector residual {residual:.3e} exceeds "
            f"{residual_tol:.1e} * ||K||_F = {residual_tol * scale:.3e}; "
            "the matrix may be defective"
        )
    cond = float(np.linalg.cond(vectors))
    if not np.isfinite(cond) or cond > cond_limit:
        raise EigendecompositionError(
            f"eigenvector matrix condition number {cond:.3e} exceeds the "
            f"usability limit {cond_limit:.1e}"
        )
    return vectors, lam, cond


def observable_matrix_galerkin(
    g, basis: BasisSet, quad: Quadrature | None = None
) -> np.ndarray:
    """Galerkin coefficients of a (vector-valued) observable, shape (gamma, size).

    ``g`` maps a point batch ``(m, n)`` to ``(m,)`` or ``(m, gamma)``.  For
    observables that are polynomials of degree <= order (e.g. the identity),
    the default quadrature reproduces them exactly.
    """
    if quad is None:
        quad = default_quadrature(basis)
    gv = np.asarray(g(quad.nodes), dtype=float)
    if gv.ndim == 1:
        gv = gv[:, None]
    values = basis.evaluate(quad.nodes)
    return (gv.T * quad.weights) @ values.T


def observable_matrix_edmd(
    snapshots: SnapshotSet,
    g_values: np.ndarray,
    basis: BasisSet,
    *,
    rcond: float = PINV_RCOND,
) -> np.ndarray:
    """Least-squares observable coefficients from snapshot data.

    ``g_values`` holds the observable evaluated at the ``x`` snapshots,
    shape ``(gamma, count)`` (a single row may be passed as ``(count,)``).
    Same Gram handling and cutoff as :func:`edmd_koopman`.
    """
    gv = np.asarray(g_values, dtype=float)
    if gv.ndim == 1:
        gv = gv[None, :]
    if gv.shape[1] != snapshots.count:
        raise ValueError("g_values must provide one column per snapshot")
    lx = basis.evaluate(snapshots.x)
    gram = lx @ lx.T / snapshots.count
    cross = gv @ lx.T / snapshots.count
    u, s, vt = np.linalg.svd(gram)
    if s[0] <= 0.0:
        raise RankDeficiencyError("snapshot Gram matrix is identically zero")
    keep = s > rcond * s[0]
    if int(keep.sum()) < basis.size:
        warnings.warn(
            ConditioningWarning(
                f"snapshot Gram matrix is rank deficient: effective rank "
                f"{int(keep.sum())} of {basis.size}"
            )
        )
    gram_pinv = (vt[keep].T / s[keep]) @ u[:, keep].T
    return cross @ gram_pinv


@dataclass(frozen=True)
class KoopmanModel:
    """A spectrally decomposed Koopman approximation of a flow.

    ``generator`` is the continuous-time matrix (data-driven fits are
    converted on construction), ``eigenvectors`` holds left eigenvectors as
    rows, and ``observable`` is the matrix extracting the state (or any other
    observable set) from basis coefficients.  Instances are immutable and
    safe to share across threads.
    """

    basis: BasisSet
    generator: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    observable: np.ndarray
    provenance: dict
    condition: float

    @classmethod
    def from_galerkin(
        cls,
        system: SystemModel,
        basis: BasisSet,
        quad: Quadrature | None = None,
    ) -> "KoopmanModel":
        if quad is None:
            quad = default_quadrature(basis)
        generator = galerkin_koopman(system, basis, quad)
        vectors, lam, cond = eigendecompose(generator)
        observable = observable_matrix_galerkin(identity_observable, basis, quad)
        provenance = {
            "method": "galerkin",
            "system": system.name,
            "quadrature_nodes": int(quad.count),
        }
        return cls(basis, generator, lam, vectors, observable, provenance, cond)

    @classmethod
    def from_snapshots(cls, snapshots: SnapshotSet, basis: BasisSet) -> "KoopmanModel":
        discrete = edmd_koopman(snapshots, basis)
        generator = discrete_to_continuous(discrete, snapshots.dt)
        vectors, lam, cond = eigendecompose(generator)
        observable = observable_matrix_edmd(snapshots, snapshots.x.T, basis)
        provenance = {
            "method": "edmd",
            "sample_count": int(snapshots.count),
            "dt": float(snapshots.dt),
            "seed": snapshots.seed,
        }
        return cls(basis, generator, lam, vectors, observable, provenance, cond)

    @property
    def size(self) -> int:
        return self.basis.size

    def validate(self, residual_tol: float = 1e-8) -> None:
        """Re-check the spectral invariants (used after deserialization)."""
        if not np.isrealobj(self.generator):
            raise EigendecompositionError("generator matrix must be real")
        scale = max(np.linalg.norm(self.generator, "fro"), 1e-300)
        residual = np.linalg.norm(
            self.eigenvectors @ self.generator
            - self.eigenvalues[:, None] * self.eigenvectors,
            "fro",
        )
        if residual > residual_tol * scale:
            raise EigendecompositionError(
                f"stored eigendecomposition residual {residual:.3e} too large"
            )
        paired = np.sort_complex(np.conj(self.eigenvalues))
        if not np.allclose(
            np.sort_complex(self.eigenvalues), paired, atol=residual_tol * scale
        ):
            raise EigendecompositionError("spectrum is not closed under conjugation")

    def to_dict(self) -> dict:
        return {
            "basis": {
                "lower": self.basis.domain.lower.tolist(),
                "upper": self.basis.domain.upper.tolist(),
                "order": int(self.basis.order),
            },
            "generator": self.generator.tolist(),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "eigenvectors_real": self.eigenvectors.real.tolist(),
            "eigenvectors_imag": self.eigenvectors.imag.tolist(),
            "observable": self.observable.tolist(),
            "provenance": self.provenance,
            "condition": self.condition,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, payload: dict) -> "KoopmanModel":
        basis = BasisSet.create(
            BoxDomain(payload["basis"]["lower"], payload["basis"]["upper"]),
            payload["basis"]["order"],
        )
        eig = np.array([complex(re, im) for re, im in payload["eigenvalues"]])
        vectors = np.array(payload["eigenvectors_real"]) + 1j * np.array(
            payload["eigenvectors_imag"]
        )
        model = cls(
            basis=basis,
            generator=np.array(payload["generator"], dtype=float),
            eigenvalues=eig,
            eigenvectors=vectors,
            observable=np.array(payload["observable"], dtype=float),
            provenance=dict(payload["provenance"]),
            condition=float(payload["condition"]),
        )
        model.validate()
        return model

    @classmethod
    def load(cls, path) -> "KoopmanModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


class FlowMap:
    """The polynomial state-transition map over a fixed signed duration.

    Collapses ``H V^-1 exp(duration * diag(lam)) V`` into one real matrix
    applied to basis evaluations.  A negative duration gives the inverted
    map (backward propagation), which is how densities are pulled back.
    The imaginary residual discarded during realification is recorded in
    ``imag_leak`` and warned about above 1e-8.
    """

    def __init__(self, model: KoopmanModel, duration: float, observable=None):
        self.model = model
        self.duration = float(duration)
        rows = model.observable if observable is None else np.atleast_2d(observable)
        phases = np.exp(self.duration * model.eigenvalues)
        lifted = np.linalg.solve(model.eigenvectors, phases[:, None] * model.eigenvectors)
        complex_map = rows @ lifted
        scale = max(np.linalg.norm(complex_map), 1e-300)
        self.imag_leak = float(np.linalg.norm(complex_map.imag) / scale)
        if self.imag_leak > 1e-8:
            warnings.warn(
                ImaginaryPartWarning(
                    f"flow map for duration {duration} discarded relative "
                    f"imaginary residual {self.imag_leak:.3e}"
                )
            )
        self.lifted = lifted
        self.matrix = complex_map.real

    def __call__(self, x, *, warn_outside: bool = True) -> np.ndarray:
        """Apply the map to one point ``(n,)`` or a batch ``(m, n)``."""
        values = self.model.basis.evaluate(x, warn_outside=warn_outside)
        out = self.matrix @ values
        return out if values.ndim == 1 else out.T


def forward_flow(model: KoopmanModel, x0, duration: float) -> np.ndarray:
    """Propagate the model observable forward by ``duration``."""
    return FlowMap(model, duration)(x0)


def inverse_flow(model: KoopmanModel, xf, duration: float) -> np.ndarray:
    """Evaluate the inverted map: where was ``xf`` a ``duration`` ago."""
    return FlowMap(model, -duration)(xf)


def write_eigenvalues_csv(path, eigenvalues, source: str) -> None:
    """Export a spectrum as ``re,im,source`` rows."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "source"])
        for z in np.asarray(eigenvalues):
            writer.writerow([repr(float(z.real)), repr(float(z.imag)), source])
