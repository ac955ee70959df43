"""Multivariate normalized Legendre bases on box domains.

Basis functions are tensor products of univariate Legendre polynomials,
affinely rescaled to an axis-aligned box and normalized so that they are
orthonormal under the *uniform probability weight* on that box (the weight
integrates to one, so the constant basis function is identically 1).

Truncation is by total degree: the basis of order ``p`` in ``n`` dimensions
has C(n+p, n) members, enumerated in graded lexicographic order with the
constant function first.

Everything here is immutable after construction and evaluation is pure, so
instances can be shared freely across threads.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ExtrapolationWarning

__all__ = [
    "BoxDomain",
    "BasisSet",
    "Quadrature",
    "enumerate_indices",
    "default_quadrature",
    "inner_product",
    "gram_matrix",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``[lower_i, upper_i]`` carrying the uniform weight.

    The affine map to the reference cube [-1, 1]^n is exposed through
    :meth:`to_unit` / :meth:`from_unit` and is bijective by construction.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper bounds must be 1-d and of equal length")
        if not (np.isfinite(lower).all() and np.isfinite(upper).all()):
            raise ValueError("box bounds must be finite")
        if not (lower < upper).all():
            raise ValueError("each lower bound must lie strictly below its upper bound")
        object.__setattr__(self, "lower", _frozen_array(lower))
        object.__setattr__(self, "upper", _frozen_array(upper))

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def halfwidth(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def to_unit(self, x) -> np.ndarray:
        """Map points (shape ``(..., n)``) onto the reference cube."""
        return (np.asarray(x, dtype=float) - self.center) / self.halfwidth

    def from_unit(self, u) -> np.ndarray:
        """Inverse of :meth:`to_unit`."""
        return self.center + self.halfwidth * np.asarray(u, dtype=float)

    def contains(self, x, tol: float = 1e-12):
        """Boolean mask over the leading axes of ``x``."""
        u = self.to_unit(x)
        return (np.abs(u) <= 1.0 + tol).all(axis=-1)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw ``count`` i.i.d. uniform points, shape ``(count, n)``."""
        return rng.uniform(self.lower, self.upper, size=(count, self.dimension))

    def intersect(self, other: "BoxDomain") -> "BoxDomain":
        lower = np.maximum(self.lower, other.lower)
        upper = np.minimum(self.upper, other.upper)
        if not (lower < upper).all():
            raise ValueError("boxes do not overlap")
        return BoxDomain(lower, upper)


def enumerate_indices(dimension: int, order: int) -> np.ndarray:
    """All exponent multi-indices with total degree <= ``order``.

    Returned as an int array of shape ``(C(dimension+order, dimension),
    dimension)`` in graded lexicographic order; row 0 is the zero index.
    """
    if dimension < 1:
        raise ValueError(f"dimension must be at least 1, got {dimension}")
    if order < 0:
        raise ValueError(f"order must be non-negative, got {order}")

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total, -1, -1):
            for tail in compositions(total - head, parts - 1):
                yield (head,) + tail

    rows = []
    for total in range(order + 1):
        rows.extend(compositions(total, dimension))
    out = np.array(rows, dtype=np.int64).reshape(len(rows), dimension)
    assert out.shape[0] == math.comb(dimension + order, dimension)
    return out


def _legendre_table(max_degree: int, u: np.ndarray):
    """Values and derivatives of normalized Legendre polynomials on [-1, 1].

    Normalization is with respect to the uniform probability weight 1/2, so
    row ``k`` equals ``sqrt(2k+1) * P_k`` and the rows are orthonormal.
    Returns two arrays of shape ``(max_degree + 1,) + u.shape``.
    """
    u = np.asarray(u, dtype=float)
    values = np.empty((max_degree + 1,) + u.shape)
    derivs = np.empty_like(values)
    values[0] = 1.0
    derivs[0] = 0.0
    if max_degree >= 1:
        values[1] = u
        derivs[1] = 1.0
    for k in range(1, max_degree):
        values[k + 1] = ((2 * k + 1) * u * values[k] - k * values[k - 1]) / (k + 1)
        derivs[k + 1] = derivs[k - 1] + (2 * k + 1) * values[k]
    scale = np.sqrt(2.0 * np.arange(max_degree + 1) + 1.0)
    scale = scale.reshape((-1,) + (1,) * u.ndim)
    return values * scale, derivs * scale


@dataclass(frozen=True)
class BasisSet:
    """Orthonormal multivariate Legendre basis on a box.

    Use :meth:`create`; the raw constructor does not validate the index set.
    """

    domain: BoxDomain
    order: int
    indices: np.ndarray

    @classmethod
    def create(cls, domain: BoxDomain, order: int) -> "BasisSet":
        indices = enumerate_indices(domain.dimension, order)
        indices.setflags(write=False)
        return cls(domain=domain, order=order, indices=indices)

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def _as_points(self, x):
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise ValueError(
                f"expected points of dimension {self.dimension}, got shape {pts.shape}"
            )
        return pts, single

    def _warn_if_outside(self, u):
        excess = np.abs(u) - 1.0
        worst = float(excess.max()) if excess.size else -1.0
        if worst > 1e-12:
            count = int((excess > 1e-12).any(axis=-1).sum())
            warnings.warn(
                ExtrapolationWarning(
                    f"{count} of {u.shape[0]} evaluation points lie outside the "
                    f"basis box (max unit-coordinate excess {worst:.3e}); "
                    "polynomial extrapolation is unreliable far from the box"
                ),
                stacklevel=3,
            )

    def evaluate(self, x, *, warn_outside: bool = True) -> np.ndarray:
        """Evaluate all basis functions.

        ``x`` may be a single point ``(n,)`` or a batch ``(m, n)``; the result
        has shape ``(size,)`` or ``(size, m)`` respectively.  Points outside
        the box are evaluated anyway (polynomial extrapolation) but flagged
        with :class:`ExtrapolationWarning` unless ``warn_outside=False``.
        """
        pts, single = self._as_points(x)
        u = self.domain.to_unit(pts)
        if warn_outside:
            self._warn_if_outside(u)
        table, _ = _legendre_table(self.order, u.T)
        values = np.ones((self.size, pts.shape[0]))
        for j in range(self.dimension):
            values *= table[self.indices[:, j], j, :]
        return values[:, 0] if single else values

    def evaluate_with_gradient(self, x, *, warn_outside: bool = True):
        """Basis values plus partial derivatives in original coordinates.

        Returns ``(values, gradients)`` with shapes ``(size, m)`` and
        ``(size, n, m)`` (the batch axis is dropped for a single point).  The
        gradients include the chain-rule factor of the box-to-cube affine map.
        """
        pts, single = self._as_points(x)
        u = self.domain.to_unit(pts)
        if warn_outside:
            self._warn_if_outside(u)
        table, dtable = _legendre_table(self.order, u.T)
        m = pts.shape[0]
        values = np.ones((self.size, m))
        for j in range(self.dimension):
            values *= table[self.indices[:, j], j, :]
        gradients = np.empty((self.size, self.dimension, m))
        inv_half = 1.0 / self.domain.halfwidth
        for axis in range(self.dimension):
            g = dtable[self.indices[:, axis], axis, :] * inv_half[axis]
            for j in range(self.dimension):
                if j != axis:
                    g = g * table[self.indices[:, j], j, :]
            gradients[:, axis, :] = g
        if single:
            return values[:, 0], gradients[:, :, 0]
        return values, gradients


@dataclass(frozen=True)
class Quadrature:
    """Tensor-product quadrature nodes and weights on a box.

    Weights sum to one (they integrate against the uniform probability
    weight), and a Gauss-Legendre rule with ``q`` points per dimension is
    exact for integrands of per-dimension degree up to ``2q - 1``.
    """

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss_legendre(cls, domain: BoxDomain, points_per_dim: int) -> "Quadrature":
        if points_per_dim < 1:
            raise ValueError("points_per_dim must be at least 1")
        ref_nodes, ref_weights = np.polynomial.legendre.leggauss(points_per_dim)
        axes = [
            domain.center[j] + domain.halfwidth[j] * ref_nodes
            for j in range(domain.dimension)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        weights = functools.reduce(
            np.multiply.outer, [0.5 * ref_weights] * domain.dimension
        ).ravel()
        return cls(nodes=_frozen_array(nodes), weights=_frozen_array(weights))

    @property
    def count(self) -> int:
        return self.weights.size


def default_quadrature(basis: BasisSet, points_per_dim: int | None = None) -> Quadrature:
    """Rule sized for products of basis derivatives with cubic dynamics."""
    if points_per_dim is None:
        points_per_dim = 2 * basis.order + 2
    return Quadrature.gauss_legendre(basis.domain, points_per_dim)


def inner_product(f, g, quad: Quadrature) -> float:
    """Weighted inner product <f, g> approximated on the quadrature rule.

    Exact whenever ``f * g`` is polynomial within the rule's degree bound.
    Both callables must accept a ``(m, n)`` batch of points.
    """
    fv = np.asarray(f(quad.nodes), dtype=float).reshape(-1)
    gv = np.asarray(g(quad.nodes), dtype=float).reshape(-1)
    return float(np.dot(quad.weights, fv * gv))


def gram_matrix(basis: BasisSet, quad: Quadrature) -> np.ndarray:
    """Matrix of pairwise basis inner products (identity when orthonormal)."""
    values = basis.evaluate(quad.nodes)
    return (values * quad.weights) @ values.T
