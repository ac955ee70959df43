"""Dynamical-system definitions, reference integration, and snapshot data.

The Duffing oscillator (and its linear limit, the harmonic oscillator) is the
built-in test system; arbitrary right-hand sides can be plugged in through
:class:`SystemModel` as long as they are vectorized over a leading batch axis.

Two integrators are provided: a high-accuracy adaptive Runge-Kutta
(`DOP853`) used as the reference oracle for single states, and a vectorized
fixed-step RK4 for bulk work (snapshot generation, Monte Carlo ensembles)
whose step size keeps it within auditable distance of the reference.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .basis import BasisSet, BoxDomain
from .errors import IntegrationError

__all__ = [
    "SystemModel",
    "DuffingParams",
    "duffing_rhs",
    "duffing_system",
    "harmonic_oscillator",
    "duffing_energy",
    "integrate",
    "trajectory",
    "integrate_batch",
    "SnapshotSet",
    "generate_snapshots",
    "jacobian_trace",
]


@dataclass(frozen=True)
class SystemModel:
    """A first-order ODE system ``d x / d t = rhs(t, x)``.

    ``rhs`` must accept states of shape ``(..., dimension)`` and return the
    derivative with the same shape.  ``hamiltonian`` declares that the
    Jacobian trace of ``rhs`` vanishes everywhere (divergence-free flow), a
    property that :func:`jacobian_trace` can spot-check numerically.
    """

    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    hamiltonian: bool = False
    name: str = "custom"


@dataclass(frozen=True)
class DuffingParams:
    """Parameters of the undamped Duffing oscillator.

    ``mass`` (kg), ``stiffness`` (kappa), ``unit_scale`` (the constant that
    makes the cubic term dimensionally consistent) and the dimensionless
    ``nonlinearity`` strength.
    """

    mass: float = 1.0
    stiffness: float = 1.0
    unit_scale: float = 1.0
    nonlinearity: float = 0.01

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not self.stiffness > 0:
            raise ValueError("stiffness must be positive")
        if self.nonlinearity < 0:
            raise ValueError("nonlinearity must be non-negative")


def duffing_rhs(x, params: DuffingParams = DuffingParams()) -> np.ndarray:
    """Duffing vector field: position/velocity pair with a cubic spring.

    ``d x1 / d t = x2 / m``,
    ``d x2 / d t = -kappa * x1 - kappa * a^2 * eps * x1^3``.
    """
    x = np.asarray(x, dtype=float)
    x1 = x[..., 0]
    x2 = x[..., 1]
    out = np.empty_like(x)
    out[..., 0] = x2 / params.mass
    out[..., 1] = -params.stiffness * x1 * (
        1.0 + params.unit_scale**2 * params.nonlinearity * x1 * x1
    )
    return out


def duffing_energy(x, params: DuffingParams = DuffingParams()) -> np.ndarray:
    """Conserved energy of the Duffing oscillator."""
    x = np.asarray(x, dtype=float)
    x1 = x[..., 0]
    x2 = x[..., 1]
    quartic = params.stiffness * params.unit_scale**2 * params.nonlinearity / 4.0
    return x2 * x2 / (2.0 * params.mass) + params.stiffness * x1 * x1 / 2.0 + quartic * x1**4


def duffing_system(params: DuffingParams = DuffingParams()) -> SystemModel:
    def rhs(t, x):
        return duffing_rhs(x, params)

    return SystemModel(dimension=2, rhs=rhs, hamiltonian=True, name="duffing")


def harmonic_oscillator(mass: float = 1.0, stiffness: float = 1.0) -> SystemModel:
    """Linear limit of the Duffing oscillator (zero nonlinearity)."""
    params = DuffingParams(mass=mass, stiffness=stiffness, nonlinearity=0.0)

    def rhs(t, x):
        return duffing_rhs(x, params)

    return SystemModel(dimension=2, rhs=rhs, hamiltonian=True, name="harmonic")


def integrate(
    system: SystemModel,
    x0,
    t0: float,
    tf: float,
    tol: float = 1e-12,
) -> np.ndarray:
    """High-accuracy adaptive integration of a single state.

    Backward integration (``tf < t0``) is supported.  Raises
    :class:`IntegrationError` if the solver cannot meet the tolerance.
    """
    x0 = np.asarray(x0, dtype=float)
    if tf == t0:
        return x0.copy()
    sol = solve_ivp(
        system.rhs,
        (t0, tf),
        x0,
        method="DOP853",
        rtol=max(tol, 1e-13),
        atol=tol,
    )
    if not sol.success:
        raise IntegrationError(f"integration from t={t0} to t={tf} failed: {sol.message}")
    return sol.y[:, -1]


def trajectory(system: SystemModel, x0, times, tol: float = 1e-12) -> np.ndarray:
    """Reference solution sampled at ``times`` (ascending, x0 at times[0]).

    Returns an array of shape ``(len(times), dimension)``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-d sequence")
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be non-decreasing")
    x0 = np.asarray(x0, dtype=float)
    if times.size == 1:
        return x0[None, :].copy()
    sol = solve_ivp(
        system.rhs,
        (times[0], times[-1]),
        x0,
        method="DOP853",
        rtol=max(tol, 1e-13),
        atol=tol,
        t_eval=times,
    )
    if not sol.success:
        raise IntegrationError(f"trajectory integration failed: {sol.message}")
    return sol.y.T


def integrate_batch(
    system: SystemModel,
    states,
    t0: float,
    tf: float,
    max_step: float = 0.005,
) -> np.ndarray:
    """Fixed-step RK4 over a batch of states, shape ``(m, dimension)``.

    The actual step divides the interval evenly and never exceeds
    ``max_step`` in magnitude.  Deterministic and vectorized; intended for
    snapshot and ensemble bulk work, with accuracy audited against
    :func:`integrate` in the test suite.
    """
    x = np.array(states, dtype=float)
    span = tf - t0
    if span == 0.0:
        return x
    if max_step <= 0:
        raise ValueError("max_step must be positive")
    steps = max(1, math.ceil(abs(span) / max_step))
    h = span / steps
    t = t0
    for _ in range(steps):
        k1 = system.rhs(t, x)
        k2 = system.rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = system.rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = system.rhs(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return x


@dataclass(frozen=True)
class SnapshotSet:
    """Paired state snapshots ``(x_m, y_m)`` with ``y_m`` the ``dt``-flow of
    ``x_m``; the training unit for the data-driven Koopman fit."""

    x: np.ndarray
    y: np.ndarray
    dt: float
    seed: int | None = None
    domain: BoxDomain | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or x.shape != y.shape:
            raise ValueError("x and y must be 2-d arrays of identical shape")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def count(self) -> int:
        return self.x.shape[0]

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    def save_csv(self, path) -> None:
        """Write ``x1..xn,y1..yn`` rows plus a ``.meta.json`` sidecar."""
        path = Path(path)
        n = self.dimension
        header = [f"x{j+1}" for j in range(n)] + [f"y{j+1}" for j in range(n)]
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for xm, ym in zip(self.x, self.y):
                writer.writerow([repr(float(v)) for v in xm] + [repr(float(v)) for v in ym])
        meta = {
            "dt": self.dt,
            "seed": self.seed,
            "count": self.count,
            "box_lower": None if self.domain is None else self.domain.lower.tolist(),
            "box_upper": None if self.domain is None else self.domain.upper.tolist(),
        }
        path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def load_csv(cls, path) -> "SnapshotSet":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = data.shape[1] // 2
        meta = json.loads(path.with_suffix(".meta.json").read_text())
        domain = None
        if meta.get("box_lower") is not None:
            domain = BoxDomain(meta["box_lower"], meta["box_upper"])
        return cls(
            x=data[:, :n],
            y=data[:, n:],
            dt=float(meta["dt"]),
            seed=meta.get("seed"),
            domain=domain,
        )


def generate_snapshots(
    system: SystemModel,
    domain: BoxDomain,
    count: int,
    dt: float,
    seed: int,
    *,
    basis: BasisSet | None = None,
    max_step: float = 0.0025,
) -> SnapshotSet:
    """Draw ``count`` uniform initial states and flow each by ``dt``.

    Reproducible per seed.  When a ``basis`` is supplied the sample count is
    required to cover it (``count >= basis.size``) so the downstream
    least-squares fit is overdetermined.
    """
    if count < 1:
        raise ValueError("snapshot count must be positive")
    if basis is not None and count < basis.size:
        raise ValueError(
            f"snapshot count {count} is below the basis size {basis.size}; "
            "the Koopman least-squares fit would be underdetermined"
        )
    rng = np.random.default_rng(seed)
    x = domain.sample(rng, count)
    y = integrate_batch(system, x, 0.0, dt, max_step=max_step)
    return SnapshotSet(x=x, y=y, dt=dt, seed=seed, domain=domain)


def jacobian_trace(system: SystemModel, points, step: float = 1e-5) -> np.ndarray:
    """Central finite-difference trace of the Jacobian of ``rhs`` at points.

    Vanishes identically for divergence-free (Hamiltonian) vector fields.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    trace = np.zeros(pts.shape[0])
    for j in range(system.dimension):
        offset = np.zeros(system.dimension)
        offset[j] = step
        fp = system.rhs(0.0, pts + offset)
        fm = system.rhs(0.0, pts - offset)
        trace += (fp[:, j] - fm[:, j]) / (2.0 * step)
    return trace
