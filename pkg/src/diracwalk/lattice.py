"""Space-time lattice, master-equation stepper and ordinal-time averaging.

Fields are ``float64`` arrays of shape ``(4, nt, nx)``; axis 0 is the state
(state ``i`` is row ``i-1``), axes 1 and 2 are Dirac time and space.  Both
lattice axes are periodic.  Lattice units: ``dt = dx = 1``, ``hbar = c = 1``,
and the particle mass equals ``mu``.

The prior step function is taken as ``Theta(x) = 1 for x >= 0`` so that the
weights cover ``lambda = 0..Lambda`` and sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .transitions import TransitionSet

__all__ = [
    "CapacityError",
    "EigenDiagnostic",
    "HEAVISIDE_CONVENTION",
    "LatticeSpec",
    "OrdinalPrior",
    "OrdinalRun",
    "ProbField",
    "RegionOfInterest",
    "apply_operator",
    "eigen_relation_residual",
    "evolve",
    "evolve_fold",
    "init_delta",
    "init_packet",
    "ordinal_average",
    "random_field",
    "require_wrap_free",
    "step",
    "telescoping_residual",
]

MASS_TOL = 1e-12
HEAVISIDE_CONVENTION = "Theta(x) = 1 for x >= 0 (prior support lambda = 0..Lambda)"
DEFAULT_MAX_HISTORY_BYTES = 512 * 2**20


class CapacityError(MemoryError):
    """Requested storage exceeds the configured budget."""


@dataclass(frozen=True)
class LatticeSpec:
    nt: int
    nx: int
    mu: float
    boundary: str = "periodic"

    def __post_init__(self):
        for name in ("nt", "nx"):
            n = getattr(self, name)
            if n < 4 or n % 2:
                raise ValueError(f"{name} must be even and >= 4, got {n}")
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are supported")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (4, self.nt, self.nx)


def require_wrap_free(spec: LatticeSpec, Lambda: int) -> None:
    """Raise unless a walk of ``Lambda + 1`` hops cannot wrap around the lattice."""
    need = 2 * (Lambda + 1)
    if spec.nt <= need or spec.nx <= need:
        raise ValueError(
            f"wrap-free evolution needs nt, nx > {need} for Lambda={Lambda}; "
            f"got nt={spec.nt}, nx={spec.nx}"
        )


@dataclass(frozen=True)
class ProbField:
    values: np.ndarray
    lam: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[0] != 4:
            raise ValueError(f"field must have shape (4, nt, nx), got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def nt(self) -> int:
        return self.values.shape[1]

    @property
    def nx(self) -> int:
        return self.values.shape[2]

    def mass(self) -> float:
        return math.fsum(self.values.ravel())

    def validate(self, tol: float = MASS_TOL) -> "ProbField":
        if (self.values < 0).any():
            raise ValueError("probability field has negative entries")
        if abs(self.mass() - 1.0) > tol:
            raise ValueError(f"total mass {self.mass()!r} differs from 1 by more than {tol}")
        return self


@dataclass(frozen=True)
class RegionOfInterest:
    """Half-open index windows ``[t_lo, t_hi) x [x_lo, x_hi)``."""

    t_lo: int
    t_hi: int
    x_lo: int
    x_hi: int

    def check(self, nt: int, nx: int) -> None:
        if not (0 <= self.t_lo < self.t_hi <= nt and 0 <= self.x_lo < self.x_hi <= nx):
            raise ValueError(f"region {self} lies outside a {nt}x{nx} lattice")

    def slices(self):
        return slice(self.t_lo, self.t_hi), slice(self.x_lo, self.x_hi)

    @classmethod
    def full(cls, nt: int, nx: int) -> "RegionOfInterest":
        return cls(0, nt, 0, nx)


def init_delta(spec: LatticeSpec, t0: int, x0: int, state: int) -> ProbField:
    if not (0 <= t0 < spec.nt and 0 <= x0 < spec.nx):
        raise ValueError(f"site ({t0}, {x0}) is outside the lattice")
    if state not in (1, 2, 3, 4):
        raise ValueError(f"state must be 1..4, got {state}")
    v = np.zeros(spec.shape)
    v[state - 1, t0, x0] = 1.0
    return ProbField(v, 0)


def init_packet(spec: LatticeSpec, center, width: float, mix=(1, 0, 0, 0)) -> ProbField:
    """Gaussian-weighted mass around ``center = (t, x)`` split over states by ``mix``."""
    if width <= 0:
        raise ValueError("width must be positive")
    mix = np.asarray(mix, dtype=float)
    if mix.shape != (4,) or (mix < 0).any() or abs(mix.sum() - 1) > 1e-12:
        raise ValueError("state mix must be 4 nonnegative weights summing to 1")
    tc, xc = center

    def pdist(n, c):
        d = np.abs(np.arange(n) - c) % n
        return np.minimum(d, n - d)

    dt = pdist(spec.nt, tc)[:, None]
    dx = pdist(spec.nx, xc)[None, :]
    w = np.exp(-(dt**2 + dx**2) / (2 * width**2))
    w /= w.sum()
    return ProbField(mix[:, None, None] * w[None], 0)


def random_field(spec: LatticeSpec, rng: np.random.Generator) -> ProbField:
    v = rng.random(spec.shape)
    return ProbField(v / v.sum(), 0)


def _branches(ts: TransitionSet):
    return [(b.source, b.dest, b.dt, b.dx, float(b.weight)) for b in ts.branches()]


def apply_operator(values: np.ndarray, ts: TransitionSet) -> np.ndarray:
    """Apply the total transition operator to any ``(4, nt, nx)`` array.

    Each branch moves ``weight * values[source]`` by the walker step ``(dt, dx)``
    into ``dest``.  Every destination cell receives exactly its own branch
    contributions, so the result is independent of evaluation order.
    """
    out = np.zeros_like(values)
    for src, dst, dt, dx, w in _branches(ts):
        out[dst] += w * np.roll(values[src], shift=(dt, dx), axis=(0, 1))
    return out


def step(field: ProbField, ts: TransitionSet) -> ProbField:
    return ProbField(apply_operator(field.values, ts), field.lam + 1)


def evolve(field0: ProbField, ts: TransitionSet, Lambda: int, max_bytes: int = DEFAULT_MAX_HISTORY_BYTES):
    """Full history ``[p(0), ..., p(Lambda)]``; raises CapacityError over budget."""
    if Lambda < 0:
        raise ValueError("Lambda must be >= 0")
    need = (Lambda + 1) * field0.values.nbytes
    if need > max_bytes:
        raise CapacityError(
            f"history of {Lambda + 1} fields needs {need} bytes (budget {max_bytes}); "
            "use evolve_fold for constant-memory averaging"
        )
    hist = [field0]
    for _ in range(Lambda):
        hist.append(step(hist[-1], ts))
    return hist


@dataclass(frozen=True)
class OrdinalPrior:
    mu: float
    Lambda: int
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if self.Lambda < 0:
            raise ValueError("Lambda must be >= 0")
        lam = np.arange(self.Lambda + 1)
        w = (1 - self.mu) * self.mu ** (self.Lambda - lam) / (1 - self.mu ** (self.Lambda + 1))
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def norm(self) -> float:
        """``N = (1 - mu) / (1 - mu^(Lambda+1))``, the weight of the last ordinal instant."""
        return (1 - self.mu) / (1 - self.mu ** (self.Lambda + 1))

    def total(self) -> float:
        return math.fsum(self.weights)


def ordinal_average(history, prior: OrdinalPrior) -> ProbField:
    if len(history) != prior.Lambda + 1:
        raise ValueError(
            f"history has {len(history)} fields but the prior spans {prior.Lambda + 1}"
        )
    acc = np.zeros_like(history[0].values)
    for w, f in zip(prior.weights, history):
        acc += w * f.values
    return ProbField(acc, -1)


@dataclass(frozen=True)
class OrdinalRun:
    """Constant-memory summary of an evolution: the average plus both end fields."""

    pbar: ProbField
    p0: ProbField
    p_last: ProbField  # lambda = Lambda
    p_end: ProbField  # lambda = Lambda + 1
    prior: OrdinalPrior


def evolve_fold(field0: ProbField, ts: TransitionSet, prior: OrdinalPrior) -> OrdinalRun:
    """Streaming ordinal average via Horner accumulation ``acc <- mu*acc + p``."""
    acc = field0.values.copy()
    cur = field0
    for _ in range(prior.Lambda):
        cur = step(cur, ts)
        acc *= prior.mu
        acc += cur.values
    pbar = ProbField(acc * prior.norm, -1)
    return OrdinalRun(pbar, field0, cur, step(cur, ts), prior)


def telescoping_residual(pbar: ProbField, p0: ProbField, p_end: ProbField, ts: TransitionSet,
                         prior: OrdinalPrior) -> float:
    """Max-abs of ``T pbar - mu pbar - N (p_end - mu^(Lambda+1) p0)``; exact up to rounding."""
    mu = prior.mu
    lhs = apply_operator(pbar.values, ts) - mu * pbar.values
    rhs = prior.norm * (p_end.values - mu ** (prior.Lambda + 1) * p0.values)
    return float(np.abs(lhs - rhs).max())


@dataclass(frozen=True)
class EigenDiagnostic:
    residual: float
    boundary_bound: float  # N * sup_roi |p_end|
    exact_boundary: float  # N * sup_roi |p_end - mu^(Lambda+1) p0|
    mass_in_roi_end: float


def eigen_relation_residual(pbar: ProbField, p_end: ProbField, ts: TransitionSet, mu: float,
                            roi: RegionOfInterest, p0: ProbField | None = None,
                            Lambda: int | None = None) -> EigenDiagnostic:
    """How well ``(T - mu I) pbar = 0`` holds inside ``roi``.

    The residual is reported next to ``N sup_roi |p_end|``, the part of the
    telescoping boundary term that an escaping walker drives to zero.  When
    ``p0`` and ``Lambda`` are given the exact boundary term is included too.
    """
    roi.check(pbar.nt, pbar.nx)
    ts_, xs_ = roi.slices()
    r = apply_operator(pbar.values, ts) - mu * pbar.values
    resid = float(np.abs(r[:, ts_, xs_]).max())
    end = p_end.values[:, ts_, xs_]
    if Lambda is None:
        Lambda = max(p_end.lam - 1, 0)
    n = (1 - mu) / (1 - mu ** (Lambda + 1))
    exact = n * end
    if p0 is not None:
        exact = exact - n * mu ** (Lambda + 1) * p0.values[:, ts_, xs_]
    return EigenDiagnostic(
        residual=resid,
        boundary_bound=float(n * np.abs(end).max()),
        exact_boundary=float(np.abs(exact).max()),
        mass_in_roi_end=math.fsum(end.ravel()),
    )
