"""Fourier analysis of the walk operator.

Transform kernel ``exp(-i(omega t + k x))``; under it the shift ``E_{j,k}``
becomes ``exp(+i(j omega + k_j k))`` (lattice units, ``dt = dx = 1``).  Note
the ``+kx`` in the kernel, which differs from the usual ``omega t - k x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants, optimize

from . import matrixkit as mk
from .transitions import HOP_LABELS, TransitionSet, canonical_transitions

__all__ = [
    "DispersionPoint",
    "Eigenmode",
    "NoRealRoot",
    "PhysicalUnits",
    "auxiliary_second_order_fit",
    "block_check",
    "conjugated_symbol",
    "dirac_block",
    "dirac_determinant",
    "dispersion_error_map",
    "eigenmode",
    "einstein_dispersion",
    "lattice_dispersion",
    "lattice_dispersion_closed_form",
    "physical_units",
    "symbol",
]

GAMMA = mk.as_float(mk.gamma())
GAMMA_INV = mk.as_float(mk.gamma_inverse())


def symbol(ts: TransitionSet, omega: float, k: float) -> np.ndarray:
    """4x4 complex matrix replacing every shift in the total operator by its phase."""
    out = mk.as_float(ts.t00).astype(complex)
    for lab in HOP_LABELS:
        out = out + mk.as_float(ts.hops[lab]) * np.exp(1j * (lab.a * omega + lab.b * k))
    return out


def conjugated_symbol(omega: float, k: float, mu: float, ts: TransitionSet | None = None) -> np.ndarray:
    """``Gamma (T(omega, k) - mu I) Gamma^-1``."""
    ts = canonical_transitions() if ts is None else ts
    return GAMMA @ (symbol(ts, omega, k) - mu * np.eye(4)) @ GAMMA_INV


def block_check(omega: float, k: float, mu: float) -> float:
    """Largest modulus in the off-diagonal 2x2 blocks of the conjugated symbol."""
    m = conjugated_symbol(omega, k, mu)
    return float(max(np.abs(m[:2, 2:]).max(), np.abs(m[2:, :2]).max()))


def dirac_block(omega: float, k: float, mu: float) -> np.ndarray:
    """The 2x2 Fourier-domain lattice Dirac matrix."""
    return np.array(
        [[1.0, 1j / mu * math.sin(k - omega)], [1j / mu * math.sin(k + omega), 1.0]]
    )


def dirac_determinant(omega: float, k: float, mu: float) -> float:
    """Closed form ``1 + sin(k - omega) sin(k + omega) / mu^2``."""
    return 1.0 + math.sin(k - omega) * math.sin(k + omega) / mu**2


class NoRealRoot(float):
    """Marker for ``sin^2 k + mu^2 > 1``: no real principal frequency.

    Behaves as NaN in arithmetic so tables stay numeric.
    """

    def __new__(cls):
        return super().__new__(cls, math.nan)

    def __repr__(self):
        return "NoRealRoot()"

    def __bool__(self):
        return False


def _check_mu(mu):
    if not 0 < mu < 1:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")


def lattice_dispersion_closed_form(k: float, mu: float) -> float:
    s2 = math.sin(k) ** 2 + mu**2
    if s2 > 1:
        return NoRealRoot()
    return math.asin(math.sqrt(s2))


def lattice_dispersion(k: float, mu: float, xtol: float = 1e-15) -> float:
    """Principal ``omega in [0, pi/2]`` zeroing the lattice Dirac determinant.

    Root-finds on the product-of-sines determinant; the arcsin closed form is
    only used as a cross-check by callers.
    """
    _check_mu(mu)
    if math.sin(k) ** 2 + mu**2 > 1:
        return NoRealRoot()
    f = lambda w: mu**2 + math.sin(k - w) * math.sin(k + w)  # noqa: E731
    hi = math.pi / 2
    if f(hi) == 0:
        return hi
    return optimize.brentq(f, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


def einstein_dispersion(k: float, mu: float) -> float:
    return math.sqrt(k * k + mu * mu)


@dataclass(frozen=True)
class DispersionPoint:
    k: float
    omega_lattice: float
    omega_einstein: float
    rel_error: float
    in_regime: bool

    def row(self):
        return (self.k, self.omega_lattice, self.omega_einstein, self.rel_error, self.in_regime)


def dispersion_error_map(mu: float, ks, threshold: float = 0.3) -> list[DispersionPoint]:
    """Lattice vs Einstein dispersion over ``ks``.

    A point is in the validity regime when both trig arguments
    ``|k -+ omega|`` are below ``threshold``.
    """
    out = []
    for k in ks:
        k = float(k)
        wl = lattice_dispersion(k, mu)
        we = einstein_dispersion(k, mu)
        if isinstance(wl, NoRealRoot):
            out.append(DispersionPoint(k, math.nan, we, math.nan, False))
            continue
        rel = abs(wl / we - 1)
        ok = max(abs(k - wl), abs(k + wl)) < threshold
        out.append(DispersionPoint(k, wl, we, rel, ok))
    return out


@dataclass(frozen=True)
class Eigenmode:
    k: float
    omega: float
    mu: float
    amplitude: np.ndarray  # occupation-space null vector, unit norm

    @property
    def psi_amplitude(self) -> np.ndarray:
        return GAMMA @ self.amplitude

    def residual(self) -> float:
        m = symbol(canonical_transitions(), self.omega, self.k) - self.mu * np.eye(4)
        return float(np.linalg.norm(m @ self.amplitude))

    def determinant(self) -> float:
        return abs(np.linalg.det(dirac_block(self.omega, self.k, self.mu)))

    def sample(self, nt: int, nx: int, t0: int = 0, x0: int = 0) -> np.ndarray:
        """Complex wavefunction ``psi_amp * exp(i(omega t + k x))`` on a grid."""
        t = np.arange(t0, t0 + nt)[:, None]
        x = np.arange(x0, x0 + nx)[None, :]
        phase = np.exp(1j * (self.omega * t + self.k * x))
        return self.psi_amplitude[:, None, None] * phase[None]


def eigenmode(k: float, mu: float) -> Eigenmode:
    """Plane-wave solution of ``(T - mu I) p = 0`` on the principal branch."""
    w = lattice_dispersion(k, mu)
    if isinstance(w, NoRealRoot):
        raise ValueError(f"no real frequency for k={k}, mu={mu}")
    # first row of the 2x2 Dirac block fixes psi1 / psi2
    psi = np.array([-1j / mu * math.sin(k - w), 1.0, 0.0, 0.0])
    v = GAMMA_INV @ psi
    v = v / np.linalg.norm(v)
    return Eigenmode(k, w, mu, v)


def auxiliary_second_order_fit(mu: float, h: float = 2e-3, n: int = 9) -> dict:
    """Quadratic fit of the lower-right (psi3, psi4) block near omega = k = 0.

    The block is matched to ``-mu R_m + (1/mu) R_tt (omega^2 + k^2) + X omega k``,
    the lattice-unit Fourier form of the auxiliary pair's second-order
    equation.  Returns the fitted ``R_m``, ``R_tt`` and the cross-term
    matrix ``X`` (absent from the truncated continuum expansion).
    """
    grid = np.linspace(-h, h, n)
    rows, targets = [], []
    for om in grid:
        for k in grid:
            rows.append([1.0, om * om, k * k, om * k, om, k])
            targets.append(conjugated_symbol(om, k, mu)[2:, 2:].real.ravel())
    A = np.array(rows)
    coef, *_ = np.linalg.lstsq(A, np.array(targets), rcond=None)
    const, c_ww, c_kk, c_wk = (coef[i].reshape(2, 2) for i in range(4))
    return {
        "r_m": -const / mu,
        "r_tt": mu * c_ww,
        "r_tt_from_k": mu * c_kk,
        "cross": c_wk,
        "first_order": np.abs(coef[4:]).max(),
    }


@dataclass(frozen=True)
class PhysicalUnits:
    dx_m: float
    dt_s: float
    compton_fraction: float
    reduced_compton_m: float


def physical_units(mass_eV: float, mu: float) -> PhysicalUnits:
    """Lattice spacing for a particle of rest energy ``mass_eV``."""
    if mass_eV <= 0:
        raise ValueError("mass must be positive")
    if not 0 < mu <= 1:
        raise ValueError(f"mu must lie in (0, 1], got {mu}")
    energy_j = mass_eV * constants.e
    lam = constants.hbar * constants.c / energy_j
    return PhysicalUnits(
        dx_m=mu * lam,
        dt_s=mu * constants.hbar / energy_j,
        compton_fraction=mu / (2 * math.pi),
        reduced_compton_m=lam,
    )
