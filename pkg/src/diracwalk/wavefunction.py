"""Wavefunction view of an ordinal-averaged probability field.

``psi = Gamma @ pbar`` site by site: ``psi1 = p1 - p3``, ``psi2 = p2 - p4``,
``psi3 = p1 - p2 + p3 - p4``, ``psi4 = p1 + p2 + p3 + p4``.  Fields are left
unnormalized.

Residual functions evaluate either periodically (``periodic=True``) or on
the interior only, dropping a one-site margin on every edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matrixkit as mk
from .lattice import ProbField

__all__ = [
    "ContinuityResult",
    "CurrentField",
    "PolarizationView",
    "WaveField",
    "auxiliary_residual",
    "auxiliary_rows",
    "continuity_residual",
    "continuum_dirac_residual",
    "continuum_dirac_rows",
    "continuum_plane_wave",
    "currents",
    "exact_dirac_residual",
    "exact_dirac_rows",
    "extract",
    "reconstruct",
    "shift",
]

GAMMA = mk.as_float(mk.gamma())
GAMMA_INV = mk.as_float(mk.gamma_inverse())


@dataclass(frozen=True)
class WaveField:
    psi: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.psi, dtype=float)
        if v.ndim != 3 or v.shape[0] != 4:
            raise ValueError(f"wave field must have shape (4, nt, nx), got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "psi", v)

    def scale(self) -> float:
        """Largest |psi_1|, |psi_2|; residuals are meaningful relative to this."""
        return float(np.abs(self.psi[:2]).max())


def extract(pbar: ProbField, **provenance) -> WaveField:
    psi = np.einsum("ij,jtx->itx", GAMMA, pbar.values)
    return WaveField(psi, dict(provenance, lam=pbar.lam))


def reconstruct(w: WaveField) -> np.ndarray:
    """Inverse map back to the 4 occupation probabilities."""
    return np.einsum("ij,jtx->itx", GAMMA_INV, w.psi)


class PolarizationView:
    """States relabelled by two binary numbers: ``p = {pi_1(+1), pi_2(+1), pi_1(-1), pi_2(-1)}``."""

    _INDEX = {(1, 1): 0, (2, 1): 1, (1, -1): 2, (2, -1): 3}

    def __init__(self, pbar: ProbField):
        self._values = pbar.values

    def pi(self, j: int, s: int) -> np.ndarray:
        return self._values[self._INDEX[(j, s)]]

    def expected_s(self, j: int) -> np.ndarray:
        """``<s_j> = sum_s s * pi_j(s)``; equals ``psi_j``."""
        return self.pi(j, 1) - self.pi(j, -1)


def shift(f: np.ndarray, a: int, b: int) -> np.ndarray:
    """``E_{a,b} f (t, x) = f(t + a, x + b)`` with periodic wrap."""
    return np.roll(f, shift=(-a, -b), axis=(0, 1))


def _crop(g: np.ndarray, periodic: bool) -> np.ndarray:
    return g if periodic else g[..., 1:-1, 1:-1]


def _maxabs(*grids) -> float:
    return float(max(np.abs(g).max() if g.size else 0.0 for g in grids))


def exact_dirac_rows(w: WaveField, mu: float):
    p1, p2 = w.psi[0], w.psi[1]
    r1 = p1 + (shift(p2, -1, 1) - shift(p2, 1, -1)) / (2 * mu)
    r2 = p2 + (shift(p1, 1, 1) - shift(p1, -1, -1)) / (2 * mu)
    return r1, r2


def exact_dirac_residual(w: WaveField, mu: float, periodic: bool = False) -> float:
    """Max-abs of the lattice (shift-operator) Dirac equation."""
    return _maxabs(*(_crop(r, periodic) for r in exact_dirac_rows(w, mu)))


def _d(f, axis):
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / 2


def continuum_dirac_rows(w: WaveField, mu: float):
    p1, p2 = w.psi[0], w.psi[1]
    r1 = p1 + (_d(p2, 1) - _d(p2, 0)) / mu
    r2 = p2 + (_d(p1, 1) + _d(p1, 0)) / mu
    return r1, r2


def continuum_dirac_residual(w: WaveField, mu: float, periodic: bool = False) -> float:
    """Max-abs of the differential Dirac equation with centred differences.

    Only small where both ``k +- omega`` are small in lattice units.
    """
    return _maxabs(*(_crop(r, periodic) for r in continuum_dirac_rows(w, mu)))


def continuum_plane_wave(k: float, mu: float, t, x) -> WaveField:
    """Real plane-wave solution of the differential Dirac pair, sampled at ``(t, x)``.

    ``psi2 = cos(theta)``, ``psi1 = (k - omega)/mu sin(theta)`` with
    ``theta = omega t + k x`` and ``omega = sqrt(k^2 + mu^2)``; ``psi3 = psi4 = 0``.
    """
    omega = math.sqrt(k * k + mu * mu)
    tt, xx = np.meshgrid(np.asarray(t, dtype=float), np.asarray(x, dtype=float), indexing="ij")
    theta = omega * tt + k * xx
    psi = np.zeros((4,) + theta.shape)
    psi[0] = (k - omega) / mu * np.sin(theta)
    psi[1] = np.cos(theta)
    return WaveField(psi, {"k": k, "omega": omega, "mu": mu})


def auxiliary_rows(w: WaveField, mu: float):
    p3, p4 = w.psi[2], w.psi[3]
    a3 = (shift(p3, 1, 1) + shift(p3, -1, -1)) / 2
    b3 = (shift(p3, 1, -1) + shift(p3, -1, 1)) / 2
    a4 = (shift(p4, 1, 1) + shift(p4, -1, -1)) / 2
    b4 = (shift(p4, 1, -1) + shift(p4, -1, 1)) / 2
    r3 = mu * p3 - ((b4 - a4) - (a3 + b3)) / 2
    r4 = mu * p4 - ((a3 - b3) + (a4 + b4)) / 2
    return r3, r4


def auxiliary_residual(w: WaveField, mu: float, periodic: bool = False) -> float:
    """Max-abs deviation of the (psi3, psi4) pair from its exact lattice equation."""
    return _maxabs(*(_crop(r, periodic) for r in auxiliary_rows(w, mu)))


@dataclass(frozen=True)
class CurrentField:
    rho: np.ndarray
    j: np.ndarray


def currents(w: WaveField) -> CurrentField:
    """Charge ``rho = psi1^2 + psi2^2`` and current ``j = psi1^2 - psi2^2``.

    With the real Dirac operator used here psi1 travels toward +x and psi2
    toward -x, which fixes the sign of ``j`` for ``d_t rho + d_x j = 0``.
    """
    s1 = w.psi[0] ** 2
    s2 = w.psi[1] ** 2
    return CurrentField(s1 + s2, s1 - s2)


@dataclass(frozen=True)
class ContinuityResult:
    grid: np.ndarray
    max_abs: float
    slice_sums: np.ndarray  # sum_x rho(t, x) dx per time slice


def continuity_residual(c: CurrentField, dt: float = 1.0, dx: float = 1.0,
                        periodic: bool = False) -> ContinuityResult:
    """Centred-difference ``d_t rho + d_x j`` and the per-slice charge."""
    div = _d(c.rho, 0) / dt + _d(c.j, 1) / dx
    g = _crop(div, periodic)
    sums = np.array([math.fsum(row) * dx for row in c.rho])
    return ContinuityResult(g, _maxabs(g), sums)
