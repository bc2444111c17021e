"""Exact 2x2 / 4x4 matrix algebra for the walk's derivation chain.

Matrices are numpy object arrays holding :class:`fractions.Fraction`
entries, frozen (non-writeable) after construction.  Operations that take a
floating parameter simply propagate floats through the object array; use
:func:`as_float` to get an ordinary ``float64`` array.

Kronecker convention: block ``(i, j)`` of ``kron(a, b)`` is ``a[i, j] * b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

__all__ = [
    "BlockPair",
    "G",
    "G_INV",
    "H",
    "I2",
    "I4",
    "ONES2",
    "SIGMA_T",
    "SIGMA_X",
    "SIGMA_Z",
    "ZERO2",
    "ZERO4",
    "as_float",
    "block_diag",
    "block_similarity",
    "block_similarity_compact",
    "exact",
    "gamma",
    "gamma_inverse",
    "kron",
    "mat",
    "max_abs",
    "similarity_tilde",
]


def _to_entry(v):
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, Rational):
        return Fraction(v)
    return v


def mat(rows) -> np.ndarray:
    """Build a frozen 2x2 or 4x4 matrix from nested rows.

    Integers and rationals are stored as ``Fraction`` (never rounded);
    floats are kept as floats.
    """
    arr = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        if len(row) != arr.shape[1]:
            raise ValueError("ragged matrix rows")
        for j, v in enumerate(row):
            arr[i, j] = _to_entry(v)
    if arr.shape not in ((2, 2), (4, 4)):
        raise ValueError(f"only 2x2 and 4x4 matrices are supported, got {arr.shape}")
    arr.flags.writeable = False
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=object)
    arr.flags.writeable = False
    return arr


def exact(arr) -> bool:
    """True if every entry is a Fraction."""
    return all(isinstance(v, Fraction) for v in np.asarray(arr, dtype=object).flat)


def as_float(arr) -> np.ndarray:
    return np.array(arr, dtype=float)


def max_abs(arr) -> float:
    """Largest absolute entry as a float (0.0 for an exactly-zero matrix)."""
    return float(max(abs(v) for v in np.asarray(arr, dtype=object).flat))


I2 = mat([[1, 0], [0, 1]])
ZERO2 = mat([[0, 0], [0, 0]])
ONES2 = mat([[1, 1], [1, 1]])
SIGMA_X = mat([[0, 1], [1, 0]])
# sigma_t = -i sigma_y, real
SIGMA_T = mat([[0, -1], [1, 0]])
SIGMA_Z = mat([[1, 0], [0, -1]])
G = mat([[1, -1], [1, 1]])
G_INV = mat([[Fraction(1, 2), Fraction(1, 2)], [Fraction(-1, 2), Fraction(1, 2)]])
H = mat([[1, -1], [-1, 1]])


def kron(a, b) -> np.ndarray:
    """Kronecker product of two 2x2 matrices (row-major block layout)."""
    a = np.asarray(a, dtype=object)
    b = np.asarray(b, dtype=object)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise ValueError("kron is defined here for 2x2 factors only")
    return _freeze(np.kron(a, b))


def block_diag(s, r) -> np.ndarray:
    z = np.asarray(ZERO2)
    return _freeze(np.block([[np.asarray(s, dtype=object), z], [z, np.asarray(r, dtype=object)]]))


I4 = block_diag(I2, I2)
ZERO4 = block_diag(ZERO2, ZERO2)

_GAMMA = _freeze(np.block([[np.asarray(I2), -np.asarray(I2)], [np.asarray(G), np.asarray(G)]]))
_GAMMA_INV = _freeze(
    np.block([[np.asarray(I2), np.asarray(G_INV)], [-np.asarray(I2), np.asarray(G_INV)]])
    * Fraction(1, 2)
)


def gamma() -> np.ndarray:
    """The probability-to-wavefunction map: psi = gamma() @ p."""
    return _GAMMA


def gamma_inverse() -> np.ndarray:
    return _GAMMA_INV


def similarity_tilde(r) -> np.ndarray:
    """``G^-1 R G``."""
    return _freeze(np.asarray(G_INV) @ np.asarray(r, dtype=object) @ np.asarray(G))


@dataclass(frozen=True)
class BlockPair:
    """Diagonal blocks ``S`` (upper-left) and ``R`` (lower-right) of a 4x4 matrix."""

    S: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("S", "R"):
            if np.asarray(getattr(self, name)).shape != (2, 2):
                raise ValueError(f"{name} must be 2x2")


def block_similarity(bp: BlockPair) -> np.ndarray:
    """``Gamma^-1 blockdiag(S, R) Gamma`` evaluated directly."""
    return _freeze(np.asarray(_GAMMA_INV) @ np.asarray(block_diag(bp.S, bp.R)) @ np.asarray(_GAMMA))


def block_similarity_compact(bp: BlockPair) -> np.ndarray:
    """Closed form ``1/2 H (x) S + 1/2 ONES (x) (G^-1 R G)``.

    The second factor is the all-ones 2x2 matrix: every block of the
    transformed lower-right part carries the same ``G^-1 R G``.
    """
    half = Fraction(1, 2)
    return _freeze(
        np.asarray(kron(H, bp.S)) * half + np.asarray(kron(ONES2, similarity_tilde(bp.R))) * half
    )
