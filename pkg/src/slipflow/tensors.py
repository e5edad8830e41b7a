"""Symmetric-tensor algebra on the space of symmetric n x n matrices (n = 2 or 3).

Only the upper triangle is stored, so symmetry holds by construction.  The
scalar product is the full double contraction a:b = sum_ij a_ij b_ij, which
counts every off-diagonal pair twice; all magnitudes in the constitutive laws
use the norm induced by it.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SymTensor",
    "inner",
    "norm",
    "symmetrize",
    "packed_indices",
    "packed_weights",
    "random_sym_tensor",
]


def packed_indices(dim: int) -> list[tuple[int, int]]:
    """Upper-triangle (i, j) pairs in row-major order for dimension ``dim``."""
    return [(i, j) for i in range(dim) for j in range(i, dim)]


def packed_weights(dim: int) -> np.ndarray:
    """Contraction multiplicity per packed entry: 1 on the diagonal, 2 off it."""
    return np.array([1.0 if i == j else 2.0 for i, j in packed_indices(dim)])


class SymTensor:
    """A symmetric n x n matrix stored as its packed upper triangle."""

    __slots__ = ("dim", "packed")

    def __init__(self, dim: int, packed):
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        packed = np.asarray(packed, dtype=float)
        k = dim * (dim + 1) // 2
        if packed.shape != (k,):
            raise ValueError(f"expected {k} packed entries for dim {dim}, got shape {packed.shape}")
        self.dim = dim
        self.packed = packed

    @classmethod
    def zero(cls, dim: int) -> "SymTensor":
        return cls(dim, np.zeros(dim * (dim + 1) // 2))

    @classmethod
    def identity(cls, dim: int) -> "SymTensor":
        t = cls.zero(dim)
        for k, (i, j) in enumerate(packed_indices(dim)):
            if i == j:
                t.packed[k] = 1.0
        return t

    @classmethod
    def from_matrix(cls, m) -> "SymTensor":
        """Pack an already-symmetric matrix.  Use :func:`symmetrize` for general input."""
        m = np.asarray(m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if not np.allclose(m, m.T, rtol=1e-12, atol=1e-14):
            raise ValueError("matrix is not symmetric; use symmetrize() for general input")
        dim = m.shape[0]
        return cls(dim, np.array([m[i, j] for i, j in packed_indices(dim)]))

    def to_matrix(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim))
        for k, (i, j) in enumerate(packed_indices(self.dim)):
            m[i, j] = self.packed[k]
            m[j, i] = self.packed[k]
        return m

    def __getitem__(self, ij):
        i, j = ij
        if i > j:
            i, j = j, i
        return self.to_matrix()[i, j]

    def __add__(self, other: "SymTensor") -> "SymTensor":
        _check_dims(self, other)
        return SymTensor(self.dim, self.packed + other.packed)

    def __sub__(self, other: "SymTensor") -> "SymTensor":
        _check_dims(self, other)
        return SymTensor(self.dim, self.packed - other.packed)

    def __mul__(self, s: float) -> "SymTensor":
        return SymTensor(self.dim, self.packed * float(s))

    __rmul__ = __mul__

    def __neg__(self) -> "SymTensor":
        return SymTensor(self.dim, -self.packed)

    def __repr__(self) -> str:
        return f"SymTensor(dim={self.dim}, packed={self.packed!r})"


def _check_dims(a: SymTensor, b: SymTensor) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def inner(a: SymTensor, b: SymTensor) -> float:
    """Double contraction a:b, off-diagonal pairs counted twice."""
    _check_dims(a, b)
    return float(np.dot(packed_weights(a.dim) * a.packed, b.packed))


def norm(a: SymTensor) -> float:
    """Frobenius norm |a| = sqrt(a:a)."""
    return float(np.sqrt(inner(a, a)))


def symmetrize(j) -> SymTensor:
    """Symmetric part (J + J^T) / 2 of a square matrix; idempotent on symmetric input."""
    j = np.asarray(j, dtype=float)
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {j.shape}")
    if j.shape[0] not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {j.shape[0]}")
    s = 0.5 * (j + j.T)
    dim = j.shape[0]
    return SymTensor(dim, np.array([s[i, j_] for i, j_ in packed_indices(dim)]))


def random_sym_tensor(rng: np.random.Generator, dim: int, magnitude: float) -> SymTensor:
    """Random symmetric tensor with Frobenius norm ``magnitude``.

    The direction is uniform on the unit sphere of the contraction metric:
    diagonal entries and sqrt(2)-scaled off-diagonal entries form an isotropic
    Gaussian before normalization.
    """
    w = packed_weights(dim)
    y = rng.standard_normal(w.size)
    packed = y / np.sqrt(w)
    nrm = np.sqrt(np.dot(w * packed, packed))
    if nrm == 0.0:
        packed = np.zeros_like(packed)
        packed[0] = 1.0
        nrm = 1.0
    return SymTensor(dim, packed * (magnitude / nrm))
