"""Dense and block complex matrix helpers shared by the solvers.

Matrices are plain ``numpy`` complex arrays.  Public indices that mirror the
usual mathematical notation (elementary matrices, block positions) are
1-based; everything else is ordinary numpy indexing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

_EPS = np.finfo(float).eps


def as_cmatrix(M) -> np.ndarray:
    """Return ``M`` as a 2-D complex128 array (copying only when needed)."""
    arr = np.asarray(M, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def max_norm(M) -> float:
    """Max-entry norm, the norm every tolerance in this package refers to."""
    arr = np.asarray(M)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def mat_exp(M, tol: float = 1e-14) -> np.ndarray:
    """Matrix exponential by scaling and squaring around a Taylor core.

    The scaled matrix has 1-norm at most 1/2, so the Taylor remainder after a
    term of size ``delta`` is below ``delta``; terms are accumulated until the
    remainder bound, amplified by the squarings, drops under ``tol`` (or under
    rounding level, whichever is larger).
    """
    M = as_cmatrix(M)
    n, m = M.shape
    if n != m:
        raise ValueError(f"mat_exp needs a square matrix, got {M.shape}")
    if not tol > 0:
        raise ValueError("tol must be positive")

    norm = float(np.linalg.norm(M, 1)) if n else 0.0
    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    X = M / (2.0**s)

    # Relative target for the core: squaring multiplies the relative error by
    # roughly 2**s, and the result is at most e**norm in size.
    scale = math.exp(min(norm, 700.0))
    target = max(tol / (2.0**s * max(scale, 1.0)), _EPS / 4)

    result = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 60):
        term = term @ X / k
        result = result + term
        if max_norm(term) <= target:
            break

    for _ in range(s):
        result = result @ result
    return result


def compositions(a: int, b: int) -> list[tuple[int, ...]]:
    """All ordered tuples of ``a`` positive integers summing to ``b``.

    ``compositions(0, 0) == [()]``; any other ``a == 0`` case is empty.
    Results come in lexicographic order.
    """
    if a < 0 or b < 0:
        return []
    if a == 0:
        return [()] if b == 0 else []
    if b < a:
        return []
    out = []
    for cuts in itertools.combinations(range(1, b), a - 1):
        bounds = (0, *cuts, b)
        out.append(tuple(bounds[i + 1] - bounds[i] for i in range(a)))
    return out


def elementary(i: int, j: int, dim: int) -> np.ndarray:
    """The matrix E^i_j: a single one in row ``i``, column ``j`` (1-based)."""
    if dim < 1:
        raise ValueError("dim must be positive")
    if not (1 <= i <= dim and 1 <= j <= dim):
        raise IndexError(f"entry ({i}, {j}) outside a {dim}x{dim} matrix")
    E = np.zeros((dim, dim), dtype=complex)
    E[i - 1, j - 1] = 1.0
    return E


@dataclass(frozen=True)
class BlockMatrix:
    """A matrix of equal square blocks, stored as ``(rows, cols, d, d)``."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        if b.ndim != 4 or b.shape[2] != b.shape[3]:
            raise ValueError(f"blocks must have shape (r, c, d, d), got {b.shape}")
        object.__setattr__(self, "blocks", b)

    @classmethod
    def zeros(cls, block_rows: int, block_cols: int, block_dim: int) -> "BlockMatrix":
        return cls(np.zeros((block_rows, block_cols, block_dim, block_dim), dtype=complex))

    @classmethod
    def from_dense(cls, M, block_dim: int) -> "BlockMatrix":
        M = as_cmatrix(M)
        r, c = M.shape
        if r % block_dim or c % block_dim:
            raise ValueError(f"{M.shape} is not divisible into {block_dim}x{block_dim} blocks")
        arr = M.reshape(r // block_dim, block_dim, c // block_dim, block_dim)
        return cls(arr.transpose(0, 2, 1, 3).copy())

    @property
    def block_rows(self) -> int:
        return self.blocks.shape[0]

    @property
    def block_cols(self) -> int:
        return self.blocks.shape[1]

    @property
    def block_dim(self) -> int:
        return self.blocks.shape[2]

    def block(self, i: int, j: int) -> np.ndarray:
        """Block at 1-based position (i, j)."""
        if not (1 <= i <= self.block_rows and 1 <= j <= self.block_cols):
            raise IndexError(f"block ({i}, {j}) outside {self.block_rows}x{self.block_cols}")
        return self.blocks[i - 1, j - 1]

    def to_dense(self) -> np.ndarray:
        r, c, d, _ = self.blocks.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(r * d, c * d)

    def __matmul__(self, other: "BlockMatrix") -> "BlockMatrix":
        if self.block_cols != other.block_rows or self.block_dim != other.block_dim:
            raise ValueError("incompatible block shapes")
        return BlockMatrix(np.einsum("ikab,kjbc->ijac", self.blocks, other.blocks))

    def __add__(self, other: "BlockMatrix") -> "BlockMatrix":
        return BlockMatrix(self.blocks + other.blocks)

    def __sub__(self, other: "BlockMatrix") -> "BlockMatrix":
        return BlockMatrix(self.blocks - other.blocks)

    def scale(self, c: complex) -> "BlockMatrix":
        return BlockMatrix(c * self.blocks)

    def block_transpose(self) -> "BlockMatrix":
        """Swap block positions, leaving each block untouched."""
        return BlockMatrix(self.blocks.transpose(1, 0, 2, 3).copy())

    def is_upper(self) -> bool:
        r = self.block_rows
        return all(not self.blocks[i, j].any() for i in range(r) for j in range(min(i, self.block_cols)))

    def is_lower(self) -> bool:
        return self.block_transpose().is_upper()


def block_entry_exp(D: BlockMatrix, t: complex, row: int, col: int, tol: float = 1e-14) -> np.ndarray:
    """Block (row, col) of exp(t D), 1-based.

    For block-triangular ``D`` only the principal sub-block spanning rows and
    columns ``row..col`` (or ``col..row``) enters the result, so only that
    piece is exponentiated.
    """
    if D.block_rows != D.block_cols:
        raise ValueError("D must be square in blocks")
    nb = D.block_rows
    if not (1 <= row <= nb and 1 <= col <= nb):
        raise IndexError(f"block ({row}, {col}) outside {nb}x{nb}")
    if row <= col and D.is_upper():
        lo, hi = row, col
    elif row >= col and D.is_lower():
        lo, hi = col, row
    else:
        lo, hi = 1, nb
    sub = BlockMatrix(D.blocks[lo - 1 : hi, lo - 1 : hi])
    E = BlockMatrix.from_dense(mat_exp(t * sub.to_dense(), tol), D.block_dim)
    return E.block(row - lo + 1, col - lo + 1)
