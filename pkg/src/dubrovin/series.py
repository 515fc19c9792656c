"""Series solvers for dB/dt = (A + sum_i e^{a_i t} C_i) B and its right form.

Every solver takes the system exactly as stored in :class:`ExpOdeSystem`:
``side="left"`` means ``B' = M(t) B`` and ``side="right"`` means
``B' = B M(t)``, with ``B(0) = Id``.  No sign flips happen here.

Three series shapes are produced:

* :class:`ExpShiftedSeries` -- coefficients of ``(e^t - alpha)^n``;
* :class:`ExpLogSeries`     -- coefficients ``B[k, j]`` of ``e^{k t} t^j``;
* :class:`PowerSeries`      -- coefficients of ``t^k``.

Block operators follow the ordering in which the ``(1, k+1)`` block of the
``j``-th power of the ``(k+1)``-block truncation carries ``j! B[k, j]``:
diagonal blocks ``A - K, ..., A - 1, A`` and the ``C_i`` sitting ``a_i``
blocks right of the diagonal (left side), or ``a_i`` blocks below it
(right side, read off at ``(k+1, 1)``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .linalg import BlockMatrix, as_cmatrix, mat_exp, max_norm

LEFT, RIGHT = "left", "right"


class ConvergenceError(RuntimeError):
    """A truncated expansion did not reach the requested tolerance."""

    def __init__(self, message: str, partial=None, tail: float | None = None):
        super().__init__(message)
        self.partial = partial
        self.tail = tail


@dataclass(frozen=True)
class ExpOdeSystem:
    """``B' = (A + sum e^{a t} C) B`` (left) or ``B' = B (A + ...)`` (right)."""

    A: np.ndarray
    terms: tuple[tuple[int, np.ndarray], ...] = ()
    side: str = LEFT

    def __post_init__(self):
        A = as_cmatrix(self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        terms = []
        for a, C in self.terms:
            if int(a) != a or a < 1:
                raise ValueError(f"exponents must be positive integers, got {a}")
            C = as_cmatrix(C)
            if C.shape != (n, n):
                raise ValueError(f"C has shape {C.shape}, expected {(n, n)}")
            terms.append((int(a), C))
        if self.side not in (LEFT, RIGHT):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def max_exponent(self) -> int:
        return max((a for a, _ in self.terms), default=1)

    def coefficient(self, t: complex) -> np.ndarray:
        """The matrix A + sum e^{a t} C at time ``t``."""
        M = self.A.copy()
        for a, C in self.terms:
            M = M + np.exp(a * t) * C
        return M

    def rhs(self, t: complex, B: np.ndarray) -> np.ndarray:
        M = self.coefficient(t)
        return M @ B if self.side == LEFT else B @ M

    def transposed(self) -> "ExpOdeSystem":
        """The equivalent system for ``B^T``: transposed matrices, other side."""
        other = RIGHT if self.side == LEFT else LEFT
        return ExpOdeSystem(self.A.T, tuple((a, C.T) for a, C in self.terms), other)

    def scaled(self, factor: complex) -> "ExpOdeSystem":
        return ExpOdeSystem(factor * self.A, tuple((a, factor * C) for a, C in self.terms), self.side)


# -- series containers ------------------------------------------------------

class SeriesValue(NamedTuple):
    value: np.ndarray
    tail: float  # norm of the last retained term(s)


@dataclass(frozen=True)
class ExpShiftedSeries:
    """``B(t) = sum_n B_n (e^t - center)^n`` with ``center = e^{t0}``."""

    t0: complex
    coeffs: tuple[np.ndarray, ...]

    @property
    def center(self) -> complex:
        return complex(np.exp(self.t0))


@dataclass(frozen=True)
class ExpLogSeries:
    """``B(t) = sum_{k, j} B[k, j] e^{k t} t^j``; ``table`` has shape (K+1, J+1, n, n)."""

    table: np.ndarray

    @property
    def K(self) -> int:
        return self.table.shape[0] - 1

    @property
    def J(self) -> int:
        return self.table.shape[1] - 1


@dataclass(frozen=True)
class PowerSeries:
    """``B(t) = sum_k B_k t^k``."""

    coeffs: np.ndarray


def evaluate(s, t: complex) -> SeriesValue:
    """Sum a truncated series at ``t`` and report the size of its last terms."""
    t = complex(t)
    if isinstance(s, ExpShiftedSeries):
        if not subst2_domain(t, s.t0):
            warnings.warn(f"t={t} lies outside the convergence disc around t0={s.t0}", RuntimeWarning)
        x = np.exp(t) - s.center
        total = np.zeros_like(s.coeffs[0])
        power = 1.0 + 0j
        last = 0.0
        for B in s.coeffs:
            term = B * power
            total = total + term
            last = max_norm(term)
            power *= x
        return SeriesValue(total, last)
    if isinstance(s, ExpLogSeries):
        K, J = s.K, s.J
        tpow = t ** np.arange(J + 1)
        total = np.zeros(s.table.shape[2:], dtype=complex)
        tail = 0.0
        for k in range(K + 1):
            # j first, then k
            col = np.tensordot(tpow, s.table[k], axes=(0, 0))
            ek = np.exp(k * t)
            total = total + ek * col
            tail = max(tail, max_norm(ek * tpow[J] * s.table[k, J]))
            if k == K:
                tail = max(tail, max_norm(ek * col))
        return SeriesValue(total, tail)
    if isinstance(s, PowerSeries):
        total = np.zeros(s.coeffs.shape[1:], dtype=complex)
        # Horner
        for B in s.coeffs[::-1]:
            total = total * t + B
        K = s.coeffs.shape[0] - 1
        return SeriesValue(total, max_norm(s.coeffs[K] * t**K))
    raise TypeError(f"not a series: {type(s).__name__}")


# -- substitutions I and II ------------------------------------------------

def _single_unit_term(sys: ExpOdeSystem) -> np.ndarray:
    if not sys.terms:
        return np.zeros_like(sys.A)
    if len(sys.terms) != 1 or sys.terms[0][0] != 1:
        raise ValueError("this expansion needs exactly one exponential term with a = 1")
    return sys.terms[0][1]


def _mul(sys: ExpOdeSystem, M: np.ndarray, B: np.ndarray) -> np.ndarray:
    return M @ B if sys.side == LEFT else B @ M


def subst1_coeffs(sys: ExpOdeSystem, N: int) -> ExpShiftedSeries:
    """Coefficients of ``(e^t - 1)^n`` for n <= N (centre t0 = 0)."""
    return subst2_coeffs(sys, 0.0, N)


def subst2_coeffs(sys: ExpOdeSystem, t0: complex, N: int) -> ExpShiftedSeries:
    """Expansion in ``(e^t - e^{t0})^n`` of the solution equal to Id at ``t0``.

    Recursion: (n+1) alpha B_{n+1} = (A + alpha C - n) B_n + C B_{n-1}.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    C = _single_unit_term(sys)
    alpha = complex(np.exp(t0))
    I = np.eye(sys.dim, dtype=complex)
    coeffs = [I]
    prev = np.zeros_like(I)
    for n in range(N):
        cur = coeffs[-1]
        nxt = (_mul(sys, sys.A + alpha * C - n * I, cur) + _mul(sys, C, prev)) / ((n + 1) * alpha)
        prev = cur
        coeffs.append(nxt)
    return ExpShiftedSeries(complex(t0), tuple(coeffs))


def subst2_domain(t: complex, t0: complex) -> bool:
    """Ratio-test disc of the shifted expansion: |e^{t - t0} - 1| < 1."""
    return abs(np.exp(complex(t) - complex(t0)) - 1.0) < 1.0


# -- substitution III -------------------------------------------------------

def subst3_coeffs(sys: ExpOdeSystem, K: int, J: int) -> ExpLogSeries:
    """Table ``B[k, j]`` of ``e^{k t} t^j`` coefficients, k <= K, j <= J.

    Left side:  (j+1) B[k, j+1] = (A - k) B[k, j] + sum_i C_i B[k - a_i, j]
    Right side: (j+1) B[k, j+1] = B[k, j] (A - k) + sum_i B[k - a_i, j] C_i
    with B[k, 0] = delta_{k0} Id and B[k, j] = 0 for k < 0.
    """
    if K < 0 or J < 0:
        raise ValueError("K and J must be nonnegative")
    n = sys.dim
    I = np.eye(n, dtype=complex)
    table = np.zeros((K + 1, J + 1, n, n), dtype=complex)
    table[0, 0] = I
    for j in range(J):
        for k in range(K + 1):
            acc = _mul(sys, sys.A - k * I, table[k, j])
            for a, C in sys.terms:
                if k - a >= 0:
                    acc = acc + _mul(sys, C, table[k - a, j])
            table[k, j + 1] = acc / (j + 1)
    return ExpLogSeries(table)


def block_operator(sys: ExpOdeSystem, K: int, shifted: bool = False) -> BlockMatrix:
    """(K+1)-block truncation of the operator whose powers generate ``B[k, j]``.

    Diagonal blocks are ``A - K, ..., A`` top to bottom; with ``shifted=True``
    they become ``A, A + 1, ..., A + K``, the truncation of
    ``-i d/dtheta + A + sum e^{i a theta} C`` on nonnegative Fourier modes.
    Coefficient blocks with equal exponents add up.
    """
    n = sys.dim
    D = np.zeros((K + 1, K + 1, n, n), dtype=complex)
    I = np.eye(n, dtype=complex)
    for r in range(K + 1):
        D[r, r] = sys.A + (r if shifted else r - K) * I
        for a, C in sys.terms:
            if r + a <= K:
                if sys.side == LEFT:
                    D[r, r + a] += C
                else:
                    D[r + a, r] += C
    return BlockMatrix(D)


def _first_block_line(sys: ExpOdeSystem, E: BlockMatrix) -> list[np.ndarray]:
    """Blocks (1, k+1) (left) or (k+1, 1) (right) of a block matrix."""
    K = E.block_rows - 1
    if sys.side == LEFT:
        return [E.blocks[0, k] for k in range(K + 1)]
    return [E.blocks[k, 0] for k in range(K + 1)]


def _tail_check(terms: Sequence[np.ndarray], width: int, tol: float, what: str):
    total = sum(terms[1:], terms[0].copy())
    tail = max(max_norm(T) for T in terms[-width:])
    if tail > tol:
        raise ConvergenceError(
            f"{what}: last retained terms have norm {tail:.3e} > tol {tol:.1e}; raise K",
            partial=total,
            tail=tail,
        )
    return total, tail


def block_exp_terms(sys: ExpOdeSystem, t: complex, K: int) -> list[np.ndarray]:
    """The summands ``[exp(t D)]_{(1, k+1)}``, k = 0..K, of the block-exponential solution."""
    D = block_operator(sys, K, shifted=True)
    E = BlockMatrix.from_dense(mat_exp(complex(t) * D.to_dense()), sys.dim)
    return _first_block_line(sys, E)


def solve_via_block_exp(sys: ExpOdeSystem, t: complex, K: int = 25, tol: float = 1e-8) -> np.ndarray:
    """B(t) as the sum of the first block row (left) or column (right) of exp(t D)."""
    terms = block_exp_terms(sys, t, K)
    total, _ = _tail_check(terms, min(sys.max_exponent, K + 1), tol, "block exponential")
    return total


# -- E G T factorisation ----------------------------------------------------

@dataclass(frozen=True)
class EgtFactorization:
    """E D = G E + T for the shifted single-term operator D, so D = E^-1 (G + T E^-1) E."""

    K: int
    E: BlockMatrix
    E_inv: BlockMatrix
    G: BlockMatrix
    T: BlockMatrix


def egt_factorize(sys: ExpOdeSystem, K: int) -> EgtFactorization:
    """Blocks: E[i, i+r] = (-C)^r / r!,  E_inv[i, i+r] = C^r / r!,
    G = diag(A + k),  T[i, i+r] = (-1)^r [C^r / r!, A] for r >= 1."""
    if sys.side != LEFT:
        raise ValueError("egt_factorize works on left-form systems; transpose first")
    C = _single_unit_term(sys)
    n = sys.dim
    A = sys.A
    I = np.eye(n, dtype=complex)
    powers = [I]
    for r in range(1, K + 1):
        powers.append(powers[-1] @ C / r)
    E = BlockMatrix.zeros(K + 1, K + 1, n)
    E_inv = BlockMatrix.zeros(K + 1, K + 1, n)
    G = BlockMatrix.zeros(K + 1, K + 1, n)
    T = BlockMatrix.zeros(K + 1, K + 1, n)
    for i in range(K + 1):
        G.blocks[i, i] = A + i * I
        for r in range(K + 1 - i):
            sign = (-1) ** r
            E.blocks[i, i + r] = sign * powers[r]
            E_inv.blocks[i, i + r] = powers[r]
            if r:
                T.blocks[i, i + r] = sign * (powers[r] @ A - A @ powers[r])
    return EgtFactorization(K, E, E_inv, G, T)


def solve_via_egt(sys: ExpOdeSystem, t: complex, K: int = 25, tol: float = 1e-8) -> np.ndarray:
    """B(t) through the conjugated exponential E^-1 exp(t (G + T E^-1)) E.

    The sum over k of the first block row is the contraction of
    ``(Id, C, C^2/2, ...)`` with ``exp(t (G + T E^-1))`` applied to the
    column of truncated ``exp(-C)`` partial sums (the column sums of E).
    """
    if sys.side == RIGHT:
        return solve_via_egt(sys.transposed(), t, K, tol).T
    fac = egt_factorize(sys, K)
    n = sys.dim
    core = (fac.G + fac.T @ fac.E_inv).to_dense()
    X = BlockMatrix.from_dense(mat_exp(complex(t) * core), n)
    left = fac.E_inv.blocks[0]  # (Id, C, C^2/2, ...)
    colsum = fac.E.blocks.sum(axis=1)  # truncated exp(-C) partial sums
    Xv = np.einsum("lmab,mbc->lac", X.blocks, colsum)
    total = np.einsum("lab,lbc->ac", left, Xv)
    width = min(sys.max_exponent, K + 1)
    tail_cols = fac.E.blocks[:, K + 1 - width :]
    tails = np.einsum("lab,lmbc,mkcd->kad", left, X.blocks, tail_cols)
    tail = max(max_norm(T) for T in tails)
    if tail > tol:
        raise ConvergenceError(
            f"EGT pairing: last retained terms have norm {tail:.3e} > tol {tol:.1e}; raise K",
            partial=total,
            tail=tail,
        )
    return total


# -- chaining, recovery, big quantum product --------------------------------

def frobenius_chain(data, t, hbar: complex = 1j, K: int = 25, tol: float = 1e-8):
    """Flat frame of the small quantum product at ``t`` in H^2.

    Solves direction 1 at (t^1, 0, ...), then direction 2 starting from that
    value with t^1 frozen, and so on.  In left form the directional factors
    compose as G = G^(p) ... G^(1); the gauge matrix is g = G^T.
    """
    from .algebra import FlatFrame, quantum_ode_system

    t = np.asarray(t, dtype=complex).ravel()
    if t.shape[0] != data.h2_rank:
        raise ValueError(f"expected {data.h2_rank} coordinates, got {t.shape[0]}")
    G = np.eye(data.dim, dtype=complex)
    for i in range(1, data.h2_rank + 1):
        sys_i = quantum_ode_system(data, i, t[: i - 1], hbar)
        G = solve_via_block_exp(sys_i, t[i - 1], K, tol) @ G
    g = G.T
    return FlatFrame(g, np.linalg.inv(g))


def recover_gw(Z: ExpLogSeries) -> np.ndarray:
    """The ``e^t t`` coefficient B[1, 1], equal to C for a single a = 1 term."""
    if Z.K < 1 or Z.J < 1:
        raise ValueError("recovery needs K >= 1 and J >= 1")
    return Z.table[1, 1].copy()


def recover_terms(Z: ExpLogSeries) -> dict[int, np.ndarray]:
    """B[k, 1] for k >= 1: the sum of the C_i with exponent a_i = k."""
    if Z.K < 1 or Z.J < 1:
        raise ValueError("recovery needs K >= 1 and J >= 1")
    return {k: Z.table[k, 1].copy() for k in range(1, Z.K + 1) if Z.table[k, 1].any()}


def big_quantum_coeffs(A, Cs: Sequence, K: int) -> PowerSeries:
    """Taylor coefficients of B' = B (A + sum_{n>=1} t^n C_n), B(0) = Id.

    Recursion: k B_k = B_{k-1} A + sum_{n>=1} B_{k-1-n} C_n.
    ``Cs[0]`` is C_1.
    """
    A = as_cmatrix(A)
    Cs = [as_cmatrix(C) for C in Cs]
    n = A.shape[0]
    B = np.zeros((K + 1, n, n), dtype=complex)
    B[0] = np.eye(n)
    for k in range(1, K + 1):
        acc = B[k - 1] @ A
        for idx, C in enumerate(Cs):
            m = k - 2 - idx  # k - 1 - n with n = idx + 1
            if m < 0:
                break
            acc = acc + B[m] @ C
        B[k] = acc / k
    return PowerSeries(B)


def companion_matrix(A, Cs: Sequence, blocks: int) -> BlockMatrix:
    """Block companion matrix: first block row (A, C_1, C_2, ...), identity subdiagonal."""
    A = as_cmatrix(A)
    n = A.shape[0]
    M = BlockMatrix.zeros(blocks, blocks, n)
    M.blocks[0, 0] = A
    for idx, C in enumerate(Cs[: blocks - 1]):
        M.blocks[0, idx + 1] = as_cmatrix(C)
    for r in range(1, blocks):
        M.blocks[r, r - 1] = np.eye(n)
    return M


def companion_residuals(A, Cs: Sequence, K: int) -> np.ndarray:
    """|B_k - (alpha^k)_{11} / k!| for k = 0..K, alpha the companion matrix.

    The two agree for k <= 2 and generally differ from k = 3 on whenever some
    C_n is nonzero; the residuals are returned, not asserted.
    """
    series = big_quantum_coeffs(A, Cs, K)
    alpha = companion_matrix(A, Cs, K + 1).to_dense()
    n = series.coeffs.shape[1]
    out = np.zeros(K + 1)
    P = np.eye(alpha.shape[0], dtype=complex)
    for k in range(K + 1):
        if k:
            P = P @ alpha
        out[k] = max_norm(series.coeffs[k] - P[:n, :n] / math.factorial(k))
    return out


def step_product_coeffs(A, Cs: Sequence, K: int) -> PowerSeries:
    """Coefficients as first blocks of N_1 N_2 ... N_k.

    N_j has first block column (A, C_1, C_2, ...)/j and identities on the
    block superdiagonal, so the row of blocks (B_{j-1}, ..., B_0, 0, ...)
    times N_j is (B_j, B_{j-1}, ..., B_0, 0, ...).
    """
    A = as_cmatrix(A)
    n = A.shape[0]
    blocks = K + 1
    first_col = [A] + [as_cmatrix(C) for C in Cs[: blocks - 1]]
    first_col += [np.zeros((n, n), dtype=complex)] * (blocks - len(first_col))
    row = np.zeros((n, blocks * n), dtype=complex)
    row[:, :n] = np.eye(n)
    out = [np.eye(n, dtype=complex)]
    for j in range(1, K + 1):
        Nj = np.zeros((blocks * n, blocks * n), dtype=complex)
        for r, blk in enumerate(first_col):
            Nj[r * n : (r + 1) * n, :n] = blk / j
        for r in range(blocks - 1):
            Nj[r * n : (r + 1) * n, (r + 1) * n : (r + 2) * n] = np.eye(n)
        row = row @ Nj
        out.append(row[:, :n].copy())
    return PowerSeries(np.array(out))


# -- product-of-2x2 forms ---------------------------------------------------

def product_form_coeff(sys: ExpOdeSystem, n: int, t0: complex = 0.0) -> np.ndarray:
    """B_n of the shifted expansion as the (1,1) block of a product of 2x2 block matrices.

    Left side: (1/(n! alpha^n)) [M_{n-1} ... M_1 M_0]_{(1,1)} with
    M_j = [[A + alpha C - j, C], [(j+1) alpha, 0]], alpha = e^{t0}.
    Right side: the block transposes multiplied in the opposite order.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    C = _single_unit_term(sys)
    alpha = complex(np.exp(t0))
    d = sys.dim
    I = np.eye(d, dtype=complex)
    P = BlockMatrix(np.array([[I, 0 * I], [0 * I, I]]))
    for j in range(n):
        blocks = np.array([[sys.A + alpha * C - j * I, C], [(j + 1) * alpha * I, 0 * I]])
        Mj = BlockMatrix(blocks)
        P = Mj @ P if sys.side == LEFT else P @ Mj.block_transpose()
    return P.block(1, 1) / (math.factorial(n) * alpha**n)


def scalar_binomial_identity(a: complex, c: complex, n: int) -> tuple[complex, complex]:
    """Both sides of sum_{k+l=n} binom(a, k) c^l / l! = (1/n!) [prod_j 2x2]_{(1,1)}.

    ``binom(a, k)`` is the generalized binomial coefficient, so ``a`` may be complex.
    """
    lhs = 0j
    for k in range(n + 1):
        lhs += math.prod((a - i for i in range(k)), start=1 + 0j) / math.factorial(k) * c ** (n - k) / math.factorial(n - k)
    sys = ExpOdeSystem([[a]], ((1, [[c]]),))
    return lhs, complex(product_form_coeff(sys, n)[0, 0])
