"""Projective space P^m: its H^2 system, the closed-form flat frame and Givental's matrix.

Basis 1, H, ..., H^m; all public matrix indices below are 1-based, as in the
elementary matrices ``E^i_j`` (row i, column j), while arrays are indexed the
numpy way internally.

The closed form ``X_alpha(t)`` returned by :func:`pm_closed_form` solves

    X' = -alpha^{-1} (A + e^t C) X,   X(0) = Id,

where A is the superdiagonal shift and C = E^{m+1}_1.  The flat frame of the
quantum connection along the H^2 line is ``J X_{1/hbar} J`` with J the
index-reversal matrix; see :func:`pm_flat_frame`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .algebra import DEFAULT_HBAR, FlatFrame, connection_matrices, pm_cup_table
from .linalg import compositions, mat_exp, max_norm
from .series import ExpOdeSystem


@dataclass(frozen=True)
class PmSystem:
    """P^m matrices A (superdiagonal ones) and C (= E^{m+1}_1), with hbar and alpha."""

    m: int
    A: np.ndarray
    C: np.ndarray
    hbar: complex
    alpha: complex

    @property
    def dim(self) -> int:
        return self.m + 1

    def ode_system(self) -> ExpOdeSystem:
        """The left system X' = -alpha^{-1}(A + e^t C) X solved by the closed form."""
        a = 1.0 / self.alpha
        return ExpOdeSystem(-a * self.A, ((1, -a * self.C),), side="left")


def pm_system(m: int, hbar: complex = DEFAULT_HBAR, alpha: complex | None = None) -> PmSystem:
    """Build the P^m system; ``alpha`` defaults to -sqrt(-1) hbar."""
    if m < 1:
        raise ValueError("m must be at least 1")
    n = m + 1
    A = np.diag(np.ones(m, dtype=complex), 1)
    C = np.zeros((n, n), dtype=complex)
    C[m, 0] = 1.0
    alpha = -1j * complex(hbar) if alpha is None else complex(alpha)
    return PmSystem(m, A, C, complex(hbar), alpha)


def reversal(n: int) -> np.ndarray:
    """The index-reversal permutation matrix J."""
    return np.fliplr(np.eye(n, dtype=complex))


# -- closed form ------------------------------------------------------------

def _weight(s: int, r: int, m: int) -> int:
    """binom(r, m) s^{r-m}, zero for r < m, with 0^0 = 1."""
    if r < m:
        return 0
    return math.comb(r, m) * s ** (r - m)


@lru_cache(maxsize=None)
def _composition_sums(parts: int, total: int, m: int) -> tuple[int, ...]:
    """F[b] = sum over compositions of b into ``parts`` parts of prod_s binom(r_s, m) s^{r_s-m}.

    Exact integers for b = 0..total, by convolving one part at a time.
    """
    F = [1] + [0] * total
    for s in range(1, parts + 1):
        w = [0] + [_weight(s, r, m) for r in range(1, total + 1)]
        G = [0] * (total + 1)
        for b in range(total + 1):
            if F[b]:
                for r in range(1, total + 1 - b):
                    if w[r]:
                        G[b + r] += F[b] * w[r]
        F = G
    return tuple(F)


def _enumerated_sum(parts: int, b: int, m: int) -> int:
    return sum(math.prod(_weight(s, r, m) for s, r in enumerate(c, 1)) for c in compositions(parts, b))


def _enumerated_tail_sum(k: int, b: int, m: int, l: int) -> int:
    """Sum over P(k, b) of prod_{s<k} binom(r_s, m) s^{r_s-m} * binom(r_k, l-1) k^{r_k-l+1}."""
    out = 0
    for c in compositions(k, b):
        head = math.prod(_weight(s, r, m) for s, r in enumerate(c[:-1], 1))
        if head:
            out += head * math.comb(c[-1], l - 1) * k ** (c[-1] - l + 1) if c[-1] >= l - 1 else 0
    return out


def leading_matrix(sys: PmSystem, t: complex) -> np.ndarray:
    """The n <= 1 part: exp(-t A / alpha) plus the single -t C / alpha corner term."""
    t = complex(t)
    return mat_exp(-t / sys.alpha * sys.A) - t / sys.alpha * sys.C


def closed_form_parts(sys: PmSystem, t: complex, N: int, method: str = "dp") -> dict[str, np.ndarray]:
    """The four partition pieces of the closed form, summed over 2 <= n <= N, k >= 1.

    Keys ``"I"``, ``"IV"``, ``"II"``, ``"III"``; ``I`` and ``IV`` are the j >= 2
    and j = 1 terms of the first (single-column) sum, ``II`` and ``III`` the
    same split of the second sum.  ``method="enumerate"`` lists compositions
    explicitly instead of convolving; it is only practical for small N.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    if method not in ("dp", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    m, n = sys.m, sys.dim
    t = complex(t)
    inv_alpha = 1.0 / sys.alpha
    parts = {key: np.zeros((n, n), dtype=complex) for key in ("I", "IV", "II", "III")}
    for k in range(1, N + 1):
        F = _composition_sums(k - 1, N, m) if method == "dp" else None
        for nn in range(max(2, k), N + 1):
            c = t**nn / math.factorial(nn)
            for j in range(1, m + 2):
                b = nn - k - j + 1
                if b < 0:
                    continue
                row = m + 1 - j  # 0-based row of E^{m+2-j}
                first_key = "IV" if j == 1 else "I"
                second_key = "III" if j == 1 else "II"
                e = (k - 1) * m + k + j - 1
                S = F[b] if F is not None else _enumerated_sum(k - 1, b, m)
                if S:
                    parts[first_key][row, 0] += c * (-inv_alpha) ** e * S
                for l in range(1, m + 2):
                    if F is not None:
                        S2 = 0
                        for rk in range(1, b + 1):
                            if F[b - rk] and rk >= l - 1:
                                S2 += F[b - rk] * math.comb(rk, l - 1) * k ** (rk - l + 1)
                    else:
                        S2 = _enumerated_tail_sum(k, b, m, l)
                    if S2:
                        e2 = (k - 1) * m + l + k + j - 2
                        parts[second_key][row, l - 1] += c * (-inv_alpha) ** e2 * S2
    return parts


def pm_closed_form(sys: PmSystem, t: complex, N: int = 25, method: str = "dp") -> np.ndarray:
    """Closed-form solution X_alpha(t) truncated at t^N."""
    parts = closed_form_parts(sys, t, N, method)
    return leading_matrix(sys, t) + sum(parts.values())


# -- flat frames ------------------------------------------------------------

def pm_flat_frame(m: int, hbar: complex, t1: complex, N: int = 25) -> FlatFrame:
    """Flat frame along the H^2 line: g_inv = J X_{1/hbar}(t1) J."""
    sys = pm_system(m, hbar, alpha=1.0 / complex(hbar))
    J = reversal(m + 1)
    return FlatFrame.from_inverse(J @ pm_closed_form(sys, t1, N) @ J)


def pm_full_frame(m: int, hbar: complex, t, N: int = 25) -> FlatFrame:
    """Frame on all of H^*: g_inv = exp(-hbar sum_{l != 1} t^l Gamma_l) g_inv(t^1).

    Gamma_l are the cup-product connection matrices, (Gamma_l)^i_j = 1 iff i = l + j.
    """
    t = np.asarray(t, dtype=complex).ravel()
    if t.shape[0] != m + 1:
        raise ValueError(f"expected {m + 1} coordinates, got {t.shape[0]}")
    gammas = connection_matrices(pm_cup_table(m))
    X = sum(t[l] * gammas[l] for l in range(m + 1) if l != 1)
    base = pm_flat_frame(m, hbar, t[1], N).g_inv
    return FlatFrame.from_inverse(mat_exp(-complex(hbar) * X) @ base)


# -- Givental's solution ----------------------------------------------------

def _pmul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Product of H-polynomials mod H^{len}."""
    m1 = p.shape[0]
    out = np.zeros(m1, dtype=complex)
    for i in range(m1):
        if p[i]:
            out[i:] += p[i] * q[: m1 - i]
    return out


@dataclass(frozen=True)
class GiventalTruncation:
    """S = sum_{d <= d_max} e^{(d - hbar H) t} poly_d(H) mod H^{m+1}.

    ``polys[d]`` holds the H-coefficients of prod_{r=1}^d (H - r/hbar)^{-(m+1)}.
    """

    m: int
    hbar: complex
    d_max: int
    polys: tuple[np.ndarray, ...]


def givental_truncation(m: int, hbar: complex = DEFAULT_HBAR, d_max: int = 8) -> GiventalTruncation:
    if m < 1:
        raise ValueError("m must be at least 1")
    if d_max < 0:
        raise ValueError("d_max must be nonnegative")
    hbar = complex(hbar)
    poly = np.zeros(m + 1, dtype=complex)
    poly[0] = 1.0
    polys = [poly]
    for r in range(1, d_max + 1):
        c = r / hbar
        # 1 / (H - c) = -sum_q H^q / c^{q+1}
        inv = np.array([-(c ** -(q + 1)) for q in range(m + 1)], dtype=complex)
        for _ in range(m + 1):
            poly = _pmul(poly, inv)
        polys.append(poly)
    return GiventalTruncation(m, hbar, d_max, tuple(polys))


def _givental_derivatives(g: GiventalTruncation, t: complex, extra: int) -> np.ndarray:
    """Matrix with entry (b, s) the H^{m-b} derivative of (-hbar^{-1} d/dt)^{m-s+extra} S at H = 0."""
    m, hbar = g.m, g.hbar
    t = complex(t)
    out = np.zeros((m + 1, m + 1), dtype=complex)
    etH = np.array([(-hbar * t) ** p / math.factorial(p) for p in range(m + 1)], dtype=complex)
    facts = np.array([math.factorial(m - b) for b in range(m + 1)], dtype=float)
    for d, pd in enumerate(g.polys):
        base = np.exp(d * t) * _pmul(etH, pd)
        lin = np.zeros(m + 1, dtype=complex)  # (-1/hbar) d/dt acts as H - d/hbar
        lin[0] = -d / hbar
        lin[1] = 1.0
        poly = base
        for _ in range(extra):
            poly = _pmul(poly, lin)
        cols = []
        for _ in range(m + 1):
            cols.append(poly)
            poly = _pmul(poly, lin)
        # column s uses m - s applications beyond ``extra``
        for s in range(m + 1):
            p = cols[m - s]
            out[:, s] += facts * p[m - np.arange(m + 1)]
    return out


def givental_matrix(g: GiventalTruncation, t: complex) -> np.ndarray:
    """M[b, s] = d^{m-b}/dH^{m-b} (-hbar^{-1} d/dt)^{m-s} S at H = 0 (0-based b, s)."""
    return _givental_derivatives(g, t, 0)


def givental_ode_residual(g: GiventalTruncation, t: complex) -> float:
    """Max over b of |(-hbar^{-1} d/dt)^{m+1} S_b - e^t S_b|.

    The components S_b form the last column of M.  The derivatives are exact
    term by term, so what remains is the d_max tail.  Columns s < m are
    t-derivatives of S_b and do not satisfy the same equation.
    """
    lhs = _givental_derivatives(g, t, g.m + 1)[:, g.m]
    return max_norm(lhs - np.exp(complex(t)) * givental_matrix(g, t)[:, g.m])


def identity_frame(sys: PmSystem, t: complex, N: int = 25) -> np.ndarray:
    """The matrix B with M(0) B = M(t): J X_{1/hbar}(t)^T J.

    The closed form is evaluated at alpha = 1/hbar whatever ``sys.alpha`` says.
    """
    X = pm_closed_form(replace(sys, alpha=1.0 / sys.hbar), t, N)
    J = reversal(sys.dim)
    return J @ X.T @ J


def check_identity(g: GiventalTruncation, sys: PmSystem, t: complex, N: int = 40) -> float:
    """Max-entry norm of M(0) B(t) - M(t)."""
    if g.m != sys.m or g.hbar != sys.hbar:
        raise ValueError("Givental truncation and system disagree on m or hbar")
    B = identity_frame(sys, t, N)
    return max_norm(givental_matrix(g, 0.0) @ B - givental_matrix(g, t))
