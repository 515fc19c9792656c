"""Product tables, Gromov-Witten input data and constant-product flat frames.

Index conventions
-----------------
``ProductTable.gamma[i, j, k]`` is the coefficient of ``T_k`` in ``T_i * T_j``.

Two matrix layouts of the same data appear:

* the *connection* layout ``(Gamma_l)[i, j] = gamma[l, j, i]`` (row = upper
  index).  It acts on component vectors, so a flat section ``f`` satisfies
  ``df/dt^l = -hbar Gamma_l f`` and flat frames are ``F`` with
  ``dF = -hbar Gamma F``.
* the *row-lower* layout ``A[j, r] = gamma[i, j, r]`` used for the directional
  ODE systems, i.e. the transpose.  The ODE built from it in left form,
  ``dG/dt = hbar (A + sum e^{a t} C) G``, is solved by ``G = g^T`` where
  ``g = F^{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_cmatrix, mat_exp, max_norm

DEFAULT_HBAR = 1j


@dataclass(frozen=True)
class ProductTable:
    """Structure constants of a commutative product plus the pairing."""

    gamma: np.ndarray
    pairing: np.ndarray
    pairing_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=complex)
        pairing = as_cmatrix(self.pairing)
        n = pairing.shape[0]
        if gamma.shape != (n, n, n):
            raise ValueError(f"gamma must have shape {(n, n, n)}, got {gamma.shape}")
        if pairing.shape != (n, n):
            raise ValueError("pairing must be square")
        if not np.allclose(gamma, gamma.transpose(1, 0, 2)):
            raise ValueError("product is not commutative: gamma[i,j,k] != gamma[j,i,k]")
        if not np.allclose(pairing, pairing.T):
            raise ValueError("pairing is not symmetric")
        try:
            inv = np.linalg.inv(pairing)
        except np.linalg.LinAlgError as exc:
            raise ValueError("pairing is singular") from exc
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "pairing", pairing)
        object.__setattr__(self, "pairing_inv", inv)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def multiply(self, x, y) -> np.ndarray:
        """Product of two component vectors."""
        return np.einsum("i,j,ijk->k", x, y, self.gamma)


@dataclass(frozen=True)
class GwClass:
    """One effective curve class: its H^2 pairings and 3-point invariants.

    ``invariants[j, i, l]`` is I_beta(T_j, T_i, T_l).
    """

    exponents: tuple[int, ...]
    invariants: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(a) for a in self.exponents))
        object.__setattr__(self, "invariants", np.asarray(self.invariants, dtype=complex))


@dataclass(frozen=True)
class GwData:
    """Small quantum deformation data over the first ``h2_rank`` basis directions.

    Basis vector 0 is the unit; H^2 directions are basis indices 1..h2_rank.
    """

    cup: ProductTable
    h2_rank: int
    classes: tuple[GwClass, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        n, p = self.cup.dim, self.h2_rank
        if not 1 <= p < n:
            raise ValueError(f"h2_rank must lie in [1, {n - 1}], got {p}")
        for idx, cls in enumerate(self.classes):
            if len(cls.exponents) != p:
                raise ValueError(f"class {idx}: expected {p} exponents, got {len(cls.exponents)}")
            if any(a <= 0 for a in cls.exponents):
                raise ValueError(f"class {idx}: exponents must be strictly positive")
            if cls.invariants.shape != (n, n, n):
                raise ValueError(f"class {idx}: invariants must have shape {(n, n, n)}")
            if not np.allclose(cls.invariants, cls.invariants.transpose(2, 1, 0)):
                raise ValueError(f"class {idx}: invariants not symmetric in the outer slots")

    @property
    def dim(self) -> int:
        return self.cup.dim

    def class_matrix(self, cls: GwClass, direction: int) -> np.ndarray:
        """Row-lower matrix C[j, r] = sum_l I(T_j, T_i, T_l) h^{l r}."""
        return cls.invariants[:, direction, :] @ self.cup.pairing_inv


@dataclass(frozen=True)
class ConnectionForm:
    """Connection matrices Gamma_l (connection layout) and the coupling hbar."""

    gammas: tuple[np.ndarray, ...]
    hbar: complex = DEFAULT_HBAR

    def __post_init__(self):
        gammas = tuple(as_cmatrix(g) for g in self.gammas)
        if gammas:
            n = gammas[0].shape[0]
            if any(g.shape != (n, n) for g in gammas):
                raise ValueError("all connection matrices must be dim x dim")
        object.__setattr__(self, "gammas", gammas)

    @classmethod
    def from_table(cls, table: ProductTable, hbar: complex = DEFAULT_HBAR) -> "ConnectionForm":
        return cls(tuple(connection_matrices(table)), hbar)

    @property
    def dim(self) -> int:
        return self.gammas[0].shape[0]


@dataclass(frozen=True)
class FlatFrame:
    """Gauge matrix ``g`` and its inverse; columns of ``g_inv`` are flat sections."""

    g: np.ndarray
    g_inv: np.ndarray

    @classmethod
    def from_inverse(cls, g_inv) -> "FlatFrame":
        g_inv = as_cmatrix(g_inv)
        return cls(np.linalg.inv(g_inv), g_inv)


def connection_matrices(table: ProductTable) -> list[np.ndarray]:
    """Matrices with ``Gamma_l[i, j] = gamma[l, j, i]``."""
    return [table.gamma[l].T.copy() for l in range(table.dim)]


def check_frobenius(table: ProductTable, tol: float = 1e-12) -> tuple[bool, float]:
    """Whether all connection matrices commute, and the largest commutator entry."""
    gammas = connection_matrices(table)
    residual = 0.0
    for a in range(len(gammas)):
        for b in range(a + 1, len(gammas)):
            comm = gammas[a] @ gammas[b] - gammas[b] @ gammas[a]
            residual = max(residual, max_norm(comm))
    return residual <= tol, residual


def constant_flat_frame(t, form: ConnectionForm, tol: float = 1e-12) -> FlatFrame:
    """Flat frame ``g = exp(hbar sum t^l Gamma_l)`` of a constant product."""
    t = np.asarray(t, dtype=complex).ravel()
    if t.shape[0] != len(form.gammas):
        raise ValueError(f"expected {len(form.gammas)} coordinates, got {t.shape[0]}")
    for a in range(len(form.gammas)):
        for b in range(a + 1, len(form.gammas)):
            ga, gb = form.gammas[a], form.gammas[b]
            if max_norm(ga @ gb - gb @ ga) > tol:
                raise ValueError("product is not associative: connection matrices do not commute")
    X = sum(tl * g for tl, g in zip(t, form.gammas))
    return FlatFrame(mat_exp(form.hbar * X), mat_exp(-form.hbar * X))


def quantum_connection_matrices(data: GwData, t) -> list[np.ndarray]:
    """Connection-layout matrices of the small quantum product at ``t`` in H^2.

    Returns one matrix per H^2 direction (basis indices 1..h2_rank).
    """
    t = np.asarray(t, dtype=complex).ravel()
    out = []
    for i in range(1, data.h2_rank + 1):
        low = data.cup.gamma[i].copy()
        for cls in data.classes:
            weight = np.exp(np.dot(cls.exponents, t))
            low = low + weight * data.class_matrix(cls, i)
        out.append(low.T)
    return out


def quantum_ode_system(data: GwData, direction: int, frozen=(), hbar: complex = DEFAULT_HBAR):
    """Directional ODE for the small quantum product along H^2 direction ``direction``.

    The earlier coordinates are frozen at ``frozen``; later ones are zero.
    The returned left-form system ``dG/dt = hbar (A + sum e^{a t} C) G`` uses
    the row-lower layout and is solved by the transpose of the gauge matrix.
    Classes with identically vanishing invariants in this direction are dropped.
    """
    from .series import ExpOdeSystem

    p = data.h2_rank
    if not 1 <= direction <= p:
        raise ValueError(f"direction must lie in [1, {p}], got {direction}")
    frozen = np.asarray(frozen, dtype=complex).ravel()
    if frozen.shape[0] != direction - 1:
        raise ValueError(f"direction {direction} needs {direction - 1} frozen coordinates")
    A = hbar * data.cup.gamma[direction]
    terms = []
    for cls in data.classes:
        C = data.class_matrix(cls, direction)
        if not C.any():
            continue
        weight = np.exp(np.dot(cls.exponents[: direction - 1], frozen)) if direction > 1 else 1.0
        terms.append((cls.exponents[direction - 1], hbar * weight * C))
    return ExpOdeSystem(A, tuple(terms), side="left")


def flatness_residual(frame_at, gammas_at, t, hbar: complex, step: float = 1e-5) -> float:
    """Central-difference check of ``dF/dt^l + hbar Gamma_l F = 0``.

    ``frame_at(t)`` returns the matrix whose columns should be flat;
    ``gammas_at(t)`` the connection-layout matrices, one per coordinate.
    """
    t = np.asarray(t, dtype=complex).ravel()
    F = frame_at(t)
    gammas = gammas_at(t)
    worst = 0.0
    for l in range(t.shape[0]):
        e = np.zeros_like(t)
        e[l] = step
        dF = (frame_at(t + e) - frame_at(t - e)) / (2 * step)
        worst = max(worst, max_norm(dF + hbar * gammas[l] @ F))
    return worst


# -- builtin tables ---------------------------------------------------------

def pm_cup_table(m: int) -> ProductTable:
    """Cup product of P^m in the basis 1, H, ..., H^m."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return truncated_polynomial_table(m + 1)


def pm_gw_data(m: int) -> GwData:
    """P^m with its single contributing class: I_1(T_a, T_b, T_c) = 1 iff a+b+c = 2m+1."""
    n = m + 1
    inv = np.zeros((n, n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            c = 2 * m + 1 - a - b
            if 0 <= c < n:
                inv[a, b, c] = 1.0
    return GwData(pm_cup_table(m), 1, (GwClass((1,), inv),))


def truncated_polynomial_table(order: int) -> ProductTable:
    """C[x]/(x^order) in the monomial basis with the antidiagonal pairing."""
    n = order
    gamma = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n - i):
            gamma[i, j, i + j] = 1.0
    return ProductTable(gamma, np.fliplr(np.eye(n)))


def biquadratic_gw_data(p: complex = 0.7, q: complex = 0.3) -> GwData:
    """Synthetic two-direction data on C[x, y]/(x^2, y^2), basis 1, x, y, xy.

    Two classes with exponents (1, 1) and (2, 1); class invariants are
    I(T_j, T_i, T_l) = integral of u_i T_j T_l with u = (p xy, p xy) for the
    first class and (2 q xy, q xy) for the second.  Classes built from cup
    products like this commute with the cup product, and the exponent ratio
    matches the invariant ratio, so the resulting connection is flat.
    """
    mono = [(0, 0), (1, 0), (0, 1), (1, 1)]
    index = {e: k for k, e in enumerate(mono)}
    n = 4
    gamma = np.zeros((n, n, n), dtype=complex)
    for i, (a1, b1) in enumerate(mono):
        for j, (a2, b2) in enumerate(mono):
            k = index.get((a1 + a2, b1 + b2))
            if k is not None:
                gamma[i, j, k] = 1.0
    pairing = np.zeros((n, n))
    pairing[0, 3] = pairing[3, 0] = pairing[1, 2] = pairing[2, 1] = 1.0
    cup = ProductTable(gamma, pairing)
    top = np.eye(n)[3]

    def make(u1, u2, exponents):
        inv = np.zeros((n, n, n), dtype=complex)
        for i, u in ((1, u1), (2, u2)):
            for j in range(n):
                for l in range(n):
                    inv[j, i, l] = cup.multiply(cup.multiply(u, np.eye(n)[j]), np.eye(n)[l])[3]
        return GwClass(exponents, inv)

    return GwData(cup, 2, (make(p * top, p * top, (1, 1)), make(2 * q * top, q * top, (2, 1))))
