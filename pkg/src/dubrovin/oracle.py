"""Fixed-step RK4 reference integrator for the matrix ODEs.

Integration runs along the straight segment from 0 to ``end`` in the complex
t-plane: with t = s * end the ODE becomes dB/ds = end * F(s * end, B) on
s in [0, 1].  Each run is repeated with half the steps, and the Richardson
estimate |B_h - B_{2h}| / 15 is returned next to the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .linalg import as_cmatrix, max_norm
from .series import ExpOdeSystem


class OracleError(RuntimeError):
    """The step-doubling estimate exceeded the caller's tolerance."""

    def __init__(self, message: str, value=None, estimate: float | None = None):
        super().__init__(message)
        self.value = value
        self.estimate = estimate


@dataclass(frozen=True)
class OdePath:
    end: complex
    steps: int = 4096
    start: complex = 0.0

    def __post_init__(self):
        if complex(self.start) != 0:
            raise ValueError("paths always start at t = 0")
        if self.steps < 16 or self.steps % 2:
            raise ValueError("steps must be an even integer >= 16")
        object.__setattr__(self, "end", complex(self.end))


class OracleResult(NamedTuple):
    value: np.ndarray
    estimate: float


def _rk4(f: Callable[[complex, np.ndarray], np.ndarray], dim: int, end: complex, steps: int) -> np.ndarray:
    h = end / steps
    B = np.eye(dim, dtype=complex)
    for i in range(steps):
        t = i * h
        k1 = f(t, B)
        k2 = f(t + h / 2, B + (h / 2) * k1)
        k3 = f(t + h / 2, B + (h / 2) * k2)
        k4 = f(t + h, B + h * k3)
        B = B + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return B


def _integrate(f, dim: int, path: OdePath, tol: float | None) -> OracleResult:
    fine = _rk4(f, dim, path.end, path.steps)
    coarse = _rk4(f, dim, path.end, path.steps // 2)
    est = max_norm(fine - coarse) / 15.0
    if tol is not None and est > tol:
        raise OracleError(f"step-doubling estimate {est:.3e} exceeds tol {tol:.1e}", fine, est)
    return OracleResult(fine, est)


def rk_integrate(sys: ExpOdeSystem, path: OdePath, tol: float | None = 1e-8) -> OracleResult:
    """B(path.end) for ``sys`` with B(0) = Id."""
    return _integrate(sys.rhs, sys.dim, path, tol)


def rk_integrate_poly(A, Cs: Sequence, path: OdePath, tol: float | None = 1e-8) -> OracleResult:
    """B(path.end) for B' = B (A + sum_{n>=1} t^n C_n), B(0) = Id; ``Cs[0]`` is C_1."""
    A = as_cmatrix(A)
    Cs = [as_cmatrix(C) for C in Cs]

    def f(t, B):
        M = A.copy()
        tn = 1.0 + 0j
        for C in Cs:
            tn *= t
            M = M + tn * C
        return B @ M

    return _integrate(f, A.shape[0], path, tol)
