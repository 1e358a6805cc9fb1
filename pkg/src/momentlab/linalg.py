"""Dense non-Hermitian linear algebra: spectra, resolvents, power traces.

Eigenvalues go through LAPACK's general dense solver (Hessenberg reduction
plus shifted QR), which is deterministic for identical input.  Matrix-power
traces are computed by repeated dense multiplication, never from eigenvalues,
so the two moment routes stay independent of each other.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import CostGuardError, EigenSolverError, SingularShiftError
from .lattice import HamiltonianMatrix

__all__ = [
    "ComplexSpectrum",
    "eigenvalues",
    "resolvent",
    "shifted_power_trace",
    "shifted_power_trace_series",
    "MAX_POWER_ORDER",
]

# Traces use iterated float multiplication; beyond this order the dynamic
# range of intermediate magnitudes (~ (sum|A|)^m) erodes the mantissa.
MAX_POWER_ORDER = 20


@dataclass(frozen=True)
class ComplexSpectrum:
    """All eigenvalues of one assembled Hamiltonian, multiplicity included."""

    values: np.ndarray
    source: str = ""

    def __len__(self) -> int:
        return len(self.values)

    def centered(self, omega0: complex) -> np.ndarray:
        return self.values - complex(omega0)


def _as_matrix(H) -> tuple[np.ndarray, str]:
    if isinstance(H, HamiltonianMatrix):
        return H.matrix, H.descriptor
    A = np.asarray(H, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A, ""


def eigenvalues(H) -> ComplexSpectrum:
    """Full spectrum of a dense complex matrix; no ordering guarantee."""
    A, src = _as_matrix(H)
    if A.shape[0] < 1:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    try:
        vals = sla.eigvals(A)
    except sla.LinAlgError as exc:  # pragma: no cover - rare LAPACK failure
        raise EigenSolverError(f"dense eigensolver failed: {exc}") from exc
    return ComplexSpectrum(values=vals, source=src)


def resolvent(H, omega: complex) -> np.ndarray:
    """Green's function G(omega) = (omega - H)^{-1}.

    Raises :class:`SingularShiftError` with a condition estimate when the
    shifted matrix is singular or the solve residual exceeds 1e-10 * ||H||
    (Frobenius norms).
    """
    A, _ = _as_matrix(H)
    n = A.shape[0]
    shifted = complex(omega) * np.eye(n) - A
    try:
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore")
            X = sla.solve(shifted, np.eye(n, dtype=complex))
    except sla.LinAlgError as exc:
        raise SingularShiftError(
            f"singular shift omega={omega}", condition=np.inf
        ) from exc
    norm_h = np.linalg.norm(A)
    if np.all(np.isfinite(X)):
        residual = np.linalg.norm(shifted @ X - np.eye(n))
    else:
        residual = np.inf
    if not (residual <= 1e-10 * max(norm_h, 1.0)):
        cond = float(np.linalg.cond(shifted)) if np.all(np.isfinite(shifted)) else np.inf
        raise SingularShiftError(
            f"ill-conditioned shift omega={omega}: residual {residual:.3e} "
            f"exceeds 1e-10*||H||",
            condition=cond,
        )
    return X


def shifted_power_trace(H, omega0: complex, m: int) -> complex:
    """Tr[(H - omega0 I)^m] by repeated multiplication; m = 0 returns N."""
    m = int(m)
    if m < 0:
        raise ValueError("moment order m must be >= 0")
    if m == 0:
        return complex(_as_matrix(H)[0].shape[0])
    return complex(shifted_power_trace_series(H, omega0, m)[-1])


def shifted_power_trace_series(H, omega0: complex, m_max: int) -> np.ndarray:
    """Traces Tr[(H - omega0 I)^m] for m = 1..m_max in one sweep."""
    A, _ = _as_matrix(H)
    m_max = int(m_max)
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if m_max > MAX_POWER_ORDER:
        raise CostGuardError(
            f"power-trace order {m_max} exceeds the supported m <= {MAX_POWER_ORDER}"
        )
    B = A - complex(omega0) * np.eye(A.shape[0])
    out = np.empty(m_max, dtype=complex)
    P = B.copy()
    out[0] = np.trace(P)
    for m in range(2, m_max + 1):
        P = P @ B
        out[m - 1] = np.trace(P)
    return out
