"""Spectral moments, exact bulk weights, finite-size deviations and fits.

The per-site central moment of order m is

    M_m = (1/N) sum_j (E_j - omega0)^m,

with the full complex on-site frequency subtracted.  Its thermodynamic target
w_m is the constant Laurent coefficient of the m-th power of the hopping
generator, computed exactly by iterated coefficient-table convolution.  The
relative deviation r(m, L) = |M_m - w_m| / |w_m| obeys a 1/L law whose
prefactor grows with the moment order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CostGuardError
from .lattice import LatticeModel
from .linalg import ComplexSpectrum

__all__ = [
    "MomentSeries",
    "BulkMoments",
    "DeviationSeries",
    "PowerLawFit",
    "eigen_moments",
    "bulk_moments",
    "deviations",
    "fit_power_law",
    "hausdorff_distance",
    "spectral_scale",
    "moment_collapse_spread",
]

# Coefficient tables beyond this entry count are refused; with range R and
# order m the table holds (2 m R + 1)^d entries.
MAX_TABLE_ENTRIES = 2_000_000


@dataclass(frozen=True)
class MomentSeries:
    """Central moments M_m for m = 1..m_max of one measured/computed spectrum."""

    orders: np.ndarray
    values: np.ndarray
    omega0: complex
    n_sites: int
    source: str = ""

    def value(self, m: int) -> complex:
        return complex(self.values[int(m) - 1])


@dataclass(frozen=True)
class BulkMoments:
    """Thermodynamic weights w_m: constant Laurent coefficients of generator powers."""

    orders: np.ndarray
    values: np.ndarray
    model: LatticeModel
    centered: bool = True

    def value(self, m: int) -> complex:
        return complex(self.values[int(m) - 1])


@dataclass(frozen=True)
class DeviationSeries:
    """r(m, L) = |M_m - w_m| / |w_m| with validity flags for vanishing w_m."""

    orders: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    eps_denom: np.ndarray


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float
    n_points: int


def eigen_moments(
    spectrum: ComplexSpectrum | np.ndarray,
    omega0: complex,
    m_max: int,
    source: str = "",
) -> MomentSeries:
    """Central moments of a spectrum: M_m = mean((E - omega0)^m), m = 1..m_max."""
    if isinstance(spectrum, ComplexSpectrum):
        values = spectrum.values
        source = source or spectrum.source
    else:
        values = np.asarray(spectrum, dtype=complex)
    if values.size == 0:
        raise ValueError("empty spectrum")
    m_max = int(m_max)
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    x = values - complex(omega0)
    orders = np.arange(1, m_max + 1)
    mom = np.array([np.mean(x**m) for m in orders])
    return MomentSeries(
        orders=orders, values=mom, omega0=complex(omega0), n_sites=values.size, source=source
    )


def _zero_key(dim: int) -> tuple[int, ...]:
    return tuple(0 for _ in range(dim))


def bulk_moments(model: LatticeModel, m_max: int, centered: bool = True) -> BulkMoments:
    """Exact w_m by convolving the generator's coefficient table m times.

    With ``centered=False`` the on-site frequency is kept in the generator, so
    the returned values are the thermodynamic non-central moments.
    """
    m_max = int(m_max)
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    base: dict[tuple[int, ...], complex] = {d: a for d, a in model.hoppings}
    if not centered:
        key = _zero_key(model.dim)
        base[key] = base.get(key, 0j) + model.onsite
    zero = _zero_key(model.dim)
    if not base:
        vals = np.zeros(m_max, dtype=complex)
        return BulkMoments(np.arange(1, m_max + 1), vals, model, centered)
    limit = (2 * m_max * max(model.max_range, 1) + 1) ** model.dim
    if limit > MAX_TABLE_ENTRIES:
        raise CostGuardError(
            f"coefficient table would hold up to {limit} entries "
            f"(limit {MAX_TABLE_ENTRIES}); reduce m_max or the hop range"
        )
    current: dict[tuple[int, ...], complex] = {zero: 1.0 + 0j}
    out = np.empty(m_max, dtype=complex)
    for m in range(1, m_max + 1):
        nxt: dict[tuple[int, ...], complex] = {}
        for d1, c1 in current.items():
            for d2, c2 in base.items():
                key = tuple(a + b for a, b in zip(d1, d2))
                nxt[key] = nxt.get(key, 0j) + c1 * c2
        current = nxt
        out[m - 1] = current.get(zero, 0j)
    return BulkMoments(np.arange(1, m_max + 1), out, model, centered)


def deviations(series: MomentSeries, bulk: BulkMoments) -> DeviationSeries:
    """Relative deviations r(m, L); entries with |w_m| <= eps are flagged invalid.

    eps_denom = 1e-9 * (max|A_delta|)^m, so symmetry-vanishing bulk moments are
    never divided through.
    """
    if len(series.orders) != len(bulk.orders) or not np.array_equal(series.orders, bulk.orders):
        raise ValueError("moment series and bulk moments must cover the same orders")
    scale = max(bulk.model.amplitude_scale, abs(bulk.model.onsite) if not bulk.centered else 0.0)
    eps = 1e-9 * np.power(max(scale, np.finfo(float).tiny), series.orders.astype(float))
    denom = np.abs(bulk.values)
    valid = denom > eps
    r = np.zeros(len(series.orders), dtype=float)
    r[valid] = np.abs(series.values[valid] - bulk.values[valid]) / denom[valid]
    return DeviationSeries(orders=series.orders.copy(), values=r, valid=valid, eps_denom=eps)


def fit_power_law(points: Sequence[tuple[float, float]]) -> PowerLawFit:
    """Unweighted OLS of log y on log x; returns exponent, prefactor and R^2."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError(f"power-law fit needs at least 3 points, got {len(pts)}")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("power-law fit requires strictly positive x and y")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum((A @ np.array([slope, intercept]) - ly) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(
        exponent=float(slope),
        prefactor=float(np.exp(intercept)),
        r_squared=r2,
        n_points=len(pts),
    )


def hausdorff_distance(a: np.ndarray | ComplexSpectrum, b: np.ndarray | ComplexSpectrum) -> float:
    """Hausdorff distance between two eigenvalue sets in the complex plane."""
    av = a.values if isinstance(a, ComplexSpectrum) else np.asarray(a, dtype=complex)
    bv = b.values if isinstance(b, ComplexSpectrum) else np.asarray(b, dtype=complex)
    d = np.abs(av[:, None] - bv[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def spectral_scale(spectra: Sequence[ComplexSpectrum | np.ndarray], omega0: complex) -> float:
    """B = max |E - omega0| over all supplied spectra: the moment scale base."""
    best = 0.0
    for s in spectra:
        v = s.values if isinstance(s, ComplexSpectrum) else np.asarray(s, dtype=complex)
        best = max(best, float(np.abs(v - complex(omega0)).max()))
    return best


def moment_collapse_spread(
    series_list: Sequence[MomentSeries], m_max: int, scale: float
) -> float:
    """Dimensionless spread of moments across boundary configurations.

    Per order m the spread is the standard deviation of |M_m| across the
    configurations divided by scale^m (moments of a spectrum of radius B about
    omega0 are bounded by B^m, so this is the natural normalization); the
    returned figure aggregates orders 1..m_max by the root mean square.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    per_order = []
    for m in range(1, int(m_max) + 1):
        vals = np.array([abs(s.value(m)) for s in series_list])
        per_order.append(vals.std() / scale**m)
    return float(np.sqrt(np.mean(np.square(per_order))))
