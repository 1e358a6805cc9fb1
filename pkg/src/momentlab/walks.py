"""Weighted closed-walk enumeration: rooted sums, bulk weights, missing weights.

Tr[(H - omega0)^m] decomposes into rooted sums over length-m closed walks that
use only nonzero displacements.  Deep-bulk roots collect the full thermodynamic
weight w_m; roots near a boundary (or a masked site, or a rescaled wrap bond)
lose the walks that would cross it, and the shortfall delta_m(i) = w_m - S_m(i)
is confined to a shell of hop distance floor(m/2) from the defect.

Two independent engines are provided: exhaustive depth-first enumeration over
displacement sequences for tiny instances (the oracle) and m-step
matrix-vector propagation for production sizes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import CostGuardError
from .lattice import BoundarySpec, HamiltonianMatrix, LatticeDomain, LatticeModel, assemble, build_domain
from .linalg import shifted_power_trace

__all__ = [
    "WalkLedger",
    "DecompositionReport",
    "rooted_walk_sum",
    "bulk_walk_weight",
    "missing_weight",
    "walk_ledger",
    "boundary_distance",
    "decomposition_check",
    "UNBOUNDED_DISTANCE",
]

# Distance assigned to sites whose hop ball never meets a boundary defect
# (e.g. pure PBC with no mask): effectively infinite.
UNBOUNDED_DISTANCE = np.iinfo(np.int64).max

# Exhaustive DFS refuses more than this many displacement sequences.
MAX_DFS_SEQUENCES = 5_000_000


@dataclass(frozen=True)
class WalkLedger:
    """Per-site rooted walk sums and missing weights at one order m."""

    order: int
    sites: tuple
    rooted: np.ndarray
    bulk_weight: complex
    missing: np.ndarray
    distance: np.ndarray
    shell: np.ndarray

    @property
    def shell_bound(self) -> int:
        return self.order // 2


@dataclass(frozen=True)
class DecompositionReport:
    """Check of (1/N) Tr[(H-w0)^m] == w_m - (1/N) sum_i delta_m(i)."""

    order: int
    n_sites: int
    trace_per_site: complex
    decomposed: complex
    rel_error: float
    shell_bound: int
    shell_observed: int
    shell_confined: bool
    passed: bool


def _offdiag(model: LatticeModel, domain: LatticeDomain, boundary: BoundarySpec) -> np.ndarray:
    H = assemble(model, domain, boundary).matrix
    A = H - model.onsite * np.eye(domain.n_sites)
    return A


def _root_index(domain: LatticeDomain, root) -> int:
    if isinstance(root, (int, np.integer)):
        i = int(root)
        if not (0 <= i < domain.n_sites):
            raise ValueError(f"root index {i} out of range")
        return i
    site = tuple(int(c) for c in root)
    if site not in domain.index:
        raise ValueError(f"root site {site} is not occupied")
    return domain.index[site]


def rooted_walk_sum(
    model: LatticeModel,
    domain: LatticeDomain,
    boundary: BoundarySpec,
    root,
    m: int,
    method: str = "propagate",
) -> complex:
    """Weight sum of all length-m closed walks rooted at ``root``.

    On-site steps are excluded; walks follow the assembled off-diagonal
    structure, so wrap bonds carry their closure factors.  ``method`` is
    'propagate' (m matrix-vector products) or 'dfs' (exhaustive oracle).
    """
    m = int(m)
    if m < 1:
        raise ValueError("walk length m must be >= 1")
    i = _root_index(domain, root)
    if method == "propagate":
        A = _offdiag(model, domain, boundary)
        v = np.zeros(domain.n_sites, dtype=complex)
        v[i] = 1.0
        for _ in range(m):
            v = A @ v
        return complex(v[i])
    if method == "dfs":
        return _dfs_rooted_sum(model, domain, boundary, i, m)
    raise ValueError(f"unknown method {method!r}")


def _dfs_rooted_sum(
    model: LatticeModel, domain: LatticeDomain, boundary: BoundarySpec, root_idx: int, m: int
) -> complex:
    hops = list(model.hoppings)
    if len(hops) ** m > MAX_DFS_SEQUENCES:
        raise CostGuardError(
            f"DFS over {len(hops)}^{m} displacement sequences exceeds the guard"
        )
    factors = boundary.wrap_factors()
    ext = domain.extents
    index = domain.index
    start = domain.sites[root_idx]

    total = 0j

    def walk(site, weight, steps_left):
        nonlocal total
        if steps_left == 0:
            if site == start:
                total += weight
            return
        for delta, amp in hops:
            target = tuple(c + d for c, d in zip(site, delta))
            w = weight * amp
            for a, (c, L) in enumerate(zip(target, ext)):
                if c < 0 or c >= L:
                    w *= factors[a]
            if w == 0j:
                continue
            wrapped = tuple(c % L for c, L in zip(target, ext))
            if wrapped == site or wrapped not in index:
                continue
            walk(wrapped, w, steps_left - 1)

    walk(start, 1.0 + 0j, m)
    return total


def bulk_walk_weight(model: LatticeModel, m: int) -> complex:
    """Thermodynamic w_m from a fully-sampled open patch around one root.

    The patch half-width ceil(m/2) * R + 1 guarantees no length-m walk from
    the central root can reach the patch boundary.
    """
    m = int(m)
    if m < 1:
        raise ValueError("walk length m must be >= 1")
    if not model.hoppings:
        return 0j
    half = (m + 1) // 2 * model.max_range + 1
    extents = tuple(2 * half + 1 for _ in range(model.dim))
    domain = build_domain(extents)
    center = tuple(half for _ in range(model.dim))
    return rooted_walk_sum(model, domain, BoundarySpec.open(model.dim), center, m)


def missing_weight(
    model: LatticeModel, domain: LatticeDomain, boundary: BoundarySpec, root, m: int
) -> complex:
    """delta_m(i) = w_m - S_m(i): the weight of boundary-truncated walks."""
    return bulk_walk_weight(model, m) - rooted_walk_sum(model, domain, boundary, root, m)


def boundary_distance(
    model: LatticeModel, domain: LatticeDomain, boundary: BoundarySpec
) -> np.ndarray:
    """Hop distance from every site to the nearest boundary defect.

    Distance counts undirected hops (edges n <-> n+delta for every tabled
    displacement).  A defect is any hop whose assembled bond differs from the
    infinite lattice: stepping outside the box along an axis with wrap factor
    != 1, or onto a masked site.  Distance 1 means the site itself has such a
    hop; sites never reaching a defect get UNBOUNDED_DISTANCE.  Winding around
    pure-PBC axes is not a defect (relevant only when L <= m R).
    """
    factors = boundary.wrap_factors()
    ext = domain.extents
    moves = sorted(model.displacement_set())
    dist = np.full(domain.n_sites, UNBOUNDED_DISTANCE, dtype=np.int64)
    queue: deque[int] = deque()
    for j, site in enumerate(domain.sites):
        contact = False
        for delta in moves:
            target = tuple(c + d for c, d in zip(site, delta))
            modified = False
            for a, (c, L) in enumerate(zip(target, ext)):
                if c < 0 or c >= L:
                    if factors[a] != 1.0:
                        modified = True
            wrapped = tuple(c % L for c, L in zip(target, ext))
            if modified or (wrapped != site and wrapped not in domain.index):
                contact = True
                break
        if contact:
            dist[j] = 1
            queue.append(j)
    # BFS inward along defect-free undirected hops
    while queue:
        j = queue.popleft()
        site = domain.sites[j]
        for delta in moves:
            target = tuple(c + d for c, d in zip(site, delta))
            ok = True
            for a, (c, L) in enumerate(zip(target, ext)):
                if (c < 0 or c >= L) and factors[a] != 1.0:
                    ok = False
            if not ok:
                continue
            wrapped = tuple(c % L for c, L in zip(target, ext))
            i = domain.index.get(wrapped)
            if i is None or dist[i] <= dist[j] + 1:
                continue
            dist[i] = dist[j] + 1
            queue.append(i)
    return dist


def walk_ledger(
    model: LatticeModel, domain: LatticeDomain, boundary: BoundarySpec, m: int
) -> WalkLedger:
    """Rooted sums, missing weights and shell classification for all sites."""
    m = int(m)
    if m < 1:
        raise ValueError("walk length m must be >= 1")
    A = _offdiag(model, domain, boundary)
    P = A.copy()
    for _ in range(m - 1):
        P = P @ A
    rooted = np.diag(P).copy()
    w_m = bulk_walk_weight(model, m)
    missing = w_m - rooted
    dist = boundary_distance(model, domain, boundary)
    shell = dist <= m // 2
    return WalkLedger(
        order=m,
        sites=domain.sites,
        rooted=rooted,
        bulk_weight=w_m,
        missing=missing,
        distance=dist,
        shell=shell,
    )


def decomposition_check(
    model: LatticeModel, domain: LatticeDomain, boundary: BoundarySpec, m: int
) -> DecompositionReport:
    """Verify the decomposition identity and the shell confinement of delta_m.

    Compares (1/N) Tr[(H - omega0)^m] (independent trace route) against
    w_m - (1/N) sum_i delta_m(i) (ledger route) at 1e-10 relative tolerance,
    floored against the walk-weight rounding scale for identically-vanishing
    orders.
    """
    m = int(m)
    if m > 8:
        raise CostGuardError(f"decomposition_check supports m <= 8, got {m}")
    if domain.n_sites > 200:
        raise CostGuardError(
            f"decomposition_check supports N <= 200, got {domain.n_sites}"
        )
    ledger = walk_ledger(model, domain, boundary, m)
    H = assemble(model, domain, boundary)
    n = domain.n_sites
    lhs = shifted_power_trace(H, model.onsite, m) / n
    rhs = ledger.bulk_weight - np.sum(ledger.missing) / n
    scale_floor = 1e-13 * max(model.total_amplitude, 1.0) ** m
    tol = 1e-10 * max(abs(lhs), abs(rhs)) + scale_floor
    err = abs(lhs - rhs)
    rel = err / max(abs(lhs), abs(rhs), scale_floor)
    nonzero = np.abs(ledger.missing) > scale_floor
    if nonzero.any():
        observed = int(ledger.distance[nonzero].max())
    else:
        observed = 0
    confined = observed <= ledger.shell_bound
    return DecompositionReport(
        order=m,
        n_sites=n,
        trace_per_site=complex(lhs),
        decomposed=complex(rhs),
        rel_error=float(rel),
        shell_bound=ledger.shell_bound,
        shell_observed=observed,
        shell_confined=confined,
        passed=bool(err <= tol and confined),
    )
