"""Translation-invariant single-band models and finite real-space Hamiltonians.

A model is a table of hopping amplitudes indexed by integer displacement
vectors plus a complex on-site frequency.  Its Bloch function is the Laurent
generator evaluated on the unit torus,

    H(k) = sum_delta A_delta exp(-i k . delta) + omega0,

with the convention that ``A_delta`` hops *by* +delta, i.e. it lands in matrix
row ``index(n + delta)``, column ``index(n)``.  Finite Hamiltonians are
assembled on a rectangular box with an optional mask of removed sites and a
per-axis boundary closure that interpolates between open and periodic:
OBC (factor 0), PBC (factor 1) and GBC(g) (factor g, applied once per wrapped
axis).  For a single generalized axis this reproduces the entrywise identity

    H_GBC(g) = H_OBC + g (H_PBC - H_OBC).
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "LatticeModel",
    "LatticeDomain",
    "AxisClosure",
    "BoundarySpec",
    "HamiltonianMatrix",
    "model_from_hoppings",
    "bloch_eval",
    "build_domain",
    "letter_mask",
    "assemble",
    "LETTER_BITMAPS",
]

Site = tuple[int, ...]
Displacement = tuple[int, ...]


@dataclass(frozen=True)
class LatticeModel:
    """Hopping table (displacement -> amplitude) plus on-site frequency, Hz."""

    dim: int
    hoppings: tuple[tuple[Displacement, complex], ...]
    onsite: complex

    @property
    def max_range(self) -> int:
        """Infinity-norm of the largest displacement (0 for an empty table)."""
        if not self.hoppings:
            return 0
        return max(max(abs(c) for c in delta) for delta, _ in self.hoppings)

    @property
    def amplitude_scale(self) -> float:
        """max |A_delta|; 0 for an on-site-only model."""
        if not self.hoppings:
            return 0.0
        return max(abs(a) for _, a in self.hoppings)

    @property
    def total_amplitude(self) -> float:
        """sum |A_delta|, a bound on one hop step's weight."""
        return sum(abs(a) for _, a in self.hoppings)

    def hopping_dict(self) -> dict[Displacement, complex]:
        return dict(self.hoppings)

    def displacement_set(self) -> set[Displacement]:
        """Undirected displacement set {+delta, -delta}, used for hop distance."""
        out: set[Displacement] = set()
        for delta, _ in self.hoppings:
            out.add(delta)
            out.add(tuple(-c for c in delta))
        return out

    def descriptor(self) -> str:
        body = repr((self.dim, self.hoppings, self.onsite)).encode()
        return hashlib.sha1(body).hexdigest()[:12]


def model_from_hoppings(
    dim: int,
    hoppings: Mapping[Sequence[int], complex] | Iterable[tuple[Sequence[int], complex]],
    onsite: complex = 0j,
) -> LatticeModel:
    """Build a model from a displacement -> amplitude table.

    Duplicate displacements are summed.  A zero displacement is rejected: the
    on-site term lives in ``onsite``, never in the table.
    """
    if dim < 1 or dim > 3:
        raise ValueError(f"dimension must be 1..3, got {dim}")
    items = hoppings.items() if isinstance(hoppings, Mapping) else hoppings
    table: dict[Displacement, complex] = {}
    for delta, amp in items:
        delta = tuple(int(c) for c in delta)
        if len(delta) != dim:
            raise ValueError(f"displacement {delta} does not match dimension {dim}")
        if all(c == 0 for c in delta):
            raise ValueError("zero displacement is not allowed; use the onsite term")
        amp = complex(amp)
        if not np.isfinite(amp.real) or not np.isfinite(amp.imag):
            raise ValueError(f"non-finite amplitude for displacement {delta}")
        table[delta] = table.get(delta, 0j) + amp
    cleaned = tuple(sorted((d, a) for d, a in table.items() if a != 0))
    return LatticeModel(dim=dim, hoppings=cleaned, onsite=complex(onsite))


def bloch_eval(model: LatticeModel, k: Sequence[float] | float) -> complex:
    """Evaluate the Bloch function sum_delta A_delta e^{-i k.delta} + omega0."""
    kv = np.atleast_1d(np.asarray(k, dtype=float))
    if kv.shape != (model.dim,):
        raise ValueError(f"k must have length {model.dim}")
    out = complex(model.onsite)
    for delta, amp in model.hoppings:
        out += amp * np.exp(-1j * float(np.dot(kv, delta)))
    return out


@dataclass(frozen=True)
class LatticeDomain:
    """Finite site set: a box with optional removed sites, lexicographic order."""

    extents: tuple[int, ...]
    mask: frozenset[Site]
    sites: tuple[Site, ...]
    index: dict[Site, int] = field(compare=False, repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return len(self.extents)

    def descriptor(self) -> str:
        body = repr((self.extents, sorted(self.mask))).encode()
        return hashlib.sha1(body).hexdigest()[:12]


def build_domain(extents: Sequence[int], mask: Iterable[Sequence[int]] = ()) -> LatticeDomain:
    """Enumerate occupied sites of the box minus ``mask`` in lexicographic order."""
    ext = tuple(int(L) for L in extents)
    if not ext or any(L < 1 for L in ext):
        raise ValueError(f"extents must be positive, got {ext}")
    mask_set = frozenset(tuple(int(c) for c in s) for s in mask)
    for s in mask_set:
        if len(s) != len(ext) or any(not (0 <= c < L) for c, L in zip(s, ext)):
            raise ValueError(f"masked site {s} lies outside extents {ext}")
    sites = tuple(s for s in itertools.product(*[range(L) for L in ext]) if s not in mask_set)
    if not sites:
        raise ValueError("fully masked domain: no occupied sites remain")
    index = {s: i for i, s in enumerate(sites)}
    return LatticeDomain(extents=ext, mask=mask_set, sites=sites, index=index)


# Canonical letter bitmaps on a 9x9 block, '.' marks a removed site.  The
# occupied sites draw the glyph; these are repo-defined shapes, versioned here
# and snapshot-tested (the source figures do not enumerate the removed sites).
LETTER_BITMAPS: dict[str, tuple[str, ...]] = {
    "P": (
        "XXXXXXXXX",
        "XXXX..XXX",
        "XXXX..XXX",
        "XXXX..XXX",
        "XXXXXXXXX",
        "XXXX.....",
        "XXXX.....",
        "XXXX.....",
        "XXXX.....",
    ),
    "M": (
        "XXX...XXX",
        "XXXX.XXXX",
        "XXXXXXXXX",
        "XXX.X.XXX",
        "XXX...XXX",
        "XXX...XXX",
        "XXX...XXX",
        "XXX...XXX",
        "XXX...XXX",
    ),
}


def letter_mask(letter: str, extents: Sequence[int] = (9, 9)) -> frozenset[Site]:
    """Removed-site set whose complement draws the given letter.

    The bitmap is anchored at the origin of a (at least) 9x9 box; rows map to
    the first axis, columns to the second.
    """
    if letter not in LETTER_BITMAPS:
        raise ValueError(f"unsupported letter {letter!r}; available: {sorted(LETTER_BITMAPS)}")
    ext = tuple(int(L) for L in extents)
    if len(ext) != 2 or ext[0] < 9 or ext[1] < 9:
        raise ValueError(f"letter masks need 2D extents of at least 9x9, got {ext}")
    rows = LETTER_BITMAPS[letter]
    return frozenset(
        (r, c) for r, line in enumerate(rows) for c, ch in enumerate(line) if ch == "."
    )


@dataclass(frozen=True)
class AxisClosure:
    """Boundary closure of one axis: 'obc', 'pbc' or 'gbc' with strength g."""

    kind: str
    g: float = 0.0

    def __post_init__(self):
        if self.kind not in ("obc", "pbc", "gbc"):
            raise ValueError(f"unknown closure kind {self.kind!r}")
        if self.kind == "gbc" and not (self.g >= 0.0):
            raise ValueError("GBC strength must be a real g >= 0")

    @property
    def wrap_factor(self) -> float:
        if self.kind == "obc":
            return 0.0
        if self.kind == "pbc":
            return 1.0
        return float(self.g)


@dataclass(frozen=True)
class BoundarySpec:
    """Per-axis closures; GBC(0) assembles as OBC and GBC(1) as PBC."""

    axes: tuple[AxisClosure, ...]

    @classmethod
    def open(cls, dim: int) -> "BoundarySpec":
        return cls(tuple(AxisClosure("obc") for _ in range(dim)))

    @classmethod
    def periodic(cls, dim: int) -> "BoundarySpec":
        return cls(tuple(AxisClosure("pbc") for _ in range(dim)))

    @classmethod
    def generalized(cls, g: float, dim: int) -> "BoundarySpec":
        return cls(tuple(AxisClosure("gbc", float(g)) for _ in range(dim)))

    @classmethod
    def from_factors(cls, factors: Sequence[float]) -> "BoundarySpec":
        """Closure list from wrap factors: 0 -> OBC, 1 -> PBC, else GBC(g)."""
        axes = []
        for f in factors:
            f = float(f)
            if f == 0.0:
                axes.append(AxisClosure("obc"))
            elif f == 1.0:
                axes.append(AxisClosure("pbc"))
            else:
                axes.append(AxisClosure("gbc", f))
        return cls(tuple(axes))

    @property
    def dim(self) -> int:
        return len(self.axes)

    def wrap_factors(self) -> tuple[float, ...]:
        return tuple(ax.wrap_factor for ax in self.axes)

    def label(self) -> str:
        parts = []
        for ax in self.axes:
            parts.append(f"gbc{ax.g:g}" if ax.kind == "gbc" else ax.kind)
        return "-".join(parts)


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Dense complex Hamiltonian with back-references to its ingredients."""

    matrix: np.ndarray
    domain: LatticeDomain
    model: LatticeModel
    boundary: BoundarySpec
    descriptor: str

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]


def assemble(
    model: LatticeModel, domain: LatticeDomain, boundary: BoundarySpec
) -> HamiltonianMatrix:
    """Assemble the finite Hamiltonian under the given boundary closures.

    Hops exiting the box along an axis wrap modulo the extent and pick up that
    axis's factor (0 drops the hop); hops landing on masked sites are dropped.
    A hop that wraps back onto its own source site is dropped, so a 1-site
    domain assembles to ``[[onsite]]``.
    """
    if boundary.dim != domain.dim or model.dim != domain.dim:
        raise ValueError(
            f"dimension mismatch: model {model.dim}, domain {domain.dim}, "
            f"boundary {boundary.dim}"
        )
    factors = boundary.wrap_factors()
    ext = domain.extents
    n = domain.n_sites
    H = np.zeros((n, n), dtype=complex)
    np.fill_diagonal(H, model.onsite)
    for site in domain.sites:
        j = domain.index[site]
        for delta, amp in model.hoppings:
            target = tuple(c + d for c, d in zip(site, delta))
            weight = 1.0
            for a, (c, L) in enumerate(zip(target, ext)):
                if c < 0 or c >= L:
                    weight *= factors[a]
            if weight == 0.0:
                continue
            wrapped = tuple(c % L for c, L in zip(target, ext))
            if wrapped == site:
                continue
            i = domain.index.get(wrapped)
            if i is None:
                continue
            H[i, j] += amp * weight
    H.setflags(write=False)
    descriptor = f"{model.descriptor()}-{domain.descriptor()}-{boundary.label()}"
    return HamiltonianMatrix(
        matrix=H, domain=domain, model=model, boundary=boundary, descriptor=descriptor
    )
