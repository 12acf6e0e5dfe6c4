"""Multi-index sets and enumeration of the sparse tensor-product DG spaces.

Three admissibility rules are supported for the level multi-index l and
polynomial multi-index i (both length d):

  vhat     |l|_1 <= N
  vtilde   |l|_1 <= N + d - 1 and |l|_inf <= N
  vhathat  |l|_1 <= N and sum(i - 1) <= k

Degrees of freedom are ordered lexicographically in (|l|_1, l, j, i), which
makes every downstream artifact byte-reproducible.  Dimensions of vhat and
vhathat come from a closed-form alternating sum evaluated in exact rational
arithmetic (naive float evaluation cancels badly); vtilde is counted by
enumeration only.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .basis1d import ConfigurationError

KINDS = ("vhat", "vtilde", "vhathat")

DEFAULT_DOF_CAP = 2_000_000


class DimensionCapError(RuntimeError):
    """Predicted DOF count exceeds the configured resource cap."""


def increment_dim(l, k):
    """Dimension of the level-l increment space in 1D."""
    return k + 1 if l == 0 else 2 ** (l - 1) * (k + 1)


def support_1d(l, j):
    """Support interval of a 1D basis function at level l, cell j."""
    if l <= 1:
        return (0.0, 1.0)
    width = 2.0 ** (1 - l)
    return (j * width, (j + 1) * width)


def _brace_sum(d, N):
    """Shared combinatorial factor in the closed-form dimension counts."""
    total = Fraction(1)
    for m in range(d):
        inner = sum(
            comb(N, n) * Fraction(-2) ** (d - m - 1 - n) for n in range(d - m)
        )
        total += comb(d, m) * (Fraction(-1) ** (d - m) + Fraction(2) ** (N + m - d + 1) * inner)
    assert total.denominator == 1
    return int(total)


def dim_closed_form(kind, d, N, k):
    """Exact dimension of vhat or vhathat without enumeration."""
    if kind == "vhat":
        return (k + 1) ** d * _brace_sum(d, N)
    if kind == "vhathat":
        return comb(k + d, d) * _brace_sum(d, N)
    raise ConfigurationError(f"no closed-form dimension for kind {kind!r}")


def full_grid_dim(d, N, k):
    """DOF count of the full tensor grid at uniform level N."""
    val = (2**N * (k + 1)) ** d
    if val >= 2**63:
        raise DimensionCapError(f"full-grid dimension {val} overflows 64-bit indexing")
    return val


def _admissible_levels(kind, d, N):
    if kind == "vtilde":
        cap = N + d - 1
    else:
        cap = N
    levels = [
        l
        for l in itertools.product(range(N + 1), repeat=d)
        if sum(l) <= cap
    ]
    levels.sort(key=lambda l: (sum(l), l))
    return levels


def _poly_list(kind, d, k):
    if kind == "vhathat":
        polys = [
            i
            for i in itertools.product(range(1, k + 2), repeat=d)
            if sum(i) - d <= k
        ]
    else:
        polys = list(itertools.product(range(1, k + 2), repeat=d))
    polys.sort()
    return np.array(polys, dtype=np.int32).reshape(len(polys), d)


@dataclass(frozen=True)
class BasisId:
    level: tuple
    cell: tuple
    poly: tuple


@dataclass(frozen=True)
class LevelBlock:
    level: tuple
    offset: int
    cell_counts: tuple
    ncells: int
    size: int


class SpaceSpec:
    """Fully enumerated sparse space with a fixed DOF ordering."""

    def __init__(self, kind, d, N, k, cap=DEFAULT_DOF_CAP):
        if kind not in KINDS:
            raise ConfigurationError(f"unknown space kind {kind!r}")
        if d < 1 or N < 0 or k < 0:
            raise ConfigurationError(f"bad space parameters d={d}, N={N}, k={k}")
        self.kind, self.d, self.N, self.k = kind, d, N, k
        self.h = 2.0**-N

        self.poly = _poly_list(kind, d, k)
        npoly = len(self.poly)
        level_list = _admissible_levels(kind, d, N)

        blocks, offset = [], 0
        for l in level_list:
            counts = tuple(2 ** max(lm - 1, 0) for lm in l)
            ncells = int(np.prod(counts, dtype=object))
            blocks.append(LevelBlock(l, offset, counts, ncells, ncells * npoly))
            offset += ncells * npoly
        self.dim = offset
        if cap is not None and self.dim > cap:
            raise DimensionCapError(
                f"{kind} space with d={d}, N={N}, k={k} has {self.dim} DOFs, "
                f"over the cap of {cap}"
            )
        self.blocks = blocks
        self._block_of_level = {b.level: b for b in blocks}

        # structure-of-arrays DOF table in enumeration order
        self.levels = np.empty((self.dim, d), dtype=np.int32)
        self.cells = np.empty((self.dim, d), dtype=np.int32)
        self.polys = np.empty((self.dim, d), dtype=np.int32)
        for b in blocks:
            cell_grid = (
                np.stack(
                    np.meshgrid(*[np.arange(c, dtype=np.int32) for c in b.cell_counts],
                                indexing="ij"),
                    axis=-1,
                ).reshape(b.ncells, d)
                if b.ncells > 0
                else np.zeros((0, d), np.int32)
            )
            sl = slice(b.offset, b.offset + b.size)
            self.levels[sl] = np.asarray(b.level, np.int32)
            self.cells[sl] = np.repeat(cell_grid, npoly, axis=0)
            self.polys[sl] = np.tile(self.poly, (b.ncells, 1))

        self._poly_rank = {tuple(p): r for r, p in enumerate(self.poly)}

    @property
    def npoly(self):
        return len(self.poly)

    def ordinal(self, level, cell, poly):
        b = self._block_of_level[tuple(level)]
        jrank = 0
        for c, j in zip(b.cell_counts, cell):
            jrank = jrank * c + j
        return b.offset + jrank * self.npoly + self._poly_rank[tuple(poly)]

    def id_at(self, r):
        return BasisId(tuple(self.levels[r]), tuple(self.cells[r]), tuple(self.polys[r]))

    def ids(self):
        for r in range(self.dim):
            yield self.id_at(r)


def enumerate_space(kind, d, N, k, cap=DEFAULT_DOF_CAP):
    return SpaceSpec(kind, d, N, k, cap=cap)


def supports_overlap(a, b):
    """Whether two tensor supports intersect with positive measure.

    Returns (flag, box); box is the list of per-direction intervals when the
    overlap is nonempty, else None.
    """
    box = []
    for la, ja, lb, jb in zip(a.level, a.cell, b.level, b.cell):
        alo, ahi = support_1d(la, ja)
        blo, bhi = support_1d(lb, jb)
        lo, hi = max(alo, blo), min(ahi, bhi)
        if lo >= hi:
            return False, None
        box.append((lo, hi))
    return True, box
