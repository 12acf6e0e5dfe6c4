"""One-dimensional hierarchical multiwavelet bases on [0,1].

Two families are provided: the orthonormal multiwavelets (piecewise polynomials
with vanishing moments, orthonormal across levels) and an antisymmetric
non-orthogonal variant built from signed monomials, needed by the degree-sparse
tensor space.  All polynomial pieces are stored as coefficients in the
orthonormal shifted Legendre basis of their interval, which keeps conditioning
flat up to degree 9 where raw monomials would already be in trouble.

Conventions: the unit interval is split into half-open dyadic cells; point
evaluation is right-continuous at interior breakpoints (the left limit is used
at x = 1 so values stay finite on the closed box).  One-sided limits are
available separately wherever jumps matter.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as _leg
from numpy.polynomial import Polynomial


def _ortho_scale(lo, hi, ncoef):
    """Scale factors turning orthonormal-Legendre coeffs into plain legval coeffs."""
    q = np.arange(ncoef)
    return np.sqrt((2.0 * q + 1.0) / (hi - lo))


@dataclass(frozen=True)
class PolyPiece:
    """A polynomial on [lo, hi], coefficients in the interval's orthonormal Legendre basis."""

    lo: float
    hi: float
    coef: np.ndarray

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x, deriv=0):
        """Evaluate the piece (or its deriv-th derivative) at points x."""
        x = np.asarray(x, dtype=float)
        c = self.coef * _ortho_scale(self.lo, self.hi, len(self.coef))
        scale = 2.0 / (self.hi - self.lo)
        for _ in range(deriv):
            c = _leg.legder(c) * scale
            if len(c) == 0:
                return np.zeros_like(x)
        t = scale * (x - self.lo) - 1.0
        return _leg.legval(t, c)

    @property
    def degree(self):
        return len(self.coef) - 1

    def monomial_coeffs(self):
        """Coefficients in the ascending monomial basis of the global variable x."""
        c = self.coef * _ortho_scale(self.lo, self.hi, len(self.coef))
        p = Polynomial(_leg.leg2poly(c))
        scale = 2.0 / (self.hi - self.lo)
        t_of_x = Polynomial([-scale * self.lo - 1.0, scale])
        return p(t_of_x).coef


def _gauss01(m):
    x, w = _leg.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _ortho_leg_values(qmax, t01, width=1.0):
    """Rows q = 0..qmax of orthonormal Legendre values at points t01 in [0,1]."""
    out = np.empty((qmax + 1, len(t01)))
    for q in range(qmax + 1):
        e = np.zeros(q + 1)
        e[q] = 1.0
        out[q] = _leg.legval(2.0 * t01 - 1.0, e) * math.sqrt((2.0 * q + 1.0) / width)
    return out


def _moment_rows(k, moments):
    """Rows M[m, q] = integral over (0,1) of t^m times orthonormal Legendre_q(t)."""
    mmax = max(moments)
    x, w = _gauss01(k + mmax // 2 + 2)
    vals = _ortho_leg_values(k, x)
    rows = np.empty((len(moments), k + 1))
    for r, m in enumerate(moments):
        rows[r] = vals @ (w * x**m)
    return rows


class ConfigurationError(ValueError):
    """Raised for parameters outside the supported construction range."""


def build_alpert_generators(k):
    """Construct the k+1 orthonormal generators f_i on [-1,1].

    Each f_i restricts to a degree-k polynomial on (0,1), extends to (-1,0)
    with parity (-1)^(i+k), has vanishing moments against x^m for
    m <= i+k-2 of matching parity (odd-parity moments vanish identically),
    and the family is orthonormal on [-1,1].  Within each parity class the
    admissible polynomial is pinned down, up to sign, by a one-dimensional
    null space; computing it by SVD reproduces what repeated Gram-Schmidt
    would give without the conditioning loss.  Sign is fixed by a positive
    leading coefficient on (0,1).

    Returns a list of (left_piece, right_piece) PolyPiece pairs, entry i-1.
    """
    if not (0 <= k <= 9):
        raise ConfigurationError(f"generator degree k={k} outside supported range 0..9")
    right = [None] * (k + 1)
    for parity_class in (0, 1):
        chosen = []
        for i in range(k + 1, 0, -1):
            if (i + k) % 2 != parity_class:
                continue
            moments = [m for m in range(i + k - 1) if m % 2 == (i + k) % 2]
            rows = []
            if moments:
                rows.append(_moment_rows(k, moments))
            if chosen:
                rows.append(np.vstack(chosen))
            if rows:
                a = np.vstack(rows)
                u_, s, vt = np.linalg.svd(a)
                if s[-1] > 1e-10 * s[0] and a.shape[0] >= k + 1:
                    raise ConfigurationError(f"no null direction for generator {i}")
                c = vt[-1]
            else:
                c = np.zeros(k + 1)
                c[0] = 1.0
            top = np.flatnonzero(np.abs(c) > 1e-12 * np.abs(c).max())[-1]
            if c[top] < 0:
                c = -c
            chosen.append(c)
            right[i - 1] = c / math.sqrt(2.0)

    out = []
    for i in range(1, k + 2):
        c = right[i - 1]
        sign = (-1.0) ** (i + k)
        # reflecting x -> -x flips the sign of odd-degree Legendre coefficients
        flip = c * (-1.0) ** np.arange(k + 1)
        out.append((PolyPiece(-1.0, 0.0, sign * flip), PolyPiece(0.0, 1.0, c.copy())))
    return out


def _fit_piece(lo, hi, poly, k):
    """Exact orthonormal-Legendre coefficients of a Polynomial on [lo, hi]."""
    x, w = _gauss01(k + 2)
    pts = lo + (hi - lo) * x
    vals = poly(pts)
    basis = _ortho_leg_values(k, x, width=hi - lo)
    return PolyPiece(lo, hi, (hi - lo) * (basis @ (w * vals)))


def build_nonorthogonal_generators(k):
    """Signed-monomial generators: fhat_i = x^(i-1) on (-1,0) and -x^(i-1) on (0,1).

    Returns (f_pairs, h_pairs): f_pairs are the PolyPiece pairs on [-1,1],
    h_pairs the [0,1]-scaled versions hhat_i(x) = sqrt(2) fhat_i(2x-1).
    Both keep the defining normalization, so they are not unit-norm.
    """
    if k < 0:
        raise ConfigurationError("degree must be nonnegative")
    f_pairs, h_pairs = [], []
    to_ref = Polynomial([-1.0, 2.0])  # x -> 2x-1
    for i in range(1, k + 2):
        mono = Polynomial.basis(i - 1)
        f_pairs.append(
            (_fit_piece(-1.0, 0.0, mono, k), _fit_piece(0.0, 1.0, -mono, k))
        )
        h_pairs.append(
            (
                _fit_piece(0.0, 0.5, math.sqrt(2.0) * mono(to_ref), k),
                _fit_piece(0.5, 1.0, -math.sqrt(2.0) * mono(to_ref), k),
            )
        )
    return f_pairs, h_pairs


@dataclass(frozen=True)
class Wavelet1D:
    """One member of a 1D hierarchical family: level n, cell j, polynomial index i."""

    i: int
    n: int
    j: int
    pieces: tuple
    support: tuple

    @property
    def breakpoint(self):
        lo, hi = self.support
        return 0.5 * (lo + hi)

    def eval(self, x, deriv=0):
        """Right-continuous evaluation on [0,1]; left limit at x = 1."""
        scalar = np.isscalar(x) or getattr(x, "ndim", 1) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        lo, hi = self.support
        if len(self.pieces) == 1:
            inside = (x >= lo) & (x <= hi)
            out[inside] = self.pieces[0].eval(x[inside], deriv)
        else:
            mid = self.breakpoint
            left = (x >= lo) & (x < mid)
            right = (x >= mid) & (x < hi)
            if hi == 1.0:
                right |= x == 1.0
            out[left] = self.pieces[0].eval(x[left], deriv)
            out[right] = self.pieces[1].eval(x[right], deriv)
        return float(out[0]) if scalar else out

    def eval_one_sided(self, x, deriv=0):
        """(left limit, right limit) at a point; zero where no piece touches."""
        left = right = 0.0
        for p in self.pieces:
            if p.lo < x <= p.hi:
                left = float(p.eval(np.array([x]), deriv)[0])
            if p.lo <= x < p.hi:
                right = float(p.eval(np.array([x]), deriv)[0])
        return left, right


def _scale_to(piece, lo, hi, factor):
    """Map a PolyPiece affinely onto [lo, hi], multiplying values by factor.

    In the orthonormal representation an affine change of interval only
    rescales coefficients by the square root of the width ratio.
    """
    width_ratio = (hi - lo) / (piece.hi - piece.lo)
    return PolyPiece(lo, hi, piece.coef * factor * math.sqrt(width_ratio))


@functools.lru_cache(maxsize=None)
def _cached_generators(k, family):
    if family == "orthonormal":
        return tuple(build_alpert_generators(k))
    if family == "antisymmetric":
        return tuple(build_nonorthogonal_generators(k)[0])
    raise ConfigurationError(f"unknown family {family!r}")


def make_wavelet(k, n, j, i, family="orthonormal", unit_norm=True):
    """Construct a single scaled basis function without building a whole family."""
    if n == 0:
        c = np.zeros(k + 1)
        c[i - 1] = 1.0
        return Wavelet1D(i, 0, 0, (PolyPiece(0.0, 1.0, c),), (0.0, 1.0))
    gl, gr = _cached_generators(k, family)[i - 1]
    amp = 2.0 ** (n / 2.0)
    if family == "antisymmetric" and unit_norm:
        amp /= math.sqrt(2.0 / (2 * i - 1))
    width = 2.0 ** (1 - n)
    lo = j * width
    mid = lo + width / 2.0
    hi = lo + width
    return Wavelet1D(i, n, j, (_scale_to(gl, lo, mid, amp), _scale_to(gr, mid, hi, amp)), (lo, hi))


@functools.lru_cache(maxsize=64)
def cached_basis(N, k, family="orthonormal"):
    """Shared immutable basis instances; assembly asks for the same few repeatedly."""
    return HierarchicalBasis1D(N, k, family=family)


class HierarchicalBasis1D:
    """All 1D hierarchical basis functions up to level N for one family.

    Ordinals run level-major: the k+1 level-0 Legendre polynomials first,
    then each level n >= 1 ordered by cell j, polynomial index i.  The
    orthonormal family satisfies <phi_a, phi_b> = delta_ab; the antisymmetric
    family spans the same increment spaces but needs a Gram matrix.
    """

    def __init__(self, N, k, family="orthonormal", unit_norm=True):
        if N < 0:
            raise ConfigurationError("level N must be nonnegative")
        self.N = int(N)
        self.k = int(k)
        self.family = family
        self.ncells = 2**self.N
        self.h = 2.0**-self.N
        self.dim = 2**self.N * (k + 1)
        self.wavelets = self._build(unit_norm)

    def _build(self, unit_norm):
        k = self.k
        _cached_generators(k, self.family)  # validates the family name early
        out = [make_wavelet(k, 0, 0, i) for i in range(1, k + 2)]
        for n in range(1, self.N + 1):
            for j in range(2 ** (n - 1)):
                for i in range(1, k + 2):
                    out.append(make_wavelet(k, n, j, i, self.family, unit_norm))
        return out

    def level_offset(self, n):
        """Ordinal of the first basis function at level n."""
        k1 = self.k + 1
        return k1 * (0 if n == 0 else 2 ** (n - 1))

    def ordinal(self, n, j, i):
        return self.level_offset(n) + j * (self.k + 1) + (i - 1)

    def eval_matrix(self, points, deriv=0):
        """Dense (dim, npts) matrix of right-continuous values at given points."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        out = np.zeros((self.dim, len(points)))
        for r, w in enumerate(self.wavelets):
            out[r] = w.eval(points, deriv)
        return out

    def cell_points(self, m):
        """Gauss points/weights of order m mapped into every finest cell: (ncells, m)."""
        x, w = _gauss01(m)
        edges = np.arange(self.ncells) * self.h
        pts = edges[:, None] + self.h * x[None, :]
        wts = np.broadcast_to(self.h * w, pts.shape).copy()
        return pts, wts

    def values_on_cells(self, m, deriv=0):
        """(dim, ncells, m) array of values at per-cell Gauss points.

        Entries outside a function's support stay exactly zero, which is what
        downstream sparsity counting relies on.
        """
        pts, _ = self.cell_points(m)
        out = np.zeros((self.dim, self.ncells, m))
        for r, w in enumerate(self.wavelets):
            for piece in w.pieces:
                p0 = int(round(piece.lo / self.h))
                p1 = int(round(piece.hi / self.h))
                out[r, p0:p1] = piece.eval(pts[p0:p1].ravel(), deriv).reshape(p1 - p0, m)
        return out

    def one_sided(self, deriv=0):
        """Left/right limits at the 2^N + 1 dyadic grid points.

        Returns (left, right), each (dim, 2^N + 1); left[:, 0] and
        right[:, -1] stay zero since there is no cell on that side.
        """
        xs = np.arange(self.ncells + 1) * self.h
        left = np.zeros((self.dim, len(xs)))
        right = np.zeros((self.dim, len(xs)))
        for r, w in enumerate(self.wavelets):
            for piece in w.pieces:
                p0 = int(round(piece.lo / self.h))
                p1 = int(round(piece.hi / self.h))
                vals = piece.eval(xs[p0 : p1 + 1], deriv)
                left[r, p0 + 1 : p1 + 1] = vals[1:]
                right[r, p0:p1] = vals[:-1]
        return left, right

    def to_cell_legendre(self, deg=None):
        """Transform matrix T: hierarchical coefficients -> per-cell Legendre coeffs.

        Rows are ordered cell-major with deg+1 orthonormal Legendre coefficients
        per finest cell, so T has shape (ncells*(deg+1), dim) and satisfies
        u_cellwise = T @ u_hier exactly for every member of the space.
        """
        if deg is None:
            deg = self.k
        m = max(deg, self.k) + 1
        vals = self.values_on_cells(m)
        x, w = _gauss01(m)
        basis = _ortho_leg_values(deg, x, width=self.h)
        t = np.einsum("rcp,qp,p->cqr", vals, basis, self.h * w)
        return t.reshape(self.ncells * (deg + 1), self.dim)

    def gram(self):
        """Exact Gram matrix of the family (identity for the orthonormal one)."""
        m = self.k + 1
        vals = self.values_on_cells(m)
        _, wts = self.cell_points(m)
        flat = vals.reshape(self.dim, -1)
        return flat @ (flat * wts.ravel()).T
