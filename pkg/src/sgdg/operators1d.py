"""1D building-block matrices for the unidirectional assembly.

Everything the d-dimensional bilinear form needs factors into dense 1D
matrices over the hierarchical basis at level N: weighted mass and broken
stiffness over the cells of the finest grid, plus face terms at its dyadic
points.  Interface conventions, with n pointing right from the left cell:

  jump    [q](x_p)  = q(x_p-) - q(x_p+)
  average {q}(x_p)  = (q(x_p-) + q(x_p+)) / 2

At x=0 and x=1 the jump reduces to -q(0) and +q(1) and the average to the
one-sided value.  All faces of the finest grid carry terms even where both
functions are continuous; the penalty scaling sigma/h is applied by the
caller, not here.

Weights may be constants, callables (sampled pointwise, so they must be
continuous), or PiecewiseWeight objects carrying per-cell polynomials with
genuine one-sided limits; the latter is what projected diffusion coefficients
produce.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as _leg

from .basis1d import HierarchicalBasis1D, _gauss01, _ortho_leg_values, cached_basis


class PiecewiseWeight:
    """Per-cell polynomial weight on the level-N dyadic mesh.

    Coefficients are stored per cell in the orthonormal Legendre basis of the
    cell, shape (2^N, deg+1).
    """

    def __init__(self, N, coef):
        coef = np.atleast_2d(np.asarray(coef, dtype=float))
        self.N = int(N)
        self.ncells = 2**self.N
        if coef.shape[0] != self.ncells:
            raise ValueError(f"expected {self.ncells} cell rows, got {coef.shape[0]}")
        self.coef = coef
        self.deg = coef.shape[1] - 1
        self.h = 2.0**-self.N

    @classmethod
    def constant(cls, c, N):
        coef = np.full((2**N, 1), float(c) * np.sqrt(2.0**-N))
        return cls(N, coef)

    def cell_values(self, relative_points):
        """Values at the same relative points inside every cell: (ncells, P)."""
        t = 2.0 * np.asarray(relative_points) - 1.0
        basis = np.stack(
            [
                _leg.legval(t, np.eye(self.deg + 1)[q]) * np.sqrt((2 * q + 1) / self.h)
                for q in range(self.deg + 1)
            ]
        )
        return self.coef @ basis

    def one_sided(self):
        """(left, right) limits at the 2^N + 1 grid points; zero outside [0,1]."""
        npts = self.ncells + 1
        left, right = np.zeros(npts), np.zeros(npts)
        vals_lo = self.cell_values(np.array([0.0]))[:, 0]
        vals_hi = self.cell_values(np.array([1.0]))[:, 0]
        left[1:] = vals_hi
        right[:-1] = vals_lo
        return left, right

    def eval(self, x):
        """Right-continuous pointwise evaluation (left limit at x = 1)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        cell = np.clip((x * self.ncells).astype(int), 0, self.ncells - 1)
        rel = x / self.h - cell
        t = 2.0 * rel - 1.0
        scales = np.sqrt((2 * np.arange(self.deg + 1) + 1) / self.h)
        out = np.zeros_like(x)
        for q in range(self.deg + 1):
            eq = np.zeros(self.deg + 1)
            eq[q] = 1.0
            out += self.coef[cell, q] * scales[q] * _leg.legval(t, eq)
        return out


def project_weight(func, N, deg, extra_points=6):
    """L2 projection of a 1D function onto piecewise degree-deg polynomials."""
    m = deg + 1 + extra_points
    x, w = _gauss01(m)
    h = 2.0**-N
    edges = np.arange(2**N) * h
    pts = edges[:, None] + h * x[None, :]
    vals = np.asarray(func(pts.ravel()), dtype=float).reshape(pts.shape)
    basis = _ortho_leg_values(deg, x, width=h)
    coef = np.einsum("cp,qp,p->cq", vals, basis, h * w)
    return PiecewiseWeight(N, coef)


def hier_coefficients(weight):
    """Coefficients of a PiecewiseWeight in the hierarchical basis of its own space.

    Both bases are orthonormal for the same space, so the change of basis is
    the transpose of the evaluation transform.
    """
    basis = cached_basis(weight.N, weight.deg)
    t = basis.to_cell_legendre(weight.deg)
    return t.T @ weight.coef.ravel()


@dataclass(frozen=True)
class Operator1D:
    kind: str
    N: int
    k: int
    matrix: np.ndarray


@dataclass(frozen=True)
class FaceOperators1D:
    """Interface matrices; flux rows carry the derivative side, columns the jump."""

    flux: np.ndarray
    jump: np.ndarray
    flux_left: np.ndarray
    flux_right: np.ndarray
    trace_left: np.ndarray
    trace_right: np.ndarray


def _weight_cell_values(weight, N, relative_points):
    if isinstance(weight, PiecewiseWeight):
        if weight.N != N:
            raise ValueError("weight lives on a different mesh level")
        return weight.cell_values(relative_points)
    h = 2.0**-N
    edges = np.arange(2**N) * h
    pts = edges[:, None] + h * np.asarray(relative_points)[None, :]
    if callable(weight):
        return np.asarray(weight(pts.ravel()), dtype=float).reshape(pts.shape)
    return np.full(pts.shape, float(weight))


def _weight_one_sided(weight, N):
    npts = 2**N + 1
    if isinstance(weight, PiecewiseWeight):
        return weight.one_sided()
    xs = np.arange(npts) * 2.0**-N
    vals = (
        np.asarray(weight(xs), dtype=float)
        if callable(weight)
        else np.full(npts, float(weight))
    )
    return vals, vals


def _weight_degree(weight):
    return weight.deg if isinstance(weight, PiecewiseWeight) else None


def _quad_points(k, weight, nderiv=0):
    """Point count making the weighted product integrals exact for polynomial data."""
    deg = _weight_degree(weight)
    if deg is None:
        deg = 2 if callable(weight) else 0  # margin for smooth callables
    need = 2 * (k - nderiv) + deg
    return max(k + 2, need // 2 + 1, 3)


def mass_1d(N, k, weight=1.0):
    basis = cached_basis(N, k)
    m = _quad_points(k, weight)
    x, w = _gauss01(m)
    vals = basis.values_on_cells(m).reshape(basis.dim, -1)
    wvals = (_weight_cell_values(weight, N, x) * (basis.h * w)).ravel()
    return Operator1D("mass", N, k, vals @ (vals * wvals).T)


def stiffness_1d(N, k, weight=1.0):
    basis = cached_basis(N, k)
    m = _quad_points(k, weight, nderiv=1)
    x, w = _gauss01(m)
    dvals = basis.values_on_cells(m, deriv=1).reshape(basis.dim, -1)
    wvals = (_weight_cell_values(weight, N, x) * (basis.h * w)).ravel()
    return Operator1D("stiffness", N, k, dvals @ (dvals * wvals).T)


def deriv_mass_1d(N, k, weight=1.0):
    """G[a,b] = integral of weight * phi_a' * phi_b, cell by cell."""
    basis = cached_basis(N, k)
    m = _quad_points(k, weight)
    x, w = _gauss01(m)
    dvals = basis.values_on_cells(m, deriv=1).reshape(basis.dim, -1)
    vals = basis.values_on_cells(m).reshape(basis.dim, -1)
    wvals = (_weight_cell_values(weight, N, x) * (basis.h * w)).ravel()
    return Operator1D("deriv_mass", N, k, dvals @ (vals * wvals).T)


def value_flux_1d(N, k, weight=1.0):
    """Fv[a,b] = sum over interior points of {weight * phi_a} [phi_b]."""
    basis = cached_basis(N, k)
    vleft, vright = basis.one_sided()
    wleft, wright = _weight_one_sided(weight, N)
    inner = slice(1, 2**N)
    avg = 0.5 * (wleft[inner] * vleft[:, inner] + wright[inner] * vright[:, inner])
    jmp = vleft[:, inner] - vright[:, inner]
    return Operator1D("value_flux", N, k, avg @ jmp.T)


def face_operators_1d(N, k, weight=1.0):
    basis = cached_basis(N, k)
    vleft, vright = basis.one_sided()
    dleft, dright = basis.one_sided(deriv=1)
    wleft, wright = _weight_one_sided(weight, N)

    inner = slice(1, 2**N)  # interior dyadic points
    avg = 0.5 * (wleft[inner] * dleft[:, inner] + wright[inner] * dright[:, inner])
    jmp = vleft[:, inner] - vright[:, inner]
    flux = avg @ jmp.T
    jump = jmp @ jmp.T

    flux_left = -wright[0] * np.outer(dright[:, 0], vright[:, 0])
    flux_right = wleft[-1] * np.outer(dleft[:, -1], vleft[:, -1])
    trace_left = np.outer(vright[:, 0], vright[:, 0])
    trace_right = np.outer(vleft[:, -1], vleft[:, -1])
    return FaceOperators1D(flux, jump, flux_left, flux_right, trace_left, trace_right)


def directional_form_1d(N, k, weight=1.0):
    """Stiffness minus symmetrized flux terms: the derivative-direction factor."""
    s = stiffness_1d(N, k, weight).matrix
    f = face_operators_1d(N, k, weight)
    for e in (f.flux, f.flux_left, f.flux_right):
        s = s - e - e.T
    return s


def penalty_form_1d(N, k):
    """Unweighted jump penalty including both boundary traces (no sigma/h factor)."""
    f = face_operators_1d(N, k)
    return f.jump + f.trace_left + f.trace_right
