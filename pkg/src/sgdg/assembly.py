"""Global assembly of the interior-penalty form on sparse hierarchical spaces.

Every basis function is a tensor product of 1D hierarchical functions, so each
global matrix entry is a sum of products of 1D operator entries.  The
assembler enumerates candidate couplings block pair by block pair (a block =
one level multi-index), where a pair of functions can couple only if their
supports overlap with positive measure in every direction, or do so in all
directions but one and touch at a point in the remaining one (face coupling).

The bilinear form is reduced to a list of "product terms": each term is a
scalar times one 1D matrix per direction (None meaning the identity, exact
for the orthonormal family).  Volume, flux, boundary closure, penalty, Gram
and cross-derivative contributions all fit this shape, so a single vectorized
gather computes everything.

Entry values are products of snapped 1D entries; an accumulated entry that is
exactly zero is never stored, which makes the reported nonzero counts
deterministic.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .basis1d import cached_basis, _gauss01
from .operators1d import (PiecewiseWeight, project_weight, mass_1d,
                          directional_form_1d, penalty_form_1d,
                          deriv_mass_1d, value_flux_1d, face_operators_1d)
from .quadrature import (QuadConfig, integrate_against_basis,
                         integrate_boundary, _segments_1d)
from .spaces import SpaceSpec, support_1d


# ----------------------------------------------------------------------
# problem description


@dataclass(frozen=True)
class Constant:
    """Constant diffusion coefficient: scalar, per-direction diagonal, or a
    full symmetric matrix (which routes through the cross-term path)."""
    value: object = 1.0


@dataclass(frozen=True)
class SeparableSum:
    """Scalar coefficient K(x) = sum_t alpha_t * prod_m f_{t,m}(x_m).

    terms: list of (alpha, factors) with factors a length-d sequence whose
    entries are None (constant one), a float, a PiecewiseWeight, or a 1D
    callable (projected onto the degree-2k mesh before use).
    """
    terms: tuple

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(pts.shape[0])
        for alpha, factors in self.terms:
            term = np.full(pts.shape[0], float(alpha))
            for m, f in enumerate(factors):
                if f is None:
                    continue
                if isinstance(f, (int, float)):
                    term *= float(f)
                elif isinstance(f, PiecewiseWeight):
                    term *= f.eval(pts[:, m])
                else:
                    term *= f(pts[:, m])
            out += term
        return out


@dataclass(frozen=True)
class General:
    """Scalar coefficient given pointwise; reduced to a separable sum by
    projection unless an analytic separable hint is supplied."""
    func: object
    hint: object = None


@dataclass(frozen=True)
class Problem:
    d: int
    coefficient: object = 1.0
    source: object = None
    source_terms: object = None      # separable hint for the volume source
    dirichlet: object = None         # boundary data g; None = homogeneous
    boundary_terms: object = None    # {(axis, side): [(alpha, {m: factor})]}
    exact: object = None
    exact_grad: object = None
    exact_terms: object = None       # separable hint for the exact solution
    name: str = ""


@dataclass(frozen=True)
class SchemeParams:
    sigma: float
    quad: QuadConfig = field(default_factory=QuadConfig)
    snap_tol: float = 1e-13


class AssemblyError(RuntimeError):
    pass


# ----------------------------------------------------------------------
# assembled system container


@dataclass
class AssembledSystem:
    dim: int
    rows: np.ndarray            # upper triangle, rows <= cols
    cols: np.ndarray
    vals: np.ndarray
    meta: dict

    @property
    def nnz_half(self):
        return self.vals.size

    @property
    def nnz_full(self):
        ndiag = int(np.count_nonzero(self.rows == self.cols))
        return 2 * self.vals.size - ndiag

    def to_csr(self):
        import scipy.sparse as sp
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.vals, self.vals[off]])
        a = sp.coo_matrix((v, (r, c)), shape=(self.dim, self.dim))
        return a.tocsr()

    def to_dense(self):
        a = np.zeros((self.dim, self.dim))
        a[self.rows, self.cols] = self.vals
        off = self.rows != self.cols
        a[self.cols[off], self.rows[off]] = self.vals[off]
        return a

    def to_operator(self):
        return self.to_csr()


@dataclass
class DenseAssembledSystem:
    """Same surface as AssembledSystem for operators that are nearly full.

    A non-constant coefficient couples every level pair, so beyond a few
    thousand DOFs the triplet form costs about three times the dense array
    (and the solver's matvec gains nothing from sparsity); the assembly
    then accumulates straight into the symmetric dense matrix.
    """

    dim: int
    array: np.ndarray
    meta: dict

    @property
    def nnz_full(self):
        return int(np.count_nonzero(self.array))

    @property
    def nnz_half(self):
        ndiag = int(np.count_nonzero(self.array.diagonal()))
        return (self.nnz_full + ndiag) // 2

    def to_csr(self):
        import scipy.sparse as sp
        return sp.csr_matrix(self.array)

    def to_dense(self):
        return self.array

    def to_operator(self):
        return self.array


# ----------------------------------------------------------------------
# structural relations between 1D dyadic supports


@lru_cache(maxsize=None)
def _cell_relations(la, lb):
    """(overlap, touch) integer pair arrays for 1D cells at two levels.

    overlap: supports share a set of positive measure (dyadic, so one
    contains the other).  touch: supports share exactly one point.
    """
    na = 2 ** max(la - 1, 0)
    nb = 2 ** max(lb - 1, 0)
    over, touch = [], []
    for ja in range(na):
        alo, ahi = support_1d(la, ja)
        for jb in range(nb):
            blo, bhi = support_1d(lb, jb)
            lo = max(alo, blo)
            hi = min(ahi, bhi)
            if lo < hi:
                over.append((ja, jb))
            elif lo == hi:
                touch.append((ja, jb))
    over = np.array(over, dtype=np.int64).reshape(-1, 2)
    touch = np.array(touch, dtype=np.int64).reshape(-1, 2)
    return over, touch


def _snap(mat, rel):
    out = np.asarray(mat, dtype=float).copy()
    top = np.abs(out).max() if out.size else 0.0
    if top > 0.0 and rel > 0.0:
        out[np.abs(out) < rel * top] = 0.0
    return out


def _flat_offsets(N, k):
    off = np.zeros(N + 1, dtype=np.int64)
    for l in range(1, N + 1):
        off[l] = (k + 1) * 2 ** (l - 1)
    return off


def flat_ordinals(spec):
    """Per-direction 1D flat ordinals for every global DOF, shape (dim, d)."""
    off = _flat_offsets(spec.N, spec.k)
    return off[spec.levels] + spec.cells * (spec.k + 1) + (spec.polys - 1)


# ----------------------------------------------------------------------
# the unified product-term gather

def _assemble_products(spec, product_terms, include_touch=True, out=None):
    """Assemble sum_t alpha_t * prod_m ops_t[m][a_m, b_m] over all coupled
    pairs of the space.  ops entries of None mean the identity.  Returns the
    upper triangle as (rows, cols, vals) with exact zeros dropped, or adds
    both triangles into the preallocated dense array `out`."""
    d, k, P = spec.d, spec.k, spec.npoly
    off1 = _flat_offsets(spec.N, k)
    poly = spec.poly - 1               # (P, d) zero-based 1D poly ordinals
    blocks = spec.blocks

    pp = P * P
    pa_pat = np.repeat(np.arange(P), P)
    pb_pat = np.tile(np.arange(P), P)

    out_r, out_c, out_v = [], [], []

    for ib, ba in enumerate(blocks):
        for bb in blocks[ib:]:
            rel = [_cell_relations(ba.level[m], bb.level[m]) for m in range(d)]
            combos = [tuple(rel[m][0] for m in range(d))]
            if include_touch:
                for mx in range(d):
                    combos.append(tuple(rel[m][1] if m == mx else rel[m][0]
                                        for m in range(d)))
            for combo in combos:
                sizes = [c.shape[0] for c in combo]
                ncell = int(np.prod(sizes))
                if ncell == 0:
                    continue
                grids = np.meshgrid(*[np.arange(s) for s in sizes],
                                    indexing="ij")
                ja = np.stack([combo[m][grids[m].ravel(), 0]
                               for m in range(d)], axis=1)
                jb = np.stack([combo[m][grids[m].ravel(), 1]
                               for m in range(d)], axis=1)

                ra = np.zeros(ncell, dtype=np.int64)
                rb = np.zeros(ncell, dtype=np.int64)
                for m in range(d):
                    ra = ra * ba.cell_counts[m] + ja[:, m]
                    rb = rb * bb.cell_counts[m] + jb[:, m]
                rows = (ba.offset + np.repeat(ra, pp) * P
                        + np.tile(pa_pat, ncell))
                cols = (bb.offset + np.repeat(rb, pp) * P
                        + np.tile(pb_pat, ncell))

                fa = [off1[ba.level[m]] + np.repeat(ja[:, m], pp) * (k + 1)
                      + np.tile(poly[pa_pat, m], ncell) for m in range(d)]
                fb = [off1[bb.level[m]] + np.repeat(jb[:, m], pp) * (k + 1)
                      + np.tile(poly[pb_pat, m], ncell) for m in range(d)]

                eq = None
                vals = np.zeros(rows.size)
                for alpha, ops in product_terms:
                    term = np.full(rows.size, float(alpha))
                    for m in range(d):
                        if ops[m] is None:
                            if eq is None:
                                eq = [(fa[mm] == fb[mm]).astype(float)
                                      for mm in range(d)]
                            term = term * eq[m]
                        else:
                            term = term * ops[m][fa[m], fb[m]]
                    vals += term

                if out is not None:
                    # each (row, col) pair occurs once per enumeration; a
                    # diagonal block pair already yields both orderings
                    out[rows, cols] += vals
                    if ba.offset != bb.offset:
                        out[cols, rows] += vals
                    continue
                if ba.offset == bb.offset:
                    keep = (rows <= cols) & (vals != 0.0)
                else:
                    keep = vals != 0.0
                out_r.append(rows[keep])
                out_c.append(cols[keep])
                out_v.append(vals[keep])

    if out is not None:
        return None
    if out_r:
        return (np.concatenate(out_r), np.concatenate(out_c),
                np.concatenate(out_v))
    empty = np.empty(0, dtype=np.int64)
    return empty, empty.copy(), np.empty(0)


# ----------------------------------------------------------------------
# coefficient normalization


def _as_weight(factor, N, deg):
    if factor is None or isinstance(factor, (int, float)):
        return factor
    if isinstance(factor, PiecewiseWeight):
        if factor.N != N:
            raise AssemblyError("coefficient factor lives on the wrong mesh")
        return factor
    return project_weight(factor, N, deg)


def normalize_coefficient(coeff, d, N, k, threshold=1e-14):
    """Reduce any accepted coefficient description to either per-direction
    separable terms ("separable") or a constant matrix ("matrix").

    Separable form: dir_terms[m] = list of (alpha, factors) describing the
    scalar weight seen by direction m (identical lists for scalar K).
    Callable 1D factors are projected onto the degree-2k piecewise space.
    """
    deg = 2 * k
    if isinstance(coeff, (int, float)):
        coeff = Constant(float(coeff))
    if isinstance(coeff, Constant):
        val = coeff.value
        if isinstance(val, (int, float)):
            if val <= 0:
                raise AssemblyError("diffusion coefficient must be positive")
            terms = [(float(val), [None] * d)]
            return "separable", [terms] * d
        val = np.asarray(val, dtype=float)
        if val.shape == (d,):
            if np.any(val <= 0):
                raise AssemblyError("diffusion coefficient must be positive")
            return "separable", [[(float(val[m]), [None] * d)]
                                 for m in range(d)]
        if val.shape == (d, d):
            if not np.allclose(val, val.T):
                raise AssemblyError("matrix coefficient must be symmetric")
            if np.any(np.linalg.eigvalsh(val) <= 0):
                raise AssemblyError("matrix coefficient must be positive "
                                    "definite")
            if np.allclose(val, np.diag(np.diag(val))):
                return "separable", [[(float(val[m, m]), [None] * d)]
                                     for m in range(d)]
            return "matrix", val
        raise AssemblyError("unsupported Constant coefficient shape")
    if isinstance(coeff, General):
        if coeff.hint is not None:
            coeff = coeff.hint
        else:
            coeff = project_coefficient(coeff.func, d, N, k,
                                        threshold=threshold).grouped()
    if isinstance(coeff, SeparableSum):
        memo = {}

        def conv(f):
            if id(f) not in memo:
                memo[id(f)] = _as_weight(f, N, deg)
            return memo[id(f)]

        terms = [(float(alpha), [conv(f) for f in factors])
                 for alpha, factors in coeff.terms]
        return "separable", [terms] * d
    raise AssemblyError("unsupported coefficient description %r" % (coeff,))


def coefficient_pointwise(coeff, d):
    """Pointwise scalar evaluator for the boundary slow path."""
    if isinstance(coeff, (int, float)):
        c = float(coeff)
        return lambda pts: np.full(np.atleast_2d(pts).shape[0], c)
    if isinstance(coeff, Constant) and isinstance(coeff.value, (int, float)):
        c = float(coeff.value)
        return lambda pts: np.full(np.atleast_2d(pts).shape[0], c)
    if isinstance(coeff, General):
        return coeff.func
    if isinstance(coeff, SeparableSum):
        return coeff
    raise AssemblyError("no pointwise form for coefficient %r" % (coeff,))


# ----------------------------------------------------------------------
# coefficient projection onto the sparse space of degree 2k


@dataclass
class CoefficientExpansion:
    """Sparse hierarchical expansion of a scalar field at degree 2k.

    coef is aligned with space ordinals; entries below the relative
    threshold were zeroed.  projected_norm_sq is the squared norm of the
    full-grid projection, retained_norm_sq of what was kept, so the
    projection error against the original field is
    ||K||^2 - retained_norm_sq (plus the full-grid projection defect).
    """
    space: SpaceSpec
    coef: np.ndarray
    projected_norm_sq: float
    retained_norm_sq: float
    threshold: float

    @property
    def nterms(self):
        return int(np.count_nonzero(self.coef))

    def terms(self):
        flat = flat_ordinals(self.space)
        for r in np.nonzero(self.coef)[0]:
            yield self.coef[r], tuple(int(t) for t in flat[r])

    def grouped(self):
        """Collapse the expansion into one separable term per distinct
        leading (d-1)-prefix of 1D ordinals; the trailing direction absorbs
        the grouped coefficients as a single piecewise weight."""
        spec = self.space
        d, N, deg = spec.d, spec.N, spec.k
        basis = cached_basis(N, deg)
        tcl = basis.to_cell_legendre(deg)      # (ncells*(deg+1), dim)
        flat = flat_ordinals(spec)
        active = np.nonzero(self.coef)[0]
        if active.size == 0:
            return SeparableSum(((0.0, tuple([None] * d)),))
        wavelet_weight = {}

        def factor_for(a):
            if a not in wavelet_weight:
                col = tcl[:, a].reshape(2 ** N, deg + 1)
                wavelet_weight[a] = PiecewiseWeight(N, col.copy())
            return wavelet_weight[a]

        groups = {}
        for r in active:
            key = tuple(int(t) for t in flat[r, :d - 1])
            groups.setdefault(key, []).append(r)
        terms = []
        for key, members in sorted(groups.items()):
            tail = np.zeros(basis.dim)
            for r in members:
                tail[flat[r, d - 1]] = self.coef[r]
            tail_cell = (tcl @ tail).reshape(2 ** N, deg + 1)
            factors = [factor_for(a) for a in key]
            factors.append(PiecewiseWeight(N, tail_cell))
            terms.append((1.0, tuple(factors)))
        return SeparableSum(tuple(terms))


def project_coefficient(func, d, N, k, threshold=1e-14, quad_points=None):
    """L2-project a scalar field onto the sparse tensor space of degree 2k.

    The full-grid hierarchical coefficient tensor is computed by per-cell
    Gauss quadrature and per-direction basis contractions, then truncated to
    the sparse level set and thresholded at threshold * max|coef|.
    """
    deg = 2 * k
    basis = cached_basis(N, deg)
    m = quad_points if quad_points is not None else deg + 4
    pts, wts = basis.cell_points(m)
    vmat = basis.values_on_cells(m).reshape(basis.dim, -1) * wts.ravel()

    axes = np.meshgrid(*[pts.ravel()] * d, indexing="ij")
    samples = func(np.stack([ax.ravel() for ax in axes], axis=1))
    tensor = np.asarray(samples, dtype=float).reshape([pts.size] * d)
    for m_ax in range(d):
        tensor = np.tensordot(vmat, tensor, axes=([1], [m_ax]))
        tensor = np.moveaxis(tensor, 0, m_ax)

    spec = SpaceSpec("vhat", d, N, deg, cap=None)
    flat = flat_ordinals(spec)
    coef = tensor[tuple(flat[:, m_ax] for m_ax in range(d))]
    projected_norm_sq = float(np.sum(tensor ** 2))
    top = np.abs(coef).max()
    coef = np.where(np.abs(coef) >= threshold * top, coef, 0.0)
    return CoefficientExpansion(spec, coef, projected_norm_sq,
                                float(np.sum(coef ** 2)), threshold)


# ----------------------------------------------------------------------
# matrix assembly


def _separable_product_terms(spec, dir_terms, params):
    """Product terms for the volume + flux + boundary closures of a scalar
    or diagonal coefficient, plus the penalty terms."""
    N, k, d = spec.N, spec.k, spec.d
    snap = params.snap_tol
    cmat_cache, mmat_cache = {}, {}

    def cmat(w):
        key = id(w) if isinstance(w, PiecewiseWeight) else w
        if key not in cmat_cache:
            cmat_cache[key] = _snap(
                directional_form_1d(N, k, 1.0 if w is None else w),
                snap)
        return cmat_cache[key]

    def mmat(w):
        key = id(w) if isinstance(w, PiecewiseWeight) else w
        if key not in mmat_cache:
            mmat_cache[key] = _snap(mass_1d(N, k, w).matrix, snap)
        return mmat_cache[key]

    terms = []
    for m in range(d):
        for alpha, factors in dir_terms[m]:
            ops = []
            for mm in range(d):
                f = factors[mm]
                if mm == m:
                    ops.append(cmat(f))
                elif f is None:
                    ops.append(None)
                else:
                    ops.append(mmat(f))
            terms.append((alpha, ops))

    pen = _snap(penalty_form_1d(N, k), snap)
    sig_h = params.sigma / (2.0 ** -N)
    for m in range(d):
        ops = [pen if mm == m else None for mm in range(d)]
        terms.append((sig_h, ops))
    return terms


def _matrix_product_terms(spec, kmat, params):
    """Product terms for a constant symmetric matrix coefficient, including
    the cross-derivative volume and face contributions."""
    N, k, d = spec.N, spec.k, spec.d
    snap = params.snap_tol
    g = _snap(deriv_mass_1d(N, k).matrix, snap)
    fv = _snap(value_flux_1d(N, k).matrix, snap)
    face = face_operators_1d(N, k)
    tl = _snap(face.trace_left, snap)
    tr = _snap(face.trace_right, snap)
    pen = _snap(penalty_form_1d(N, k), snap)

    terms = []
    for q in range(d):
        cq = _snap(directional_form_1d(N, k, float(kmat[q, q])), snap)
        terms.append((1.0, [cq if m == q else None for m in range(d)]))
        terms.append((params.sigma / 2.0 ** -N,
                      [pen if m == q else None for m in range(d)]))

    def place(alpha, q, aq, n, an):
        ops = [None] * d
        ops[q] = aq
        ops[n] = an
        terms.append((alpha, ops))

    for q in range(d):
        for n in range(d):
            if n == q or kmat[q, n] == 0.0:
                continue
            kqn = float(kmat[q, n])
            place(kqn, q, g.T, n, g)                  # volume cross term
            place(-kqn, q, fv.T, n, g.T)              # interior face, trial
            place(-kqn, q, fv, n, g)                  # interior face, test
            place(kqn, q, tl, n, g.T)                 # x_q = 0 closures
            place(kqn, q, tl, n, g)
            place(-kqn, q, tr, n, g.T)                # x_q = 1 closures
            place(-kqn, q, tr, n, g)
    return terms


_DENSE_SWITCH_DIM = 3000
_DENSE_BYTES_CAP = 3_500_000_000


def _coupling_is_dense(mode, data):
    """Variable 1D factors make nearly every level pair interact."""
    if mode != "separable":
        return False
    return any(isinstance(f, PiecewiseWeight)
               for terms in data for _, factors in terms for f in factors)


def assemble_matrix(spec, prob, params):
    """Assemble the penalized bilinear form on the given space."""
    if spec.kind == "vhathat":
        raise AssemblyError("the solver path expects an orthonormal basis; "
                            "vhathat is projection-only")
    mode, data = normalize_coefficient(prob.coefficient, spec.d, spec.N,
                                       spec.k)
    if mode == "separable":
        terms = _separable_product_terms(spec, data, params)
    else:
        terms = _matrix_product_terms(spec, data, params)
    meta = {"kind": spec.kind, "d": spec.d, "N": spec.N, "k": spec.k,
            "sigma": params.sigma, "coefficient_mode": mode}
    if (_coupling_is_dense(mode, data) and spec.dim >= _DENSE_SWITCH_DIM
            and spec.dim * spec.dim * 8 <= _DENSE_BYTES_CAP):
        dense = np.zeros((spec.dim, spec.dim))
        _assemble_products(spec, terms, include_touch=True, out=dense)
        return DenseAssembledSystem(spec.dim, dense, meta)
    rows, cols, vals = _assemble_products(spec, terms, include_touch=True)
    return AssembledSystem(spec.dim, rows, cols, vals, meta)


def gram_matrix(spec, family="antisymmetric"):
    """Tensor-product Gram matrix of the space for a non-orthogonal family."""
    basis = cached_basis(spec.N, spec.k, family)
    g1 = basis.gram()
    g1[np.abs(g1) < 1e-14 * np.abs(g1).max()] = 0.0
    terms = [(1.0, [g1] * spec.d)]
    rows, cols, vals = _assemble_products(spec, terms, include_touch=False)
    return AssembledSystem(spec.dim, rows, cols, vals,
                           {"kind": spec.kind, "gram": family})


# ----------------------------------------------------------------------
# 1D load integrals


def _factor_values(factor, pts01):
    if factor is None:
        return np.ones_like(pts01)
    if isinstance(factor, (int, float)):
        return np.full_like(pts01, float(factor))
    if isinstance(factor, PiecewiseWeight):
        return factor.eval(pts01)
    return np.asarray(factor(pts01), dtype=float)


def _load_1d(N, k, factors, npts, family="orthonormal"):
    """integral over [0,1] of prod(factors) * phi_a for every 1D ordinal a."""
    basis = cached_basis(N, k, family)
    pts, wts = basis.cell_points(npts)
    flat = pts.ravel()
    fv = np.ones_like(flat)
    for f in factors:
        fv = fv * _factor_values(f, flat)
    vals = basis.values_on_cells(npts).reshape(basis.dim, -1)
    return vals @ (fv * wts.ravel())


def _one_sided_traces(N, k, side, deriv=0):
    basis = cached_basis(N, k)
    left, right = basis.one_sided(deriv)
    return right[:, 0] if side == 0 else left[:, -1]


def _weight_boundary_value(factor, side):
    if factor is None:
        return 1.0
    if isinstance(factor, (int, float)):
        return float(factor)
    x = 0.0 if side == 0 else 1.0
    if isinstance(factor, PiecewiseWeight):
        lo, hi = factor.one_sided()
        return float(hi[0]) if side == 0 else float(lo[-1])
    return float(factor(np.array([x]))[0])


def assemble_rhs(spec, prob, params):
    """Right-hand side: volume source plus Dirichlet boundary closures.

    b[r] = int f phi_r  -  int_bnd (K grad phi_r . n) g  +  (sigma/h) int_bnd phi_r g

    Separable hints for f and for g on each face take a fast path of 1D
    integrals; otherwise the generic patchwise quadrature is used.
    """
    d, N, k = spec.d, spec.N, spec.k
    b = np.zeros(spec.dim)
    flat = flat_ordinals(spec)
    npts = max(params.quad.points + 2, k + 4)

    if prob.source_terms is not None:
        for alpha, factors in prob.source_terms:
            acc = np.full(spec.dim, float(alpha))
            for m in range(d):
                acc *= _load_1d(N, k, [factors[m]], npts)[flat[:, m]]
            b += acc
    elif prob.source is not None:
        cfg = params.quad
        for r in range(spec.dim):
            b[r] += integrate_against_basis(prob.source, spec.id_at(r), k,
                                            cfg)

    sig_h = params.sigma / (2.0 ** -N)
    if prob.boundary_terms is not None:
        mode, dir_terms = normalize_coefficient(prob.coefficient, d, N, k)
        if mode != "separable":
            raise AssemblyError("separable boundary data requires a scalar "
                                "or diagonal coefficient")
        for (axis, side), gterms in prob.boundary_terms.items():
            nrm = -1.0 if side == 0 else 1.0
            val_tr = _one_sided_traces(N, k, side)
            der_tr = _one_sided_traces(N, k, side, deriv=1)
            for alpha, gfac in gterms:
                # penalty part: (sigma/h) * g * phi
                acc = alpha * sig_h * val_tr[flat[:, axis]]
                for m in range(d):
                    if m == axis:
                        continue
                    acc *= _load_1d(N, k, [gfac.get(m)], npts)[flat[:, m]]
                b += acc
                # flux part: -(K grad phi . n) g
                for beta, kfac in dir_terms[axis]:
                    wb = _weight_boundary_value(kfac[axis], side)
                    acc = (-alpha * beta * nrm * wb) * der_tr[flat[:, axis]]
                    for m in range(d):
                        if m == axis:
                            continue
                        acc *= _load_1d(N, k, [gfac.get(m), kfac[m]],
                                        npts)[flat[:, m]]
                    b += acc
    elif prob.dirichlet is not None:
        b += _rhs_boundary_generic(spec, prob, params)
    return b


def _rhs_boundary_generic(spec, prob, params):
    """Patchwise boundary quadrature of the Dirichlet closures, one DOF and
    face at a time.  Correct for any continuous g and scalar K."""
    d, N, k = spec.d, spec.N, spec.k
    kfun = coefficient_pointwise(prob.coefficient, d)
    sig_h = params.sigma / (2.0 ** -N)
    b = np.zeros(spec.dim)
    val_tr = {s: _one_sided_traces(N, k, s) for s in (0, 1)}
    der_tr = {s: _one_sided_traces(N, k, s, deriv=1) for s in (0, 1)}
    flat = flat_ordinals(spec)
    basis = cached_basis(N, k)

    for r in range(spec.dim):
        bid = spec.id_at(r)
        wavelets = [basis.wavelets[flat[r, m]] for m in range(d)]
        for axis in range(d):
            lo, hi = support_1d(bid.level[axis], bid.cell[axis])
            for side in (0, 1):
                pt = 0.0 if side == 0 else 1.0
                if not (lo <= pt <= hi):
                    continue
                tv = val_tr[side][flat[r, axis]]
                td = der_tr[side][flat[r, axis]]
                if tv == 0.0 and td == 0.0:
                    continue
                nrm = -1.0 if side == 0 else 1.0

                def kernel(pts, axis=axis, tv=tv, td=td, nrm=nrm,
                           wavelets=wavelets):
                    tang = np.ones(pts.shape[0])
                    for m in range(d):
                        if m != axis:
                            tang = tang * wavelets[m].eval(pts[:, m])
                    kv = np.asarray(kfun(pts), dtype=float)
                    return tang * (sig_h * tv - nrm * kv * td)

                segs = [_segments_1d(bid.level[m], bid.cell[m])
                        for m in range(d) if m != axis]
                lev = sum(bid.level[m] for m in range(d) if m != axis)
                b[r] += integrate_boundary(prob.dirichlet, (axis, side),
                                           kernel, params.quad, d,
                                           level_sum=lev, segments=segs)
    return b


def assemble_system(spec, prob, params):
    return assemble_matrix(spec, prob, params), assemble_rhs(spec, prob,
                                                             params)


# ----------------------------------------------------------------------
# projection of target functions (for the projection study and tests)


def l2_project_function(u, spec, quad=None, u_terms=None):
    """Coefficients of the L2 projection of u onto the space.

    Orthonormal kinds reduce to inner products; the vhathat family is
    non-orthogonal, so its tensor Gram system is solved directly.
    """
    family = "antisymmetric" if spec.kind == "vhathat" else "orthonormal"
    d, N, k = spec.d, spec.N, spec.k
    flat = flat_ordinals(spec)
    if u_terms is not None:
        b = np.zeros(spec.dim)
        npts = max(k + 6, 10)
        for alpha, factors in u_terms:
            acc = np.full(spec.dim, float(alpha))
            for m in range(d):
                acc *= _load_1d(N, k, [factors[m]], npts, family)[flat[:, m]]
            b += acc
    else:
        cfg = quad if quad is not None else QuadConfig()
        b = np.zeros(spec.dim)
        for r in range(spec.dim):
            b[r] = integrate_against_basis(u, spec.id_at(r), k, cfg,
                                           family=family)
    if family == "orthonormal":
        return b
    import scipy.sparse.linalg as spla
    gram = gram_matrix(spec, family).to_csr().tocsc()
    lu = spla.splu(gram)
    coef = lu.solve(b)
    resid = np.linalg.norm(gram @ coef - b)
    scale = max(np.linalg.norm(b), 1e-300)
    if resid > 1e-8 * scale:
        import warnings
        warnings.warn("Gram system poorly conditioned: relative residual "
                      "%.2e" % (resid / scale))
    return coef


# ----------------------------------------------------------------------
# exports


def export_matrix_market(path, system):
    import scipy.io
    scipy.io.mmwrite(str(path), system.to_csr(), symmetry="symmetric",
                     precision=17)


def export_vector(path, vec):
    np.savetxt(str(path), np.asarray(vec, dtype=float).reshape(-1),
               fmt="%.16e")
