"""Discrete-solution evaluation, error norms, and convergence tables.

Error integration walks the finest grid, but all heavy lifting is
tensorized: the sparse coefficient vector is scattered into a dense
per-direction hierarchical tensor once, converted to cellwise Legendre
coefficients by d matrix contractions, and then evaluated on a per-cell
Gauss lattice in chunks over leading-direction cell prefixes so memory
stays bounded regardless of dimension.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as leg

from .assembly import flat_ordinals
from .basis1d import cached_basis, _gauss01


@dataclass
class DiscreteFunction:
    space: object
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.dim,):
            raise ValueError("coefficient length %d does not match space "
                             "dimension %d"
                             % (self.coefficients.size, self.space.dim))


@dataclass
class ErrorReport:
    l1: float
    l2: float
    linf: float
    h1: float
    energy: float
    d: int
    N: int
    k: int
    dof: int

    def __post_init__(self):
        for name in ("l1", "l2", "linf", "h1"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise ValueError("norm %s = %r is not finite nonnegative"
                                 % (name, v))


def _locate_cells(level, x):
    """Index of the cell containing each point, right-continuous convention."""
    if level <= 1:
        return np.zeros(len(x), dtype=np.int64)
    ncells = 2 ** (level - 1)
    j = np.floor(x * ncells / 1.0).astype(np.int64)
    return np.clip(j, 0, ncells - 1)


def eval_discrete(u_h, pts, deriv=None):
    """Values of the expansion at points, or one partial derivative.

    Scales with the number of active blocks, not the DOF count: within each
    level block only the one cell containing a point contributes.
    """
    spec = u_h.space
    d, k = spec.d, spec.k
    pts = np.asarray(pts, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    npts = pts.shape[0]
    family = "antisymmetric" if spec.kind == "vhathat" else "orthonormal"
    basis = cached_basis(spec.N, spec.k, family)

    off1 = {}
    pos = 0
    for l in range(spec.N + 1):
        off1[l] = pos
        pos += (k + 1) if l == 0 else 2 ** (l - 1) * (k + 1)

    # per (direction, level): cell index per point and the (k+1, npts) values
    cell_cache, val_cache = {}, {}

    def direction_values(m, level, dv):
        key = (m, level, dv)
        if key in val_cache:
            return val_cache[key]
        cells = cell_cache.get((m, level))
        if cells is None:
            cells = _locate_cells(level, pts[:, m])
            cell_cache[(m, level)] = cells
        vals = np.zeros((k + 1, npts))
        for j in np.unique(cells):
            sel = cells == j
            for i in range(k + 1):
                w = basis.wavelets[off1[level] + j * (k + 1) + i]
                vals[i, sel] = w.eval(pts[sel, m], deriv=dv)
        val_cache[key] = (cells, vals)
        return cells, vals

    out = np.zeros(npts)
    poly = spec.poly  # (P, d), 1-based
    P = poly.shape[0]
    c = u_h.coefficients
    for b in spec.blocks:
        jrank = np.zeros(npts, dtype=np.int64)
        prodvals = np.ones((P, npts))
        for m in range(d):
            dv = 1 if deriv == m else 0
            cells, vals = direction_values(m, b.level[m], dv)
            jrank = jrank * b.cell_counts[m] + cells
            prodvals = prodvals * vals[poly[:, m] - 1, :]
        base = b.offset + jrank * spec.npoly
        ids = base[None, :] + np.arange(P)[:, None]
        out += (c[ids] * prodvals).sum(axis=0)
    return float(out[0]) if scalar else out


def eval_one_sided(u_h, x, deriv=None):
    """(left limit, right limit) at one point; slow, for diagnostics."""
    spec = u_h.space
    d, k = spec.d, spec.k
    x = np.asarray(x, dtype=float)
    family = "antisymmetric" if spec.kind == "vhathat" else "orthonormal"
    basis = cached_basis(spec.N, spec.k, family)
    sides = []
    for shift in (0, 1):
        total = 0.0
        for r, bid in enumerate(spec.ids()):
            if u_h.coefficients[r] == 0.0:
                continue
            term = u_h.coefficients[r]
            for m in range(d):
                off = sum((k + 1) if l == 0 else 2 ** (l - 1) * (k + 1)
                          for l in range(bid.level[m]))
                w = basis.wavelets[off + bid.cell[m] * (k + 1)
                                   + bid.poly[m] - 1]
                dv = 1 if deriv == m else 0
                term *= w.eval_one_sided(float(x[m]), deriv=dv)[shift]
            total += term
        sides.append(total)
    return sides[0], sides[1]


def _cell_legendre_tensor(u_h):
    """Scatter into the dense hierarchical tensor, then to cell Legendre."""
    spec = u_h.space
    family = "antisymmetric" if spec.kind == "vhathat" else "orthonormal"
    basis = cached_basis(spec.N, spec.k, family)
    flat = flat_ordinals(spec)
    dim1 = 2 ** spec.N * (spec.k + 1)
    H = np.zeros((dim1,) * spec.d)
    H[tuple(flat[:, m] for m in range(spec.d))] = u_h.coefficients
    t1 = basis.to_cell_legendre(spec.k)
    for m in range(spec.d):
        H = np.moveaxis(np.tensordot(t1, H, axes=([1], [m])), 0, m)
    return H


def _node_matrices(N, k, m):
    """Per-cell evaluation of orthonormal Legendre at m Gauss nodes.

    The same lattice feeds every norm: the integrals use the Gauss weights
    and the max norm runs over the nodes. Cell endpoints are deliberately
    not sampled, so the max norm is a strict-interior lattice max.
    """
    nodes, wts = _gauss01(m)
    h = 2.0 ** -N
    q = np.arange(k + 1)
    scale = np.sqrt((2 * q + 1) / h)
    eye = np.eye(k + 1)
    E = np.stack([scale[i] * leg.legval(2 * nodes - 1.0, eye[i])
                  for i in range(k + 1)], axis=1)
    D = np.stack([scale[i] * (2.0 / h)
                  * leg.legval(2 * nodes - 1.0, leg.legder(eye[i]))
                  for i in range(k + 1)], axis=1)
    return nodes, wts * h, E, D


def _contract_direction(arr, mat, axis, ncells):
    """Apply a per-cell (nodes, k+1) matrix along one cell-major axis."""
    a = np.moveaxis(arr, axis, -1)
    shape = a.shape[:-1]
    a = a.reshape(shape + (ncells, mat.shape[1]))
    a = a @ mat.T
    a = a.reshape(shape + (ncells * mat.shape[0],))
    return np.moveaxis(a, -1, axis)


def _weighted_sum(arr, wvecs):
    for w in reversed(wvecs):
        arr = arr @ w
    return float(arr)


# per-chunk evaluation budget (points); keeps the 4D sweeps inside memory
_CHUNK_POINTS = 4_000_000


def _chunk_depth(d, C, nn):
    p = 0
    while p < d and nn ** p * (C * nn) ** (d - p) > _CHUNK_POINTS:
        p += 1
    return p


def _chunk_values(slab, mats_prefix, mat_rest, p, d, C):
    """Contract a prefix-sliced coefficient block to node values."""
    vals = slab
    for mm in range(p):
        vals = np.moveaxis(
            np.tensordot(mats_prefix[mm], vals, axes=([1], [mm])), 0, mm)
    for mm in range(p, d):
        vals = _contract_direction(vals, mat_rest[mm], mm, C)
    return vals


def error_norms(u_h, exact, exact_grad=None, m=None, with_energy=True):
    """Quadrature-based L1/L2/Linf/broken-H1 (and energy) errors.

    exact/exact_grad take (npts, d) arrays; pass exact_grad=None to skip the
    gradient part (h1 then reduces to the L2 value). with_energy=False skips
    the face sweep, which dominates on the largest 4D runs.

    m is the Gauss count per finest cell per direction; the default is 6 in
    one and two dimensions and 3 above, which keeps the evaluation lattice
    (m 2^N)^d affordable and is the density the reference tables use.
    """
    spec = u_h.space
    d, N, k = spec.d, spec.N, spec.k
    if m is None:
        m = 6 if d <= 2 else 3
    C = 2 ** N
    h = 2.0 ** -N
    H = _cell_legendre_tensor(u_h)
    nodes, wts, E, D = _node_matrices(N, k, m)
    nn = nodes.size

    axis_pts = np.add.outer(np.arange(C) * h, h * nodes).ravel()
    wvec = np.tile(wts, C)
    p = _chunk_depth(d, C, nn)

    l1 = 0.0
    l2sq = 0.0
    linf = 0.0
    h1sq = 0.0
    for prefix in itertools.product(range(C), repeat=p):
        idx = tuple(slice(c * (k + 1), (c + 1) * (k + 1)) for c in prefix)
        slab = H[idx]
        axes = [c * h + h * nodes for c in prefix] \
            + [axis_pts] * (d - p)
        wvecs = [wts] * p + [wvec] * (d - p)
        vals = _chunk_values(slab, [E] * p, {mm: E for mm in range(p, d)},
                             p, d, C)
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        err = vals - np.asarray(exact(pts), dtype=float).reshape(vals.shape)
        l1 += _weighted_sum(np.abs(err), wvecs)
        l2sq += _weighted_sum(err * err, wvecs)
        linf = max(linf, float(np.abs(err).max()))
        if exact_grad is not None:
            gexact = np.asarray(exact_grad(pts), dtype=float)
            for g in range(d):
                pre = [D if mm == g else E for mm in range(p)]
                rest = {mm: (D if mm == g else E) for mm in range(p, d)}
                dv = _chunk_values(slab, pre, rest, p, d, C)
                derr = dv - gexact[:, g].reshape(dv.shape)
                h1sq += _weighted_sum(derr * derr, wvecs)

    h1 = math.sqrt(h1sq + l2sq) if exact_grad is not None else math.sqrt(l2sq)
    energy = math.nan
    if with_energy:
        energy = math.sqrt(
            h1sq + _face_energy_terms(u_h, H, exact, exact_grad, m))
    return ErrorReport(l1, math.sqrt(l2sq), linf, h1, energy,
                       d, N, k, spec.dim)


def _face_energy_terms(u_h, H, exact, exact_grad, m):
    """h * mean-normal-derivative and (1/h) jump terms over all faces."""
    spec = u_h.space
    d, N, k = spec.d, spec.N, spec.k
    C = 2 ** N
    h = 2.0 ** -N
    nodes, wts, E, D = _node_matrices(N, k, m)
    q = np.arange(k + 1)
    scale = np.sqrt((2 * q + 1) / h)
    vR = scale.copy()
    vL = scale * (-1.0) ** q
    dR = scale * (q * (q + 1) / 2.0) * (2.0 / h)
    dL = dR * (-1.0) ** (q + 1)
    axis_pts = (np.add.outer(np.arange(C) * h, h * nodes)).ravel()
    wvec = np.tile(wts, C)

    total = 0.0
    for g in range(d):
        # cellwise one-sided traces of value and normal derivative
        A = np.moveaxis(H, g, -1)
        shape = A.shape[:-1]
        A = A.reshape(shape + (C, k + 1))
        traces = {name: np.moveaxis(A @ vec, -1, 0)
                  for name, vec in (("vR", vR), ("vL", vL),
                                    ("dR", dR), ("dL", dL))}
        # evaluate the tangential directions on the face lattice
        for name in traces:
            t = traces[name]
            for mm in range(1, d):
                t = _contract_direction(t, E, mm, C)
            traces[name] = t

        wvecs = [wvec] * (d - 1)
        for p in range(C + 1):
            coords = [axis_pts] * d
            coords[g] = np.array([p * h])
            grids = np.meshgrid(*coords, indexing="ij")
            pts = np.stack([gg.ravel() for gg in grids], axis=-1)
            ex = np.asarray(exact(pts), dtype=float)
            gx = np.asarray(exact_grad(pts), dtype=float)[:, g] \
                if exact_grad is not None else 0.0
            tshape = traces["vR"].shape[1:]
            if p == 0:
                jump = traces["vL"][0] - ex.reshape(tshape)
                davg = traces["dL"][0] - np.reshape(gx, tshape)
            elif p == C:
                jump = traces["vR"][C - 1] - ex.reshape(tshape)
                davg = traces["dR"][C - 1] - np.reshape(gx, tshape)
            else:
                jump = traces["vR"][p - 1] - traces["vL"][p]
                davg = 0.5 * (traces["dR"][p - 1] + traces["dL"][p]) \
                    - np.reshape(gx, tshape)
            total += h * _weighted_sum(davg * davg, wvecs)
            total += (1.0 / h) * _weighted_sum(jump * jump, wvecs)
    return total


def convergence_orders(reports, norms=("l1", "l2", "linf", "h1")):
    """Per-norm log2 error ratios between consecutive refinement levels."""
    if len(reports) < 2:
        raise ValueError("need at least two reports")
    for a, b in zip(reports, reports[1:]):
        if b.N != a.N + 1:
            raise ValueError("reports must be at consecutive N")
    out = {}
    for norm in norms:
        vals = [getattr(r, norm) for r in reports]
        orders = []
        for prev, cur in zip(vals, vals[1:]):
            if prev > 0.0 and cur > 0.0:
                orders.append(math.log2(prev / cur))
            else:
                orders.append(None)
        out[norm] = orders
    return out
