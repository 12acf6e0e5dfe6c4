"""Gauss and sparse (Smolyak) quadrature over the smooth patches of a basis function.

A tensor-product basis function is polynomial on up to 2^d boxes (each 1D
factor at level >= 1 has one interior breakpoint), so every integral is done
patch by patch.  Two in-patch modes exist: a plain tensor Gauss rule with m
points per coordinate, and a Smolyak combination rule whose level follows the
coarsening heuristic level = max(1, ceil(iquad - |l|_1 / 2)); finer basis
levels get cheaper rules because their supports are smaller.

Scalar fields are called with an (npoints, d) array and must return a vector
of values; integrands are checked for finiteness and failures carry the
offending point.
"""

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as _leg

from .basis1d import ConfigurationError, make_wavelet
from .spaces import support_1d


class IntegrationError(RuntimeError):
    """A non-finite integrand sample; carries the offending point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class QuadRule1D:
    nodes: np.ndarray
    weights: np.ndarray


def gauss_rule(m):
    """Gauss-Legendre rule on [0,1], exact through degree 2m-1."""
    if not (1 <= m <= 30):
        raise ConfigurationError(f"gauss rule size m={m} outside 1..30")
    x, w = _leg.leggauss(m)
    return QuadRule1D(0.5 * (x + 1.0), 0.5 * w)


@dataclass(frozen=True)
class QuadConfig:
    iquad: int = 7
    points: int = 4
    mode: str = "tensor"

    def __post_init__(self):
        if self.iquad < 1:
            raise ConfigurationError("iquad must be >= 1")
        if self.points < 1:
            raise ConfigurationError("points per cell must be >= 1")
        if self.mode not in ("tensor", "smolyak"):
            raise ConfigurationError(f"unknown quadrature mode {self.mode!r}")


def patch_level(iquad, level_sum):
    return max(1, math.ceil(iquad - level_sum / 2.0))


def _segments_1d(l, j):
    lo, hi = support_1d(l, j)
    if l == 0:
        return [(lo, hi)]
    mid = 0.5 * (lo + hi)
    return [(lo, mid), (mid, hi)]


def patch_boxes(bid):
    """The smooth boxes covering the support of a tensor basis function."""
    per_dim = [_segments_1d(l, j) for l, j in zip(bid.level, bid.cell)]
    return [list(combo) for combo in itertools.product(*per_dim)]


@functools.lru_cache(maxsize=None)
def _gauss_unit(m):
    x, w = _leg.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@functools.lru_cache(maxsize=None)
def smolyak_points(d, level):
    """Smolyak combination rule on the unit box: returns ((P, d) nodes, (P,) weights).

    Built from 1D Gauss rules with m_l = 2^l + 1 points.  Coincident points
    from different combination terms are left unmerged; weights of individual
    terms may be negative.
    """
    if d == 1:
        x, w = _gauss_unit(2**level + 1)
        return x[:, None].copy(), w.copy()
    nodes, weights = [], []
    for total in range(level, level + d):
        coef = (-1.0) ** (level + d - 1 - total) * math.comb(d - 1, total - level)
        for idx in itertools.product(range(1, total + 1), repeat=d):
            if sum(idx) != total:
                continue
            xs, ws = zip(*(_gauss_unit(2**l + 1) for l in idx))
            grid = np.stack([g.ravel() for g in np.meshgrid(*xs, indexing="ij")], axis=-1)
            wgt = coef * functools.reduce(np.multiply.outer, ws).ravel()
            nodes.append(grid)
            weights.append(wgt)
    return np.concatenate(nodes), np.concatenate(weights)


def _map_to_box(nodes01, weights01, box):
    pts = np.empty_like(nodes01)
    scale = 1.0
    for m, (lo, hi) in enumerate(box):
        pts[:, m] = lo + (hi - lo) * nodes01[:, m]
        scale *= hi - lo
    return pts, scale * weights01


def _patch_rule(box, level_sum, cfg):
    d = len(box)
    if cfg.mode == "smolyak":
        nodes, weights = smolyak_points(d, patch_level(cfg.iquad, level_sum))
    else:
        x, w = _gauss_unit(cfg.points)
        nodes = np.stack([g.ravel() for g in np.meshgrid(*([x] * d), indexing="ij")], axis=-1)
        weights = functools.reduce(np.multiply.outer, [w] * d).ravel() if d > 1 else w.copy()
    return _map_to_box(nodes, weights, box)


def _check_finite(vals, pts, what):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        where = pts[np.argmax(bad)]
        raise IntegrationError(f"non-finite {what} sample at {where}", point=where)


def integrate_against_basis(f, bid, k, cfg, family="orthonormal"):
    """Integral of a scalar field against one tensor basis function."""
    d = len(bid.level)
    wavelets = [
        make_wavelet(k, l, j, i, family=family)
        for l, j, i in zip(bid.level, bid.cell, bid.poly)
    ]
    level_sum = int(sum(bid.level))
    total = 0.0
    for box in patch_boxes(bid):
        pts, wts = _patch_rule(box, level_sum, cfg)
        fvals = np.asarray(f(pts), dtype=float)
        _check_finite(fvals, pts, "field")
        for m, w in enumerate(wavelets):
            fvals = fvals * w.eval(pts[:, m])
        total += float(wts @ fvals)
    return total


def integrate_separable_against_basis(factors, bid, k, cfg):
    """Product-form shortcut: d one-dimensional integrals instead of one d-dimensional.

    factors[m] is a vectorized function of the m-th coordinate alone.
    """
    total = 1.0
    for m, (l, j, i) in enumerate(zip(bid.level, bid.cell, bid.poly)):
        w = make_wavelet(k, l, j, i)
        part = 0.0
        for lo, hi in _segments_1d(l, j):
            x, wt = _gauss_unit(cfg.points)
            pts = lo + (hi - lo) * x
            vals = np.asarray(factors[m](pts), dtype=float)
            _check_finite(vals, pts[:, None], "factor")
            part += (hi - lo) * float(wt @ (vals * w.eval(pts)))
        total *= part
    return total


def integrate_boundary(g, face, builder, cfg, d, level_sum=0, segments=None):
    """Patchwise integral over one box face of g times a caller-supplied factor.

    face is (axis, side) with side 0 or 1; both g and builder receive full
    d-coordinate points with the normal coordinate pinned to the face.
    segments optionally lists per-tangential-coordinate smooth intervals.
    """
    axis, side = face
    tangential = [m for m in range(d) if m != axis]
    if segments is None:
        segments = [[(0.0, 1.0)] for _ in tangential]

    def full_points(tpts):
        pts = np.empty((len(tpts), d))
        pts[:, axis] = float(side)
        for c, m in enumerate(tangential):
            pts[:, m] = tpts[:, c]
        return pts

    if not tangential:  # 1D problem: the face is a single point
        pts = full_points(np.zeros((1, 0)))
        vals = np.asarray(g(pts), dtype=float) * np.asarray(builder(pts), dtype=float)
        _check_finite(vals, pts, "boundary integrand")
        return float(vals[0])

    total = 0.0
    for box in itertools.product(*segments):
        tpts, wts = _patch_rule(list(box), level_sum, cfg)
        pts = full_points(tpts)
        vals = np.asarray(g(pts), dtype=float) * np.asarray(builder(pts), dtype=float)
        _check_finite(vals, pts, "boundary integrand")
        total += float(wts @ vals)
    return total
