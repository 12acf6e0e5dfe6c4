"""Builtin model problems with separable expansions of their data.

Each builder returns a Problem whose coefficient, volume source and boundary
data carry analytic separable-sum hints alongside the pointwise formulas, so
assembly can run on 1D integrals while tests can cross-check the closed
forms by finite differences.
"""

import math

import numpy as np

from .assembly import Constant, General, Problem, SeparableSum

PI = math.pi

DEFAULT_SIGMA = {
    (2, 1): 10.0, (2, 2): 20.0,
    (3, 1): 15.0, (3, 2): 30.0,
    (4, 1): 30.0, (4, 2): 60.0,
}


def default_sigma(d, k):
    return DEFAULT_SIGMA.get((d, k))


def _sin(x):
    return np.sin(PI * np.asarray(x, dtype=float))


class _FactorCache:
    """Shared 1D factor objects so the assembler can deduplicate them."""

    def __init__(self):
        self.store = {}

    def pow(self, q):
        if q == 0:
            return None
        key = ("pow", q)
        if key not in self.store:
            self.store[key] = lambda x, q=q: np.asarray(x, dtype=float) ** q
        return self.store[key]

    def pow_sin(self, q):
        key = ("pow_sin", q)
        if key not in self.store:
            if q == 0:
                self.store[key] = _sin
            else:
                self.store[key] = (lambda x, q=q:
                                   np.asarray(x, dtype=float) ** q * _sin(x))
        return self.store[key]

    def pow_cos(self, q):
        key = ("pow_cos", q)
        if key not in self.store:
            self.store[key] = (lambda x, q=q: np.asarray(x, dtype=float) ** q
                               * np.cos(PI * np.asarray(x, dtype=float)))
        return self.store[key]


def _sin_product_coefficient_terms(d, cache, nterms=9):
    """sin(x_1 * ... * x_d) + 1 as a separable sum via the sine series."""
    terms = [(1.0, tuple([None] * d))]
    for r in range(nterms):
        alpha = (-1.0) ** r / math.factorial(2 * r + 1)
        terms.append((alpha, tuple([cache.pow(2 * r + 1)] * d)))
    return tuple(terms)


def _sin_product_source_terms(d, cache, nterms=10):
    """Manufactured source for K = sin(prod x)+1 and u = prod sin(pi x):

        f = d pi^2 K u - pi cos(prod x) sum_m (prod_{n!=m} x_n)
            cos(pi x_m) prod_{n!=m} sin(pi x_n)
    """
    terms = [(d * PI ** 2, tuple([cache.pow_sin(0)] * d))]
    for r in range(nterms):
        alpha = d * PI ** 2 * (-1.0) ** r / math.factorial(2 * r + 1)
        terms.append((alpha, tuple([cache.pow_sin(2 * r + 1)] * d)))
    for m in range(d):
        for r in range(nterms):
            alpha = -PI * (-1.0) ** r / math.factorial(2 * r)
            factors = [cache.pow_sin(2 * r + 1)] * d
            factors[m] = cache.pow_cos(2 * r)
            terms.append((alpha, tuple(factors)))
    return tuple(terms)


def _sin_product_smooth(d, name):
    """K = sin(prod x)+1, u = prod sin(pi x), homogeneous Dirichlet data."""
    cache = _FactorCache()

    def kfun(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.sin(np.prod(pts, axis=1)) + 1.0

    def exact(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.prod(np.sin(PI * pts), axis=1)

    def exact_grad(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        s = np.sin(PI * pts)
        out = np.empty_like(pts)
        for m in range(d):
            cols = [PI * np.cos(PI * pts[:, n]) if n == m else s[:, n]
                    for n in range(d)]
            out[:, m] = np.prod(np.stack(cols, axis=1), axis=1)
        return out

    def source(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        prod_all = np.prod(pts, axis=1)
        u = np.prod(np.sin(PI * pts), axis=1)
        f = d * PI ** 2 * (np.sin(prod_all) + 1.0) * u
        cos_prod = np.cos(prod_all)
        for m in range(d):
            others = [n for n in range(d) if n != m]
            term = cos_prod * np.prod(pts[:, others], axis=1)
            term = term * PI * np.cos(PI * pts[:, m])
            term = term * np.prod(np.sin(PI * pts[:, others]), axis=1)
            f -= term
        return f

    hint = SeparableSum(_sin_product_coefficient_terms(d, cache))
    return Problem(
        d=d,
        coefficient=General(kfun, hint=hint),
        source=source,
        source_terms=_sin_product_source_terms(d, cache),
        dirichlet=lambda pts: np.zeros(np.atleast_2d(pts).shape[0]),
        boundary_terms={},
        exact=exact,
        exact_grad=exact_grad,
        exact_terms=((1.0, tuple([_sin] * d)),),
        name=name,
    )


def _harmonic_sinh(d, name):
    """-Laplace u = 0 with u = prod_{m<d-1} sin(pi x_m) times a sinh layer in
    the last coordinate; Dirichlet data vanishes except on x_{d-1} = 1."""
    c = math.sqrt(d - 1)
    denom = math.sinh(c * PI)

    def exact(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.sinh(c * PI * pts[:, d - 1]) / denom
        for m in range(d - 1):
            out = out * np.sin(PI * pts[:, m])
        return out

    def exact_grad(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        sins = np.sin(PI * pts[:, :d - 1])
        layer = np.sinh(c * PI * pts[:, d - 1]) / denom
        out = np.empty_like(pts)
        for m in range(d - 1):
            cols = [PI * np.cos(PI * pts[:, n]) if n == m else sins[:, n]
                    for n in range(d - 1)]
            out[:, m] = np.prod(np.stack(cols, axis=1), axis=1) * layer
        out[:, d - 1] = (np.prod(sins, axis=1) * c * PI
                         * np.cosh(c * PI * pts[:, d - 1]) / denom)
        return out

    def layer(x):
        return np.sinh(c * PI * np.asarray(x, dtype=float)) / denom

    boundary = {(d - 1, 1): [(1.0, {m: _sin for m in range(d - 1)})]}
    return Problem(
        d=d,
        coefficient=Constant(1.0),
        dirichlet=exact,
        boundary_terms=boundary,
        exact=exact,
        exact_grad=exact_grad,
        exact_terms=((1.0, tuple([_sin] * (d - 1) + [layer])),),
        name=name,
    )


def make_ex2d_const():
    return _harmonic_sinh(2, "ex2d_const")


def make_ex2d_smooth():
    """K = sin(x1 x2) + 1 with u = sin(pi x1) sin(pi x2)."""
    return _sin_product_smooth(2, "ex2d_smooth")


def make_ex2d_discont():
    """Checkerboard coefficient 2 + sign((x1-1/2)(x2-1/2)); the exact flux
    is continuous across the jump lines, so f = 2 pi^2 K u exactly."""
    d = 2

    def s(x):
        return np.where(np.asarray(x, dtype=float) >= 0.5, 1.0, -1.0)

    def kfun(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return 2.0 + s(pts[:, 0]) * s(pts[:, 1])

    def s_sin(x):
        return s(x) * _sin(x)

    def exact(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.sin(PI * pts[:, 0]) * np.sin(PI * pts[:, 1])

    def exact_grad(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.stack([
            PI * np.cos(PI * pts[:, 0]) * np.sin(PI * pts[:, 1]),
            PI * np.sin(PI * pts[:, 0]) * np.cos(PI * pts[:, 1]),
        ], axis=1)

    def source(pts):
        return 2.0 * PI ** 2 * kfun(pts) * exact(pts)

    hint = SeparableSum(((2.0, (None, None)), (1.0, (s, s))))
    source_terms = (
        (4.0 * PI ** 2, (_sin, _sin)),
        (2.0 * PI ** 2, (s_sin, s_sin)),
    )
    return Problem(
        d=d,
        coefficient=General(kfun, hint=hint),
        source=source,
        source_terms=source_terms,
        dirichlet=lambda pts: np.zeros(np.atleast_2d(pts).shape[0]),
        boundary_terms={},
        exact=exact,
        exact_grad=exact_grad,
        exact_terms=((1.0, (_sin, _sin)),),
        name="ex2d_discont",
    )


def make_ex3d_const():
    return _harmonic_sinh(3, "ex3d_const")


def make_ex3d_smooth():
    return _sin_product_smooth(3, "ex3d_smooth")


def make_ex4d_const():
    return _harmonic_sinh(4, "ex4d_const")


def make_ex4d_smooth():
    return _sin_product_smooth(4, "ex4d_smooth")


def make_exp_prod(d):
    """u = exp(prod x_m) with K = 1; used mostly as a projection target."""
    cache = _FactorCache()
    nterms = 18

    def exact(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.exp(np.prod(pts, axis=1))

    def exact_grad(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        u = np.exp(np.prod(pts, axis=1))
        out = np.empty_like(pts)
        for m in range(d):
            others = [n for n in range(d) if n != m]
            out[:, m] = u * np.prod(pts[:, others], axis=1)
        return out

    def source(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        u = np.exp(np.prod(pts, axis=1))
        total = np.zeros(pts.shape[0])
        for m in range(d):
            others = [n for n in range(d) if n != m]
            total += np.prod(pts[:, others], axis=1) ** 2
        return -u * total

    exact_terms = tuple(
        (1.0 / math.factorial(r), tuple([cache.pow(r)] * d))
        for r in range(nterms))

    source_terms = []
    for m in range(d):
        for r in range(nterms):
            factors = [cache.pow(r + 2)] * d
            factors[m] = cache.pow(r)
            source_terms.append((-1.0 / math.factorial(r), tuple(factors)))

    boundary = {}
    for m in range(d):
        boundary[(m, 0)] = [(1.0, {})]
        face_terms = []
        for r in range(nterms):
            face_terms.append((1.0 / math.factorial(r),
                               {n: cache.pow(r) for n in range(d) if n != m}))
        boundary[(m, 1)] = face_terms

    return Problem(
        d=d,
        coefficient=Constant(1.0),
        source=source,
        source_terms=tuple(source_terms),
        dirichlet=exact,
        boundary_terms=boundary,
        exact=exact,
        exact_grad=exact_grad,
        exact_terms=exact_terms,
        name="exp_prod",
    )


_BUILDERS = {
    "ex2d_const": (make_ex2d_const, 2),
    "ex2d_smooth": (make_ex2d_smooth, 2),
    "ex2d_discont": (make_ex2d_discont, 2),
    "ex3d_const": (make_ex3d_const, 3),
    "ex3d_smooth": (make_ex3d_smooth, 3),
    "ex4d_const": (make_ex4d_const, 4),
    "ex4d_smooth": (make_ex4d_smooth, 4),
}


def problem_names():
    return sorted(_BUILDERS) + ["exp_prod"]


def get_problem(name, d=None):
    if name == "exp_prod":
        if d is None:
            raise ValueError("exp_prod needs an explicit dimension")
        return make_exp_prod(d)
    if name not in _BUILDERS:
        raise ValueError(f"unknown problem {name!r}; "
                         f"choose from {', '.join(problem_names())}")
    builder, fixed_d = _BUILDERS[name]
    if d is not None and d != fixed_d:
        raise ValueError(f"{name} is a {fixed_d}D problem")
    return builder()
