import math

import numpy as np
import pytest

from sgdg.assembly import SchemeParams, assemble_system, l2_project_function
from sgdg.basis1d import cached_basis, _gauss01
from sgdg.linalg import pcg
from sgdg.postproc import (DiscreteFunction, ErrorReport, convergence_orders,
                           error_norms, eval_discrete, eval_one_sided)
from sgdg.problems import default_sigma, get_problem
from sgdg.spaces import SpaceSpec


def naive_eval(u_h, pts, deriv=None):
    """Direct summation over every basis function: the slow oracle."""
    spec = u_h.space
    family = "antisymmetric" if spec.kind == "vhathat" else "orthonormal"
    basis = cached_basis(spec.N, spec.k, family)
    k = spec.k
    out = np.zeros(len(pts))
    for r, bid in enumerate(spec.ids()):
        if u_h.coefficients[r] == 0.0:
            continue
        term = np.full(len(pts), u_h.coefficients[r])
        for m in range(spec.d):
            off = sum((k + 1) if l == 0 else 2 ** (l - 1) * (k + 1)
                      for l in range(bid.level[m]))
            w = basis.wavelets[off + bid.cell[m] * (k + 1) + bid.poly[m] - 1]
            dv = 1 if deriv == m else 0
            term = term * w.eval(pts[:, m], deriv=dv)
        out += term
    return out


@pytest.mark.parametrize("kind,d,N,k", [
    ("vhat", 2, 3, 1),
    ("vhat", 3, 2, 2),
    ("vtilde", 2, 2, 1),
    ("vhathat", 2, 2, 1),
])
def test_eval_matches_naive_summation(kind, d, N, k):
    spec = SpaceSpec(kind, d, N, k)
    rng = np.random.default_rng(np.random.PCG64(99))
    u_h = DiscreteFunction(spec, rng.standard_normal(spec.dim))
    pts = rng.random((100, d))
    got = eval_discrete(u_h, pts)
    want = naive_eval(u_h, pts)
    assert np.abs(got - want).max() <= 1e-11 * max(np.abs(want).max(), 1.0)
    for m in range(d):
        gotd = eval_discrete(u_h, pts, deriv=m)
        wantd = naive_eval(u_h, pts, deriv=m)
        assert np.abs(gotd - wantd).max() \
            <= 1e-11 * max(np.abs(wantd).max(), 1.0)


def test_eval_unit_vector_is_basis_function():
    spec = SpaceSpec("vhat", 2, 2, 1)
    rng = np.random.default_rng(np.random.PCG64(4))
    pts = rng.random((40, 2))
    for r in (0, 5, spec.dim - 1):
        c = np.zeros(spec.dim)
        c[r] = 1.0
        got = eval_discrete(DiscreteFunction(spec, c), pts)
        want = naive_eval(DiscreteFunction(spec, c), pts)
        assert np.abs(got - want).max() <= 1e-13


def test_eval_projected_constant_is_one():
    spec = SpaceSpec("vhat", 2, 3, 1)
    coef = l2_project_function(lambda pts: np.ones(len(pts)), spec,
                               u_terms=((1.0, [None, None]),))
    rng = np.random.default_rng(np.random.PCG64(11))
    pts = rng.random((50, 2))
    vals = eval_discrete(DiscreteFunction(spec, coef), pts)
    assert np.abs(vals - 1.0).max() <= 1e-12


def test_eval_scalar_point_and_shape():
    spec = SpaceSpec("vhat", 2, 2, 1)
    rng = np.random.default_rng(np.random.PCG64(12))
    u_h = DiscreteFunction(spec, rng.standard_normal(spec.dim))
    v = eval_discrete(u_h, np.array([0.3, 0.7]))
    assert np.isscalar(v)
    arr = eval_discrete(u_h, np.array([[0.3, 0.7]]))
    assert abs(v - arr[0]) == 0.0


def test_eval_one_sided_limits():
    spec = SpaceSpec("vhat", 1, 3, 1)
    rng = np.random.default_rng(np.random.PCG64(21))
    u_h = DiscreteFunction(spec, rng.standard_normal(spec.dim))
    x = np.array([0.5])
    left, right = eval_one_sided(u_h, x)
    eps = 1e-9
    below = eval_discrete(u_h, np.array([[0.5 - eps]]))[0]
    above = eval_discrete(u_h, np.array([[0.5 + eps]]))[0]
    assert abs(left - below) < 1e-5
    assert abs(right - above) < 1e-5
    assert eval_discrete(u_h, np.array([[0.5]]))[0] == pytest.approx(right)


def test_coefficient_length_validated():
    spec = SpaceSpec("vhat", 2, 2, 1)
    with pytest.raises(ValueError):
        DiscreteFunction(spec, np.zeros(spec.dim + 1))


# ----------------------------------------------------------------------
# error norms


def zero_field(pts):
    return np.zeros(len(pts))


def zero_grad(pts):
    return np.zeros_like(pts)


def test_parseval_identity():
    spec = SpaceSpec("vhat", 2, 3, 2)
    rng = np.random.default_rng(np.random.PCG64(31))
    c = rng.standard_normal(spec.dim)
    rep = error_norms(DiscreteFunction(spec, c), zero_field, zero_grad,
                      with_energy=False)
    assert abs(rep.l2 - np.linalg.norm(c)) <= 1e-10 * np.linalg.norm(c)


def test_norm_ordering_on_unit_box():
    spec = SpaceSpec("vhat", 2, 3, 1)
    rng = np.random.default_rng(np.random.PCG64(32))
    for _ in range(5):
        c = rng.standard_normal(spec.dim)
        rep = error_norms(DiscreteFunction(spec, c), zero_field,
                          with_energy=False)
        assert rep.l1 <= rep.l2 * (1 + 1e-12)
        assert rep.l2 <= rep.linf * (1 + 1e-12)


def test_exactly_representable_function_zero_error():
    # x(1-x)*y(1-y) is biquadratic, hence in the k=2 space at any level
    u = lambda p: p[:, 0] * (1 - p[:, 0]) * p[:, 1] * (1 - p[:, 1])
    gu = lambda p: np.stack([
        (1 - 2 * p[:, 0]) * p[:, 1] * (1 - p[:, 1]),
        p[:, 0] * (1 - p[:, 0]) * (1 - 2 * p[:, 1])], axis=-1)
    spec = SpaceSpec("vhat", 2, 2, 2)
    coef = l2_project_function(u, spec)
    rep = error_norms(DiscreteFunction(spec, coef), u, gu)
    for name in ("l1", "l2", "linf", "h1", "energy"):
        assert getattr(rep, name) <= 1e-10


def test_energy_norm_of_continuous_bubble():
    # norms of the function itself: exact = 0. The bubble is continuous with
    # zero trace, so the face terms reduce to the mean-derivative sum, which
    # has the closed form h * sum_p (1-2ph)^2 / 30 per direction.
    u = lambda p: p[:, 0] * (1 - p[:, 0]) * p[:, 1] * (1 - p[:, 1])
    spec = SpaceSpec("vhat", 2, 2, 2)
    coef = l2_project_function(u, spec)
    rep = error_norms(DiscreteFunction(spec, coef), zero_field, zero_grad)
    l2_exact = 1.0 / 30.0
    sem_sq = 1.0 / 45.0
    h = 0.25
    face_sq = 2.0 * h * sum((1 - 2 * p * h) ** 2 / 30.0 for p in range(5))
    assert rep.l2 == pytest.approx(l2_exact, rel=1e-10)
    assert rep.h1 == pytest.approx(math.sqrt(sem_sq + l2_exact ** 2),
                                   rel=1e-10)
    assert rep.energy == pytest.approx(math.sqrt(sem_sq + face_sq),
                                       rel=1e-10)


def test_linf_is_lattice_max():
    spec = SpaceSpec("vhat", 2, 2, 1)
    rng = np.random.default_rng(np.random.PCG64(41))
    u_h = DiscreteFunction(spec, rng.standard_normal(spec.dim))
    rep = error_norms(u_h, zero_field, with_energy=False)
    nodes, _ = _gauss01(6)
    h = 2.0 ** -spec.N
    axis = np.add.outer(np.arange(2 ** spec.N) * h, h * nodes).ravel()
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    naive_max = np.abs(eval_discrete(u_h, pts)).max()
    assert rep.linf == pytest.approx(naive_max, rel=1e-12)


def test_chunked_sweep_matches_single_pass(monkeypatch):
    # force the prefix-chunked evaluation path and compare against the
    # single-pass result on a case small enough to do either way
    import sgdg.postproc as pp
    prob = get_problem("exp_prod", 3)
    spec = SpaceSpec("vhat", 3, 2, 2)
    c = l2_project_function(prob.exact, spec, u_terms=prob.exact_terms)
    u_h = DiscreteFunction(spec, c)
    ref = error_norms(u_h, prob.exact, prob.exact_grad, with_energy=False)
    monkeypatch.setattr(pp, "_CHUNK_POINTS", 500)
    chunked = error_norms(u_h, prob.exact, prob.exact_grad,
                          with_energy=False)
    for name in ("l1", "l2", "linf", "h1"):
        assert getattr(chunked, name) == pytest.approx(
            getattr(ref, name), rel=1e-13)


def test_h1_without_gradient_reduces_to_l2():
    spec = SpaceSpec("vhat", 2, 2, 1)
    rng = np.random.default_rng(np.random.PCG64(51))
    u_h = DiscreteFunction(spec, rng.standard_normal(spec.dim))
    rep = error_norms(u_h, zero_field, exact_grad=None, with_energy=False)
    assert rep.h1 == pytest.approx(rep.l2, rel=1e-14)
    assert math.isnan(rep.energy)


def test_report_validation():
    with pytest.raises(ValueError):
        ErrorReport(-1.0, 0.0, 0.0, 0.0, 0.0, 2, 3, 1, 80)
    with pytest.raises(ValueError):
        ErrorReport(0.0, math.inf, 0.0, 0.0, 0.0, 2, 3, 1, 80)


def test_projection_error_matches_table_value():
    prob = get_problem("exp_prod", d=2)
    spec = SpaceSpec("vhat", 2, 3, 2)
    coef = l2_project_function(prob.exact, spec, u_terms=prob.exact_terms)
    rep = error_norms(DiscreteFunction(spec, coef), prob.exact,
                      prob.exact_grad, with_energy=False)
    assert abs(rep.l2 - 7.26e-6) <= 0.05 * 7.26e-6


def test_solution_error_matches_table_value():
    prob = get_problem("ex2d_const")
    spec = SpaceSpec("vhat", 2, 6, 2)
    a, b = assemble_system(spec, prob,
                           SchemeParams(sigma=default_sigma(2, 2)))
    sol = pcg(a, b, tol=1e-12)
    rep = error_norms(DiscreteFunction(spec, sol.solution), prob.exact,
                      prob.exact_grad, with_energy=False)
    assert abs(rep.l2 - 4.36e-7) <= 0.05 * 4.36e-7
    assert abs(rep.h1 - 1.19e-4) <= 0.05 * 1.19e-4


# ----------------------------------------------------------------------
# convergence orders


def make_report(N, l2):
    return ErrorReport(l2, l2, l2, l2, l2, 2, N, 1, 0)


def test_orders_paper_example():
    reports = [make_report(3, 4.49e-3), make_report(4, 1.18e-3)]
    orders = convergence_orders(reports)
    assert orders["l2"][0] == pytest.approx(1.93, abs=0.005)


def test_orders_exact_ratios():
    reports = [make_report(2, 1e-2), make_report(3, 2.5e-3),
               make_report(4, 6.25e-4)]
    orders = convergence_orders(reports)
    assert orders["l1"] == [pytest.approx(2.0), pytest.approx(2.0)]
    halving = [make_report(2, 8e-1), make_report(3, 4e-1)]
    assert convergence_orders(halving)["l2"][0] == pytest.approx(1.0)


def test_orders_zero_error_reported_none():
    reports = [make_report(2, 1e-3), make_report(3, 0.0)]
    assert convergence_orders(reports)["l2"] == [None]


def test_orders_require_consecutive_levels():
    with pytest.raises(ValueError):
        convergence_orders([make_report(2, 1.0), make_report(4, 0.5)])
    with pytest.raises(ValueError):
        convergence_orders([make_report(2, 1.0)])
