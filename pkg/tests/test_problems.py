"""Consistency checks for the builtin problem definitions.

The manufactured sources are hand-derived and hard-coded, so each one is
cross-checked against a finite-difference divergence of the analytic flux
K grad(u). The separable term expansions (series-based for the non-separable
fields) are checked pointwise against the plain callables.
"""

import numpy as np
import pytest

from sgdg.assembly import Constant, General, SeparableSum
from sgdg.problems import get_problem, problem_names

SOURCE_PROBLEMS = [
    "ex2d_const", "ex2d_smooth", "ex2d_discont",
    "ex3d_const", "ex3d_smooth",
    "ex4d_const", "ex4d_smooth",
]

_FD_STEP = 1e-4


def _coefficient_values(prob, pts):
    coeff = prob.coefficient
    if isinstance(coeff, Constant):
        return np.full(pts.shape[0], float(coeff.value))
    return np.asarray(coeff.func(pts), dtype=float)


def _interior_samples(prob, n, seed):
    rng = np.random.default_rng(np.random.PCG64(seed))
    pts = 0.05 + 0.9 * rng.random((4 * n, prob.d))
    if prob.name == "ex2d_discont":
        # the coefficient jumps across x_m = 1/2; differencing the flux
        # there is meaningless, so keep a margin around both lines
        keep = np.all(np.abs(pts - 0.5) > 0.05, axis=1)
        pts = pts[keep]
    return pts[:n]


def _fd_divergence_of_flux(prob, pts):
    div = np.zeros(pts.shape[0])
    for m in range(prob.d):
        shifted = pts.copy()
        shifted[:, m] += _FD_STEP
        fp = _coefficient_values(prob, shifted) \
            * np.asarray(prob.exact_grad(shifted), dtype=float)[:, m]
        shifted[:, m] -= 2 * _FD_STEP
        fm = _coefficient_values(prob, shifted) \
            * np.asarray(prob.exact_grad(shifted), dtype=float)[:, m]
        div += (fp - fm) / (2 * _FD_STEP)
    return div


@pytest.mark.parametrize("name", SOURCE_PROBLEMS)
def test_source_matches_fd_divergence(name):
    prob = get_problem(name)
    pts = _interior_samples(prob, 200, seed=1234)
    f = np.zeros(pts.shape[0]) if prob.source is None \
        else np.asarray(prob.source(pts), dtype=float)
    residual = -_fd_divergence_of_flux(prob, pts) - f
    assert np.abs(residual).max() <= 1e-5


@pytest.mark.parametrize("d", [2, 3, 4])
def test_exp_prod_source_matches_fd_divergence(d):
    prob = get_problem("exp_prod", d)
    pts = _interior_samples(prob, 200, seed=4321 + d)
    residual = -_fd_divergence_of_flux(prob, pts) \
        - np.asarray(prob.source(pts), dtype=float)
    assert np.abs(residual).max() <= 1e-5


def _eval_terms(terms, pts):
    total = np.zeros(pts.shape[0])
    for alpha, factors in terms:
        prod = np.full(pts.shape[0], alpha)
        for m, f in enumerate(factors):
            if f is not None:
                prod = prod * np.asarray(f(pts[:, m]), dtype=float)
        total += prod
    return total


@pytest.mark.parametrize("name", SOURCE_PROBLEMS)
def test_source_terms_match_callable(name):
    prob = get_problem(name)
    if prob.source_terms is None:
        pytest.skip("no separable expansion")
    pts = _interior_samples(prob, 300, seed=77)
    got = _eval_terms(prob.source_terms, pts)
    ref = np.asarray(prob.source(pts), dtype=float)
    scale = max(1.0, np.abs(ref).max())
    assert np.abs(got - ref).max() <= 1e-11 * scale


@pytest.mark.parametrize("name", SOURCE_PROBLEMS)
def test_exact_terms_match_callable(name):
    prob = get_problem(name)
    pts = _interior_samples(prob, 300, seed=78)
    got = _eval_terms(prob.exact_terms, pts)
    ref = np.asarray(prob.exact(pts), dtype=float)
    assert np.abs(got - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("name",
                         ["ex2d_smooth", "ex2d_discont", "ex3d_smooth",
                          "ex4d_smooth"])
def test_coefficient_hint_matches_function(name):
    prob = get_problem(name)
    assert isinstance(prob.coefficient, General)
    hint = prob.coefficient.hint
    assert isinstance(hint, SeparableSum)
    pts = _interior_samples(prob, 300, seed=79)
    got = _eval_terms(hint.terms, pts)
    ref = np.asarray(prob.coefficient.func(pts), dtype=float)
    assert np.abs(got - ref).max() <= 1e-12 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("name", SOURCE_PROBLEMS)
def test_dirichlet_agrees_with_exact_on_boundary(name):
    prob = get_problem(name)
    rng = np.random.default_rng(np.random.PCG64(99))
    pts = rng.random((100, prob.d))
    for m in range(prob.d):
        for side, value in ((0, 0.0), (1, 1.0)):
            face = pts.copy()
            face[:, m] = value
            g = np.asarray(prob.dirichlet(face), dtype=float)
            u = np.asarray(prob.exact(face), dtype=float)
            assert np.abs(g - u).max() <= 1e-12


def test_exact_grad_matches_fd_of_exact():
    for name in SOURCE_PROBLEMS:
        prob = get_problem(name)
        pts = _interior_samples(prob, 100, seed=7)
        grad = np.asarray(prob.exact_grad(pts), dtype=float)
        for m in range(prob.d):
            shifted = pts.copy()
            shifted[:, m] += _FD_STEP
            up = np.asarray(prob.exact(shifted), dtype=float)
            shifted[:, m] -= 2 * _FD_STEP
            um = np.asarray(prob.exact(shifted), dtype=float)
            fd = (up - um) / (2 * _FD_STEP)
            assert np.abs(fd - grad[:, m]).max() <= 1e-6


def test_get_problem_validation():
    with pytest.raises(ValueError):
        get_problem("no_such_problem")
    with pytest.raises(ValueError):
        get_problem("exp_prod")
    with pytest.raises(ValueError):
        get_problem("ex2d_const", d=3)
    assert get_problem("ex2d_const", d=2).name == "ex2d_const"
    assert set(problem_names()) == set(SOURCE_PROBLEMS) | {"exp_prod"}
