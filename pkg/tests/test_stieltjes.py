import numpy as np
import pytest

from godeconj.errors import DomainError, NonFiniteError, QuadratureError
from godeconj.stieltjes import (BvPath, ConstantDensity, FunctionDensity, PolynomialDensity,
                                RegulatedSample, TableDensity, adaptive_simpson, combine,
                                dumps_path, gronwall_check, ks_integral, loads_path, opnorm,
                                refinement_sum_oracle, sup_variation, total_variation)

from gronwall_cases import random_gronwall_instance, sample as _sample
from oracles import INTEGRANDS, KS_EXACT, integrators


def ident(window=(0.0, 2.0)):
    return BvPath.identity_like(window, origin=window[0])


# -- paths ---------------------------------------------------------------------


def test_left_continuous_evaluation():
    h = BvPath((0.0, 3.0), 1.0, 0.5, [(1.0, 2.0)])
    assert h(1.0) == pytest.approx(1.5)
    assert h.right_value(1.0) == pytest.approx(3.5)
    assert h(2.0) == pytest.approx(4.0)
    np.testing.assert_allclose(h(np.array([0.0, 1.0, 3.0])), [1.0, 1.5, 4.5])


@pytest.mark.parametrize("atoms", [[(3.0, 1.0)], [(1.0, 1.0), (0.5, 1.0)], [(-1.0, 1.0)]])
def test_atom_validation(atoms):
    with pytest.raises(DomainError):
        BvPath((0.0, 3.0), 0.0, None, atoms)


def test_window_violation():
    with pytest.raises(DomainError):
        ident()(2.5)


def test_matrix_path_shapes():
    p = BvPath((0.0, 1.0), np.eye(2), ConstantDensity(-np.eye(2)), [(0.5, np.ones((2, 2)))])
    assert p(np.array([0.2, 0.7])).shape == (2, 2, 2)
    with pytest.raises(DomainError):
        BvPath((0.0, 1.0), np.eye(2), ConstantDensity(1.0))


def test_table_density_primitive():
    d = TableDensity([0.0, 1.0, 2.0], [0.0, 2.0, 0.0])
    assert d.integral(0.0, 2.0) == pytest.approx(2.0)
    assert d.integral(0.5, 1.5) == pytest.approx(1.5)


# -- integral ------------------------------------------------------------------


def test_ks_integral_examples():
    assert ks_integral(lambda t: 1.0, ident(), 0.0, 2.0) == pytest.approx(2.0, abs=1e-12)
    atom = BvPath((0.0, 1.0), 0.0, None, [(0.5, 2.0)])
    assert ks_integral(lambda t: t, atom, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert ks_integral(lambda t: t, ident((0.0, 1.0)), 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)


def test_ks_integral_atom_tags():
    h = BvPath((0.0, 2.0), 0.0, None, [(1.0, 1.0)])
    # atoms in [a, b): included at the left end, excluded at the right end
    assert ks_integral(lambda t: 3.0, h, 1.0, 2.0) == pytest.approx(3.0)
    assert ks_integral(lambda t: 3.0, h, 0.0, 1.0) == pytest.approx(0.0)


def test_ks_integral_antisymmetry_and_degenerate():
    h = integrators()["mixed_b"]
    f = INTEGRANDS["tcos"]
    assert ks_integral(f, h, 0.8, 0.1) == pytest.approx(-ks_integral(f, h, 0.1, 0.8), abs=1e-13)
    assert ks_integral(f, h, 0.4, 0.4) == 0.0


@pytest.mark.parametrize("key", sorted(KS_EXACT))
def test_ks_corpus_against_closed_form(key):
    fn, hn = key
    val = ks_integral(INTEGRANDS[fn], integrators()[hn], 0.0, 1.0)
    assert val == pytest.approx(KS_EXACT[key], abs=1e-10)


def test_additivity_and_linearity():
    hs = integrators()
    f, g = INTEGRANDS["sin3"], INTEGRANDS["cubic"]
    h = hs["mixed_a"]
    whole = ks_integral(f, h, 0.0, 1.0)
    parts = ks_integral(f, h, 0.0, 0.25) + ks_integral(f, h, 0.25, 1.0)
    assert parts == pytest.approx(whole, rel=1e-10)
    lin_f = ks_integral(lambda t: 2 * f(t) - 3 * g(t), h, 0.0, 1.0)
    assert lin_f == pytest.approx(2 * whole - 3 * ks_integral(g, h, 0.0, 1.0), rel=1e-10)
    h2 = hs["mixed_b"]
    comb = combine([h, h2], [0.5, -2.0])
    lin_h = ks_integral(f, comb, 0.0, 1.0)
    assert lin_h == pytest.approx(0.5 * whole - 2 * ks_integral(f, h2, 0.0, 1.0), rel=1e-10)


def test_matrix_integrator_acts_on_the_left():
    A = np.array([[0.0, 1.0], [2.0, 0.0]])
    h = BvPath((0.0, 1.0), np.zeros((2, 2)), ConstantDensity(A))
    val = ks_integral(lambda t: np.array([1.0, t]), h, 0.0, 1.0)
    np.testing.assert_allclose(val, A @ np.array([1.0, 0.5]), atol=1e-12)


def test_regulated_sample_integrand():
    times = np.linspace(0.0, 1.0, 11)
    s = RegulatedSample(times, times.copy(), np.zeros(0), np.zeros(0), {})
    assert ks_integral(s, ident((0.0, 1.0)), 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)


def test_quadrature_errors():
    with pytest.raises(NonFiniteError):
        ks_integral(lambda t: np.nan, ident(), 0.0, 1.0)
    with pytest.raises(QuadratureError):
        adaptive_simpson(lambda t: np.sin(1.0 / max(t, 1e-300)), 0.0, 1.0, tol=1e-14, max_depth=6)


# -- variation -----------------------------------------------------------------


def test_variation_examples():
    assert total_variation(BvPath.identity_like((0.0, 3.0)), 0.0, 3.0) == pytest.approx(3.0)
    h = BvPath((0.0, 3.0), 0.0, None, [(1.0, 2.0), (2.0, -1.0)])
    assert total_variation(h, 0.0, 3.0) == pytest.approx(3.0)
    assert total_variation(h, 1.5, 1.5) == 0.0
    assert sup_variation(BvPath.identity_like((0.0, 1.0))) == pytest.approx(1.0)
    assert sup_variation(BvPath((0.0, 10.0), 0.0, 0.1, [(5.0, 0.5)])) == pytest.approx(1.5)
    assert sup_variation(BvPath.zero((0.0, 1.0))) == 0.0


def test_variation_dominates_increment():
    for h in integrators().values():
        for a, b in [(0.0, 1.0), (0.2, 0.6), (0.3, 0.95)]:
            assert total_variation(h, a, b) >= abs(float(h(b)) - float(h(a))) - 1e-12


def test_variation_of_sign_changing_polynomial():
    h = BvPath((-1.0, 1.0), 0.0, PolynomialDensity([0.0, 1.0]))
    assert total_variation(h, -1.0, 1.0) == pytest.approx(1.0, abs=1e-10)


def test_matrix_variation_uses_operator_norm():
    J = np.array([[3.0, 0.0], [4.0, 0.0]])
    h = BvPath((0.0, 1.0), np.zeros((2, 2)), None, [(0.5, J)])
    assert sup_variation(h) == pytest.approx(opnorm(J)) == pytest.approx(5.0)


# -- oracle ----------------------------------------------------------------------


def test_oracle_examples():
    h = ident((0.0, 1.0))
    assert refinement_sum_oracle(lambda t: t, h, 0.0, 1.0, 2) == pytest.approx(0.25)
    for h in integrators().values():
        val = refinement_sum_oracle(lambda t: 1.0, h, 0.0, 1.0, 7)
        assert val == pytest.approx(float(h(1.0)) - float(h(0.0)), abs=1e-12)


def test_oracle_monotone_convergence():
    h = ident((0.0, 1.0))
    errs = [abs(refinement_sum_oracle(lambda t: t * t, h, 0.0, 1.0, n) - 1 / 3)
            for n in (10, 100, 1000)]
    assert errs[0] > errs[1] > errs[2]
    for key in [("sin3", "mixed_b"), ("tcos", "trig_density")]:
        exact = KS_EXACT[key]
        f, hh = INTEGRANDS[key[0]], integrators()[key[1]]
        errs = [abs(refinement_sum_oracle(f, hh, 0.0, 1.0, n) - exact) for n in (100, 1000, 10000)]
        assert errs[0] > errs[1] > errs[2]


def test_midpoint_oracle_is_second_order():
    h = ident((0.0, 1.0))
    e1 = abs(refinement_sum_oracle(lambda t: t * t, h, 0.0, 1.0, 100, tags="midpoint") - 1 / 3)
    e2 = abs(refinement_sum_oracle(lambda t: t * t, h, 0.0, 1.0, 200, tags="midpoint") - 1 / 3)
    assert e1 / e2 == pytest.approx(4.0, rel=1e-3)


# -- Gronwall ---------------------------------------------------------------------


def test_gronwall_examples():
    c1, c2 = 1.5, 0.7
    times = np.linspace(0.0, 1.0, 201)
    flat = _sample(lambda t, right: np.full(np.shape(t), c1), times)
    rep = gronwall_check(flat, BvPath((0.0, 1.0), 2.0), c1, c2)
    assert rep.premise_holds and rep.conclusion_holds
    h = ident((0.0, 1.0))
    equal = _sample(lambda t, right: c1 * np.exp(c2 * t), times)
    rep = gronwall_check(equal, h, c1, c2, rtol=1e-6)
    assert rep.premise_holds and rep.conclusion_holds
    assert rep.worst_conclusion_ratio == pytest.approx(1.0, abs=1e-12)
    big = _sample(lambda t, right: 2 * c1 * np.exp(2 * c2 * t), times)
    assert not gronwall_check(big, h, c1, c2).premise_holds


def test_gronwall_rejects_bad_input():
    times = np.linspace(0.0, 1.0, 5)
    u = _sample(lambda t, right: np.ones(np.shape(t)), times)
    with pytest.raises(DomainError):
        gronwall_check(u, ident((0.0, 1.0)), 0.0, 1.0)
    with pytest.raises(DomainError):
        gronwall_check(u, BvPath((0.0, 1.0), 0.0, -1.0), 1.0, 1.0)


def test_gronwall_randomized_implication():
    rng = np.random.default_rng(20240611)
    premise_true = 0
    violations = 0
    while premise_true < 100:
        u, h, c1, c2 = random_gronwall_instance(rng)
        rep = gronwall_check(u, h, c1, c2)
        if rep.premise_holds:
            premise_true += 1
            violations += not rep.conclusion_holds
        assert rep.implication_ok
    assert violations == 0


# -- serialization ------------------------------------------------------------------


def test_serialization_round_trip():
    paths = [
        BvPath((0.0, 1.0), 0.5, PolynomialDensity([1.0, -2.0, 0.25]), [(0.3, 1.5)]),
        BvPath((-1.0, 1.0), np.eye(2), ConstantDensity(-np.eye(2)), [(0.0, 0.5 * np.eye(2))]),
        BvPath((0.0, 2.0), 0.0, TableDensity([0.0, 1.0, 2.0], [1.0, 3.0, 0.0])),
    ]
    ts = np.linspace(0.0, 1.0, 7)
    for p in paths:
        q = loads_path(dumps_path(p))
        tt = np.clip(ts, *p.window)
        np.testing.assert_allclose(q(tt), p(tt), rtol=0, atol=0)
        assert dumps_path(q) == dumps_path(p)


def test_serialization_rejects_callables():
    p = BvPath((0.0, 1.0), 0.0, FunctionDensity(np.cos, ()))
    with pytest.raises(DomainError):
        dumps_path(p)
    with pytest.raises(DomainError):
        loads_path("bvpath 1\nwindow 0 1\n")
