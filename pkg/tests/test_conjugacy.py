import math

import numpy as np
import pytest

from godeconj.conjugacy import (ConjugacyField, FieldSpec, apply_map, build_phi, build_psi,
                                check_sff, holder_exponent, holder_theta, psi_evaluator,
                                verify_identities, verify_solution_mapping)
from godeconj.errors import DomainError, GateError, HullError, TruncationError
from godeconj.linear import Dichotomy
from godeconj.nonlinear import Perturbation
from godeconj.stieltjes import BvPath, FunctionDensity

from oracles import FORCING
from systems import hyperbolic_tanh, ide_saddle, scalar_forced, tanh_F, zero_saddle


@pytest.fixture(scope="module")
def forced_fields():
    s = scalar_forced()
    return s, build_phi(s.sys, s.dich, s.F, s.spec, s.cfg), build_psi(s.sys, s.dich, s.F, s.spec, s.cfg)


@pytest.fixture(scope="module")
def saddle_fields():
    s = hyperbolic_tanh()
    return s, build_phi(s.sys, s.dich, s.F, s.spec, s.cfg), build_psi(s.sys, s.dich, s.F, s.spec, s.cfg)


# -- field plumbing ------------------------------------------------------------------


def test_field_spec():
    spec = FieldSpec.box(0.0, 1.0, 3, 2.0, 5, 2)
    assert spec.shape == (3, 5, 5) and spec.dim == 2
    t, x = spec.nodes()
    assert t.shape == (75,) and x.shape == (75, 2)
    assert spec.refined().shape == (5, 9, 9)
    with pytest.raises(DomainError):
        FieldSpec(np.array([0.0, 0.0]), (np.array([0.0, 1.0]),))


def test_apply_map_examples():
    spec = FieldSpec.box(0.0, 1.0, 3, 1.0, 3, 2)
    zero = ConjugacyField.zero("phi", spec)
    x = np.array([[0.3, -0.7]])
    np.testing.assert_array_equal(apply_map(zero, [0.4], x), x)
    t, nodes = spec.nodes()
    affine = np.stack([0.5 * nodes[:, 0] - nodes[:, 1] + t, 2.0 * nodes[:, 1]], axis=-1)
    f = ConjugacyField("psi", spec, affine.reshape(spec.shape + (2,)))
    assert np.allclose(apply_map(f, t[7], nodes[7]), nodes[7] + affine[7], atol=0, rtol=0)
    mid_t, mid_x = 0.25, np.array([0.5, -0.5])
    want = mid_x + np.array([0.5 * 0.5 + 0.5 + mid_t, -1.0])
    np.testing.assert_allclose(apply_map(f, mid_t, mid_x), want, atol=1e-15)
    with pytest.raises(HullError):
        apply_map(f, 0.5, np.array([1.5, 0.0]))
    out, flags = apply_map(f, [0.5, 0.5], np.array([[1.5, 0.0], [0.0, 0.0]]), clamp=True)
    assert flags.tolist() == [True, False]


def test_field_rows_and_validation():
    spec = FieldSpec.box(0.0, 1.0, 2, 1.0, 2, 1)
    f = ConjugacyField.zero("phi", spec)
    rows = list(f.rows())
    assert len(rows) == 4 and rows[0] == [0.0, -1.0, 0.0]
    with pytest.raises(DomainError):
        ConjugacyField("chi", spec, np.zeros(spec.shape + (1,)))
    with pytest.raises(DomainError):
        ConjugacyField("phi", spec, np.full(spec.shape + (1,), np.nan))


# -- construction ----------------------------------------------------------------------


def test_zero_perturbation_fields():
    s = zero_saddle()
    phi = build_phi(s.sys, s.dich, s.F, s.spec, s.cfg)
    psi = build_psi(s.sys, s.dich, s.F, s.spec, s.cfg)
    assert phi.sup == 0.0 and psi.sup == 0.0
    rep = verify_identities(phi, psi, test_points=s.test_points())
    assert rep.psi_phi == 0.0 and rep.phi_psi == 0.0
    m = verify_solution_mapping(phi, s.sys, s.dich, s.F, [[0.2, 0.1]], s.cfg.time_grid, psi_f=psi)
    assert m.phi_residual <= 1e-10 and m.psi_residual <= 1e-10


def test_forced_fields_are_constant(forced_fields):
    s, phi, psi = forced_fields
    np.testing.assert_allclose(phi.values, FORCING, atol=1e-3)
    np.testing.assert_allclose(psi.values, -FORCING, atol=1e-3)
    rep = verify_identities(phi, psi, test_points=s.test_points())
    assert rep.psi_phi <= 2e-3 and rep.phi_psi <= 2e-3 and rep.passed
    m = verify_solution_mapping(phi, s.sys, s.dich, s.F, [[0.5], [-1.0]], s.cfg.time_grid,
                                psi_f=psi)
    assert m.phi_residual <= 1e-3 and m.psi_residual <= 1e-3 and m.passed


def test_saddle_contraction_and_bounds(saddle_fields):
    s, phi, psi = saddle_fields
    delta = phi.meta["delta"]
    assert 0 < delta < 1
    assert all(r <= delta + 0.05 for r in phi.meta["ratios_max_per_sweep"])
    assert phi.meta["delta_hat"] < 1
    assert phi.sup <= phi.meta["sup_bound"] and psi.sup <= psi.meta["sup_bound"]
    assert phi.meta["final_change"] < s.cfg.tol


def test_saddle_identities_refine(saddle_fields):
    s, phi, psi = saddle_fields
    tp = s.test_points()
    coarse = verify_identities(phi, psi, test_points=tp)
    fine_spec = s.spec.refined()
    phi2 = build_phi(s.sys, s.dich, s.F, fine_spec, s.cfg)
    psi2 = build_psi(s.sys, s.dich, s.F, fine_spec, s.cfg)
    fine = verify_identities(phi2, psi2, test_points=tp)
    assert coarse.passed and fine.passed
    for a, b in [(coarse.psi_phi, fine.psi_phi), (coarse.phi_psi, fine.phi_psi)]:
        assert b <= 0.5 * a


def test_saddle_solution_mapping(saddle_fields):
    s, phi, psi = saddle_fields
    states = np.array([[0.3, -0.2], [-0.5, 0.4], [0.0, 0.1]])
    m = verify_solution_mapping(phi, s.sys, s.dich, s.F, states, s.cfg.time_grid, psi_f=psi)
    assert m.phi_residual <= 1e-3 and m.psi_residual <= 1e-3


def test_ide_adapted_fields():
    s = ide_saddle(nt=5, nx=5)
    phi = build_phi(s.sys, s.dich, s.F, s.spec, s.cfg)
    psi = build_psi(s.sys, s.dich, s.F, s.spec, s.cfg)
    rep = verify_identities(phi, psi, test_points=s.test_points())
    assert rep.passed


def test_threads_do_not_change_results():
    s = hyperbolic_tanh(step=0.01, nt=5, nx=12)
    a = build_phi(s.sys, s.dich, s.F, s.spec, s.cfg, threads=1)
    b = build_phi(s.sys, s.dich, s.F, s.spec, s.cfg, threads=4)
    np.testing.assert_array_equal(a.values, b.values)
    c = build_psi(s.sys, s.dich, s.F, s.spec, s.cfg, threads=3)
    d = build_psi(s.sys, s.dich, s.F, s.spec, s.cfg, threads=1)
    np.testing.assert_array_equal(c.values, d.values)


def test_psi_evaluator_matches_field(saddle_fields):
    s, _, psi = saddle_fields
    ev = psi_evaluator(s.sys, s.dich, s.F, s.cfg)
    t, x = s.spec.nodes()
    idx = np.arange(0, t.size, 37)
    np.testing.assert_allclose(ev(t[idx], x[idx]), psi.values.reshape(-1, 2)[idx], atol=1e-12)


def test_construction_errors():
    s = hyperbolic_tanh()
    F = tanh_F(2, s.sys.window, 0.05)
    with pytest.raises(GateError):
        build_phi(s.sys, s.dich, F, s.spec, s.cfg)
    f = scalar_forced()
    wide = FieldSpec.box(-25.0, 25.0, 3, 1.0, 3, 1)
    with pytest.raises(TruncationError):
        build_psi(f.sys, f.dich, f.F, wide, f.cfg)
    with pytest.raises(DomainError):
        build_phi(s.sys, s.dich, s.F, f.spec, s.cfg)


# -- decay condition -----------------------------------------------------------------------


def test_sff_examples():
    w = (-3.0, 3.0)
    pairs = [(a, b) for a in np.linspace(*w, 13) for b in np.linspace(*w, 13)]
    rep, F = check_sff(Perturbation.zero(1, w), 1.0, pairs)
    assert rep.passed and F.sff_decay
    rep, F = check_sff(Perturbation.constant_forcing([FORCING], w), 1.0, pairs)
    assert not rep.passed and not F.sff_decay
    assert rep.worst_ratio == pytest.approx(math.exp(6.0), rel=1e-9)
    # forcing e^{-2|s|} with modulus e^{6} * int e^{-|s|}: the decay condition holds
    dens = FunctionDensity(lambda s: np.exp(-2 * np.abs(np.asarray(s))), (), breakpoints=(0.0,),
                           antiderivative=lambda s: np.sign(s) * (1 - np.exp(-2 * abs(s))) / 2)

    def cont(x, a, b):
        return dens.integral(float(a), float(b)) * np.ones_like(x)
    mod = BvPath(w, 0.0, FunctionDensity(lambda s: np.exp(6.0 - np.abs(np.asarray(s))), (),
                                         breakpoints=(0.0,)))
    rep, F = check_sff(Perturbation(1, mod, continuous=cont), 1.0, pairs)
    assert rep.passed and F.sff_decay


# -- Hoelder exponent ------------------------------------------------------------------------


def test_holder_theta_and_reference():
    assert holder_theta(1.0, 1.0, math.exp(-4.0)) == pytest.approx(2.0)
    d = Dichotomy(np.eye(1), 1.0, 1.0, 1.0)
    assert d.holder_reference == 0.5


def test_holder_identity_and_shift(forced_fields):
    s = zero_saddle()
    zero = ConjugacyField.zero("psi", s.spec)
    radii = np.geomspace(0.02, 0.5, 6)
    bases = np.zeros((3, 2))
    slope, _, r2 = holder_exponent(zero, [1.5, 2.0], bases, radii, 1.0, 1.0, restrict=False)
    assert slope == pytest.approx(1.0, abs=1e-9) and r2 == pytest.approx(1.0)
    f, _, psi = forced_fields
    rep = holder_exponent(psi, np.linspace(3.0, 5.0, 3), np.array([[0.1], [-0.5]]), radii,
                          1.0, 1.0)
    assert rep.slope == pytest.approx(1.0, abs=1e-6)
    assert rep.reference == 0.5
    assert rep.discarded > 0


def test_holder_errors():
    spec = FieldSpec.box(0.0, 1.0, 2, 1.0, 2, 1)
    zero = ConjugacyField.zero("psi", spec)
    with pytest.raises(DomainError):
        holder_exponent(zero, [0.5], [[0.0]], [0.0, 0.5], 1.0, 1.0)
    with pytest.raises(DomainError):
        holder_exponent(zero, [0.5], [[0.0]], [0.1], 1.0, 1.0,
                        require_sff=Perturbation.zero(1, (0.0, 1.0)))
    with pytest.raises(DomainError):
        holder_exponent(zero, [0.1], [[0.0]], [0.1], 1.0, 1.0, restrict=True)
