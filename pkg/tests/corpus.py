"""Impulsive and staircase-measure scenarios for the adapter cross-oracle."""
from dataclasses import dataclass

import numpy as np

from godeconj.adapters import (IdeSystem, MdeSystem, Nonlinearity, ide_reference_flow,
                               ide_to_gode, mde_reference_flow, mde_to_gode)
from godeconj.nonlinear import SolverConfig, nonlinear_flow
from godeconj.stieltjes import BvPath, ConstantDensity, PolynomialDensity


@dataclass
class Case:
    name: str
    system: object
    t0: float
    x0: tuple

    @property
    def window(self):
        return self.system.window


def _ide(name, A, window, impulses, f, t0, x0):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    times = [t for t, _ in impulses]
    maps = [np.atleast_2d(np.asarray(B, dtype=float)) for _, B in impulses]
    return Case(name, IdeSystem(A.shape[0], window, ConstantDensity(A), times, maps, f),
                t0, tuple(x0))


def _mde(name, A, C, window, u_density, u_atoms, H, t0, x0):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    u = BvPath(window, 0.0, ConstantDensity(float(u_density)), u_atoms)
    m = MdeSystem(A.shape[0], ConstantDensity(A), ConstantDensity(C), u, H)
    return Case(name, m, t0, tuple(x0))


def adapter_corpus():
    """Twelve scenarios: eight impulsive, four measure equations with staircase u."""
    d2 = np.diag
    tv = IdeSystem(2, (-1.0, 2.0),
                   PolynomialDensity(np.array([[[-1.0, 0.5], [0.0, 0.3]],
                                               [[0.2, 0.0], [-0.3, -0.1]]])),
                   (0.0, 1.0), (0.3 * np.eye(2), np.array([[0.0, 0.2], [-0.2, 0.0]])),
                   Nonlinearity("expdecay", 2, eps=0.25, lam=1.5, t_c=0.5))
    cases = [
        _ide("scalar_linear", -1.0, (0.0, 3.0), [(1.0, 1.0), (2.0, 1.0)], None, 0.0, [1.0]),
        _ide("scalar_tanh", -1.0, (0.0, 3.0), [(1.0, 1.0), (2.0, 1.0)],
             Nonlinearity("tanh", 1, eps=0.3), 0.0, [1.0]),
        _ide("scalar_backward", -0.5, (-2.0, 2.0), [(-1.0, 0.5), (0.5, -0.4)],
             Nonlinearity("tanh", 1, eps=0.2), 1.5, [-0.8]),
        _ide("saddle_expdecay", d2([-1.0, 0.8]), (-3.0, 3.0),
             [(-1.0, d2([0.2, -0.1])), (0.5, d2([-0.3, 0.1]))],
             Nonlinearity("expdecay", 2, eps=0.3, lam=1.0), -0.3, [0.5, -0.4]),
        _ide("rotation_tanh", [[0.0, 1.0], [-1.0, 0.0]], (0.0, 4.0),
             [(1.0, [[0.1, 0.0], [0.0, -0.2]]), (2.5, [[0.0, 0.3], [0.1, 0.0]])],
             Nonlinearity("tanh", 2, eps=0.2), 0.0, [1.0, 0.0]),
        _ide("unstable_linear", 0.5, (0.0, 2.0), [(0.5, -0.5), (1.5, -0.5)],
             Nonlinearity("linear", 1, eps=0.1, radius=3.0), 0.0, [0.7]),
        _ide("forced_impulses", d2([-1.0, -2.0]), (0.0, 3.0),
             [(1.0, d2([0.5, 0.5])), (2.0, d2([-0.5, 0.25]))],
             Nonlinearity("constant", 2, vector=(0.3, -0.1)), 0.0, [0.0, 1.0]),
        Case("time_varying", tv, 0.2, (0.4, -0.6)),
        _mde("staircase_scalar", -1.0, -0.3, (-2.0, 2.0), 0.0,
             [(-1.0, 0.5), (0.0, 0.5), (1.0, 0.5)], Nonlinearity("tanh", 1, eps=0.2),
             -1.5, [1.0]),
        _mde("staircase_saddle", d2([-1.0, 0.5]), 0.2 * np.eye(2), (0.0, 3.0), 0.0,
             [(0.5, 1.0), (1.5, 1.0), (2.5, 1.0)], Nonlinearity("tanh", 2, eps=0.1),
             0.0, [0.5, 0.5]),
        _mde("staircase_expdecay", [[-0.5, 1.0], [0.0, -1.0]], [[0.0, 0.2], [-0.2, 0.0]],
             (0.0, 3.0), 0.0, [(1.0, 0.75), (2.0, 0.5)],
             Nonlinearity("expdecay", 2, eps=0.3, lam=2.0, t_c=1.0), 0.3, [-0.2, 0.8]),
        _mde("staircase_with_density", -1.0, 0.5, (0.0, 2.0), 0.5, [(0.5, 0.4), (1.25, 0.4)],
             Nonlinearity("tanh", 1, eps=0.15), 0.0, [0.9]),
    ]
    return cases


def cross_oracle_error(case: Case, step: float = 2.5e-3) -> float:
    """Sup-norm gap between the adapted GODE flow and the event-driven oracle."""
    s = case.system
    window = s.window
    grid = SolverConfig.uniform(*window, step, tol=1e-13, max_iter=400)
    if isinstance(s, MdeSystem):
        sys, F = mde_to_gode(s)
        ref = mde_reference_flow(s, case.t0, case.x0, grid.time_grid)
    else:
        sys, F = ide_to_gode(s)
        ref = ide_reference_flow(s, case.t0, case.x0, grid.time_grid)
    x = nonlinear_flow(sys, F, case.t0, case.x0, grid)
    got = np.asarray(x(ref.times))
    return float(np.max(np.abs(got - ref.values)))
