"""Perturbations of class F(Omega, h), nonlinear flows and bounded solutions.

A perturbation is described by its *frozen-state accumulation*
``acc(x, a, b) = int_a^b DF(x, s)``, split into a continuous part and jumps
at a finite set of times. All solvers work on a time grid that contains the
kernel atoms and the perturbation jump times.

Discrete scheme
---------------
On a cell ``[t_k, t_{k+1}]`` with midpoint ``m_k`` let ``dG(s)`` be the
accumulation from ``t_k`` to ``s``: the jump at ``t_k`` is tagged with the
node value ``x_k`` and the continuous part with the cell average
``(x(t_k+) + x_{k+1}) / 2``. The variation-of-constants integral

    I_k(dG) = int_{t_k}^{t_{k+1}} d_s[V(t_{k+1}, s)] dG(s)
            = - int V(t_{k+1}, s) A'(s) dG(s) ds

is evaluated with Simpson's rule on ``t_k+``, ``m_k`` and ``t_{k+1}``. A flow
then advances as ``x_{k+1} = Phi_k x_k + dG(t_{k+1}) - I_k(dG)``, and the
bounded-solution formula is evaluated by one forward scan for the stable
part and one backward scan for the unstable part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _core
from .errors import (ConvergenceError, DomainError, GateError, NonFiniteError,
                     TruncationError)
from .linear import (CellTable, Dichotomy, LinearGode, cell_table, merge_grid,
                     script_L)
from .stieltjes import BvPath, ConstantDensity, RegulatedSample, opnorm, sup_variation

RATIO_RTOL = 1e-9


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------


class Perturbation:
    """Accumulation-form perturbation with modulus ``h``.

    Parameters
    ----------
    dim : int
        State dimension.
    modulus : BvPath
        Nondecreasing scalar path ``h`` bounding the increments of ``F``.
    continuous : callable, optional
        ``continuous(x, a, b)`` returns the atom-free part of the
        accumulation. ``x`` has shape ``(..., d)``; ``a`` and ``b`` are floats
        or arrays broadcasting against ``x[..., 0]``.
    jump : callable, optional
        ``jump(x, t)`` returns the jump of ``F(x, .)`` at a time in
        ``jump_times``, with the same broadcasting rules.
    jump_times : sequence of float
        Times where ``F`` jumps.
    accumulation : callable, optional
        Full accumulation including jumps in ``[a, b)``. Supply either this
        or ``continuous``; the missing one is derived from the other.
    lipschitz : BvPath, optional
        Nondecreasing scalar path bounding the state-Lipschitz increments.
        Defaults to ``modulus``.
    sff_decay : bool
        Whether the decay condition has been checked and holds.
    """

    def __init__(self, dim: int, modulus: BvPath, continuous: Callable | None = None,
                 jump: Callable | None = None, jump_times: Sequence[float] = (),
                 accumulation: Callable | None = None, lipschitz: BvPath | None = None,
                 sff_decay: bool = False, name: str = ""):
        if continuous is None and accumulation is None:
            raise DomainError("supply continuous or accumulation")
        if not modulus.is_scalar:
            raise DomainError("modulus must be scalar")
        if jump_times and jump is None:
            raise DomainError("jump_times require a jump callable")
        self.dim = int(dim)
        self.modulus = modulus
        self.lipschitz = modulus if lipschitz is None else lipschitz
        self.jump_times = tuple(sorted(float(t) for t in jump_times))
        self._jump = jump
        self._continuous = continuous
        self._accumulation = accumulation
        self.sff_decay = bool(sff_decay)
        self.name = name
        self.V_h = sup_variation(modulus)
        self.V_lip = sup_variation(self.lipschitz)

    @property
    def window(self) -> tuple:
        return self.modulus.window

    def _jumps_between(self, x, a, b):
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape, a.shape + (1,), b.shape + (1,)))
        for tj in self.jump_times:
            inside = ((a <= tj) & (tj < b))[..., None]
            if np.any(inside):
                out = out + np.where(inside, self._jump(x, tj), 0.0)
        return out

    def jump(self, x, t):
        """Jump ``F(x, t+) - F(x, t)`` (zero away from ``jump_times``)."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape, t.shape + (1,)))
        for tj in self.jump_times:
            hit = (t == tj)[..., None]
            if np.any(hit):
                out = out + np.where(hit, self._jump(x, tj), 0.0)
        return out

    def continuous(self, x, a, b):
        """Atom-free accumulation over ``[a, b]`` for frozen ``x``."""
        if self._continuous is not None:
            return np.asarray(self._continuous(x, a, b), dtype=float)
        return np.asarray(self._accumulation(x, a, b), dtype=float) - self._jumps_between(x, a, b)

    def accumulation(self, x, a, b):
        """``int_a^b DF(x, s)`` including jumps at times in ``[a, b)``."""
        if self._accumulation is not None:
            return np.asarray(self._accumulation(x, a, b), dtype=float)
        return self.continuous(x, a, b) + self._jumps_between(x, a, b)

    def with_sff(self, flag: bool) -> "Perturbation":
        other = Perturbation.__new__(Perturbation)
        other.__dict__.update(self.__dict__)
        other.sff_decay = bool(flag)
        return other

    def with_modulus(self, modulus: BvPath) -> "Perturbation":
        """Same accumulation with a different (larger) bound modulus.

        The Lipschitz path is kept, so the contraction constant is unchanged.
        """
        return Perturbation(self.dim, modulus, continuous=self._continuous, jump=self._jump,
                            jump_times=self.jump_times, accumulation=self._accumulation,
                            lipschitz=self.lipschitz, sff_decay=self.sff_decay,
                            name=self.name)

    def is_zero(self) -> bool:
        return self.V_h == 0.0

    # -- stock perturbations ---------------------------------------------------
    @classmethod
    def zero(cls, dim: int, window) -> "Perturbation":
        def cont(x, a, b):
            return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(a) + (1,),
                                                np.shape(b) + (1,)))
        return cls(dim, BvPath.zero(window), continuous=cont, name="zero")

    @classmethod
    def constant_forcing(cls, vector, window) -> "Perturbation":
        """State-independent forcing ``acc(x, a, b) = c (b - a)``.

        The modulus is ``||c|| t``; the Lipschitz modulus is zero.
        """
        c = np.atleast_1d(np.asarray(vector, dtype=float))

        def cont(x, a, b):
            span = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
            shape = np.broadcast_shapes(np.shape(x), span.shape + (1,))
            return np.broadcast_to(span[..., None] * c, shape).copy()
        mod = BvPath(window, 0.0, ConstantDensity(opnorm(c)))
        return cls(c.size, mod, continuous=cont, lipschitz=BvPath.zero(window),
                   name="constant_forcing")


@dataclass(frozen=True)
class SolverConfig:
    """Grid and tolerances for the iterative solvers.

    ``tol`` is a sup-norm stopping tolerance on successive iterates,
    ``tail_eps`` the admissible truncation error of the improper integrals.
    """

    time_grid: np.ndarray
    tol: float = 1e-10
    max_iter: int = 200
    tail_eps: float = 1e-8

    def __post_init__(self):
        g = np.asarray(self.time_grid, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise DomainError("time_grid must be strictly increasing with >= 2 points")
        if not self.tol > 0 or not self.tail_eps > 0 or self.max_iter < 1:
            raise DomainError("tol, tail_eps must be > 0 and max_iter >= 1")
        object.__setattr__(self, "time_grid", g)

    @classmethod
    def uniform(cls, t_lo, t_hi, step, **kw) -> "SolverConfig":
        n = max(1, int(round((t_hi - t_lo) / step)))
        return cls(np.linspace(t_lo, t_hi, n + 1), **kw)


# ---------------------------------------------------------------------------
# class membership
# ---------------------------------------------------------------------------


def _ratio(num: float, den: float) -> float:
    if num <= 1e-300:
        return 0.0
    if den <= 0.0:
        return math.inf
    return num / den


@dataclass(frozen=True)
class ClassReport:
    """Worst ratios of the bound and Lipschitz inequalities."""

    bound_ratio: float
    lipschitz_ratio: float
    declared_lipschitz_ratio: float
    passed: bool

    def as_record(self) -> dict:
        return {"bound_ratio": self.bound_ratio, "lipschitz_ratio": self.lipschitz_ratio,
                "declared_lipschitz_ratio": self.declared_lipschitz_ratio,
                "pass": self.passed}


def check_class_F(F: Perturbation, x_samples, time_pairs) -> ClassReport:
    """Sampled check of ``||acc(x,a,b)|| <= |h(b)-h(a)|`` and of
    ``||acc(x,a,b) - acc(z,a,b)|| <= ||x-z|| |h(b)-h(a)|``.

    The Lipschitz inequality is also checked against the declared Lipschitz
    path. Passing requires every ratio to be at most ``1 + 1e-9``.
    """
    xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in x_samples]
    worst_b = worst_l = worst_d = 0.0
    for a, b in time_pairs:
        a, b = float(a), float(b)
        dh = abs(float(F.modulus.value(b)) - float(F.modulus.value(a)))
        dl = abs(float(F.lipschitz.value(b)) - float(F.lipschitz.value(a)))
        lo, hi = min(a, b), max(a, b)
        accs = [F.accumulation(x, lo, hi) for x in xs]
        for acc in accs:
            worst_b = max(worst_b, _ratio(opnorm(acc), dh))
        for i in range(len(xs)):
            for j in range(i + 1, len(xs)):
                dist = opnorm(xs[i] - xs[j])
                diff = opnorm(accs[i] - accs[j])
                worst_l = max(worst_l, _ratio(diff, dist * dh))
                worst_d = max(worst_d, _ratio(diff, dist * dl))
    lim = 1.0 + RATIO_RTOL
    return ClassReport(worst_b, worst_l, worst_d,
                       worst_b <= lim and worst_l <= lim and worst_d <= lim)


def frozen_bound_check(F: Perturbation, x, y, times) -> float:
    """Worst ratio of ``||acc(x,0,t) - acc(y,0,t)||`` to ``int_0^t ||x-y|| dh``
    for constant states ``x, y`` over the given times."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    t0 = 0.0 if F.window[0] <= 0.0 <= F.window[1] else F.window[0]
    worst = 0.0
    for t in times:
        lo, hi = min(t0, t), max(t0, t)
        diff = opnorm(F.accumulation(x, lo, hi) - F.accumulation(y, lo, hi))
        dh = abs(float(F.modulus.value(hi)) - float(F.modulus.value(lo)))
        worst = max(worst, _ratio(diff, opnorm(x - y) * dh))
    return worst


# ---------------------------------------------------------------------------
# gate
# ---------------------------------------------------------------------------


def contraction_value(K: float, norm_P: float, C: float, V_A: float, V_h: float) -> float:
    """``2 V_h (1 + K||P|| L0 + K(1+||P||) L0)`` with ``L0 = C^3 e^{3 C V_A} V_A^2``."""
    L0 = C ** 3 * math.exp(3.0 * C * V_A) * V_A ** 2
    return 2.0 * V_h * (1.0 + K * norm_P * L0 + K * (1.0 + norm_P) * L0)


def contraction_constant(dich: Dichotomy, sys: LinearGode, F: Perturbation) -> float:
    """Contraction constant of the bounded-solution and conjugacy maps.

    Uses the variation of the perturbation's Lipschitz modulus, which is the
    modulus itself unless a separate Lipschitz path was declared.
    """
    return contraction_value(dich.K, dich.norm_P, sys.regularity_constant,
                             sys.sup_variation_A, F.V_lip)


def truncation_horizon(dich: Dichotomy, F: Perturbation, tail_eps: float) -> float:
    """Distance beyond which the kernel tail ``2 K V_h e^{-alpha r}`` is below tail_eps."""
    arg = 2.0 * dich.K * F.V_h / tail_eps
    return math.log(arg) / dich.alpha if arg > 1.0 else 0.0


# ---------------------------------------------------------------------------
# discretization machinery
# ---------------------------------------------------------------------------


class Discretization:
    """Grid, cell table and perturbation bundled for the batch solvers.

    Arrays of states have shape ``(B, N + 1, d)``: batch, grid node, component.
    """

    def __init__(self, sys: LinearGode, F: Perturbation, grid, extra=()):
        if F.dim != sys.dim:
            raise DomainError("perturbation and system dimensions differ")
        g = merge_grid(sys, grid, list(extra) + [t for t in F.jump_times])
        F.modulus.check_inside(g[0], g[-1])
        self.sys = sys
        self.F = F
        self.t = g
        self.table: CellTable = cell_table(sys, g)
        self.n = g.size - 1
        self.d = sys.dim
        self.h = np.diff(g)
        self.mid = 0.5 * (g[:-1] + g[1:])
        self.jump_nodes = np.array([tk in set(F.jump_times) for tk in g[:-1]])
        eye = np.eye(self.d)
        self.node_factor = np.concatenate([eye + self.table.jump, eye[None]], axis=0)
        self.has_F_jumps = bool(self.jump_nodes.any())

    def index(self, t: float) -> int:
        return self.table.index_of(float(t))

    def post_values(self, X: np.ndarray) -> np.ndarray:
        """Right limits ``(I + J_k) x_k + jump_F(x_k)`` at every node."""
        Xp = np.einsum("kij,bkj->bki", self.node_factor, X)
        if self.has_F_jumps:
            k = np.nonzero(self.jump_nodes)[0]
            Xp[:, k] += self.F.jump(X[:, k], self.t[k])
        return Xp

    def increments(self, X: np.ndarray):
        """Cell accumulations ``dG_k`` and Simpson integrals ``I_k(dG)``."""
        Xp = self.post_values(X)
        xm = 0.5 * (Xp[:, :-1] + X[:, 1:])
        jumpF = np.zeros_like(xm)
        if self.has_F_jumps:
            k = np.nonzero(self.jump_nodes)[0]
            jumpF[:, k] = self.F.jump(X[:, k], self.t[k])
        cont_half = self.F.continuous(xm, self.t[:-1], self.mid)
        cont_full = self.F.continuous(xm, self.t[:-1], self.t[1:])
        g_mid = jumpF + cont_half
        g_end = jumpF + cont_full
        tb = self.table
        A0 = np.einsum("kij,kjl->kil", tb.Phi_plus, tb.dens0)
        Am = np.einsum("kij,kjl->kil", tb.Phi_half, tb.densm)
        term = (np.einsum("kij,bkj->bki", A0, jumpF)
                + 4.0 * np.einsum("kij,bkj->bki", Am, g_mid)
                + np.einsum("kij,bkj->bki", tb.dens1, g_end))
        Ik = -(self.h / 6.0)[None, :, None] * term
        if not (np.all(np.isfinite(g_end)) and np.all(np.isfinite(Ik))):
            raise NonFiniteError("non-finite accumulation in solver sweep")
        return g_end, Ik

    def flow_sweep(self, X, start, x0):
        """One waveform sweep: integrate with accumulations frozen at ``X``."""
        dG, Ik = self.increments(X)
        return _core.linear_scan(self.table.Phi, self.table.Phi_inv, dG - Ik, start, x0)

    def linear_orbits(self, start, x0):
        B = len(start)
        zero = np.zeros((B, self.n, self.d))
        return _core.linear_scan(self.table.Phi, self.table.Phi_inv, zero, start, x0)

    def bounded_formula(self, X, P_nodes, base_index):
        """Bounded-solution formula ``g - S + U`` with ``g`` built from ``X``."""
        dG, Ik = self.increments(X)
        B = X.shape[0]
        g = np.zeros((B, self.n + 1, self.d))
        g[:, 1:] = np.cumsum(dG, axis=1)
        g -= g[:, base_index:base_index + 1]
        eye = np.eye(self.d)
        Ig = Ik + np.einsum("kij,bkj->bki", eye - self.table.Phi, g[:, :-1])
        S, U = _core.projected_scans(self.table.Phi, self.table.Phi_inv, P_nodes, Ig)
        return g - S + U


def _sup(arr) -> float:
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def _sup_norm_nodes(arr) -> float:
    return float(np.max(np.linalg.norm(arr, axis=-1))) if arr.size else 0.0


def _to_sample(disc: Discretization, X: np.ndarray, meta: dict) -> RegulatedSample:
    """Single-trajectory sample with post-jump values at jump nodes."""
    Xp = disc.post_values(X[None])[0]
    jump_nodes = np.zeros(disc.t.size, dtype=bool)
    jump_nodes[:-1] = disc.jump_nodes | np.any(disc.table.jump != 0, axis=(1, 2))
    idx = np.nonzero(jump_nodes)[0]
    return RegulatedSample(disc.t, X, disc.t[idx], Xp[idx], meta)


def run_flows(disc: Discretization, start, x0, tol: float, max_iter: int,
              X_init: np.ndarray | None = None):
    """Batched waveform iteration for flows through ``(t[start_b], x0_b)``.

    Returns the converged array and a dict with iteration statistics.
    """
    start = np.asarray(start, dtype=np.int64)
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    X = disc.linear_orbits(start, x0) if X_init is None else X_init
    if disc.F.is_zero():
        return X, {"iterations": 0, "changes": [], "ratios": [], "converged": True}
    changes, ratios = [], []
    for it in range(1, max_iter + 1):
        Xn = disc.flow_sweep(X, start, x0)
        change = _sup_norm_nodes(Xn - X)
        if changes and changes[-1] > 0:
            ratios.append(change / changes[-1])
        changes.append(change)
        X = Xn
        if not np.isfinite(change):
            raise ConvergenceError("flow iteration diverged", None, change)
        if change < tol:
            return X, {"iterations": it, "changes": changes, "ratios": ratios,
                       "converged": True}
    raise ConvergenceError(
        f"flow did not converge in {max_iter} sweeps (last change {changes[-1]:.3g})",
        ratios[-1] if ratios else None, changes[-1])


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------


def nonlinear_flow(sys: LinearGode, F: Perturbation, t0: float, x0,
                   cfg: SolverConfig) -> RegulatedSample:
    """Solution of the variation-of-constants equation through ``(t0, x0)``.

    Waveform (Picard) iteration over the whole grid, started from the linear
    solution, until the sup-change of successive iterates drops below
    ``cfg.tol``. The returned sample's ``meta`` holds the iteration count,
    the contraction ratios and the equation residual (one extra sweep).

    Raises
    ------
    ConvergenceError
        If ``cfg.max_iter`` sweeps do not reach the tolerance.
    DomainError
        If ``t0`` or the grid is outside the window.
    """
    sys.kernel.check_inside(t0)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.all(np.isfinite(x0)):
        raise NonFiniteError("x0 must be finite")
    disc = Discretization(sys, F, cfg.time_grid, extra=[t0])
    k0 = disc.index(t0)
    X, info = run_flows(disc, [k0], x0[None], cfg.tol, cfg.max_iter)
    residual = _sup_norm_nodes(disc.flow_sweep(X, np.array([k0]), x0[None]) - X)
    meta = dict(info, residual=residual, t0=float(t0))
    return _to_sample(disc, X[0], meta)


def flow_residual(sys: LinearGode, F: Perturbation, sample: RegulatedSample,
                  t0: float) -> float:
    """Sup-norm residual of a sample in the discrete integral equation."""
    disc = Discretization(sys, F, sample.times, extra=[t0])
    if disc.t.size != sample.times.size:
        raise DomainError("sample grid must contain every structural time")
    k0 = disc.index(t0)
    X = sample.values[None]
    return _sup_norm_nodes(disc.flow_sweep(X, np.array([k0]), X[:, k0]) - X)


# ---------------------------------------------------------------------------
# bounded solutions
# ---------------------------------------------------------------------------


def trusted_core(dich: Dichotomy, F: Perturbation, grid, tail_eps: float) -> tuple:
    """Sub-window on which the truncated improper integrals are accurate."""
    T = truncation_horizon(dich, F, tail_eps)
    lo, hi = float(grid[0]) + T, float(grid[-1]) - T
    if lo > hi:
        raise TruncationError(
            f"truncation horizon {T:.4g} does not fit in the window [{grid[0]}, {grid[-1]}]")
    return lo, hi, T


def _check_mode(dich: Dichotomy):
    if dich.mode not in ("verified", "claimed"):
        raise DomainError("dichotomy must be verified or claimed before solving")


def _gate(dich, sys, F, enforce_gate: bool) -> float:
    delta = contraction_constant(dich, sys, F)
    if delta >= 1.0 and enforce_gate:
        raise GateError(f"contraction constant {delta:.6g} >= 1", delta)
    return delta


def bounded_solution(sys: LinearGode, dich: Dichotomy, F: Perturbation,
                     cfg: SolverConfig, x_init=None, enforce_gate: bool = True
                     ) -> RegulatedSample:
    """Unique bounded solution by Picard iteration of the Green-kernel formula.

    Starts from ``x_init`` (default zero), stops when the sup-change between
    successive iterates is below ``cfg.tol``. The improper integrals are
    truncated at the grid ends; ``meta["core"]`` is the sub-window where
    the truncation error is below ``cfg.tail_eps``.

    Raises
    ------
    GateError
        If the contraction constant is >= 1 and ``enforce_gate`` is true.
    TruncationError
        If the truncation horizon leaves no trusted core.
    ConvergenceError
        If ``cfg.max_iter`` iterations do not reach ``cfg.tol``.
    """
    _check_mode(dich)
    delta = _gate(dich, sys, F, enforce_gate)
    lo, hi, T = trusted_core(dich, F, cfg.time_grid, cfg.tail_eps)
    disc = Discretization(sys, F, cfg.time_grid)
    P_nodes = disc.table.projections(dich.P)
    base = disc.table.origin_index
    if x_init is None:
        X = np.zeros((1, disc.n + 1, disc.d))
    elif isinstance(x_init, RegulatedSample):
        X = np.asarray(x_init(disc.t), dtype=float).reshape(1, disc.n + 1, disc.d)
    else:
        X = np.asarray(x_init, dtype=float).reshape(1, disc.n + 1, disc.d)
    changes, ratios = [], []
    for it in range(1, cfg.max_iter + 1):
        Xn = disc.bounded_formula(X, P_nodes, base)
        change = _sup_norm_nodes(Xn - X)
        if changes and changes[-1] > 0:
            ratios.append(change / changes[-1])
        changes.append(change)
        X = Xn
        if change < cfg.tol:
            break
    else:
        raise ConvergenceError(
            f"bounded solution did not converge in {cfg.max_iter} iterations",
            ratios[-1] if ratios else None, changes[-1])
    meta = {"iterations": it, "changes": changes, "ratios": ratios, "delta": delta,
            "core": (lo, hi), "horizon": T, "gate_bypassed": delta >= 1.0}
    return _to_sample(disc, X[0], meta)


def bounded_residual(x: RegulatedSample, sys: LinearGode, dich: Dichotomy,
                     F: Perturbation, cfg: SolverConfig, core_only: bool = True) -> float:
    """Sup-norm distance between ``x`` and one application of the formula.

    Measured on the trusted core (or the whole grid with ``core_only=False``).
    """
    disc = Discretization(sys, F, cfg.time_grid)
    P_nodes = disc.table.projections(dich.P)
    X = np.asarray(x(disc.t), dtype=float).reshape(1, disc.n + 1, disc.d)
    R = disc.bounded_formula(X, P_nodes, disc.table.origin_index) - X
    if core_only:
        lo, hi, _ = trusted_core(dich, F, disc.t, cfg.tail_eps)
        mask = (disc.t >= lo - 1e-12) & (disc.t <= hi + 1e-12)
        R = R[:, mask]
    return _sup_norm_nodes(R)


# ---------------------------------------------------------------------------
# growth bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    worst_ratio: float
    worst_time: float | None
    passed: bool

    def as_record(self) -> dict:
        return {"worst_ratio": self.worst_ratio, "worst_time": self.worst_time,
                "pass": self.passed}


def growth_bound_check(sys: LinearGode, dich: Dichotomy, F: Perturbation, x, x_tilde,
                       grid, tol: float = 1e-12, max_iter: int = 500) -> GrowthReport:
    """Check ``||X(t,0,x) - X(t,0,x~)|| <= K ||x - x~|| e^{(1+L)|h(t)-h(0)|} e^{a~|t|}``.

    Two nonlinear flows from the reference time are compared on the grid;
    ``L`` is the dichotomy's derived constant and ``a~`` its ``alpha_tilde``.
    """
    if dich.alpha_tilde is None:
        raise DomainError("growth bound needs alpha_tilde")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xt = np.atleast_1d(np.asarray(x_tilde, dtype=float))
    dist = opnorm(x - xt)
    if dist == 0.0:
        return GrowthReport(0.0, None, True)
    t0 = sys.origin
    disc = Discretization(sys, F, grid, extra=[t0])
    k0 = disc.index(t0)
    X, _ = run_flows(disc, [k0, k0], np.stack([x, xt]), tol, max_iter)
    L = dich.script_L if dich.script_L is not None else script_L(
        dich.K, sys.regularity_constant, sys.sup_variation_A)
    hv = np.asarray(F.modulus.value(disc.t))
    h0 = float(F.modulus.value(t0))
    expo = (1.0 + L) * np.abs(hv - h0) + dich.alpha_tilde * np.abs(disc.t - t0)
    with np.errstate(over="ignore"):
        rhs = dich.K * dist * np.exp(expo)
    lhs = np.linalg.norm(X[0] - X[1], axis=-1)
    ratio = lhs / rhs
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    return GrowthReport(worst, float(disc.t[k]), worst <= 1.0 + RATIO_RTOL)
