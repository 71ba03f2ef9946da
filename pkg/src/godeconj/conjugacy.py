"""Conjugacies between the linear and the perturbed generalized ODE.

The maps are ``Phi(t, x) = x + phi(t, x)`` (linear orbits to nonlinear
orbits) and ``Psi(t, x) = x + psi(t, x)`` (its inverse).

Construction
------------
Both offsets are computed orbit by orbit on a fine solver grid.

* ``phi(tau, xi)`` is the bounded solution ``z`` of
  ``z = B[G(Y + z)]``, where ``Y`` is the linear orbit through ``(tau, xi)``
  and ``B[G(X)]`` is the Green-kernel formula applied to the accumulation
  of the perturbation along ``X``. The fixed point is reached by Picard
  iteration from ``z = 0``.
* ``psi(tau, xi) = -B[G(X)](tau)`` with ``X`` the nonlinear flow through
  ``(tau, xi)``; no fixed point is needed.

Because the discrete flow satisfies the same cell recursion as the discrete
Green formula, ``Psi(t, Phi(t, x)) = x`` holds at grid nodes up to the
iteration tolerance. Off the nodes, :func:`apply_map` interpolates the
offsets multilinearly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConvergenceError, DomainError, HullError, TruncationError
from .linear import Dichotomy, LinearGode, operator_values
from .nonlinear import (RATIO_RTOL, Discretization, Perturbation, SolverConfig,
                        _check_mode, _gate, _sup_norm_nodes, contraction_value,
                        run_flows, trusted_core)

CHUNK = 64


@dataclass(frozen=True)
class FieldSpec:
    """Nodes of a conjugacy field.

    Parameters
    ----------
    t_nodes : array_like
        Increasing times; must lie in the trusted core of the solver grid.
    x_axes : sequence of array_like
        One increasing node array per state component.
    """

    t_nodes: np.ndarray
    x_axes: tuple

    def __post_init__(self):
        t = np.asarray(self.t_nodes, dtype=float)
        axes = tuple(np.asarray(a, dtype=float) for a in self.x_axes)
        for arr in (t,) + axes:
            if arr.ndim != 1 or arr.size < 2 or np.any(np.diff(arr) <= 0):
                raise DomainError("field nodes must be increasing with at least 2 entries")
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "x_axes", axes)

    @classmethod
    def box(cls, t_lo, t_hi, nt, half_width, nx, dim) -> "FieldSpec":
        """Uniform nodes on ``[t_lo, t_hi] x [-half_width, half_width]^dim``."""
        ax = np.linspace(-half_width, half_width, nx)
        return cls(np.linspace(t_lo, t_hi, nt), tuple(ax for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.x_axes)

    @property
    def shape(self) -> tuple:
        return (self.t_nodes.size,) + tuple(a.size for a in self.x_axes)

    def refined(self) -> "FieldSpec":
        """Every cell split in two along each axis."""
        def halve(a):
            return np.sort(np.concatenate([a, 0.5 * (a[:-1] + a[1:])]))
        return FieldSpec(halve(self.t_nodes), tuple(halve(a) for a in self.x_axes))

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened ``(t, x)`` node list in C order of :attr:`shape`."""
        mesh = np.meshgrid(self.t_nodes, *self.x_axes, indexing="ij")
        t = mesh[0].ravel()
        x = np.stack([m.ravel() for m in mesh[1:]], axis=-1)
        return t, x


@dataclass(frozen=True)
class ConjugacyField:
    """Offset of ``Phi`` or ``Psi`` sampled on a rectangular ``(t, x)`` grid.

    ``values`` has shape ``(nt, n_1, ..., n_d, d)``; ``which`` is ``"phi"``
    or ``"psi"``; interpolation is multilinear (``interp_order = 1``).
    """

    which: str
    spec: FieldSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    interp_order: int = 1

    def __post_init__(self):
        if self.which not in ("phi", "psi"):
            raise DomainError("which must be 'phi' or 'psi'")
        if self.values.shape != self.spec.shape + (self.spec.dim,):
            raise DomainError("field values do not match the node grid")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("field values must be finite")

    @property
    def t_grid(self) -> np.ndarray:
        return self.spec.t_nodes

    @property
    def x_grid(self) -> tuple:
        return self.spec.x_axes

    @property
    def sup(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=-1)))

    @classmethod
    def zero(cls, which: str, spec: FieldSpec) -> "ConjugacyField":
        return cls(which, spec, np.zeros(spec.shape + (spec.dim,)), {"iterations": 0})

    def rows(self):
        """CSV rows ``t, x_1..x_d, offset_1..offset_d``."""
        t, x = self.spec.nodes()
        vals = self.values.reshape(-1, self.spec.dim)
        for k in range(t.size):
            yield [t[k], *x[k], *vals[k]]


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _prepare(sys, dich, F, spec: FieldSpec, cfg: SolverConfig, enforce_gate: bool):
    _check_mode(dich)
    if spec.dim != sys.dim:
        raise DomainError("field dimension differs from the system dimension")
    delta = _gate(dich, sys, F, enforce_gate)
    lo, hi, T = trusted_core(dich, F, cfg.time_grid, cfg.tail_eps)
    slack = 1e-9 * max(1.0, hi - lo)
    if spec.t_nodes[0] < lo - slack or spec.t_nodes[-1] > hi + slack:
        raise TruncationError(
            f"field times [{spec.t_nodes[0]}, {spec.t_nodes[-1]}] leave the trusted "
            f"core [{lo:.6g}, {hi:.6g}]")
    disc = Discretization(sys, F, cfg.time_grid, extra=spec.t_nodes)
    meta = {"delta": delta, "horizon": T, "core": (lo, hi), "gate_bypassed": delta >= 1.0,
            "sup_bound": contraction_value(dich.K, dich.norm_P, sys.regularity_constant,
                                           sys.sup_variation_A, F.V_h)}
    return disc, meta


def _run_chunks(fn, n: int, threads: int):
    """Apply ``fn(lo, hi)`` over fixed-size chunks; results in chunk order.

    The chunking does not depend on ``threads``, so results are identical
    for every thread count.
    """
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    if threads <= 1 or len(bounds) == 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def _phi_orbits(disc: Discretization, P_nodes, start, x0, tol, max_iter):
    """Fixed points ``z = B[G(Y + z)]`` for a batch of linear orbits."""
    Y = disc.linear_orbits(start, x0)
    base = disc.table.origin_index
    Z = np.zeros_like(Y)
    changes, ratios = [], []
    for it in range(1, max_iter + 1):
        Zn = disc.bounded_formula(Y + Z, P_nodes, base)
        change = _sup_norm_nodes(Zn - Z)
        if changes and changes[-1] > 0:
            ratios.append(change / changes[-1])
        changes.append(change)
        Z = Zn
        if not math.isfinite(change):
            raise ConvergenceError("phi iteration diverged", None, change)
        if change < tol:
            return Z, {"iterations": it, "changes": changes, "ratios": ratios}
    raise ConvergenceError(f"phi iteration did not converge in {max_iter} sweeps",
                           ratios[-1] if ratios else None, changes[-1])


def _collect(results, which, spec, meta):
    vals = np.concatenate([r[0] for r in results], axis=0)
    infos = [r[1] for r in results]
    ratios = [q for info in infos for q in info["ratios"]]
    meta = dict(meta)
    meta.update({
        "iterations": max((info["iterations"] for info in infos), default=0),
        "final_change": max((info["changes"][-1] for info in infos if info["changes"]),
                            default=0.0),
        "delta_hat": max(ratios, default=0.0),
        "ratios_max_per_sweep": _sweepwise_max(infos),
    })
    return ConjugacyField(which, spec, vals.reshape(spec.shape + (spec.dim,)), meta)


def _sweepwise_max(infos) -> list:
    n = max((len(info["ratios"]) for info in infos), default=0)
    return [max(info["ratios"][k] for info in infos if len(info["ratios"]) > k)
            for k in range(n)]


def build_phi(sys: LinearGode, dich: Dichotomy, F: Perturbation, spec: FieldSpec,
              cfg: SolverConfig, threads: int = 1, enforce_gate: bool = True
              ) -> ConjugacyField:
    """Offset ``phi`` of the conjugacy ``Phi`` on the nodes of ``spec``.

    For every node ``(tau, xi)`` the linear orbit through it is computed on
    the solver grid and the orbit's bounded correction is found by Picard
    iteration from zero; ``phi(tau, xi)`` is the correction at ``tau``.
    ``meta`` records the worst iteration count, the final sup-change, the
    largest observed contraction ratio ``delta_hat``, the gate value and the
    truncation horizon.

    Raises
    ------
    GateError
        If the contraction constant is >= 1 and ``enforce_gate`` is true.
    TruncationError
        If the field times leave the trusted core of the solver grid.
    ConvergenceError
        If an orbit does not converge within ``cfg.max_iter`` sweeps.
    """
    disc, meta = _prepare(sys, dich, F, spec, cfg, enforce_gate)
    t, x = spec.nodes()
    start = np.array([disc.index(tk) for tk in t], dtype=np.int64)
    if F.is_zero():
        return ConjugacyField("phi", spec, np.zeros(spec.shape + (spec.dim,)),
                              dict(meta, iterations=0, final_change=0.0, delta_hat=0.0))
    P_nodes = disc.table.projections(dich.P)

    def work(lo, hi):
        Z, info = _phi_orbits(disc, P_nodes, start[lo:hi], x[lo:hi], cfg.tol, cfg.max_iter)
        return Z[np.arange(hi - lo), start[lo:hi]], info

    return _collect(_run_chunks(work, t.size, threads), "phi", spec, meta)


def _psi_at(disc, P_nodes, start, x0, tol, max_iter):
    X, info = run_flows(disc, start, x0, tol, max_iter)
    B = disc.bounded_formula(X, P_nodes, disc.table.origin_index)
    return -B[np.arange(len(start)), start], info


def build_psi(sys: LinearGode, dich: Dichotomy, F: Perturbation, spec: FieldSpec,
              cfg: SolverConfig, threads: int = 1, enforce_gate: bool = True
              ) -> ConjugacyField:
    """Offset ``psi`` of the inverse conjugacy ``Psi`` on the nodes of ``spec``.

    ``psi(tau, xi)`` is minus the Green-kernel formula applied along the
    nonlinear flow through ``(tau, xi)``, evaluated at ``tau``.
    """
    disc, meta = _prepare(sys, dich, F, spec, cfg, enforce_gate)
    t, x = spec.nodes()
    start = np.array([disc.index(tk) for tk in t], dtype=np.int64)
    if F.is_zero():
        return ConjugacyField("psi", spec, np.zeros(spec.shape + (spec.dim,)),
                              dict(meta, iterations=0, final_change=0.0, delta_hat=0.0))
    P_nodes = disc.table.projections(dich.P)

    def work(lo, hi):
        return _psi_at(disc, P_nodes, start[lo:hi], x[lo:hi], cfg.tol, cfg.max_iter)

    return _collect(_run_chunks(work, t.size, threads), "psi", spec, meta)


def psi_evaluator(sys: LinearGode, dich: Dichotomy, F: Perturbation, cfg: SolverConfig,
                  enforce_gate: bool = True):
    """Pointwise ``psi(t, x)`` through flows, without a field grid.

    Returns a callable ``psi(t, x)`` with ``t`` of shape ``(n,)`` and ``x`` of
    shape ``(n, d)``; the sample times are inserted into the solver grid.
    """
    _check_mode(dich)
    _gate(dich, sys, F, enforce_gate)

    def psi(t, x):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        disc = Discretization(sys, F, cfg.time_grid, extra=np.unique(t))
        P_nodes = disc.table.projections(dich.P)
        start = np.array([disc.index(tk) for tk in t], dtype=np.int64)
        parts = _run_chunks(
            lambda lo, hi: _psi_at(disc, P_nodes, start[lo:hi], x[lo:hi], cfg.tol,
                                   cfg.max_iter)[0], t.size, 1)
        return np.concatenate(parts, axis=0)

    return psi


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _interpolator(f: ConjugacyField) -> RegularGridInterpolator:
    rgi = f.__dict__.get("_rgi")
    if rgi is None:
        rgi = RegularGridInterpolator((f.spec.t_nodes,) + f.spec.x_axes, f.values,
                                      method="linear", bounds_error=False, fill_value=None)
        object.__setattr__(f, "_rgi", rgi)
    return rgi


def _clamp(f: ConjugacyField, t, x):
    lo = np.array([f.spec.t_nodes[0]] + [a[0] for a in f.spec.x_axes])
    hi = np.array([f.spec.t_nodes[-1]] + [a[-1] for a in f.spec.x_axes])
    pts = np.column_stack([t, x])
    tol = 1e-12 * np.maximum(1.0, np.abs(hi - lo))
    outside = np.any((pts < lo - tol) | (pts > hi + tol), axis=1)
    return np.clip(pts, lo, hi), outside


def apply_map(f: ConjugacyField, t, x, clamp: bool = False):
    """Evaluate ``x + offset(t, x)`` by multilinear interpolation.

    ``t`` has shape ``(n,)`` (or is a scalar) and ``x`` shape ``(n, d)`` (or
    ``(d,)``). With ``clamp=False`` a point outside the node hull raises
    :class:`HullError`; with ``clamp=True`` points are projected onto the
    hull and the second return value flags them.

    Returns
    -------
    mapped : ndarray
    outside : ndarray of bool (only when ``clamp=True``)
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.asarray(x, dtype=float).reshape(t.size, f.spec.dim)
    pts, outside = _clamp(f, t, x)
    if outside.any() and not clamp:
        k = int(np.argmax(outside))
        raise HullError(f"point (t={t[k]}, x={x[k]}) lies outside the field hull")
    out = x + _interpolator(f)(pts)
    if scalar:
        out = out[0]
    return (out, outside) if clamp else out


@dataclass(frozen=True)
class IdentityReport:
    psi_phi: float
    phi_psi: float
    threshold: float
    degraded: int
    n_points: int
    passed: bool

    def as_record(self) -> dict:
        return {"sup_psi_phi": self.psi_phi, "sup_phi_psi": self.phi_psi,
                "threshold": self.threshold, "degraded_points": self.degraded,
                "points": self.n_points, "pass": self.passed}


def verify_identities(phi_f: ConjugacyField, psi_f: ConjugacyField, sys=None, dich=None,
                      F=None, test_points=None, threshold: float = 1e-2) -> IdentityReport:
    """Sup over test points of ``||Psi(Phi(t,x)) - x||`` and ``||Phi(Psi(t,x)) - x||``.

    ``test_points`` is a pair ``(t, x)`` of arrays. Intermediate points that
    leave the field hull are clamped and counted as degraded. ``sys``,
    ``dich`` and ``F`` are accepted for interface symmetry and unused.
    """
    if phi_f.spec.dim != psi_f.spec.dim:
        raise DomainError("fields have different state dimensions")
    t, x = test_points
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.asarray(x, dtype=float).reshape(t.size, phi_f.spec.dim)
    y, o1 = apply_map(phi_f, t, x, clamp=True)
    back, o2 = apply_map(psi_f, t, y, clamp=True)
    z, o3 = apply_map(psi_f, t, x, clamp=True)
    fwd, o4 = apply_map(phi_f, t, z, clamp=True)
    a = float(np.max(np.linalg.norm(back - x, axis=-1)))
    b = float(np.max(np.linalg.norm(fwd - x, axis=-1)))
    degraded = int(np.sum(o1 | o2 | o3 | o4))
    return IdentityReport(a, b, threshold, degraded, t.size,
                          bool(a < threshold and b < threshold))


@dataclass(frozen=True)
class MappingReport:
    phi_residual: float
    psi_residual: float | None
    skipped: int
    threshold: float
    passed: bool

    def as_record(self) -> dict:
        return {"phi_residual": self.phi_residual, "psi_residual": self.psi_residual,
                "skipped_nodes": self.skipped, "threshold": self.threshold,
                "pass": self.passed}


def verify_solution_mapping(phi_f: ConjugacyField, sys: LinearGode, dich: Dichotomy,
                            F: Perturbation, initial_states, grid, t0: float | None = None,
                            psi_f: ConjugacyField | None = None, tol: float = 1e-12,
                            max_iter: int = 500, threshold: float = 1e-3) -> MappingReport:
    """Check that ``Phi`` sends linear solutions to nonlinear solutions.

    For each initial state ``x`` the linear solution ``Y(t) = V(t, t0) x`` is
    mapped through ``Phi`` at the field's time nodes and compared with the
    nonlinear flow started from ``Phi(t0, Y(t0))`` on ``grid``. With
    ``psi_f`` the dual check compares ``Psi`` along the nonlinear flow from
    ``(t0, x)`` with the linear solution from ``Psi(t0, x)``. Nodes where an
    orbit leaves the field hull are skipped and counted.
    """
    t_nodes = phi_f.spec.t_nodes
    t0 = float(t_nodes[0]) if t0 is None else float(t0)
    xs = np.atleast_2d(np.asarray(initial_states, dtype=float))
    disc = Discretization(sys, F, grid, extra=list(t_nodes) + [t0])
    k0 = disc.index(t0)
    node_idx = np.array([disc.index(t) for t in t_nodes])
    Vn, _ = operator_values(sys, t_nodes)
    _, Vi0 = operator_values(sys, [t0])
    skipped = 0

    def inside(f, pts):
        return ~_clamp(f, t_nodes, pts)[1]

    starts = []
    Ys = []
    for x in xs:
        Y = np.einsum("kij,j->ki", Vn @ Vi0[0], x)
        Ys.append(Y)
        starts.append(apply_map(phi_f, t0, x, clamp=True)[0])
    X, _ = run_flows(disc, [k0] * len(xs), np.array(starts), tol, max_iter)
    worst = 0.0
    for b, Y in enumerate(Ys):
        ok = inside(phi_f, Y)
        skipped += int(np.sum(~ok))
        if ok.any():
            mapped = apply_map(phi_f, t_nodes[ok], Y[ok])
            worst = max(worst, float(np.max(np.linalg.norm(mapped - X[b, node_idx[ok]], axis=-1))))
    worst_psi = None
    if psi_f is not None:
        Xn, _ = run_flows(disc, [k0] * len(xs), xs, tol, max_iter)
        worst_psi = 0.0
        for b, x in enumerate(xs):
            y0 = apply_map(psi_f, t0, x, clamp=True)[0]
            lin = np.einsum("kij,j->ki", Vn @ Vi0[0], y0)
            traj = Xn[b, node_idx]
            ok = inside(psi_f, traj)
            skipped += int(np.sum(~ok))
            if ok.any():
                mapped = apply_map(psi_f, t_nodes[ok], traj[ok])
                worst_psi = max(worst_psi, float(np.max(np.linalg.norm(mapped - lin[ok], axis=-1))))
    passed = worst <= threshold and (worst_psi is None or worst_psi <= threshold)
    return MappingReport(worst, worst_psi, skipped, threshold, bool(passed))


# ---------------------------------------------------------------------------
# decay condition and Hoelder exponent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SffReport:
    worst_ratio: float
    worst_pair: tuple | None
    passed: bool

    def as_record(self) -> dict:
        return {"worst_ratio": self.worst_ratio,
                "worst_pair_t": None if self.worst_pair is None else self.worst_pair[0],
                "worst_pair_s": None if self.worst_pair is None else self.worst_pair[1],
                "pass": self.passed}


def check_sff(F: Perturbation, alpha: float, sample_pairs, x_samples=None
              ) -> tuple[SffReport, Perturbation]:
    """Check ``||acc(x, t, s)|| <= e^{-alpha |s - t|} |h(s) - h(t)|`` on samples.

    Returns the report and a copy of ``F`` whose ``sff_decay`` flag records
    the outcome. Pairs with a zero right-hand side count as violations only
    when the accumulation is nonzero.
    """
    if x_samples is None:
        x_samples = np.zeros((1, F.dim))
    xs = np.atleast_2d(np.asarray(x_samples, dtype=float))
    worst, worst_pair = 0.0, None
    for t, s in sample_pairs:
        t, s = float(t), float(s)
        a, b = min(t, s), max(t, s)
        if a == b:
            continue
        acc = float(np.linalg.norm(F.accumulation(xs, a, b), axis=-1).max())
        rhs = math.exp(-alpha * (b - a)) * abs(float(F.modulus.value(b)) - float(F.modulus.value(a)))
        if rhs == 0.0:
            ratio = 0.0 if acc == 0.0 else math.inf
        else:
            ratio = acc / rhs
        if ratio > worst or worst_pair is None:
            worst, worst_pair = ratio, (t, s)
    passed = worst <= 1.0 + RATIO_RTOL
    return SffReport(float(worst), worst_pair, bool(passed)), F.with_sff(bool(passed))


def holder_theta(alpha: float, alpha_tilde: float, dist: float) -> float:
    """Splitting time ``ln(1/dist) / (alpha + alpha_tilde)``."""
    return math.log(1.0 / dist) / (alpha + alpha_tilde)


@dataclass(frozen=True)
class HolderReport:
    slope: float
    intercept: float
    fit_quality: float
    n_samples: int
    discarded: int
    reference: float

    def __iter__(self):
        return iter((self.slope, self.intercept, self.fit_quality))

    def as_record(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "fit_quality": self.fit_quality, "samples": self.n_samples,
                "discarded": self.discarded, "reference_exponent": self.reference}


def holder_exponent(psi_or_phi, t_values, base_points, radii, alpha: float,
                    alpha_tilde: float, seed: int = 0, restrict: bool = True,
                    require_sff: Perturbation | None = None) -> HolderReport:
    """Log-log regression of map differences against state differences.

    Parameters
    ----------
    psi_or_phi : ConjugacyField or callable
        A field (evaluated with :func:`apply_map`) or an offset evaluator
        ``offset(t, x)`` such as the one returned by :func:`psi_evaluator`.
    t_values, base_points, radii : array_like
        Sample times, base states ``x`` and distances ``||x - x~||``.
        Each ``(t, x, r)`` uses a direction drawn from ``seed``.
    alpha, alpha_tilde : float
        Rates of the strong dichotomy; the reference exponent is
        ``alpha / (alpha + alpha_tilde)``.
    restrict : bool
        Keep only samples with ``t >= 2 theta(r)``.
    require_sff : Perturbation, optional
        If given, its ``sff_decay`` flag must be set.

    Returns
    -------
    HolderReport
        Slope, intercept (log of the constant), coefficient of determination
        and sample counts. Unpacks as ``(slope, intercept, fit_quality)``.
    """
    if require_sff is not None and not require_sff.sff_decay:
        raise DomainError("decay condition not verified for this perturbation")
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 1e-6) or np.any(radii >= 1.0):
        raise DomainError("radii must lie in (1e-6, 1)")
    base = np.atleast_2d(np.asarray(base_points, dtype=float))
    d = base.shape[1]
    rng = np.random.default_rng(seed)
    ts, xs, xts, rs = [], [], [], []
    discarded = 0
    for t in np.asarray(t_values, dtype=float):
        for x in base:
            for r in radii:
                u = rng.normal(size=d)
                u /= np.linalg.norm(u)
                if restrict and t < 2.0 * holder_theta(alpha, alpha_tilde, r):
                    discarded += 1
                    continue
                ts.append(t)
                xs.append(x)
                xts.append(x + r * u)
                rs.append(r)
    if not ts:
        raise DomainError("no admissible samples")
    ts = np.array(ts)
    xs = np.array(xs)
    xts = np.array(xts)
    rs = np.array(rs)
    if isinstance(psi_or_phi, ConjugacyField):
        m1 = apply_map(psi_or_phi, ts, xs)
        m2 = apply_map(psi_or_phi, ts, xts)
    else:
        both = psi_or_phi(np.concatenate([ts, ts]), np.concatenate([xs, xts]))
        m1 = xs + both[:ts.size]
        m2 = xts + both[ts.size:]
    diff = np.linalg.norm(m1 - m2, axis=-1)
    keep = diff > 0
    if not keep.any():
        raise DomainError("map differences vanish for every sample")
    lx = np.log(rs[keep])
    ly = np.log(diff[keep])
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return HolderReport(float(coef[0]), float(coef[1]), r2, int(keep.sum()),
                        discarded + int((~keep).sum()), alpha / (alpha + alpha_tilde))
