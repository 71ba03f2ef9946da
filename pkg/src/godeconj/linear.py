"""Linear generalized ODEs, fundamental operators and exponential dichotomies.

A linear GODE ``dx = d[A(t)] x`` is described by its matrix-valued kernel
path ``A`` (a :class:`~godeconj.stieltjes.BvPath`). Its fundamental operator
solves ``V(t, s) = I + int_s^t d[A(r)] V(r, s)``. Between atoms the operator
follows the matrix ODE ``V' = A'(t) V``; each atom ``(t_i, J_i)`` crossed in
the forward direction multiplies by ``I + J_i``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from . import _core
from .errors import DichotomyError, DomainError, SingularJumpError
from .stieltjes import BvPath, ConstantDensity, batch_opnorm, opnorm, sup_variation

DEFAULT_STEP = 1e-3
# relative round-off allowance when comparing a bound ratio with its slack
RATIO_RTOL = 1e-9


# ---------------------------------------------------------------------------
# system type
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearGode:
    """Linear GODE with kernel path ``A``.

    Attributes
    ----------
    dim : int
        State dimension ``d``.
    kernel : BvPath
        Matrix-valued path ``t -> A(t)`` of shape ``(d, d)``.
    regularity_constant : float
        Bound ``C`` on the norms of the inverse jump factors
        ``(I + J_i)^{-1}``. Left jumps vanish for left-continuous kernels,
        so the companion factor is ``I`` and ``C >= 1`` always.
    sup_variation_A : float
        Total variation ``V_A`` of the kernel over its window.
    step : float
        Fixed RK4 step used between atoms.
    """

    dim: int
    kernel: BvPath
    regularity_constant: float
    sup_variation_A: float
    step: float = DEFAULT_STEP
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_kernel(cls, kernel: BvPath, regularity_constant: float | None = None,
                    step: float = DEFAULT_STEP) -> "LinearGode":
        """Build a system, computing ``C`` and ``V_A`` from the kernel.

        Raises
        ------
        SingularJumpError
            If some ``I + J_i`` is singular, or its inverse norm exceeds a
            caller-supplied ``regularity_constant``.
        """
        if len(kernel.shape) != 2 or kernel.shape[0] != kernel.shape[1]:
            raise DomainError("kernel must be square-matrix valued")
        d = kernel.shape[0]
        eye = np.eye(d)
        worst = 1.0
        for at in kernel.atoms:
            fac = eye + at.jump
            if np.linalg.cond(fac) > 1e14:
                raise SingularJumpError(f"I + J is singular at t={at.time}")
            worst = max(worst, opnorm(np.linalg.inv(fac)))
        if regularity_constant is None:
            regularity_constant = worst
        elif worst > regularity_constant * (1 + 1e-12):
            raise SingularJumpError(
                f"inverse jump norm {worst} exceeds regularity constant {regularity_constant}")
        if step <= 0:
            raise DomainError("step must be positive")
        return cls(d, kernel, float(regularity_constant), sup_variation(kernel), float(step))

    @classmethod
    def constant(cls, matrix, window, atoms=(), **kw) -> "LinearGode":
        """System with constant density ``matrix`` and optional jump atoms."""
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        atoms = [(t, np.atleast_2d(np.asarray(j, dtype=float))) for t, j in atoms]
        return cls.from_kernel(BvPath(window, np.zeros_like(m), ConstantDensity(m), atoms), **kw)

    @property
    def window(self) -> tuple:
        return self.kernel.window

    @property
    def origin(self) -> float:
        """Reference time of ``V(t) = V(t, origin)``: 0 when in the window."""
        t_lo, t_hi = self.window
        return 0.0 if t_lo <= 0.0 <= t_hi else t_lo

    def structural_times(self) -> list:
        """Atom times and density breakpoints inside the window."""
        t_lo, t_hi = self.window
        pts = set(self.kernel.atom_times.tolist())
        pts.update(b for b in self.kernel.density.breakpoints if t_lo < b < t_hi)
        return sorted(pts)


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------


def _smooth_propagators(sys: LinearGode, spans: Sequence[tuple], step: float) -> np.ndarray:
    """Atom-free propagators ``V(b, a)`` for each span ``(a, b)`` with ``a <= b``."""
    d = sys.dim
    out = np.empty((len(spans), d, d))
    dens = sys.kernel.density
    if isinstance(dens, ConstantDensity):
        memo: dict = {}
        for m, (a, b) in enumerate(spans):
            key = b - a
            if key not in memo:
                memo[key] = expm(dens.value * key) if key > 0 else np.eye(d)
            out[m] = memo[key]
        return out
    bps = [float(p) for p in dens.breakpoints]
    t0s, t1s, seg_ptr = [], [], [0]
    for a, b in spans:
        cuts = [a] + sorted(p for p in bps if a < p < b) + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi <= lo:
                continue
            n = max(1, int(math.ceil((hi - lo) / step - 1e-9)))
            nodes = np.linspace(lo, hi, n + 1)
            t0s.append(nodes[:-1])
            t1s.append(nodes[1:])
        seg_ptr.append(sum(x.size for x in t0s))
    if not t0s:
        out[:] = np.eye(d)
        return out
    t0 = np.concatenate(t0s)
    t1 = np.concatenate(t1s)
    hs = t1 - t0
    eta = 1e-12 * np.maximum(hs, 1e-300)
    D0 = np.asarray(dens(t0 + eta), dtype=float).reshape(-1, d, d)
    Dm = np.asarray(dens(0.5 * (t0 + t1)), dtype=float).reshape(-1, d, d)
    D1 = np.asarray(dens(t1 - eta), dtype=float).reshape(-1, d, d)
    return _core.rk4_products(D0, Dm, D1, hs, np.asarray(seg_ptr, dtype=np.int64))


def _jump_factor(sys: LinearGode, t: float) -> np.ndarray:
    return np.eye(sys.dim) + sys.kernel.jump_at(t)


def fundamental_operator(sys: LinearGode, t: float, s: float,
                         step: float | None = None) -> np.ndarray:
    """Fundamental operator ``V(t, s)``.

    For ``t > s`` the smooth flow is propagated between consecutive atoms in
    ``[s, t)`` (matrix exponential for constant densities, fixed-step RK4
    otherwise) and each atom contributes the factor ``I + J_i``. For
    ``t < s`` the inverse of ``V(s, t)`` is returned, and ``V(t, t) = I``.

    Raises
    ------
    DomainError
        If ``t`` or ``s`` is outside the kernel window.
    """
    sys.kernel.check_inside(t, s)
    t, s = float(t), float(s)
    d = sys.dim
    if t == s:
        return np.eye(d)
    if t < s:
        return np.linalg.inv(fundamental_operator(sys, s, t, step))
    step = sys.step if step is None else step
    atoms = [at for at in sys.kernel.atoms_in(s, t)]
    knots = [s] + [at.time for at in atoms if at.time > s] + [t]
    spans = list(zip(knots[:-1], knots[1:]))
    props = _smooth_propagators(sys, spans, step)
    out = np.eye(d)
    for (a, _), prop in zip(spans, props):
        out = prop @ (_jump_factor(sys, a) @ out)
    return out


@dataclass(frozen=True)
class CocycleReport:
    max_cocycle_residual: float
    max_inverse_residual: float
    worst_triple: tuple


def cocycle_check(sys: LinearGode, triples: Iterable[tuple]) -> CocycleReport:
    """Residuals of ``V(t,s) = V(t,r) V(r,s)`` and ``V(t,s) V(s,t) = I``."""
    worst_c, worst_i, worst_t = 0.0, 0.0, None
    eye = np.eye(sys.dim)
    for t, r, s in triples:
        vts = fundamental_operator(sys, t, s)
        res = opnorm(vts - fundamental_operator(sys, t, r) @ fundamental_operator(sys, r, s))
        inv = opnorm(vts @ fundamental_operator(sys, s, t) - eye)
        if res >= worst_c:
            worst_c, worst_t = res, (t, r, s)
        worst_i = max(worst_i, inv)
    return CocycleReport(worst_c, worst_i, worst_t)


# ---------------------------------------------------------------------------
# grid tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellTable:
    """Per-cell propagators of a linear GODE on a grid.

    For cell ``k`` (``t[k] -> t[k+1]``, midpoint ``m_k``):

    * ``Phi[k] = V(t[k+1], t[k])`` including the atom at ``t[k]``;
    * ``Phi_plus[k] = V(t[k+1], t[k]+)`` excluding it;
    * ``Phi_half[k] = V(t[k+1], m_k)``;
    * ``dens0/densm/dens1`` the kernel density at ``t[k]+``, ``m_k`` and
      ``t[k+1]-``;
    * ``Vt[k] = V(t[k], origin)`` and its inverse ``Vt_inv[k]``.
    """

    t: np.ndarray
    Phi: np.ndarray
    Phi_inv: np.ndarray
    Phi_plus: np.ndarray
    Phi_half: np.ndarray
    jump: np.ndarray
    dens0: np.ndarray
    densm: np.ndarray
    dens1: np.ndarray
    Vt: np.ndarray
    Vt_inv: np.ndarray
    origin_index: int

    @property
    def n_cells(self) -> int:
        return self.t.size - 1

    def projections(self, P: np.ndarray) -> np.ndarray:
        """Transported projections ``V(t_k) P V(t_k)^{-1}`` at every node."""
        return np.einsum("kij,jl,klm->kim", self.Vt, P, self.Vt_inv)

    def index_of(self, t: float) -> int:
        """Index of the node equal to ``t`` (up to the grid merge tolerance)."""
        tol = GRID_TOL * max(1.0, self.t[-1] - self.t[0])
        k = int(np.searchsorted(self.t, t))
        for j in (k, k - 1):
            if 0 <= j < self.t.size and abs(self.t[j] - t) <= tol:
                return j
        raise DomainError(f"time {t} is not a grid node")


GRID_TOL = 1e-12


def _far_from(cand: np.ndarray, ref: np.ndarray, tol: float) -> np.ndarray:
    """Mask of ``cand`` entries farther than ``tol`` from every ``ref`` entry."""
    if ref.size == 0:
        return np.ones(cand.shape, dtype=bool)
    k = np.searchsorted(ref, cand)
    left = np.abs(cand - ref[np.clip(k - 1, 0, ref.size - 1)])
    right = np.abs(cand - ref[np.clip(k, 0, ref.size - 1)])
    return np.minimum(left, right) > tol


def merge_grid(sys: LinearGode, grid, extra: Iterable[float] = ()) -> np.ndarray:
    """Grid with the kernel atoms, density breakpoints and ``extra`` inserted."""
    g = np.asarray(grid, dtype=float)
    sys.kernel.check_inside(g)
    lo, hi = g.min(), g.max()
    structural = [p for p in list(sys.structural_times()) + [sys.origin] if lo <= p <= hi]
    extras = [p for p in extra if lo <= p <= hi]
    tol = GRID_TOL * max(1.0, hi - lo)
    # structural times win over extras, extras over plain grid nodes: a
    # candidate within tol of an already accepted node is dropped
    accepted = np.zeros(0)
    for group in (structural, extras, g):
        cand = np.unique(np.asarray(group, dtype=float))
        if cand.size == 0:
            continue
        cand = cand[_far_from(cand, accepted, tol)]
        if cand.size:
            cand = cand[np.concatenate([[True], np.diff(cand) > tol])]
        accepted = np.union1d(accepted, cand)
    return accepted


def cell_table(sys: LinearGode, grid) -> CellTable:
    """Build (and cache on ``sys``) the :class:`CellTable` of a grid.

    The grid must already contain every atom of the kernel that falls inside
    it (use :func:`merge_grid`).
    """
    t = np.asarray(grid, dtype=float)
    key = ("cells", t.tobytes(), sys.step)
    hit = sys._cache.get(key)
    if hit is not None:
        return hit
    lo, hi = t[0], t[-1]
    missing = [a for a in sys.kernel.atom_times if lo <= a < hi and a not in set(t.tolist())]
    if missing:
        raise DomainError(f"kernel atoms {missing} are not grid nodes")
    d = sys.dim
    n = t.size - 1
    mid = 0.5 * (t[:-1] + t[1:])
    spans = [(a, b) for a, b in zip(t[:-1], mid)] + [(a, b) for a, b in zip(mid, t[1:])]
    props = _smooth_propagators(sys, spans, sys.step)
    first, second = props[:n], props[n:]
    jump = np.array([sys.kernel.jump_at(tk) for tk in t[:-1]]).reshape(n, d, d)
    eye = np.eye(d)
    phi_plus = second @ first
    phi = phi_plus @ (eye + jump)
    phi_inv = np.linalg.inv(phi)
    dens = sys.kernel.density
    eta = 1e-12 * np.maximum(np.diff(t), 1e-300)
    dens0 = np.asarray(dens(t[:-1] + eta)).reshape(n, d, d)
    densm = np.asarray(dens(mid)).reshape(n, d, d)
    dens1 = np.asarray(dens(t[1:] - eta)).reshape(n, d, d)
    origin = sys.origin
    if not lo <= origin <= hi:
        origin = lo
    k0 = int(np.argmin(np.abs(t - origin)))
    if t[k0] != origin:
        # origin is not a node: anchor at the nearest node through V(t_k0, origin)
        anchor = fundamental_operator(sys, t[k0], origin)
    else:
        anchor = eye
    Vt = np.empty((n + 1, d, d))
    Vi = np.empty((n + 1, d, d))
    Vt[k0] = anchor
    Vi[k0] = np.linalg.inv(anchor)
    for k in range(k0, n):
        Vt[k + 1] = phi[k] @ Vt[k]
        Vi[k + 1] = Vi[k] @ phi_inv[k]
    for k in range(k0 - 1, -1, -1):
        Vt[k] = phi_inv[k] @ Vt[k + 1]
        Vi[k] = Vi[k + 1] @ phi[k]
    table = CellTable(t, phi, phi_inv, phi_plus, second, jump, dens0, densm, dens1,
                      Vt, Vi, k0)
    sys._cache[key] = table
    return table


def operator_values(sys: LinearGode, times) -> tuple[np.ndarray, np.ndarray]:
    """``V(t, origin)`` and its inverse at each of the given times."""
    ts = np.asarray(times, dtype=float)
    grid = merge_grid(sys, np.union1d(ts, [sys.origin]))
    table = cell_table(sys, grid)
    idx = np.searchsorted(table.t, ts)
    return table.Vt[idx], table.Vt_inv[idx]


# ---------------------------------------------------------------------------
# dichotomies
# ---------------------------------------------------------------------------


MODES = ("claimed", "estimated", "verified")


def script_L(K: float, C: float, V_A: float) -> float:
    """Derived constant ``K C^3 exp(3 C V_A) V_A^2``."""
    return K * C ** 3 * math.exp(3.0 * C * V_A) * V_A ** 2


@dataclass(frozen=True)
class Dichotomy:
    """Exponential (and optionally strong) dichotomy data.

    Attributes
    ----------
    P : ndarray
        Projection at the reference time of ``V(t) = V(t, origin)``.
    K, alpha : float
        Constants of the two exponential bounds.
    alpha_tilde : float or None
        Two-sided growth rate of the strong dichotomy.
    mode : {"claimed", "estimated", "verified"}
    script_L : float or None
        ``K C^3 exp(3 C V_A) V_A^2`` once a system is attached.
    """

    P: np.ndarray
    K: float
    alpha: float
    alpha_tilde: float | None = None
    mode: str = "claimed"
    script_L: float | None = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        object.__setattr__(self, "P", P)
        if P.shape[0] != P.shape[1]:
            raise DomainError("P must be square")
        if opnorm(P @ P - P) > 1e-10 * max(1.0, opnorm(P) ** 2):
            raise DomainError("P is not a projection")
        if not self.K >= 1.0:
            raise DomainError("K must be >= 1")
        if self.K < opnorm(P) * (1 - 1e-12):
            raise DomainError("K must dominate ||P||")
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if self.alpha_tilde is not None and self.alpha_tilde < self.alpha * (1 - 1e-12):
            raise DomainError("alpha_tilde must be >= alpha")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")

    @classmethod
    def for_system(cls, sys: LinearGode, P, K, alpha, alpha_tilde=None,
                   mode="claimed") -> "Dichotomy":
        return cls(P, K, alpha, alpha_tilde, mode,
                   script_L(K, sys.regularity_constant, sys.sup_variation_A))

    @property
    def norm_P(self) -> float:
        return opnorm(self.P)

    @property
    def holder_reference(self) -> float | None:
        """Reference exponent ``alpha / (alpha + alpha_tilde)``."""
        if self.alpha_tilde is None:
            return None
        return self.alpha / (self.alpha + self.alpha_tilde)


def greens_kernel(sys: LinearGode, dich: Dichotomy, t: float, sigma: float) -> np.ndarray:
    """Kernel factor ``V(t) P V(sigma)^{-1}`` (``sigma <= t``) or
    ``-V(t) (I - P) V(sigma)^{-1}`` (``sigma > t``).

    With this sign the two branches differ by ``V(t) V(t)^{-1} = I`` across
    ``sigma = t``.
    """
    Vt, _ = operator_values(sys, [t])
    _, Vsi = operator_values(sys, [sigma])
    if sigma <= t:
        return Vt[0] @ dich.P @ Vsi[0]
    return -Vt[0] @ (np.eye(sys.dim) - dich.P) @ Vsi[0]


@dataclass(frozen=True)
class DichotomyReport:
    """Outcome of a dichotomy verification.

    ``worst_ratio`` is the largest observed ``norm / (K exp(...))``; the
    check passes when it does not exceed ``slack``.
    """

    kind: str
    worst_ratio: float
    worst_pair: tuple | None
    passed: bool
    slack: float
    n_pairs: int
    dichotomy: Dichotomy

    def as_record(self) -> dict:
        return {
            "check": self.kind,
            "worst_ratio": self.worst_ratio,
            "worst_pair_t": None if self.worst_pair is None else self.worst_pair[0],
            "worst_pair_s": None if self.worst_pair is None else self.worst_pair[1],
            "slack": self.slack,
            "pairs": self.n_pairs,
            "pass": self.passed,
        }


def _pair_operators(sys, pairs):
    pairs = [(float(t), float(s)) for t, s in pairs]
    times = np.unique(np.array([p for pair in pairs for p in pair] or [sys.origin]))
    Vt, Vi = operator_values(sys, times)
    pos = {t: i for i, t in enumerate(times)}
    return pairs, Vt, Vi, pos


def _worst_ratio(pairs, pos, ratio_fn, chunk: int = 65536):
    """Largest ratio over ``pairs`` (evaluated in vectorized chunks)."""
    if not pairs:
        return 0.0, None
    arr = np.array(pairs, dtype=float)
    idx = np.array([[pos[t], pos[s]] for t, s in pairs], dtype=np.int64)
    worst, worst_pair = -1.0, None
    for lo in range(0, len(arr), chunk):
        t, s = arr[lo:lo + chunk, 0], arr[lo:lo + chunk, 1]
        r = ratio_fn(t, s, idx[lo:lo + chunk, 0], idx[lo:lo + chunk, 1])
        k = int(np.argmax(r))
        if r[k] > worst:
            worst, worst_pair = float(r[k]), (float(t[k]), float(s[k]))
    return worst, worst_pair


def verify_dichotomy(sys: LinearGode, dich: Dichotomy, sample_pairs, slack: float = 1.0
                     ) -> DichotomyReport:
    """Check the exponential dichotomy bounds on sampled ``(t, s)`` pairs.

    For ``t >= s`` the bound is ``||V(t) P V(s)^{-1}|| <= slack K e^{-alpha(t-s)}``
    and for ``t < s`` it is ``||V(t)(I-P)V(s)^{-1}|| <= slack K e^{alpha(t-s)}``.
    On success the returned report carries the dichotomy with ``mode="verified"``.
    """
    pairs, Vt, Vi, pos = _pair_operators(sys, sample_pairs)
    Q = np.eye(sys.dim) - dich.P

    def ratios(t, s, it, js):
        fwd = t >= s
        mid = np.where(fwd[:, None, None], dich.P, Q)
        prod = np.einsum("nab,nbc,ncd->nad", Vt[it], mid, Vi[js])
        expo = np.where(fwd, -dich.alpha * (t - s), dich.alpha * (t - s))
        return batch_opnorm(prod, 2) / (dich.K * np.exp(expo))

    worst, worst_pair = _worst_ratio(pairs, pos, ratios)
    passed = worst <= slack * (1.0 + RATIO_RTOL)
    out = dataclasses.replace(dich, mode="verified") if passed else dich
    return DichotomyReport("exponential", worst, worst_pair, passed, slack, len(pairs), out)


def verify_strong_dichotomy(sys: LinearGode, dich: Dichotomy, sample_pairs,
                            slack: float = 1.0) -> DichotomyReport:
    """Check ``||V(t) V(s)^{-1}|| <= slack K e^{alpha_tilde |t-s|}`` on pairs."""
    if dich.alpha_tilde is None:
        raise DomainError("dichotomy has no alpha_tilde")
    pairs, Vt, Vi, pos = _pair_operators(sys, sample_pairs)

    def ratios(t, s, it, js):
        prod = np.einsum("nab,nbc->nac", Vt[it], Vi[js])
        return batch_opnorm(prod, 2) / (dich.K * np.exp(dich.alpha_tilde * np.abs(t - s)))

    worst, worst_pair = _worst_ratio(pairs, pos, ratios)
    passed = worst <= slack * (1.0 + RATIO_RTOL)
    out = dataclasses.replace(dich, mode="verified") if passed else dich
    return DichotomyReport("strong", worst, worst_pair, passed, slack, len(pairs), out)


def grid_pairs(grid) -> list:
    """All ordered pairs ``(t, s)`` of a grid (both orders, including t = s)."""
    g = np.asarray(grid, dtype=float)
    return [(t, s) for t in g for s in g]


def _slope_fit(dist: np.ndarray, logs: np.ndarray):
    """Least-squares ``logs ~ c + slope * dist``; returns slope, rms residual."""
    X = np.column_stack([np.ones_like(dist), dist])
    coef, *_ = np.linalg.lstsq(X, logs, rcond=None)
    resid = logs - X @ coef
    return float(coef[1]), float(np.sqrt(np.mean(resid ** 2)))


def _fit_nodes(sys: LinearGode, grid, max_nodes: int) -> np.ndarray:
    g = np.unique(np.asarray(grid, dtype=float))
    if g.size <= max_nodes:
        return g
    keep = set(np.linspace(0, g.size - 1, max_nodes).round().astype(int).tolist())
    for tau in sys.structural_times():
        k = int(np.searchsorted(g, tau))
        keep.update(j for j in (k - 1, k, k + 1) if 0 <= j < g.size)
    return g[sorted(keep)]


def estimate_dichotomy(sys: LinearGode, grid, unit_tol: float = 1e-6,
                       residual_threshold: float = 1.0, verify_slack: float = 1.2,
                       max_fit_nodes: int = 201) -> Dichotomy:
    """Estimate ``(P, K, alpha, alpha_tilde)`` from the window monodromy.

    ``P`` is the stable spectral projection of ``V(t_hi, t_lo)``, moved to
    the reference time. The rates come from least-squares slopes of the
    log-norms of the projected operators against ``t - s`` over all grid
    pairs: ``alpha`` is the slower of the stable and unstable rates, and
    ``alpha_tilde`` the faster of the forward and backward two-sided growth
    rates. ``K`` is the smallest constant making every fitting pair satisfy
    the bound, floored at ``max(1, ||P||)``. Grids longer than
    ``max_fit_nodes`` are thinned to evenly spaced nodes plus the structural
    times of the kernel (and the nodes just after them), which keeps the
    pair count quadratic in ``max_fit_nodes`` only.

    Raises
    ------
    DichotomyError
        If an eigenvalue lies within ``unit_tol`` of the unit circle, or a
        fit residual (rms of log-norms) exceeds ``residual_threshold``.
    """
    t_lo, t_hi = sys.window
    if not t_hi > t_lo:
        raise DomainError("window must have positive length")
    g = _fit_nodes(sys, grid, max_fit_nodes)
    d = sys.dim
    mono = fundamental_operator(sys, t_hi, t_lo)
    lam, vec = np.linalg.eig(mono)
    mods = np.abs(lam)
    if np.any(np.abs(mods - 1.0) <= unit_tol):
        raise DichotomyError(f"monodromy eigenvalues {lam} meet the unit circle")
    stable = mods < 1.0
    # transport the eigenvectors (not the projection) to the reference time:
    # conjugating P by V(t_lo) leaks roundoff that the window growth amplifies
    _, Vlo_inv = operator_values(sys, [t_lo])
    W = Vlo_inv[0] @ vec
    W = W / np.linalg.norm(W, axis=0)
    P = np.real(W @ np.diag(stable.astype(float)) @ np.linalg.inv(W))
    P = 0.5 * (P + P @ P) if opnorm(P @ P - P) > 0 else P
    Q = np.eye(d) - P
    Vt, Vi = operator_values(sys, g)
    ii, jj = np.meshgrid(np.arange(g.size), np.arange(g.size), indexing="ij")
    dist = g[ii] - g[jj]
    fwd = dist > 0
    bwd = dist < 0
    prodP = np.einsum("iab,bc,jcd->ijad", Vt, P, Vi)
    prodQ = np.einsum("iab,bc,jcd->ijad", Vt, Q, Vi)
    full = np.einsum("iab,jbc->ijac", Vt, Vi)
    nP = batch_opnorm(prodP, 2)
    nQ = batch_opnorm(prodQ, 2)
    nF = batch_opnorm(full, 2)
    rates = []
    if stable.any():
        a_s, r_s = _slope_fit(dist[fwd], np.log(nP[fwd]))
        if r_s > residual_threshold:
            raise DichotomyError(f"stable-branch fit residual {r_s:.3g} too large")
        rates.append(-a_s)
    if (~stable).any():
        a_u, r_u = _slope_fit(-dist[bwd], np.log(nQ[bwd]))
        if r_u > residual_threshold:
            raise DichotomyError(f"unstable-branch fit residual {r_u:.3g} too large")
        rates.append(-a_u)
    alpha = min(rates)
    if not alpha > 0:
        raise DichotomyError(f"fitted rate {alpha} is not positive")
    tilde_f, r_f = _slope_fit(dist[fwd], np.log(nF[fwd]))
    tilde_b, r_b = _slope_fit(-dist[bwd], np.log(nF[bwd]))
    if max(r_f, r_b) > residual_threshold:
        raise DichotomyError("two-sided growth fit residual too large")
    alpha_tilde = max(tilde_f, tilde_b, alpha)
    env = max(
        float(np.max(nP[dist >= 0] * np.exp(alpha * dist[dist >= 0]))),
        float(np.max(nQ[bwd] * np.exp(-alpha * dist[bwd]))) if bwd.any() else 0.0,
    )
    env_tilde = float(np.max(nF * np.exp(-alpha_tilde * np.abs(dist))))
    K = max(1.0, opnorm(P), env, env_tilde)
    dich = Dichotomy.for_system(sys, P, K, alpha, alpha_tilde, mode="estimated")
    pairs = list(zip(g[ii].ravel(), g[jj].ravel()))
    rep = verify_dichotomy(sys, dich, pairs, slack=verify_slack)
    if not rep.passed:
        raise DichotomyError(f"estimated dichotomy fails verification (ratio {rep.worst_ratio})")
    return dich
