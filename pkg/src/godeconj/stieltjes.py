"""Bounded-variation paths and Kurzweil-Stieltjes integration.

The supported integrator class is "absolutely continuous density plus a
finite list of jump atoms". Paths are left-continuous, so a path ``p`` with
window ``[t_lo, t_hi]`` evaluates as

    p(t) = base + int_{t_lo}^{t} density(s) ds + sum_{t_i < t} J_i

and an integral over ``[a, b]`` picks up the atoms with ``a <= t_i < b``.
Values may be scalars or square matrices; every norm of a matrix is the
induced 2-norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonFiniteError, QuadratureError

DEFAULT_TOL = 1e-10
DEFAULT_DEPTH = 40

# Gauss-Legendre rule used for vectorized cumulative integrals of densities.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_PIECE = 0.125


def opnorm(value) -> float:
    """Norm used throughout the package.

    Scalars use the absolute value, vectors the Euclidean norm and
    matrices the induced 2-norm (largest singular value).
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(abs(arr))
    if arr.ndim == 1:
        return float(np.linalg.norm(arr))
    return float(np.linalg.norm(arr, 2))


def batch_opnorm(values: np.ndarray, value_ndim: int) -> np.ndarray:
    """Apply :func:`opnorm` over the trailing ``value_ndim`` axes."""
    arr = np.asarray(values, dtype=float)
    if value_ndim == 0:
        return np.abs(arr)
    if value_ndim == 1:
        return np.linalg.norm(arr, axis=-1)
    return np.linalg.norm(arr, ord=2, axis=(-2, -1))


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


class Density:
    """Integrable map from time to a scalar or matrix value.

    Subclasses provide ``__call__`` (vectorized over an array of times) and
    may override :meth:`integral` and :meth:`cumulative` with closed forms.
    """

    shape: tuple = ()
    breakpoints: tuple = ()
    kind: str = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def integral(self, a: float, b: float) -> np.ndarray:
        """Exact or quadrature value of ``int_a^b density``."""
        return self.cumulative(a, np.array([b]))[0]

    def cumulative(self, a: float, ts) -> np.ndarray:
        """Vector of ``int_a^{t} density`` for each ``t`` in ``ts``.

        The generic implementation walks the sorted times and applies a
        composite 10-point Gauss-Legendre rule on pieces no longer than
        ``_GL_PIECE``, split at the density breakpoints.
        """
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        order = np.argsort(ts, kind="stable")
        out = np.zeros((ts.size,) + self.shape)
        prev = a
        acc = np.zeros(self.shape)
        for idx in order:
            t = ts[idx]
            acc = acc + _gl_integral(self, prev, t, self.smooth_cuts(prev, t))
            prev = t
            out[idx] = acc
        return out

    def abs_integral(self, a: float, b: float, tol: float = DEFAULT_TOL,
                     max_depth: int = DEFAULT_DEPTH) -> float:
        """``int_a^b ||density||`` by adaptive Simpson split at breakpoints."""
        if b <= a:
            return 0.0
        cuts = _cut_points(a, b, self.abs_kinks(a, b))
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            total += float(adaptive_simpson(
                lambda s: opnorm(self(s)), lo, hi,
                tol * (hi - lo) / (b - a), max_depth))
        return total

    def abs_kinks(self, a: float, b: float) -> list:
        """Points in ``(a, b)`` where the norm of the density may kink."""
        return list(self.breakpoints)

    def smooth_cuts(self, a: float, b: float) -> list:
        """Points in ``(a, b)`` where the density itself may be non-smooth."""
        return list(self.breakpoints)

    def to_record(self) -> list[str]:
        raise DomainError(f"density of kind {self.kind!r} is not serializable")


def _gl_integral(dens: Density, a: float, b: float, cuts=()) -> np.ndarray:
    if b == a:
        return np.zeros(dens.shape)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    cuts = _cut_points(a, b, cuts)
    total = np.zeros(dens.shape)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((hi - lo) / _GL_PIECE)))
        edges = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(edges)
        centre = 0.5 * (edges[:-1] + edges[1:])
        nodes = (centre[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        weights = (half[:, None] * _GL_W[None, :]).ravel()
        vals = np.asarray(dens(nodes), dtype=float)
        total = total + np.tensordot(weights, vals, axes=(0, 0))
    return sign * total


def _cut_points(a: float, b: float, extra) -> list:
    inner = sorted({float(p) for p in extra if a < p < b})
    return [a] + inner + [b]


class ConstantDensity(Density):
    """Density equal to a fixed scalar or matrix."""

    kind = "constant"

    def __init__(self, value):
        self.value = np.array(value, dtype=float)
        self.shape = self.value.shape
        self.breakpoints = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.value, t.shape + self.shape).copy()

    def integral(self, a, b):
        return self.value * (b - a)

    def cumulative(self, a, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return (ts - a).reshape((-1,) + (1,) * len(self.shape)) * self.value

    def abs_integral(self, a, b, tol=DEFAULT_TOL, max_depth=DEFAULT_DEPTH):
        return opnorm(self.value) * max(b - a, 0.0)

    def to_record(self):
        return ["constant " + _fmt_values(self.value)]


class PolynomialDensity(Density):
    """Density ``sum_k c_k t**k`` with scalar or matrix coefficients."""

    kind = "polynomial"

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.ndim == 0:
            c = c[None]
        self.coeffs = c
        self.shape = c.shape[1:]
        self.breakpoints = ()
        n = c.shape[0]
        anti = np.zeros((n + 1,) + self.shape)
        anti[1:] = c / np.arange(1, n + 1).reshape((-1,) + (1,) * len(self.shape))
        self._anti = anti

    @staticmethod
    def _horner(coeffs, t):
        t = np.asarray(t, dtype=float)
        extra = (1,) * (coeffs.ndim - 1)
        tt = t.reshape(t.shape + extra)
        out = np.zeros(t.shape + coeffs.shape[1:])
        for c in coeffs[::-1]:
            out = out * tt + c
        return out

    def __call__(self, t):
        return self._horner(self.coeffs, t)

    def integral(self, a, b):
        return self._horner(self._anti, b) - self._horner(self._anti, a)

    def cumulative(self, a, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return self._horner(self._anti, ts) - self._horner(self._anti, a)

    def abs_kinks(self, a, b):
        if self.shape != ():
            return []
        c = np.trim_zeros(self.coeffs, "b")
        if c.size <= 1:
            return []
        roots = np.polynomial.polynomial.polyroots(c)
        real = roots[np.abs(roots.imag) < 1e-12].real
        return [r for r in real if a < r < b]

    def to_record(self):
        lines = [f"polynomial {self.coeffs.shape[0]}"]
        for c in self.coeffs:
            lines.append("coeff " + _fmt_values(c))
        return lines


class TableDensity(Density):
    """Piecewise-linear interpolation of sampled values.

    Outside the table range the end values are held constant.
    """

    kind = "table"

    def __init__(self, times, values):
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise DomainError("table times must be strictly increasing, length >= 2")
        if v.shape[0] != t.size:
            raise DomainError("table values must match table times")
        self.times = t
        self.values = v
        self.shape = v.shape[1:]
        self.breakpoints = tuple(t)
        flat = v.reshape(t.size, -1)
        seg = 0.5 * np.diff(t)[:, None] * (flat[:-1] + flat[1:])
        self._cum = np.vstack([np.zeros((1, flat.shape[1])), np.cumsum(seg, axis=0)])
        self._flat = flat

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        flat = np.stack([np.interp(t.ravel(), self.times, col) for col in self._flat.T],
                        axis=-1)
        return flat.reshape(t.shape + self.shape)

    def _prim(self, ts):
        """Antiderivative measured from the first table time."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        t0, t1 = self.times[0], self.times[-1]
        tc = np.clip(ts, t0, t1)
        k = np.clip(np.searchsorted(self.times, tc, side="right") - 1, 0, self.times.size - 2)
        lo = self.times[k]
        width = self.times[k + 1] - lo
        frac = (tc - lo) / width
        v0 = self._flat[k]
        v1 = self._flat[k + 1]
        inner = self._cum[k] + (tc - lo)[:, None] * (v0 + 0.5 * frac[:, None] * (v1 - v0))
        below = np.minimum(ts - t0, 0.0)[:, None] * self._flat[0]
        above = np.maximum(ts - t1, 0.0)[:, None] * self._flat[-1]
        return (inner + below + above).reshape((ts.size,) + self.shape)

    def integral(self, a, b):
        return self._prim([b])[0] - self._prim([a])[0]

    def cumulative(self, a, ts):
        return self._prim(ts) - self._prim([a])[0]

    def to_record(self):
        lines = [f"table {self.times.size}"]
        for t, v in zip(self.times, self.values):
            lines.append(f"row {float(t)!r} " + _fmt_values(v))
        return lines


class FunctionDensity(Density):
    """Density given by an arbitrary callable.

    Parameters
    ----------
    func : callable
        Maps a float, or an array of floats, to the density value. When the
        callable only accepts scalars it is evaluated pointwise.
    shape : tuple
        Value shape, ``()`` for scalar paths or ``(d, d)`` for matrices.
    breakpoints : sequence of float, optional
        Times where the density may be non-smooth.
    antiderivative : callable, optional
        Closed-form primitive, used for exact cumulative integrals.
    """

    kind = "function"

    def __init__(self, func: Callable, shape=(), breakpoints: Sequence[float] = (),
                 antiderivative: Callable | None = None):
        self.func = func
        self.shape = tuple(shape)
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.antiderivative = antiderivative
        self._vectorized = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self._vectorized is not False:
            try:
                out = np.asarray(self.func(t), dtype=float)
                if out.shape == t.shape + self.shape:
                    self._vectorized = True
                    return out
                if t.ndim == 0 and out.size == int(np.prod(self.shape, dtype=int)):
                    return out.reshape(self.shape)
            except (TypeError, ValueError):
                pass
            self._vectorized = False
        flat = [np.asarray(self.func(float(s)), dtype=float).reshape(self.shape)
                for s in t.ravel()]
        return np.array(flat).reshape(t.shape + self.shape)

    def integral(self, a, b):
        if self.antiderivative is not None:
            return (np.asarray(self.antiderivative(b), dtype=float)
                    - np.asarray(self.antiderivative(a), dtype=float))
        return super().integral(a, b)

    def cumulative(self, a, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if self.antiderivative is not None:
            prim = np.array([np.asarray(self.antiderivative(float(t)), dtype=float)
                             for t in ts]).reshape((ts.size,) + self.shape)
            return prim - np.asarray(self.antiderivative(a), dtype=float)
        return super().cumulative(a, ts)


class CombinedDensity(Density):
    """Linear combination ``sum_j w_j d_j`` of densities of equal shape."""

    kind = "combination"

    def __init__(self, parts: Sequence[Density], weights: Sequence[float]):
        if not parts:
            raise DomainError("empty combination")
        shapes = {p.shape for p in parts}
        if len(shapes) != 1:
            raise DomainError("combined densities must share a shape")
        self.parts = tuple(parts)
        self.weights = tuple(float(w) for w in weights)
        self.shape = parts[0].shape
        self.breakpoints = tuple(sorted({b for p in parts for b in p.breakpoints}))

    def __call__(self, t):
        return sum(w * p(t) for w, p in zip(self.weights, self.parts))

    def integral(self, a, b):
        return sum(w * p.integral(a, b) for w, p in zip(self.weights, self.parts))

    def cumulative(self, a, ts):
        return sum(w * p.cumulative(a, ts) for w, p in zip(self.weights, self.parts))

    def abs_kinks(self, a, b):
        kinks = [k for p in self.parts for k in p.abs_kinks(a, b)]
        return kinks + list(self.breakpoints)


class NormDensity(Density):
    """Pointwise norm of another density (scalar valued)."""

    kind = "norm"

    def __init__(self, inner: Density):
        self.inner = inner
        self.shape = ()
        self.breakpoints = tuple(inner.breakpoints)
        self._nd = len(inner.shape)

    def __call__(self, t):
        return batch_opnorm(self.inner(t), self._nd)

    def abs_kinks(self, a, b):
        return self.inner.abs_kinks(a, b)

    def smooth_cuts(self, a, b):
        lo, hi = min(a, b), max(a, b)
        return list(self.breakpoints) + list(self.inner.abs_kinks(lo, hi))


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """A jump ``J = p(t+) - p(t)`` located at time ``t``."""

    time: float
    jump: np.ndarray


class BvPath:
    """Left-continuous bounded-variation path on a closed window.

    Parameters
    ----------
    window : (float, float)
        Closed interval ``[t_lo, t_hi]`` with ``t_lo < t_hi``.
    base_value : scalar or array
        Value of the path at ``t_lo``.
    density : Density, scalar or array, optional
        Derivative of the absolutely continuous part. Plain numbers and
        arrays are wrapped in :class:`ConstantDensity`. Defaults to zero.
    atoms : sequence of (time, jump), optional
        Jump atoms with strictly increasing times in ``[t_lo, t_hi)``.
    """

    def __init__(self, window, base_value=0.0, density=None, atoms=()):
        t_lo, t_hi = (float(window[0]), float(window[1]))
        if not (math.isfinite(t_lo) and math.isfinite(t_hi)) or not t_lo < t_hi:
            raise DomainError(f"invalid window {window!r}")
        base = np.array(base_value, dtype=float)
        if density is None:
            density = ConstantDensity(np.zeros(base.shape))
        elif not isinstance(density, Density):
            density = ConstantDensity(density)
        if density.shape != base.shape:
            raise DomainError(
                f"density shape {density.shape} does not match base shape {base.shape}")
        clean = []
        last = -math.inf
        for t, jump in atoms:
            t = float(t)
            j = np.array(jump, dtype=float)
            if j.shape != base.shape:
                raise DomainError(f"atom at {t} has shape {j.shape}, expected {base.shape}")
            if not t_lo <= t < t_hi:
                raise DomainError(f"atom time {t} outside [{t_lo}, {t_hi})")
            if t <= last:
                raise DomainError("atom times must be strictly increasing")
            if not np.all(np.isfinite(j)):
                raise NonFiniteError(f"non-finite jump at {t}")
            clean.append(Atom(t, j))
            last = t
        self.window = (t_lo, t_hi)
        self.base_value = base
        self.density = density
        self.atoms = tuple(clean)
        self.shape = base.shape
        self._atom_times = np.array([a.time for a in clean], dtype=float)
        if clean:
            self._atom_cum = np.cumsum(np.array([a.jump for a in clean]), axis=0)
        else:
            self._atom_cum = np.zeros((0,) + self.shape)

    # -- construction helpers -------------------------------------------------
    @classmethod
    def identity_like(cls, window, scale: float = 1.0, origin: float = 0.0):
        """Scalar path ``t -> scale * (t - origin)``."""
        t_lo = float(window[0])
        return cls(window, scale * (t_lo - origin), ConstantDensity(scale))

    @classmethod
    def zero(cls, window, shape=()):
        return cls(window, np.zeros(shape))

    # -- queries ---------------------------------------------------------------
    @property
    def atom_times(self) -> np.ndarray:
        return self._atom_times.copy()

    @property
    def is_scalar(self) -> bool:
        return self.shape == ()

    def check_inside(self, *times) -> None:
        t_lo, t_hi = self.window
        span = t_hi - t_lo
        slack = 1e-12 * max(1.0, span)
        for t in times:
            t = np.asarray(t, dtype=float)
            if np.any(~np.isfinite(t)) or np.any(t < t_lo - slack) or np.any(t > t_hi + slack):
                raise DomainError(f"time {t} outside window [{t_lo}, {t_hi}]")

    def _atoms_before(self, ts, inclusive: bool) -> np.ndarray:
        side = "right" if inclusive else "left"
        idx = np.searchsorted(self._atom_times, ts, side=side)
        if self._atom_cum.shape[0] == 0:
            return np.zeros(np.shape(ts) + self.shape)
        padded = np.concatenate([np.zeros((1,) + self.shape), self._atom_cum], axis=0)
        return padded[idx]

    def value(self, t):
        """Left-continuous value ``p(t)``; accepts scalars or arrays."""
        ts = np.asarray(t, dtype=float)
        self.check_inside(ts)
        flat = ts.ravel()
        out = (self.base_value + self.density.cumulative(self.window[0], flat)
               + self._atoms_before(flat, inclusive=False))
        return out.reshape(ts.shape + self.shape)

    __call__ = value

    def right_value(self, t):
        """Right limit ``p(t+)``."""
        ts = np.asarray(t, dtype=float)
        self.check_inside(ts)
        flat = ts.ravel()
        out = (self.base_value + self.density.cumulative(self.window[0], flat)
               + self._atoms_before(flat, inclusive=True))
        return out.reshape(ts.shape + self.shape)

    def atoms_in(self, a: float, b: float) -> tuple:
        """Atoms with ``a <= t_i < b``."""
        return tuple(at for at in self.atoms if a <= at.time < b)

    def jump_at(self, t: float) -> np.ndarray:
        for at in self.atoms:
            if at.time == t:
                return at.jump
        return np.zeros(self.shape)

    def breakpoints(self) -> tuple:
        return tuple(sorted(set(self.density.breakpoints) | set(self._atom_times.tolist())))

    def is_nondecreasing(self, samples: int = 2001, tol: float = 0.0) -> bool:
        """Scalar check: sampled density and every jump are nonnegative."""
        if not self.is_scalar:
            raise DomainError("monotonicity is defined for scalar paths only")
        ts = np.linspace(self.window[0], self.window[1], samples)
        if np.any(np.asarray(self.density(ts)) < -tol):
            return False
        return all(float(a.jump) >= -tol for a in self.atoms)

    # -- algebra ---------------------------------------------------------------
    def scaled(self, factor: float) -> "BvPath":
        return combine([self], [factor])

    def variation_path(self) -> "BvPath":
        """Scalar path ``t -> var_{t_lo}^{t} p`` (nondecreasing)."""
        return BvPath(self.window, 0.0, NormDensity(self.density),
                      [(a.time, opnorm(a.jump)) for a in self.atoms])

    def restricted(self, window) -> "BvPath":
        """Same path on a sub-window (atoms outside it are dropped)."""
        t_lo, t_hi = float(window[0]), float(window[1])
        self.check_inside(t_lo, t_hi)
        return BvPath((t_lo, t_hi), self.value(t_lo), self.density,
                      [(a.time, a.jump) for a in self.atoms if t_lo <= a.time < t_hi])

    def __repr__(self):
        return (f"BvPath(window={self.window}, shape={self.shape}, "
                f"density={self.density.kind}, atoms={len(self.atoms)})")


def combine(paths: Sequence[BvPath], weights: Sequence[float]) -> BvPath:
    """Linear combination of paths sharing a window and value shape."""
    if not paths:
        raise DomainError("nothing to combine")
    window = paths[0].window
    shape = paths[0].shape
    for p in paths:
        if p.window != window or p.shape != shape:
            raise DomainError("combined paths must share window and shape")
    base = sum(w * p.base_value for w, p in zip(weights, paths))
    dens = CombinedDensity([p.density for p in paths], weights)
    jumps: dict[float, np.ndarray] = {}
    for w, p in zip(weights, paths):
        for at in p.atoms:
            jumps[at.time] = jumps.get(at.time, np.zeros(shape)) + w * at.jump
    atoms = sorted(jumps.items())
    return BvPath(window, base, dens, atoms)


# ---------------------------------------------------------------------------
# regulated samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegulatedSample:
    """Values of a regulated function on an ordered grid.

    ``values[k]`` is the (left-continuous) value at ``times[k]``. At grid
    times that carry a jump, ``post_jump_values`` stores the right limit,
    in the same order as ``atom_times``. Between grid times the sample is
    evaluated by linear interpolation from the right limit at the left node
    to the value at the right node.
    """

    times: np.ndarray
    values: np.ndarray
    atom_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    post_jump_values: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        atoms = np.asarray(self.atom_times, dtype=float).ravel()
        if times.ndim != 1 or times.size < 1:
            raise DomainError("times must be a non-empty 1-D grid")
        if np.any(np.diff(times) <= 0):
            raise DomainError("grid must be strictly increasing")
        if values.shape[0] != times.size:
            raise DomainError("values must have one entry per grid time")
        post = self.post_jump_values
        if post is None:
            post = np.zeros((0,) + values.shape[1:])
        post = np.asarray(post, dtype=float)
        if post.shape != (atoms.size,) + values.shape[1:]:
            raise DomainError("post_jump_values must match atom_times")
        idx = np.searchsorted(times, atoms)
        if atoms.size and (np.any(idx >= times.size) or np.any(times[np.minimum(idx, times.size - 1)] != atoms)):
            raise DomainError("atom_times must be a subset of the grid")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "atom_times", atoms)
        object.__setattr__(self, "post_jump_values", post)
        object.__setattr__(self, "_atom_idx", idx.astype(int))

    @property
    def value_shape(self) -> tuple:
        return self.values.shape[1:]

    def right_values(self) -> np.ndarray:
        """Array of right limits at every grid time."""
        out = self.values.copy()
        if self.atom_times.size:
            out[self._atom_idx] = self.post_jump_values
        return out

    def sup_norm(self) -> float:
        nd = len(self.value_shape)
        vals = np.concatenate([self.values, self.post_jump_values], axis=0)
        return float(np.max(batch_opnorm(vals, nd))) if vals.size else 0.0

    def _eval(self, t, right: bool):
        ts = np.asarray(t, dtype=float)
        flat = ts.ravel()
        times = self.times
        span = times[-1] - times[0]
        slack = 1e-12 * max(1.0, span)
        if np.any(flat < times[0] - slack) or np.any(flat > times[-1] + slack):
            raise DomainError("evaluation outside the sample grid")
        if times.size == 1:
            out = np.broadcast_to(self.values[0], flat.shape + self.value_shape).copy()
            return out.reshape(ts.shape + self.value_shape)
        rv = self.right_values()
        k = np.clip(np.searchsorted(times, flat, side="right") - 1, 0, times.size - 2)
        lo, hi = times[k], times[k + 1]
        w = ((flat - lo) / (hi - lo)).reshape((-1,) + (1,) * len(self.value_shape))
        out = (1 - w) * rv[k] + w * self.values[k + 1]
        exact = np.searchsorted(times, flat)
        exact = np.minimum(exact, times.size - 1)
        on_node = times[exact] == flat
        if np.any(on_node):
            src = rv if right else self.values
            out[on_node] = src[exact[on_node]]
        return out.reshape(ts.shape + self.value_shape)

    def __call__(self, t):
        """Left-continuous evaluation (value at a node is the stored value)."""
        return self._eval(t, right=False)

    def right_limit(self, t):
        return self._eval(t, right=True)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def _checked(value, where):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite integrand sample at t={where!r}")
    return arr


def adaptive_simpson(fn: Callable, a: float, b: float, tol: float = DEFAULT_TOL,
                     max_depth: int = DEFAULT_DEPTH, min_pieces: int = 8):
    """Adaptive Simpson quadrature of a scalar- or array-valued function.

    The interval is first cut into ``min_pieces`` panels, which guards
    against accidental agreement of the coarse estimates on periodic
    integrands. Each panel is bisected until the Richardson error estimate
    drops below its share of ``tol``.

    Raises
    ------
    NonFiniteError
        If any sample is not finite.
    QuadratureError
        If a panel is still unresolved at ``max_depth`` bisections.
    """
    if b == a:
        return np.zeros(np.shape(_checked(fn(a), a)))
    edges = np.linspace(a, b, min_pieces + 1)
    total = None
    stack = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = (_checked(fn(lo), lo), _checked(fn(mid), mid),
                          _checked(fn(hi), hi))
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
        stack.append((lo, hi, flo, fmid, fhi, whole, tol / min_pieces, 0))
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = _checked(fn(lm), lm), _checked(fn(rm), rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        err = left + right - whole
        if np.max(np.abs(err)) <= 15.0 * eps:
            piece = left + right + err / 15.0
            total = piece if total is None else total + piece
            continue
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson unresolved on [{lo}, {hi}] at depth {depth}")
        stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
        stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
    return total


def _stieltjes_product(dh, fv, h_scalar: bool):
    """Integrand factor ``dh * f`` (scalar integrator) or ``dh @ f`` (matrix)."""
    if h_scalar:
        return np.multiply.outer(dh, fv) if np.ndim(dh) else dh * fv
    fv = np.asarray(fv, dtype=float)
    if fv.ndim == 0:
        return dh * fv
    return dh @ fv


def _as_evaluator(f):
    """Return (left evaluator, right evaluator, knots) for a callable or sample."""
    if isinstance(f, RegulatedSample):
        return f.__call__, f.right_limit, tuple(f.times)
    return f, f, ()


def ks_integral(f, h: BvPath, a: float, b: float, tol: float = DEFAULT_TOL,
                max_depth: int = DEFAULT_DEPTH):
    """Kurzweil-Stieltjes integral of ``f`` against ``h`` over ``[a, b]``.

    The value is ``int_a^b f(s) h'(s) ds + sum_{a <= t_i < b} f(t_i) J_i``.
    For matrix-valued ``h`` the integrand is ``h'(s) @ f(s)``. The continuous
    part is computed with :func:`adaptive_simpson`, split at the density
    breakpoints, the atoms and (for a :class:`RegulatedSample`) its grid.

    Swapping ``a`` and ``b`` flips the sign; ``a == b`` gives an exact zero.

    Raises
    ------
    DomainError
        If ``[a, b]`` is not inside ``h.window``.
    NonFiniteError
        If the integrand produces a non-finite sample.
    QuadratureError
        If the adaptive quadrature does not converge.
    """
    h.check_inside(a, b)
    if b < a:
        return -ks_integral(f, h, b, a, tol=tol, max_depth=max_depth)
    left_eval, right_eval, knots = _as_evaluator(f)
    scalar = h.is_scalar
    if a == b:
        probe = _checked(left_eval(a), a)
        return np.zeros(np.shape(_stieltjes_product(np.zeros(h.shape), probe, scalar)))
    cuts = _cut_points(a, b, list(h.density.breakpoints) + h._atom_times.tolist()
                       + list(knots))
    total = None
    span = b - a
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        def integrand(s, lo=lo):
            fv = right_eval(s) if s == lo else left_eval(s)
            return _stieltjes_product(np.asarray(h.density(s)), fv, scalar)
        piece = adaptive_simpson(integrand, lo, hi, tol * (hi - lo) / span, max_depth)
        total = piece if total is None else total + piece
    for at in h.atoms_in(a, b):
        fv = _checked(left_eval(at.time), at.time)
        total = total + _stieltjes_product(at.jump, fv, scalar)
    return total


def total_variation(h: BvPath, a: float, b: float, tol: float = DEFAULT_TOL) -> float:
    """``int_a^b ||h'|| + sum_{a <= t_i < b} ||J_i||``; symmetric in ``a, b``."""
    h.check_inside(a, b)
    if b < a:
        a, b = b, a
    if a == b:
        return 0.0
    cont = h.density.abs_integral(a, b, tol=tol)
    jumps = sum(opnorm(at.jump) for at in h.atoms_in(a, b))
    return float(cont + jumps)


def sup_variation(h: BvPath) -> float:
    """Total variation over the full window (finite-window surrogate)."""
    return total_variation(h, *h.window)


# ---------------------------------------------------------------------------
# Gronwall check and refinement oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GronwallReport:
    premise_holds: bool
    conclusion_holds: bool
    worst_premise_ratio: float
    worst_conclusion_ratio: float

    @property
    def implication_ok(self) -> bool:
        return (not self.premise_holds) or self.conclusion_holds


def gronwall_check(u: RegulatedSample, h: BvPath, c1: float, c2: float,
                   rtol: float = 1e-9) -> GronwallReport:
    """Check the Perron-Stieltjes Gronwall premise and conclusion on a grid.

    The premise ``u(t) <= c1 + c2 int_a^t u dh`` and the conclusion
    ``u(t) <= c1 exp(c2 |h(t) - h(a)|)`` are evaluated at every grid time,
    with ``a`` the first grid time and a relative slack ``rtol`` for
    quadrature round-off. The integral is accumulated cell by cell with
    :func:`ks_integral`.
    """
    if not (c1 > 0 and c2 > 0):
        raise DomainError("c1 and c2 must be positive")
    if not h.is_nondecreasing():
        raise DomainError("Gronwall integrator must be nondecreasing")
    if u.value_shape != ():
        raise DomainError("u must be scalar valued")
    vals = u.values
    if np.any(vals <= 0) or np.any(u.post_jump_values <= 0):
        raise DomainError("u must be positive")
    times = u.times
    h.check_inside(times[0], times[-1])
    cum = np.zeros(times.size)
    for k in range(times.size - 1):
        cum[k + 1] = cum[k] + float(ks_integral(u, h, times[k], times[k + 1]))
    bound_p = c1 + c2 * cum
    hv = np.asarray(h.value(times))
    bound_c = c1 * np.exp(c2 * np.abs(hv - hv[0]))
    ratio_p = vals / bound_p
    ratio_c = vals / bound_c
    return GronwallReport(
        premise_holds=bool(np.all(ratio_p <= 1.0 + rtol)),
        conclusion_holds=bool(np.all(ratio_c <= 1.0 + rtol)),
        worst_premise_ratio=float(ratio_p.max()),
        worst_conclusion_ratio=float(ratio_c.max()),
    )


def refinement_sum_oracle(f: Callable, h: BvPath, a: float, b: float, n: int,
                          tags: str = "left"):
    """Tagged Riemann-Stieltjes sum on a uniform ``n``-partition.

    The atoms of ``h`` inside ``[a, b)`` are inserted as extra partition
    points. With ``tags="left"`` every cell ``[s_{j-1}, s_j]`` contributes
    ``f(s_{j-1}) (h(s_j) - h(s_{j-1}))``. With ``tags="midpoint"`` the
    continuous increment is tagged at the cell midpoint while an atom at the
    left end of a cell keeps its own tag, which gives second-order accuracy
    on smooth data.
    """
    if n < 1:
        raise DomainError("partition count must be >= 1")
    h.check_inside(a, b)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    left_eval, _, _ = _as_evaluator(f)
    grid = np.linspace(a, b, n + 1)
    inner = [at.time for at in h.atoms_in(a, b)]
    pts = np.union1d(grid, np.array(inner, dtype=float))
    hv = np.asarray(h.value(pts))
    scalar = h.is_scalar
    if tags == "left":
        tag_pts = pts[:-1]
        incr = np.diff(hv, axis=0)
    elif tags == "midpoint":
        tag_pts = 0.5 * (pts[:-1] + pts[1:])
        jumps = np.zeros((pts.size - 1,) + h.shape)
        pos = np.searchsorted(pts, np.array(inner, dtype=float))
        for at, p in zip(h.atoms_in(a, b), pos):
            jumps[p] = at.jump
        incr = np.diff(hv, axis=0) - jumps
    else:
        raise DomainError(f"unknown tag rule {tags!r}")
    total = None
    fvals = [np.asarray(left_eval(t), dtype=float) for t in tag_pts]
    for fv, dh in zip(fvals, incr):
        term = _stieltjes_product(dh, fv, scalar)
        total = term if total is None else total + term
    if tags == "midpoint":
        for at in h.atoms_in(a, b):
            total = total + _stieltjes_product(at.jump, np.asarray(left_eval(at.time)), scalar)
    return sign * total


# ---------------------------------------------------------------------------
# plain-text serialization
# ---------------------------------------------------------------------------


def _fmt_values(arr) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(arr, dtype=float).ravel())


def dumps_path(path: BvPath) -> str:
    """Serialize a path to the documented plain-text record.

    Format (one item per line)::

        bvpath 1
        window <t_lo> <t_hi>
        shape <n_rows> <n_cols>        # "shape scalar" for scalar paths
        base <values...>
        density constant <values...>
        density polynomial <n>   followed by n lines "coeff <values...>"
        density table <n>        followed by n lines "row <t> <values...>"
        atom <t> <jump values...>      # repeated, in time order
        end
    """
    lines = ["bvpath 1", f"window {float(path.window[0])!r} {float(path.window[1])!r}"]
    lines.append("shape scalar" if path.is_scalar else
                 "shape " + " ".join(str(s) for s in path.shape))
    lines.append("base " + _fmt_values(path.base_value))
    rec = path.density.to_record()
    lines.append("density " + rec[0])
    lines.extend(rec[1:])
    for at in path.atoms:
        lines.append(f"atom {float(at.time)!r} " + _fmt_values(at.jump))
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads_path(text: str) -> BvPath:
    """Inverse of :func:`dumps_path`."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0][:2] != ["bvpath", "1"]:
        raise DomainError("not a bvpath record")
    it = iter(rows[1:])
    window = shape = base = dens = None
    atoms = []
    for row in it:
        key = row[0]
        if key == "window":
            window = (float(row[1]), float(row[2]))
        elif key == "shape":
            shape = () if row[1] == "scalar" else tuple(int(v) for v in row[1:])
        elif key == "base":
            base = np.array([float(v) for v in row[1:]]).reshape(shape)
        elif key == "density":
            kind = row[1]
            if kind == "constant":
                dens = ConstantDensity(np.array([float(v) for v in row[2:]]).reshape(shape))
            elif kind == "polynomial":
                n = int(row[2])
                coeffs = [np.array([float(v) for v in next(it)[1:]]).reshape(shape)
                          for _ in range(n)]
                dens = PolynomialDensity(np.array(coeffs))
            elif kind == "table":
                n = int(row[2])
                tt, vv = [], []
                for _ in range(n):
                    r = next(it)
                    tt.append(float(r[1]))
                    vv.append(np.array([float(v) for v in r[2:]]).reshape(shape))
                dens = TableDensity(tt, vv)
            else:
                raise DomainError(f"unknown density kind {kind!r}")
        elif key == "atom":
            atoms.append((float(row[1]), np.array([float(v) for v in row[2:]]).reshape(shape)))
        elif key == "end":
            break
        else:
            raise DomainError(f"unknown record key {key!r}")
    if window is None or shape is None or base is None:
        raise DomainError("incomplete bvpath record")
    return BvPath(window, base, dens, atoms)
