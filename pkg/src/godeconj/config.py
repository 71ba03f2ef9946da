"""Scenario configuration files.

A scenario is an INI file (read with :mod:`configparser`). Matrices are
written row by row, entries separated by commas and rows by semicolons,
e.g. ``-1, 0; 0, 1``. Multi-line values hold one item per line.

Sections
--------
``[scenario]``
    ``tasks`` (comma list from integrate, flow, bounded, conjugate, verify,
    holder), ``seed`` (optional, default 0), ``name``.
``[system]``
    ``type`` = gode | ide | mde, ``window`` = ``lo, hi``.

    * gode: ``A`` (constant density), ``atoms`` (lines ``t | matrix``).
    * ide: ``A``, ``impulses`` (lines ``t | matrix``).
    * mde: ``A``, ``C``, ``u_density`` (scalar), ``u_atoms`` (lines ``t | jump``).
``[nonlinearity]``
    ``kind`` = none | constant | linear | tanh | expdecay, ``eps``, ``vector``,
    ``lam``, ``t_c``, ``radius``; ``sff_inflate`` (bool) scales the modulus by
    ``exp(alpha * window length)`` for the decay-condition experiments.
``[dichotomy]``
    ``mode`` = claimed | estimate; for claimed: ``P``, ``K``, ``alpha``,
    ``alpha_tilde`` (optional).
``[solver]``
    ``step``, ``tol``, ``max_iter``, ``tail_eps``, ``enforce_gate``.
``[flow]``
    ``t0``, ``x0`` (comma list).
``[field]``
    ``t_lo``, ``t_hi``, ``nt``, ``half_width``, ``nx``, ``test_points``,
    ``threshold``, ``mapping_threshold``.
``[holder]``
    ``t_lo``, ``t_hi``, ``nt``, ``n_base``, ``base_half_width``, ``r_min``,
    ``r_max``, ``n_radii``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError

TASKS = ("integrate", "flow", "bounded", "conjugate", "verify", "holder")
REQUIRES = {"verify": "conjugate", "holder": "conjugate"}


def parse_matrix(text: str, dim: int | None = None) -> np.ndarray:
    """Parse ``a, b; c, d`` into a 2-D array (a bare number is 1 x 1)."""
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.strip().split(";")]
    except ValueError as exc:
        raise ConfigError(f"bad matrix {text!r}: {exc}") from None
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"ragged matrix {text!r}")
    M = np.array(rows, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise ConfigError(f"matrix {text!r} is not square")
    if dim is not None and M.shape[0] != dim:
        raise ConfigError(f"matrix {text!r} has size {M.shape[0]}, expected {dim}")
    return M


def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"bad vector {text!r}: {exc}") from None


def parse_timed(text: str, dim: int | None, scalar: bool = False) -> list:
    """Lines ``t | value`` into ``[(t, value), ...]`` sorted by time."""
    out = []
    for line in text.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        if "|" not in line:
            raise ConfigError(f"expected 't | value', got {line!r}")
        t, val = line.split("|", 1)
        try:
            t = float(t)
            v = float(val) if scalar else parse_matrix(val, dim)
        except ValueError as exc:
            raise ConfigError(f"bad entry {line!r}: {exc}") from None
        out.append((t, v))
    return sorted(out, key=lambda p: p[0])


@dataclass
class Scenario:
    """Validated scenario values (plain data; objects are built by the CLI)."""

    name: str
    tasks: tuple
    seed: int
    system: dict
    nonlinearity: dict
    dichotomy: dict
    solver: dict
    flow: dict = dc_field(default_factory=dict)
    field: dict = dc_field(default_factory=dict)
    holder: dict = dc_field(default_factory=dict)


def _get(sec, key, conv, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"missing key [{sec.name}] {key}")
        return default
    raw = sec[key]
    try:
        if conv is bool:
            return sec.getboolean(key)
        return conv(raw)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad value for [{sec.name}] {key}: {raw!r} ({exc})") from None


def load(path) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    ConfigError
        On any syntax, schema or consistency problem.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    for name in ("scenario", "system", "solver"):
        if not cp.has_section(name):
            raise ConfigError(f"missing section [{name}]")
    known = {"scenario", "system", "nonlinearity", "dichotomy", "solver", "flow", "field",
             "holder"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")

    sc = cp["scenario"]
    tasks = tuple(t.strip() for t in sc.get("tasks", "").split(",") if t.strip())
    if not tasks:
        raise ConfigError("no tasks given")
    bad = [t for t in tasks if t not in TASKS]
    if bad:
        raise ConfigError(f"unknown tasks {bad}")
    for t, need in REQUIRES.items():
        if t in tasks and need not in tasks:
            raise ConfigError(f"task {t} requires task {need}")

    s = cp["system"]
    stype = _get(s, "type", str, required=True)
    if stype not in ("gode", "ide", "mde"):
        raise ConfigError(f"unknown system type {stype!r}")
    window = tuple(_get(s, "window", parse_vector, required=True))
    if len(window) != 2 or not window[0] < window[1]:
        raise ConfigError("window must be 'lo, hi' with lo < hi")
    A = _get(s, "A", parse_matrix, required=True)
    dim = A.shape[0]
    system = {"type": stype, "window": window, "A": A, "dim": dim}
    if stype == "gode":
        system["atoms"] = parse_timed(s.get("atoms", ""), dim)
    elif stype == "ide":
        system["impulses"] = parse_timed(s.get("impulses", ""), dim)
    else:
        system["C"] = _get(s, "C", lambda v: parse_matrix(v, dim), required=True)
        system["u_density"] = _get(s, "u_density", float, 0.0)
        system["u_atoms"] = parse_timed(s.get("u_atoms", ""), None, scalar=True)

    nl = {"kind": "none"}
    if cp.has_section("nonlinearity"):
        n = cp["nonlinearity"]
        nl = {
            "kind": _get(n, "kind", str, "none"),
            "eps": _get(n, "eps", float, 0.0),
            "vector": _get(n, "vector", parse_vector, None),
            "lam": _get(n, "lam", float, 1.0),
            "t_c": _get(n, "t_c", float, 0.0),
            "radius": _get(n, "radius", float, 1.0),
            "sff_inflate": _get(n, "sff_inflate", bool, False),
        }
        if nl["kind"] not in ("none", "constant", "linear", "tanh", "expdecay"):
            raise ConfigError(f"unknown nonlinearity kind {nl['kind']!r}")
        if nl["kind"] == "constant" and (nl["vector"] is None or nl["vector"].size != dim):
            raise ConfigError("constant nonlinearity needs a vector of length dim")

    dic = {"mode": "estimate"}
    if cp.has_section("dichotomy"):
        d = cp["dichotomy"]
        mode = _get(d, "mode", str, "estimate")
        if mode not in ("claimed", "estimate"):
            raise ConfigError(f"unknown dichotomy mode {mode!r}")
        dic = {"mode": mode}
        if mode == "claimed":
            dic.update(P=_get(d, "P", lambda v: parse_matrix(v, dim), required=True),
                       K=_get(d, "K", float, required=True),
                       alpha=_get(d, "alpha", float, required=True),
                       alpha_tilde=_get(d, "alpha_tilde", float, None))

    so = cp["solver"]
    solver = {
        "step": _get(so, "step", float, required=True),
        "tol": _get(so, "tol", float, 1e-10),
        "max_iter": _get(so, "max_iter", int, 200),
        "tail_eps": _get(so, "tail_eps", float, 1e-8),
        "enforce_gate": _get(so, "enforce_gate", bool, True),
    }
    if not solver["step"] > 0 or solver["step"] > window[1] - window[0]:
        raise ConfigError("solver step must be positive and shorter than the window")
    if not solver["tol"] > 0 or not solver["tail_eps"] > 0 or solver["max_iter"] < 1:
        raise ConfigError("tol and tail_eps must be > 0, max_iter >= 1")

    flow = {}
    if cp.has_section("flow"):
        f = cp["flow"]
        flow = {"t0": _get(f, "t0", float, window[0]),
                "x0": _get(f, "x0", parse_vector, np.zeros(dim))}
        if flow["x0"].size != dim:
            raise ConfigError("flow x0 has the wrong dimension")
    elif "flow" in tasks:
        raise ConfigError("task flow needs a [flow] section")

    fld = {}
    if cp.has_section("field"):
        f = cp["field"]
        fld = {"t_lo": _get(f, "t_lo", float, required=True),
               "t_hi": _get(f, "t_hi", float, required=True),
               "nt": _get(f, "nt", int, 5), "half_width": _get(f, "half_width", float, 1.0),
               "nx": _get(f, "nx", int, 5), "test_points": _get(f, "test_points", int, 100),
               "threshold": _get(f, "threshold", float, 1e-2),
               "mapping_threshold": _get(f, "mapping_threshold", float, 1e-3)}
        if not fld["t_lo"] < fld["t_hi"] or fld["nt"] < 2 or fld["nx"] < 2:
            raise ConfigError("field needs t_lo < t_hi and at least 2 nodes per axis")
    elif "conjugate" in tasks:
        raise ConfigError("task conjugate needs a [field] section")

    hol = {}
    if cp.has_section("holder"):
        h = cp["holder"]
        hol = {"t_lo": _get(h, "t_lo", float, required=True),
               "t_hi": _get(h, "t_hi", float, required=True),
               "nt": _get(h, "nt", int, 5), "n_base": _get(h, "n_base", int, 8),
               "base_half_width": _get(h, "base_half_width", float, 1.0),
               "r_min": _get(h, "r_min", float, 0.02), "r_max": _get(h, "r_max", float, 0.5),
               "n_radii": _get(h, "n_radii", int, 8)}
        if not 1e-6 < hol["r_min"] < hol["r_max"] < 1.0:
            raise ConfigError("holder radii must satisfy 1e-6 < r_min < r_max < 1")
    elif "holder" in tasks:
        raise ConfigError("task holder needs a [holder] section")
    if ("conjugate" in tasks or "bounded" in tasks) and not cp.has_section("dichotomy"):
        raise ConfigError("tasks bounded/conjugate need a [dichotomy] section")

    return Scenario(name=sc.get("name", "scenario"), tasks=tasks,
                    seed=_get(sc, "seed", int, 0), system=system, nonlinearity=nl,
                    dichotomy=dic, solver=solver, flow=flow, field=fld, holder=hol)
