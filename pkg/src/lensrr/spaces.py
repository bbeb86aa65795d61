"""Step functions on dyadic grids and on [0, 1], and their class characteristics.

Dyadic step functions live on the 2^(n*k)-cell grid of [0, 1]^n at depth k
(row-major cell order: dimension 0 varies fastest).  Their dyadic
characteristics take suprema over dyadic subcubes only; the continuous
characteristics of functions on [0, 1] take suprema over all subintervals.
The continuous suprema are computed in two phases: exact evaluation on all
breakpoint-aligned intervals, then coordinate-wise golden-section refinement
of the smooth objective inside every pair of pieces.  The accuracy target,
1e-9 on the optimized functional, is documented rather than proved.

The monotonic rearrangement sorts (value, measure) mass descending; it
preserves distributions exactly because dyadic cell measures are exact
binary floats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import BOUNDARY_RTOL, Lens, ParabolicLens, PowerLens

GOLDEN_RTOL = 1e-10
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_ITERS = 48  # 0.618^48 < 1e-10
_SWEEPS = 3

DYADIC_CELL_BUDGET = 2**24


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DyadicStepFunction:
    """Step function on the depth-k dyadic grid of [0, 1]^n.

    ``values`` has one row per cell in row-major order (flat index
    sum_d idx_d * 2^(k*d)); scalar functions store shape (2^(n*k),),
    plane-valued ones shape (2^(n*k), 2).  Values are frozen after
    construction and safe to share across workers.
    """

    n: int
    depth: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 1 or self.depth < 0:
            raise ValueError("need n >= 1 and depth >= 0")
        cells = 1 << (self.n * self.depth)
        if cells > DYADIC_CELL_BUDGET:
            raise ValueError(f"cell budget exceeded: 2^(n*depth) > {DYADIC_CELL_BUDGET}")
        v = np.array(self.values, dtype=float)
        if v.shape not in ((cells,), (cells, 2)):
            raise ValueError(f"values must have {cells} rows, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    @property
    def cell_measure(self) -> float:
        return 2.0 ** (-self.n * self.depth)

    def grid(self, component: int | None = None) -> np.ndarray:
        """Values as an n-dimensional array indexed by per-dimension cell ids."""
        v = self.values if component is None else self.values[:, component]
        return v.reshape((1 << self.depth,) * self.n, order="F")


@dataclass(frozen=True)
class StepFunction1D:
    """Piecewise-constant function on [0, 1] with ordered breakpoints."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float)
        v = np.array(self.values, dtype=float)
        if b.ndim != 1 or b.size < 2 or b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("breakpoints must run from 0 to 1")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if v.shape[0] != b.size - 1 or v.ndim not in (1, 2):
            raise ValueError("one value per piece required")
        if v.ndim == 2 and v.shape[1] != 2:
            raise ValueError("plane-valued pieces must have two components")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(v))):
            raise ValueError("breakpoints and values must be finite")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    @property
    def piece_lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)


@dataclass(frozen=True)
class ApParams:
    """Exponent pair and constant of a Muckenhoupt-type class.

    The class with constant Q consists of positive functions with
    <f^p1>^(1/p1) * <f^p2>^(-1/p2) <= Q over every cube/interval.  The
    classical A2 convention is (p1, p2) = (1, -1), where the functional is
    just <f><1/f> and is reported as-is (not square-rooted).
    """

    p1: float
    p2: float
    Q: float = 1.0

    def __post_init__(self):
        if not self.p1 > self.p2:
            raise ValueError("need p1 > p2")
        if self.p1 == 0 or self.p2 == 0:
            raise ValueError("exponents must be nonzero")
        if not self.Q >= 1:
            raise ValueError("class constant Q must be >= 1")


A2 = ApParams(1.0, -1.0)


# ---------------------------------------------------------------------------
# Dyadic characteristics
# ---------------------------------------------------------------------------


def _block_axes(ndim: int) -> tuple[int, ...]:
    return tuple(range(1, 2 * ndim, 2))


def _split_blocks(grid: np.ndarray) -> np.ndarray:
    """Reshape a (2^j,)*n grid so each parent's 2^n children sit on odd axes."""
    side = grid.shape[0] // 2
    return grid.reshape(sum(((side, 2) for _ in range(grid.ndim)), ()))


def dyadic_bmo_seminorm(f: DyadicStepFunction) -> float:
    """Square root of the largest variance over all dyadic subcubes.

    Aggregates (mean, variance) bottom-up with the pairwise combination
    rule, which is exact for equal child masses and numerically stable.
    """
    if not f.is_scalar:
        raise ValueError("scalar values required")
    mean = f.grid()
    var = np.zeros_like(mean)
    worst = 0.0
    for _ in range(f.depth):
        mb = _split_blocks(mean)
        vb = _split_blocks(var)
        axes = _block_axes(mean.ndim)
        parent = mb.mean(axis=axes)
        pm = parent.reshape(sum(((s, 1) for s in parent.shape), ()))
        var = vb.mean(axis=axes) + ((mb - pm) ** 2).mean(axis=axes)
        mean = parent
        worst = max(worst, float(var.max()))
    return math.sqrt(worst)


def _log_mean_pyramid(logv: np.ndarray, depth: int, ndim: int):
    """Yield log of cube means of exp(logv), level by level, leaves first."""
    cur = logv
    yield cur
    for _ in range(depth):
        blocks = _split_blocks(cur)
        for ax in sorted(_block_axes(cur.ndim), reverse=True):
            blocks = np.logaddexp.reduce(blocks, axis=ax)
        cur = blocks - ndim * math.log(2.0)
        yield cur


def ap_characteristic_dyadic(f: DyadicStepFunction, p: ApParams) -> float:
    """Largest <f^p1>^(1/p1) * <f^p2>^(-1/p2) over all dyadic subcubes.

    Accumulates in the log domain so extreme exponents cannot overflow.
    """
    if not f.is_scalar:
        raise ValueError("scalar values required")
    if np.any(f.values <= 0):
        raise ValueError("positive values required")
    logv = np.log(f.grid())
    worst = -np.inf
    pyr1 = _log_mean_pyramid(p.p1 * logv, f.depth, f.n)
    pyr2 = _log_mean_pyramid(p.p2 * logv, f.depth, f.n)
    for lm1, lm2 in zip(pyr1, pyr2):
        level = lm1 / p.p1 - lm2 / p.p2
        worst = max(worst, float(level.max()))
    return math.exp(worst)


def coarsen(f: DyadicStepFunction, depth: int) -> DyadicStepFunction:
    """Cell means of f on the coarser depth-`depth` grid (exact dyadic means)."""
    if not 0 <= depth <= f.depth:
        raise ValueError("coarsen target must satisfy 0 <= depth <= f.depth")
    if depth == f.depth:
        return f
    side, sub = 1 << depth, 1 << (f.depth - depth)
    comps = [None] if f.is_scalar else [0, 1]
    outs = []
    for c in comps:
        g = f.grid(c).reshape(sum(((side, sub) for _ in range(f.n)), ()))
        g = g.mean(axis=_block_axes(f.n))
        outs.append(g.reshape(-1, order="F"))
    vals = outs[0] if f.is_scalar else np.column_stack(outs)
    return DyadicStepFunction(f.n, depth, vals)


# ---------------------------------------------------------------------------
# Rearrangement
# ---------------------------------------------------------------------------


def monotone_rearrangement(f: DyadicStepFunction, increasing: bool = False) -> StepFunction1D:
    """Monotone (default non-increasing) equidistributed function on [0, 1].

    The multiset {(value, total measure)} is preserved exactly; equal values
    are merged into one piece.
    """
    if not f.is_scalar:
        raise ValueError("scalar values required; use lens_rearrangement for plane values")
    vals, counts = np.unique(f.values, return_counts=True)
    if not increasing:
        vals, counts = vals[::-1], counts[::-1]
    edges = np.concatenate([[0.0], np.cumsum(counts) * f.cell_measure])
    edges[-1] = 1.0
    return StepFunction1D(edges, vals)


def lens_rearrangement(f: DyadicStepFunction, lens: Lens, tol: float = BOUNDARY_RTOL) -> StepFunction1D:
    """Rearrange a fixed-boundary-valued function by its first coordinate.

    The built-in lens families project injectively onto the abscissa axis,
    so monotonicity along that axis is the monotonicity of the composition
    with the projection.  Values must sit on the fixed boundary.
    """
    if f.is_scalar:
        raise ValueError("plane values required")
    for row in np.unique(f.values, axis=0):
        if not lens.on_fixed(tuple(row), tol):
            raise ValueError(f"value {tuple(row)} is off the fixed boundary")
    order = np.lexsort((f.values[:, 1], -f.values[:, 0]))
    sv = f.values[order]
    keep = np.ones(sv.shape[0], dtype=bool)
    keep[1:] = np.any(sv[1:] != sv[:-1], axis=1)
    starts = np.nonzero(keep)[0]
    counts = np.diff(np.append(starts, sv.shape[0]))
    edges = np.concatenate([[0.0], np.cumsum(counts) * f.cell_measure])
    edges[-1] = 1.0
    return StepFunction1D(edges, sv[starts])


def step_to_dyadic(g: StepFunction1D, depth: int) -> DyadicStepFunction:
    """Lift a 1D step function with dyadic breakpoints to a depth-k grid."""
    if not g.is_scalar:
        raise ValueError("scalar values required")
    cells = 1 << depth
    idx = g.breakpoints * cells
    if np.any(np.abs(idx - np.round(idx)) > 0):
        raise ValueError(f"breakpoints are not multiples of 2^-{depth}")
    idx = np.round(idx).astype(int)
    out = np.empty(cells)
    for i, v in enumerate(g.values):
        out[idx[i] : idx[i + 1]] = v
    return DyadicStepFunction(1, depth, out)


# ---------------------------------------------------------------------------
# Lens embeddings
# ---------------------------------------------------------------------------


def embed_bmo(f: DyadicStepFunction) -> DyadicStepFunction:
    """Pointwise v -> (v, v^2); lands on the fixed boundary of parabolic lenses."""
    if not f.is_scalar:
        raise ValueError("scalar values required")
    return DyadicStepFunction(f.n, f.depth, np.column_stack([f.values, f.values**2]))


def ap_lens_params(p: ApParams) -> tuple[float, float]:
    """Power-lens (C, q) carrying the class with constant p.Q."""
    q = p.p2 / p.p1
    C = p.Q**p.p2 if p.p2 > 0 else p.Q ** (-p.p2)
    return C, q


def class_constant_from_lens(c_ext: float, p: ApParams) -> float:
    """Class constant matching an extension constant of the embedding lens."""
    return c_ext ** (1.0 / p.p2) if p.p2 > 0 else c_ext ** (-1.0 / p.p2)


def embed_ap(f: DyadicStepFunction, p: ApParams) -> tuple[DyadicStepFunction, PowerLens]:
    """Pointwise power embedding of a positive function plus its target lens.

    For p2 > 0 the embedding is v -> ((v/Q)^p1, v^p2) into the lens with
    C = Q^p2, q = p2/p1; for p2 < 0 it is v -> (v^p1, v^p2) with C = Q^-p2.
    """
    if not f.is_scalar:
        raise ValueError("scalar values required")
    if np.any(f.values <= 0):
        raise ValueError("positive values required")
    C, q = ap_lens_params(p)
    if p.p2 > 0:
        pts = np.column_stack([(f.values / p.Q) ** p.p1, f.values**p.p2])
    else:
        pts = np.column_stack([f.values**p.p1, f.values**p.p2])
    return DyadicStepFunction(f.n, f.depth, pts), PowerLens(C, q)


# ---------------------------------------------------------------------------
# Interval supremum engine
# ---------------------------------------------------------------------------


class _PlainMeans:
    """Segment channel means from prefix integrals (plain float domain)."""

    def __init__(self, breakpoints: np.ndarray, channels: np.ndarray):
        self.b = breakpoints
        self.v = channels  # (pieces, k)
        lengths = np.diff(breakpoints)
        self.cum = np.vstack([np.zeros(channels.shape[1]), np.cumsum(channels * lengths[:, None], axis=0)])

    def aligned(self, i_idx: np.ndarray, j_idx: np.ndarray) -> np.ndarray:
        L = self.b[j_idx] - self.b[i_idx]
        return (self.cum[j_idx] - self.cum[i_idx]) / L[:, None]

    def _int_to(self, s: np.ndarray, piece: np.ndarray) -> np.ndarray:
        return self.cum[piece + 1] - (self.b[piece + 1] - s)[:, None] * self.v[piece]

    def cell(self, i: np.ndarray, j: np.ndarray, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        L = np.maximum(t - s, 1e-300)
        return (self._int_to(t, j) - self._int_to(s, i)) / L[:, None]


def _logsub(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """log(exp(x) - exp(y)) for x >= y, tolerating y = -inf and y = x."""
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.minimum(y - x, 0.0)
        out = x + np.log1p(-np.exp(d))
    return np.where(np.isneginf(y), x, out)


class _LogMeans:
    """Segment channel means of exp(log channels), kept in the log domain."""

    def __init__(self, breakpoints: np.ndarray, log_channels: np.ndarray):
        self.b = breakpoints
        self.w = log_channels
        with np.errstate(divide="ignore"):
            terms = log_channels + np.log(np.diff(breakpoints))[:, None]
        self.cum = np.vstack([np.full(log_channels.shape[1], -np.inf), np.logaddexp.accumulate(terms, axis=0)])

    def aligned(self, i_idx: np.ndarray, j_idx: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            logL = np.log(self.b[j_idx] - self.b[i_idx])
        return _logsub(self.cum[j_idx], self.cum[i_idx]) - logL[:, None]

    def _int_to(self, s: np.ndarray, piece: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            tail = np.log(np.maximum(self.b[piece + 1] - s, 0.0))[:, None] + self.w[piece]
        return _logsub(self.cum[piece + 1], tail)

    def cell(self, i: np.ndarray, j: np.ndarray, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            logL = np.log(np.maximum(t - s, 1e-300))
        return _logsub(self._int_to(t, j), self._int_to(s, i)) - logL[:, None]


def _interval_supremum(means, objective, npieces: int):
    """Two-phase supremum of objective(segment channel means) over intervals.

    Phase one evaluates every breakpoint-aligned interval exactly; phase two
    runs lockstep coordinate-wise golden-section inside every ordered pair of
    pieces.  Returns (value, s, t).
    """
    b = means.b
    # phase one: aligned intervals
    ii, jj = np.triu_indices(npieces + 1, k=1)
    vals = objective(means.aligned(ii, jj))
    k = int(np.argmax(vals))
    best = (float(vals[k]), float(b[ii[k]]), float(b[jj[k]]))

    # phase two: interior refinement per piece pair
    pi, pj = np.triu_indices(npieces, k=1)
    if pi.size:
        s = 0.5 * (b[pi] + b[pi + 1])
        t = 0.5 * (b[pj] + b[pj + 1])

        def fs(sv):
            return objective(means.cell(pi, pj, sv, t))

        def ft(tv):
            return objective(means.cell(pi, pj, s, tv))

        for _ in range(_SWEEPS):
            s, _ = _golden_coord(fs, b[pi], b[pi + 1])
            t, _ = _golden_coord(ft, b[pj], b[pj + 1])
        vals = objective(means.cell(pi, pj, s, t))
        k = int(np.argmax(vals))
        if vals[k] > best[0]:
            best = (float(vals[k]), float(s[k]), float(t[k]))
    return best


def _golden_coord(f, lo, hi, iters: int = _GOLDEN_ITERS):
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(iters):
        h = hi - lo
        c = hi - _INV_PHI * h
        d = lo + _INV_PHI * h
        go_left = f(c) >= f(d)
        hi = np.where(go_left, d, hi)
        lo = np.where(go_left, lo, c)
    x = 0.5 * (lo + hi)
    return x, f(x)


# ---------------------------------------------------------------------------
# Continuous characteristics
# ---------------------------------------------------------------------------


def _bmo_supremum(g: StepFunction1D):
    ch = np.column_stack([g.values, g.values**2])
    means = _PlainMeans(g.breakpoints, ch)

    def variance(m):
        return m[:, 1] - m[:, 0] ** 2

    return _interval_supremum(means, variance, g.values.shape[0])


def continuous_bmo_seminorm_1d(g: StepFunction1D) -> float:
    """Square root of the supremal variance over all subintervals of [0, 1]."""
    return continuous_bmo_seminorm_detail(g)[0]


def continuous_bmo_seminorm_detail(g: StepFunction1D) -> tuple[float, tuple[float, float]]:
    """Continuous seminorm together with the attaining interval."""
    if not g.is_scalar:
        raise ValueError("scalar values required")
    val, s, t = _bmo_supremum(g)
    return math.sqrt(max(val, 0.0)), (s, t)


def ap_characteristic_continuous_1d(g: StepFunction1D, p: ApParams) -> float:
    """Supremal A_{p1,p2} functional over all subintervals of [0, 1]."""
    return ap_characteristic_continuous_detail(g, p)[0]


def ap_characteristic_continuous_detail(g: StepFunction1D, p: ApParams) -> tuple[float, tuple[float, float]]:
    if not g.is_scalar:
        raise ValueError("scalar values required")
    if np.any(g.values <= 0):
        raise ValueError("positive values required")
    logv = np.log(g.values)
    means = _LogMeans(g.breakpoints, np.column_stack([p.p1 * logv, p.p2 * logv]))

    def functional(lm):
        return lm[:, 0] / p.p1 - lm[:, 1] / p.p2

    val, s, t = _interval_supremum(means, functional, g.values.shape[0])
    return math.exp(val), (s, t)


@dataclass(frozen=True)
class MembershipResult:
    inside: bool
    violation: float
    worst_interval: tuple[float, float]

    def __bool__(self) -> bool:
        return self.inside


def class_membership_1d(g: StepFunction1D, lens: Lens, tol: float = BOUNDARY_RTOL) -> MembershipResult:
    """Do all subinterval averages of a plane-valued function stay in the lens?

    Maximizes the normalized lens violation of <g> over intervals with the
    same two-phase search as the seminorms and reports the worst interval.
    """
    if g.is_scalar:
        raise ValueError("plane values required")
    means = _PlainMeans(g.breakpoints, g.values)

    def excess(m):
        return lens.violation_arrays(m[:, 0], m[:, 1])

    val, s, t = _interval_supremum(means, excess, g.values.shape[0])
    worst_value = float(np.max(lens.violation_arrays(g.values[:, 0], g.values[:, 1])))
    if worst_value > val:
        k = int(np.argmax(lens.violation_arrays(g.values[:, 0], g.values[:, 1])))
        val = worst_value
        s, t = float(g.breakpoints[k]), float(g.breakpoints[k + 1])
    return MembershipResult(val <= tol, val, (s, t))


# ---------------------------------------------------------------------------
# JSON interchange (numbers carry 17 significant digits)
# ---------------------------------------------------------------------------


def _render(obj) -> str:
    if isinstance(obj, float):
        return format(obj, ".17g")
    if isinstance(obj, (np.floating,)):
        return format(float(obj), ".17g")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render(x) for x in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_render(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj) -> str:
    """Serialize to JSON with floats at 17 significant digits (round-trip safe)."""
    return _render(obj)


def dyadic_to_json(f: DyadicStepFunction) -> str:
    return dump_json({"n": f.n, "depth": f.depth, "values": f.values})


def dyadic_from_json(text: str | dict) -> DyadicStepFunction:
    doc = json.loads(text) if isinstance(text, str) else text
    try:
        return DyadicStepFunction(int(doc["n"]), int(doc["depth"]), np.asarray(doc["values"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed dyadic step function: {exc}") from exc


def step1d_to_json(g: StepFunction1D) -> str:
    return dump_json({"breakpoints": g.breakpoints, "values": g.values})


def step1d_from_json(text: str | dict) -> StepFunction1D:
    doc = json.loads(text) if isinstance(text, str) else text
    try:
        return StepFunction1D(np.asarray(doc["breakpoints"], dtype=float), np.asarray(doc["values"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed step function: {exc}") from exc
