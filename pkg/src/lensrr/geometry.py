"""Planar lens domains and their minimal alpha-extensions.

A lens is the closed band between two nested unbounded convex curves: the
fixed boundary (shared by every extension) and the free boundary.  Two
families are built in:

* the parabolic band ``{x1^2 <= x2 <= x1^2 + eps^2}``, which encodes
  quadratic mean-oscillation constraints through ``v -> (v, v^2)``;
* the power band ``{x1 > 0, x1^q <= x2 <= C * x1^q}``, which encodes
  Muckenhoupt-type constraints through power embeddings.

For ``alpha`` in (0, 1), an alpha-extension of a lens is a larger lens with
the same fixed boundary that contains every segment ``[x, y]`` whose
alpha-section point ``z = alpha*x + (1-alpha)*y`` joins ``y`` inside the
lens.  The minimal alpha-extension is determined by the "higher" segments:
``y`` on the fixed boundary, ``x`` and ``z`` on the free boundary.  This
module provides closed forms for both families plus a numeric envelope
oracle that rebuilds the extension boundary directly from higher segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Point = tuple[float, float]
SegmentPair = tuple[Point, Point]

# Boundary membership is tested inside a relative band: exact points picked up
# by floating-point constructions must not be rejected for roundoff.
BOUNDARY_RTOL = 1e-9
# Residual bound for roots of the free-boundary ratio equation.
ROOT_RESIDUAL_RTOL = 1e-12
# Bisection is run to this relative bracket width.
BISECT_RTOL = 1e-14

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_ITERS = 52  # 0.618^52 ~ 6e-12 relative bracket width


class EnvelopeError(RuntimeError):
    """Raised when the envelope oracle cannot bracket higher segments."""


class RootBracketingError(RuntimeError):
    """Raised when the ratio-equation scan fails to bracket a required root."""


def _pt(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape != (2,) or not np.all(np.isfinite(a)):
        raise ValueError(f"expected a finite plane point, got {p!r}")
    return a


# ---------------------------------------------------------------------------
# Lens families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParabolicLens:
    """Band of width eps^2 above the parabola x2 = x1^2."""

    eps: float

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError("eps must be a positive finite number")

    def fixed_ordinate(self, u):
        return np.asarray(u, dtype=float) ** 2

    def free_ordinate(self, u):
        return np.asarray(u, dtype=float) ** 2 + self.eps**2

    def defect(self, x1, x2):
        """Height above the fixed boundary; in [0, eps^2] inside the lens."""
        return np.asarray(x2, dtype=float) - np.asarray(x1, dtype=float) ** 2

    def violation_arrays(self, x1, x2):
        d = self.defect(x1, x2)
        scale = np.maximum(1.0, np.maximum(np.abs(x2), np.asarray(x1) ** 2))
        return np.maximum(-d, d - self.eps**2) / scale

    def contains_arrays(self, x1, x2):
        d = self.defect(x1, x2)
        return (d >= 0.0) & (d <= self.eps**2)

    def contains(self, p) -> bool:
        x1, x2 = _pt(p)
        return bool(self.contains_arrays(x1, x2))

    def violation(self, p) -> float:
        """Normalized boundary excess; <= 0 iff the point is inside."""
        x1, x2 = _pt(p)
        return float(self.violation_arrays(x1, x2))

    def on_fixed(self, p, tol: float = BOUNDARY_RTOL) -> bool:
        x1, x2 = _pt(p)
        scale = max(1.0, abs(x2), x1 * x1)
        return abs(x2 - x1 * x1) <= tol * scale

    def on_free(self, p, tol: float = BOUNDARY_RTOL) -> bool:
        x1, x2 = _pt(p)
        scale = max(1.0, abs(x2), x1 * x1 + self.eps**2)
        return abs(x2 - x1 * x1 - self.eps**2) <= tol * scale


@dataclass(frozen=True)
class PowerLens:
    """Band {x1 > 0, x1^q <= x2 <= C * x1^q} in the open quadrant.

    For q > 1 and q < 0 the lower curve x1^q is convex and is the fixed
    boundary.  For 0 < q < 1 the lower curve is concave; there the roles
    swap and the fixed boundary is the upper curve C * x1^q (consistent
    with the conjugation (u, v) -> (v/C, u) onto the exponent 1/q > 1).
    """

    C: float
    q: float

    def __post_init__(self):
        if not (self.C > 1 and math.isfinite(self.C)):
            raise ValueError("C must be > 1 for a nondegenerate power lens")
        if self.q == 0 or not math.isfinite(self.q):
            raise ValueError("q must be nonzero and finite")

    @property
    def fixed_is_upper(self) -> bool:
        return 0.0 < self.q < 1.0

    def _log_band(self, x1, x2):
        """log(x2) - q*log(x1), in [0, log C] inside the lens."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.log(x2) - self.q * np.log(x1)
        return np.where((x1 > 0) & (x2 > 0), w, np.nan)

    def fixed_ordinate(self, u):
        u = np.asarray(u, dtype=float)
        return (self.C if self.fixed_is_upper else 1.0) * u**self.q

    def free_ordinate(self, u):
        u = np.asarray(u, dtype=float)
        return (1.0 if self.fixed_is_upper else self.C) * u**self.q

    def contains_arrays(self, x1, x2):
        w = self._log_band(x1, x2)
        return np.where(np.isnan(w), False, (w >= 0.0) & (w <= math.log(self.C)))

    def contains(self, p) -> bool:
        x1, x2 = _pt(p)
        return bool(self.contains_arrays(x1, x2))

    def violation_arrays(self, x1, x2):
        w = self._log_band(x1, x2)
        v = np.maximum(-w, w - math.log(self.C))
        return np.where(np.isnan(w), np.inf, v)

    def violation(self, p) -> float:
        """Excess in log units; <= 0 iff the point is inside."""
        x1, x2 = _pt(p)
        return float(self.violation_arrays(x1, x2))

    def _on_curve(self, p, level: float, tol: float) -> bool:
        x1, x2 = _pt(p)
        if x1 <= 0 or x2 <= 0:
            return False
        return abs(math.log(x2) - self.q * math.log(x1) - level) <= tol * max(1.0, abs(level))

    def on_fixed(self, p, tol: float = BOUNDARY_RTOL) -> bool:
        return self._on_curve(p, math.log(self.C) if self.fixed_is_upper else 0.0, tol)

    def on_free(self, p, tol: float = BOUNDARY_RTOL) -> bool:
        return self._on_curve(p, 0.0 if self.fixed_is_upper else math.log(self.C), tol)


@dataclass(frozen=True)
class PowerEpigraph:
    """Degenerate extension {x1 > 0, x2 >= x1^q}: the free boundary is gone."""

    q: float

    def __post_init__(self):
        if self.q == 0 or not math.isfinite(self.q):
            raise ValueError("q must be nonzero and finite")

    def fixed_ordinate(self, u):
        return np.asarray(u, dtype=float) ** self.q

    def contains_arrays(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.log(x2) - self.q * np.log(x1)
        return np.where((x1 > 0) & (x2 > 0), w >= 0.0, False)

    def contains(self, p) -> bool:
        x1, x2 = _pt(p)
        return bool(self.contains_arrays(x1, x2))

    def violation_arrays(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.log(x2) - self.q * np.log(x1)
        return np.where((x1 > 0) & (x2 > 0), -w, np.inf)

    def violation(self, p) -> float:
        x1, x2 = _pt(p)
        return float(self.violation_arrays(x1, x2))

    def on_fixed(self, p, tol: float = BOUNDARY_RTOL) -> bool:
        x1, x2 = _pt(p)
        if x1 <= 0 or x2 <= 0:
            return False
        return abs(math.log(x2) - self.q * math.log(x1)) <= tol


Lens = ParabolicLens | PowerLens | PowerEpigraph


# ---------------------------------------------------------------------------
# Segments
# ---------------------------------------------------------------------------


def _segment(seg: SegmentPair) -> tuple[np.ndarray, np.ndarray]:
    p, r = seg
    p, r = _pt(p), _pt(r)
    if np.all(p == r):
        raise ValueError("degenerate segment: endpoints coincide")
    return p, r


def segment_in_lens(lens: Lens, seg: SegmentPair, samples: int = 1024) -> bool:
    """Sampled containment test on a uniform parameter grid.

    This is an approximation (a thin excursion can slip between samples);
    ``segment_in_lens_exact`` decides the built-in families exactly.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    p, r = _segment(seg)
    t = np.linspace(0.0, 1.0, samples)
    x1 = (1.0 - t) * p[0] + t * r[0]
    x2 = (1.0 - t) * p[1] + t * r[1]
    return bool(np.all(lens.contains_arrays(x1, x2)))


def segment_in_lens_exact(lens: Lens, seg: SegmentPair, tol: float = 0.0) -> bool:
    """Exact containment for the built-in families.

    Parabolic: the defect along a segment is a concave quadratic, so its
    range is fixed by the endpoint defects and the single vertex.  Power:
    x2/x1^q has at most one interior critical point along a segment.
    ``tol`` widens the band relative to the lens scale (0 = strict).
    """
    p, r = _segment(seg)
    if isinstance(lens, ParabolicLens):
        d0 = float(lens.defect(p[0], p[1]))
        d1 = float(lens.defect(r[0], r[1]))
        band = lens.eps**2
        slack = tol * max(1.0, band, abs(p[1]), abs(r[1]))
        if min(d0, d1) < -slack:
            return False
        spread = (r[0] - p[0]) ** 2
        dmax = max(d0, d1)
        if spread > 0.0:
            tv = (d1 - d0 + spread) / (2.0 * spread)
            if 0.0 < tv < 1.0:
                dmax = d0 + (d1 - d0) * tv + spread * tv * (1.0 - tv)
        return dmax <= band + slack
    if isinstance(lens, (PowerLens, PowerEpigraph)):
        if min(p[0], r[0]) <= 0.0 or min(p[1], r[1]) <= 0.0:
            return False
        q = lens.q
        ts = [0.0, 1.0]
        d1, d2 = r[0] - p[0], r[1] - p[1]
        denom = d1 * d2 * (1.0 - q)
        if denom != 0.0:
            tc = (q * d1 * p[1] - d2 * p[0]) / denom
            if 0.0 < tc < 1.0:
                ts.append(tc)
        ts = np.array(ts)
        x1 = (1.0 - ts) * p[0] + ts * r[0]
        x2 = (1.0 - ts) * p[1] + ts * r[1]
        w = np.log(x2) - q * np.log(x1)
        if isinstance(lens, PowerEpigraph):
            return bool(np.min(w) >= -tol)
        return bool(np.min(w) >= -tol and np.max(w) <= math.log(lens.C) + tol)
    raise TypeError(f"unsupported lens type {type(lens).__name__}")


def is_higher_segment(lens: Lens, alpha: float, x, y, tol: float = BOUNDARY_RTOL) -> bool:
    """True iff [x, y] is a higher segment of (lens, alpha).

    Requires y on the fixed boundary, x and the alpha-section point
    z = alpha*x + (1-alpha)*y on the free boundary, and [z, y] inside the
    lens.  Boundary membership uses a relative tolerance band.
    """
    _check_alpha(alpha)
    if isinstance(lens, PowerEpigraph):
        return False
    x, y = _pt(x), _pt(y)
    if not lens.on_fixed(y, tol) or not lens.on_free(x, tol):
        return False
    z = alpha * x + (1.0 - alpha) * y
    if not lens.on_free(z, tol):
        return False
    if np.all(z == y):
        return True
    return segment_in_lens_exact(lens, (tuple(z), tuple(y)), tol)


# ---------------------------------------------------------------------------
# Closed-form minimal extensions
# ---------------------------------------------------------------------------


def _check_alpha(alpha: float):
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def min_extension_parabolic(eps: float, alpha: float) -> float:
    """Width parameter of the minimal alpha-extension of a parabolic lens."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    _check_alpha(alpha)
    return (1.0 + alpha) * eps / (2.0 * math.sqrt(alpha))


def min_extension_a2(C: float, alpha: float) -> float:
    """Constant of the minimal alpha-extension of the hyperbolic (q = -1) lens."""
    if not C >= 1:
        raise ValueError("C must be >= 1")
    _check_alpha(alpha)
    return (C * (alpha + 1.0) ** 2 - (alpha - 1.0) ** 2) / (4.0 * alpha)


def epigraph_threshold(C: float, q: float) -> float:
    """Critical alpha below which the q > 1 power lens has an unbounded
    minimal extension (and at which the inward ratio root disappears)."""
    if not (q > 1 and C > 1):
        raise ValueError("threshold is defined for q > 1, C > 1")
    return 1.0 - C ** (-1.0 / (q - 1.0))


def _ratio_residual(C: float, q: float, alpha: float, a):
    """C*(alpha*a + 1-alpha)^q - alpha*C*a^q - (1-alpha); positive at a=1."""
    a = np.asarray(a, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        return C * (alpha * a + (1.0 - alpha)) ** q - alpha * C * a**q - (1.0 - alpha)


def free_boundary_ratio_roots(C: float, q: float, alpha: float) -> list[float]:
    """Positive roots a = x1/y1 of the higher-segment crossing condition.

    A higher segment of the power lens anchored at (y1, y1^q) reaches
    (a*y1, C*(a*y1)^q) exactly when C*(alpha*a + 1-alpha)^q equals
    alpha*C*a^q + (1-alpha).  For q > 1 there are two roots (one on each
    side of 1) above the epigraph threshold and a single root > 1 at or
    below it; for q <= -1 there are always two.
    """
    if not C > 1:
        raise ValueError("C must be > 1")
    if not (q > 1 or q <= -1):
        raise ValueError("roots are solved for q > 1 or q <= -1; conjugate other exponents")
    _check_alpha(alpha)

    # Log-spaced scan over [1e-8, 1e8], denser near a = 1 where the roots
    # of interest cluster; g(1) = (C-1)(1-alpha) > 0 anchors the brackets.
    exps = np.concatenate(
        [
            np.arange(-8 * 16, -1 * 16) / 16.0,
            np.arange(-1 * 256, 1 * 256 + 1) / 256.0,
            np.arange(1 * 16 + 1, 8 * 16 + 1) / 16.0,
        ]
    )
    grid = 10.0**exps
    vals = _ratio_residual(C, q, alpha, grid)
    ok = np.isfinite(vals)
    grid, vals = grid[ok], vals[ok]

    roots: list[float] = []
    exact = grid[vals == 0.0]
    roots.extend(float(a) for a in exact)
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    for i in flips:
        lo, hi = grid[i], grid[i + 1]
        flo = vals[i]
        while hi - lo > BISECT_RTOL * hi:
            mid = 0.5 * (lo + hi)
            fm = float(_ratio_residual(C, q, alpha, mid))
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    roots = sorted(roots)

    expected = 2
    if q > 1 and alpha <= epigraph_threshold(C, q):
        expected = 1
    if len(roots) != expected:
        raise RootBracketingError(
            f"root bracketing failed: found {len(roots)} roots, expected {expected} "
            f"for C={C}, q={q}, alpha={alpha}"
        )
    for a in roots:
        lhs = C * (alpha * a + (1.0 - alpha)) ** q
        rhs = alpha * C * a**q + (1.0 - alpha)
        if abs(lhs - rhs) >= ROOT_RESIDUAL_RTOL * (1.0 + abs(rhs)):
            raise RootBracketingError(f"residual too large at root a={a}")
    return roots


@dataclass(frozen=True)
class ExtensionResult:
    """Minimal power-lens extension: a bounded constant or the epigraph."""

    epigraph: bool
    _constant: float | None = None

    @property
    def constant(self) -> float:
        if self.epigraph or self._constant is None:
            raise ValueError("epigraph extension carries no constant")
        return self._constant

    @staticmethod
    def bounded(c: float) -> "ExtensionResult":
        return ExtensionResult(False, float(c))

    @staticmethod
    def unbounded() -> "ExtensionResult":
        return ExtensionResult(True, None)


def _ext_constant_q_gt1(C: float, q: float, a: float) -> float:
    num = (1.0 - C * a**q) ** q * (q - 1.0) ** (q - 1.0)
    den = (1.0 - a) * (a - C * a**q) ** (q - 1.0) * q**q
    return num / den


def _ext_constant_q_le_neg1(C: float, q: float, a: float) -> float:
    num = (a - C * a**q) ** (1.0 - q) * (-q) ** (-q)
    den = (a - 1.0) * (1.0 - C * a**q) ** (-q) * (1.0 - q) ** (1.0 - q)
    return num / den


def min_extension_power(C: float, q: float, alpha: float) -> ExtensionResult:
    """Minimal alpha-extension constant of the power lens with exponent q.

    q > 1 uses the inward ratio root when alpha is above the epigraph
    threshold and degenerates to the full epigraph otherwise; q <= -1 uses
    the outward root.  Exponents in (0, 1) and (-1, 0) are conjugated onto
    1/q via (u, v) -> (v/C, u) and (u, v) -> (v, u) respectively, solved
    there, and mapped back.  C = 1 degenerates to the fixed curve itself.
    """
    if q == 0:
        raise ValueError("q must be nonzero")
    if not C >= 1:
        raise ValueError("C must be >= 1")
    _check_alpha(alpha)
    if C == 1.0:
        return ExtensionResult.bounded(1.0)
    if q > 1:
        if alpha <= epigraph_threshold(C, q):
            return ExtensionResult.unbounded()
        a = free_boundary_ratio_roots(C, q, alpha)[0]
        return ExtensionResult.bounded(_ext_constant_q_gt1(C, q, a))
    if q <= -1:
        a = free_boundary_ratio_roots(C, q, alpha)[-1]
        return ExtensionResult.bounded(_ext_constant_q_le_neg1(C, q, a))
    if 0 < q < 1:
        inner = min_extension_power(C ** (1.0 / q), 1.0 / q, alpha)
        if inner.epigraph:
            return ExtensionResult.unbounded()
        return ExtensionResult.bounded(inner.constant**q)
    # -1 < q < 0
    inner = min_extension_power(C ** (-1.0 / q), 1.0 / q, alpha)
    return ExtensionResult.bounded(inner.constant ** (-q))


# ---------------------------------------------------------------------------
# Affine orbits
# ---------------------------------------------------------------------------


def affine_orbit_parabolic(p, t: float) -> Point:
    """Shear (u1, u2) -> (u1 + t, u2 + 2*u1*t + t^2); preserves the defect."""
    x1, x2 = _pt(p)
    return (x1 + t, x2 + 2.0 * x1 * t + t * t)


def affine_orbit_power(p, t: float, q: float) -> Point:
    """Scaling (u1, u2) -> (t*u1, t^q*u2), t > 0; preserves x2/x1^q."""
    if not t > 0:
        raise ValueError("t must be positive for the power orbit")
    x1, x2 = _pt(p)
    return (t * x1, t**q * x2)


# ---------------------------------------------------------------------------
# Numeric higher segments and the envelope oracle
# ---------------------------------------------------------------------------


def _golden_max_vec(f, lo, hi, iters: int = _GOLDEN_ITERS):
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    best_x = 0.5 * (lo + hi)
    best_f = f(best_x)
    for _ in range(iters):
        h = hi - lo
        c = hi - _INV_PHI * h
        d = lo + _INV_PHI * h
        fc, fd = f(c), f(d)
        left = fc >= fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        take_c = fc > best_f
        best_x = np.where(take_c, c, best_x)
        best_f = np.where(take_c, fc, best_f)
        take_d = fd > best_f
        best_x = np.where(take_d, d, best_x)
        best_f = np.where(take_d, fd, best_f)
    return best_x, best_f


def _bisect_vec(f, lo, hi, iters: int = 80):
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        go_right = (fm > 0) == (flo > 0)
        lo = np.where(go_right, mid, lo)
        flo = np.where(go_right, fm, flo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)


def _z_free_residual(lens, alpha, y1, x1):
    """Signed residual of 'z lies on the free boundary' for anchors y1."""
    if isinstance(lens, ParabolicLens):
        y2 = y1 * y1
        x2 = x1 * x1 + lens.eps**2
        z1 = alpha * x1 + (1.0 - alpha) * y1
        z2 = alpha * x2 + (1.0 - alpha) * y2
        return z2 - z1 * z1 - lens.eps**2
    # power lens, fixed boundary below
    y2 = y1**lens.q
    x2 = lens.C * x1**lens.q
    z1 = alpha * x1 + (1.0 - alpha) * y1
    z2 = alpha * x2 + (1.0 - alpha) * y2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(z2) - math.log(lens.C) - lens.q * np.log(z1)


def _envelope_supported(lens):
    if isinstance(lens, ParabolicLens):
        return
    if isinstance(lens, PowerLens) and not lens.fixed_is_upper:
        return
    raise ValueError(
        "higher-segment envelopes are computed for parabolic lenses and power "
        "lenses with q > 1 or q < 0; conjugate exponents in (0, 1) first"
    )


def _solve_branch(lens, alpha: float, y1: np.ndarray, outward: bool) -> np.ndarray:
    """Free-boundary abscissas x1 of higher segments anchored at y1.

    Solves the raw geometric constraint (the alpha-section point lies on the
    free boundary) by expanding a bracket away from x1 = y1 and bisecting.
    """
    if isinstance(lens, ParabolicLens):
        sign = 1.0 if outward else -1.0

        def res_w(w):
            return _z_free_residual(lens, alpha, y1, y1 + sign * w)

        w0 = np.full_like(y1, lens.eps)
        f0 = res_w(w0)
        hi = w0.copy()
        for _ in range(80):
            todo = f0 <= 0
            if not np.any(todo):
                break
            hi = np.where(todo, hi * 2.0, hi)
            f0 = np.where(todo, res_w(hi), f0)
        if np.any(f0 <= 0):
            raise EnvelopeError("could not bracket higher segments; anchors too coarse?")
        w = _bisect_vec(res_w, np.zeros_like(y1), hi)
        return y1 + sign * w

    # power lens: work in s = log(x1/y1)
    sign = 1.0 if outward else -1.0

    def res_s(s):
        return _z_free_residual(lens, alpha, y1, y1 * np.exp(sign * np.abs(s)))

    s0 = np.full_like(y1, 0.25)
    f0 = res_s(s0)
    hi = s0.copy()
    for _ in range(60):
        todo = ~(f0 > 0)
        if not np.any(todo):
            break
        hi = np.where(todo, hi * 2.0, hi)
        f0 = np.where(todo, res_s(hi), f0)
        if np.any(hi > 700):
            break
    if np.any(~(f0 > 0)):
        if lens.q > 1 and not outward:
            thr = epigraph_threshold(lens.C, lens.q)
            raise EnvelopeError(
                "no inward higher segments bracket: minimal extension is the "
                f"epigraph for alpha <= {thr!r} (got alpha={alpha!r})"
            )
        raise EnvelopeError("could not bracket higher segments; anchors too coarse?")
    s = _bisect_vec(res_s, np.zeros_like(y1), hi)
    return y1 * np.exp(sign * s)


def higher_segments(lens: Lens, alpha: float, anchors) -> list[tuple[Point, Point, Point]]:
    """Higher segments (x, y, z) anchored at the given fixed-boundary abscissas.

    Both orientations (x on either side of y) are searched; segments whose
    [z, y] part leaves the lens are dropped.
    """
    _check_alpha(alpha)
    _envelope_supported(lens)
    y1 = np.asarray(anchors, dtype=float)
    out: list[tuple[Point, Point, Point]] = []
    for outward in (True, False):
        x1 = _solve_branch(lens, alpha, y1, outward)
        y2 = np.asarray(lens.fixed_ordinate(y1))
        x2 = np.asarray(lens.free_ordinate(x1))
        z1 = alpha * x1 + (1.0 - alpha) * y1
        z2 = alpha * x2 + (1.0 - alpha) * y2
        for k in range(y1.size):
            x = (float(x1[k]), float(x2[k]))
            y = (float(y1[k]), float(y2[k]))
            z = (float(z1[k]), float(z2[k]))
            if segment_in_lens_exact(lens, (z, y), BOUNDARY_RTOL):
                out.append((x, y, z))
    return out


@dataclass(frozen=True)
class EnvelopeGrid:
    """Sampling resolution for the envelope oracle.

    ``span`` is the half-width of the output window in units of the
    canonical segment reach (parabolic: abscissa units; power: log units).
    """

    anchors: int = 8001
    outputs: int = 4001
    span: float = 2.0

    def __post_init__(self):
        if self.anchors < 16 or self.outputs < 16:
            raise ValueError("grid too coarse to bracket higher-segment solutions")


def _canonical_reach(lens, alpha: float) -> float:
    """Abscissa extent (parabolic) or log-extent (power) of one higher segment."""
    if isinstance(lens, ParabolicLens):
        probe = np.array([0.0])
        x1 = _solve_branch(lens, alpha, probe, True)
        return float(abs(x1[0]))
    probe = np.array([1.0])
    lo = _solve_branch(lens, alpha, probe, False)
    hi = _solve_branch(lens, alpha, probe, True)
    return max(abs(math.log(lo[0])), abs(math.log(hi[0])), 0.1)


def envelope_polyline(lens: Lens, alpha: float, grid: EnvelopeGrid | None = None) -> np.ndarray:
    """Sampled free boundary of the minimal alpha-extension.

    For a dense grid of fixed-boundary anchors, finds all higher segments
    numerically and returns, per output abscissa, the extremal ordinate over
    the lens and every covering segment.  Output rows are (x1, x2) with
    ascending abscissas.
    """
    _check_alpha(alpha)
    _envelope_supported(lens)
    grid = grid or EnvelopeGrid()
    reach = _canonical_reach(lens, alpha)

    if isinstance(lens, ParabolicLens):
        w_out = grid.span * reach
        out_u = np.linspace(-w_out, w_out, grid.outputs)
        anchor_u = np.linspace(-w_out - 2.5 * reach, w_out + 2.5 * reach, grid.anchors)
    else:
        w_out = grid.span * reach / 2.0
        out_u = np.exp(np.linspace(-w_out, w_out, grid.outputs))
        anchor_u = np.exp(
            np.linspace(-w_out - 1.2 * reach, w_out + 1.2 * reach, grid.anchors)
        )

    segs = higher_segments(lens, alpha, anchor_u)
    if not segs:
        raise EnvelopeError("no higher segments found on the anchor grid")
    xs = np.array([s[0] for s in segs])
    ys = np.array([s[1] for s in segs])
    lo = np.minimum(xs[:, 0], ys[:, 0])
    hi = np.maximum(xs[:, 0], ys[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = (xs[:, 1] - ys[:, 1]) / (xs[:, 0] - ys[:, 0])
    intercept = ys[:, 1] - slope * ys[:, 0]

    env = np.asarray(lens.free_ordinate(out_u), dtype=float).copy()
    chunk = 256
    for i in range(0, out_u.size, chunk):
        u = out_u[i : i + chunk, None]
        vals = intercept[None, :] + slope[None, :] * u
        covered = (u >= lo[None, :]) & (u <= hi[None, :])
        vals = np.where(covered, vals, -np.inf)
        env[i : i + chunk] = np.maximum(env[i : i + chunk], vals.max(axis=1))
    return np.column_stack([out_u, env])


def envelope_peak(lens: Lens, alpha: float) -> float:
    """Extension constant implied by the higher-segment envelope.

    Parabolic: the square root of the maximal defect along higher segments.
    Power: the maximal x2/x1^q along them.  Solved from the raw geometry
    (bracketed bisection plus golden-section along the segment), independent
    of the closed forms.
    """
    _check_alpha(alpha)
    _envelope_supported(lens)
    probe = np.array([0.0]) if isinstance(lens, ParabolicLens) else np.array([1.0])
    best = -np.inf
    for x, y, _z in higher_segments(lens, alpha, probe):
        px, py = np.asarray(x), np.asarray(y)

        def along(t):
            t = np.asarray(t)
            u1 = (1.0 - t) * py[0] + t * px[0]
            u2 = (1.0 - t) * py[1] + t * px[1]
            if isinstance(lens, ParabolicLens):
                return u2 - u1 * u1
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log(u2) - lens.q * np.log(u1)

        _, fmax = _golden_max_vec(along, np.zeros(1), np.ones(1))
        best = max(best, float(fmax[0]))
    if isinstance(lens, ParabolicLens):
        return math.sqrt(best)
    return math.exp(best)


# ---------------------------------------------------------------------------
# Alpha-extension checking
# ---------------------------------------------------------------------------


def _check_same_fixed_boundary(inner: Lens, outer: Lens):
    if isinstance(inner, ParabolicLens) and isinstance(outer, ParabolicLens):
        return
    if isinstance(inner, PowerLens) and isinstance(outer, (PowerLens, PowerEpigraph)):
        if inner.q != outer.q:
            raise ValueError("power lenses with different exponents share no fixed boundary")
        if inner.fixed_is_upper:
            raise ValueError(
                "extensions of power lenses with q in (0, 1) move the lower "
                "coefficient; conjugate onto the exponent 1/q instead"
            )
        return
    raise ValueError(
        f"mismatched fixed boundaries: {type(inner).__name__} vs {type(outer).__name__}"
    )


def is_alpha_extension(
    inner: Lens,
    outer: Lens,
    alpha: float,
    anchors: int = 33,
    tol: float = BOUNDARY_RTOL,
) -> bool:
    """True iff every sampled higher segment of (inner, alpha) lies in outer.

    Both lenses must share their fixed boundary.  Every higher segment of the
    built-in families attains the minimal-extension boundary, so a violating
    outer lens is detected from any single anchor.
    """
    _check_alpha(alpha)
    _check_same_fixed_boundary(inner, outer)
    if isinstance(outer, PowerEpigraph):
        return True
    reach = _canonical_reach(inner, alpha)
    if isinstance(inner, ParabolicLens):
        anchor_u = np.linspace(-2.0 * reach, 2.0 * reach, anchors)
    else:
        anchor_u = np.exp(np.linspace(-reach, reach, anchors))
    for x, y, _z in higher_segments(inner, alpha, anchor_u):
        if not segment_in_lens_exact(outer, (x, y), tol):
            return False
    return True


def beta_monotone_extension(
    inner: Lens, outer: Lens, alpha: float, betas, anchors: int = 33
) -> list[tuple[float, bool]]:
    """Re-check a verified alpha-extension at larger section parameters.

    An alpha-extension is automatically a beta-extension for every
    beta > alpha; this sweep exposes that as a testable check.
    """
    out = []
    for beta in betas:
        if not beta > alpha:
            raise ValueError("betas must exceed alpha")
        out.append((float(beta), is_alpha_extension(inner, outer, beta, anchors)))
    return out


def write_envelope_csv(polyline: np.ndarray, path) -> None:
    """Write envelope rows as 'x1,x2' CSV with ascending abscissas."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x1,x2\n")
        for u, v in polyline:
            fh.write(f"{u:.17g},{v:.17g}\n")
