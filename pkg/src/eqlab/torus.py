"""Teichmueller space of the once-punctured torus in trace coordinates.

A marked surface is the triple (x, y, z) = (tr A, tr B, tr AB) of holonomy
traces of the two marking generators and their product, constrained by
x^2 + y^2 + z^2 = xyz (parabolic commutator, trace -2) with x, y, z > 2 on
the Fuchsian branch.  Simple closed curves are reduced rational slopes:
slope 1/0 is the A-curve, 0/1 the B-curve, 1/1 the AB-curve, and traces of
all other slopes follow from the Farey/Fricke recursion
    t(L (+) R) = t(L) t(R) - t(L (-) R)
walked down the Stern-Brocot tree.  Derivatives of traces with respect to
the chart (x, y) propagate through the same recursion, which gives analytic
length differentials and twist (earthquake) vectors; central finite
differences remain available as an independent cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

from .hyp2 import (
    Geodesic,
    Mat2,
    angle_at_intersection,
    axis,
    geodesics_cross,
    length_from_trace,
)

MARKOV_TOL = 1e-9
COMMUTATOR_TOL = 1e-9
TRACE_MIN = 2.0
DEFAULT_CF_DEPTH = 40
DEFAULT_WALK_CAP = 200_000


class SurfaceError(ValueError):
    """Trace data does not describe a point of the Fuchsian locus."""


class GaugeError(RuntimeError):
    """Canonical matrix gauge could not be constructed."""


class CertificationError(RuntimeError):
    """A certified search (systole, enumeration) exceeded its configured budget."""


class RecursionBudgetError(RuntimeError):
    """Stern-Brocot walk exceeded the configured step cap."""


# ---------------------------------------------------------------------------
# slopes


@dataclass(frozen=True)
class Slope:
    """Reduced rational slope p/q of a simple closed curve; (1, 0) is infinity."""

    p: int
    q: int

    def __post_init__(self):
        p, q = int(self.p), int(self.q)
        if p == 0 and q == 0:
            raise ValueError("slope (0, 0) is not a curve")
        if q < 0:
            p, q = -p, -q
        if q == 0:
            p = 1
        g = gcd(abs(p), q)
        if g > 1:
            p, q = p // g, q // g
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def value(self) -> float:
        return math.inf if self.q == 0 else self.p / self.q

    def __repr__(self) -> str:
        return f"{self.p}/{self.q}"


@dataclass(frozen=True)
class WeightedCurve:
    """Measured lamination c * gamma given by a slope and a positive weight."""

    slope: Slope
    weight: float = 1.0

    def __post_init__(self):
        if not (self.weight > 0.0) or not math.isfinite(self.weight):
            raise ValueError(f"weight must be positive and finite, got {self.weight}")


def as_weighted(lam: "Slope | WeightedCurve") -> WeightedCurve:
    return lam if isinstance(lam, WeightedCurve) else WeightedCurve(lam, 1.0)


def intersection_number(g1: Slope, g2: Slope) -> int:
    """Geometric intersection number |p q' - q p'| of two slopes."""
    return abs(g1.p * g2.q - g1.q * g2.p)


def slope_from_float(
    u: float,
    max_depth: int = DEFAULT_CF_DEPTH,
    digit_budget: int = 3000,
    size_cap: int | None = None,
) -> Slope:
    """Continued-fraction convergent of u as a slope, inf -> 1/0.

    Truncates after max_depth partial quotients or once their running sum
    exceeds digit_budget, which caps the Stern-Brocot walk length of any
    slope this function returns.  size_cap additionally bounds |p| + q,
    which bounds the hyperbolic length of the returned curve (needed before
    twisting, where traces grow like exp of the length).
    """
    if math.isinf(u) or abs(u) > digit_budget or (size_cap is not None and abs(u) > size_cap):
        return Slope(1, 0)
    a0 = math.floor(u)
    p_prev, q_prev = 1, 0
    p, q = int(a0), 1
    x = u - a0
    total = min(abs(int(a0)), digit_budget)
    for _ in range(max_depth):
        if x <= 1e-18 or total >= digit_budget:
            break
        x = 1.0 / x
        a = math.floor(x)
        if a < 1:
            break
        a = int(min(a, digit_budget - total + 1))
        if size_cap is not None:
            # largest digit keeping |p| + q within the cap
            room = size_cap - (abs(p_prev) + q_prev)
            denom = abs(p) + q
            a_max = room // denom if denom else 0
            if a_max < 1:
                break
            a = min(a, int(a_max))
        total += a
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        x -= math.floor(x)
        if q > 10**15:
            break
    if p == 0 and q == 0:
        return Slope(0, 1)
    return Slope(p, q)


# integer unimodular matrices acting on slopes ------------------------------


@dataclass(frozen=True)
class SL2Z:
    """Integer matrix [[a, b], [c, d]] with det +1, acting on slope columns."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise ValueError("marking change must have determinant 1")

    def inv(self) -> "SL2Z":
        return SL2Z(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "SL2Z") -> "SL2Z":
        return SL2Z(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def apply(self, s: Slope) -> Slope:
        return Slope(self.a * s.p + self.b * s.q, self.c * s.p + self.d * s.q)

    @staticmethod
    def identity() -> "SL2Z":
        return SL2Z(1, 0, 0, 1)


def marking_to_infinity(gamma: Slope) -> SL2Z:
    """Unimodular M with M(gamma) = 1/0, via the extended Euclid algorithm."""
    p, q = gamma.p, gamma.q
    if q == 0:
        return SL2Z.identity()
    # find r, s with p*s - q*r = 1
    g, s0, r0 = _xgcd(p, q)
    assert g == 1
    s, r = s0, -r0
    return SL2Z(s, -r, -q, p)


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_s, s = s, old_s - quo * s
        old_t, t = t, old_t - quo * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def dehn_twist_matrix(gamma: Slope, power: int = 1) -> SL2Z:
    """Slope action of the power-th Dehn twist along gamma.

    Normalized so that the displacement-l_gamma left twist flow realizes this
    action on traces (pinned by the equivariance test): for gamma = 1/0 it is
    (p, q) -> (p + power*q, q).
    """
    m = marking_to_infinity(gamma)
    t = SL2Z(1, power, 0, 1)
    return m.inv() @ t @ m


# ---------------------------------------------------------------------------
# marked surfaces


@dataclass(frozen=True)
class MarkedSurface:
    """Point of Teichmueller space as a trace triple on the Fuchsian locus."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v) or v <= TRACE_MIN:
                raise SurfaceError(f"trace {v} is not on the Fuchsian locus (> 2)")
        res = self.markov_residual()
        scale = max(1.0, self.x * self.y * self.z)
        if abs(res) > MARKOV_TOL * scale:
            raise SurfaceError(f"Markov identity violated, residual {res}")

    def markov_residual(self) -> float:
        return self.x**2 + self.y**2 + self.z**2 - self.x * self.y * self.z

    def commutator_trace(self) -> float:
        # tr[A,B] = x^2 + y^2 + z^2 - xyz - 2
        return self.markov_residual() - 2.0

    @property
    def branch(self) -> str:
        return "lower" if self.z <= self.x * self.y / 2.0 else "upper"

    def chart(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_json(self) -> str:
        return json.dumps(
            {
                "x": float(f"{self.x:.17g}"),
                "y": float(f"{self.y:.17g}"),
                "branch": self.branch,
            }
        )

    @staticmethod
    def from_json(text: str) -> "MarkedSurface":
        data = json.loads(text)
        return from_traces(data["x"], data["y"], data["branch"])


def from_traces(x: float, y: float, branch: str = "lower") -> MarkedSurface:
    """Surface with tr A = x, tr B = y and tr AB the selected root of
    z^2 - xyz + x^2 + y^2 = 0."""
    if not (x > TRACE_MIN and y > TRACE_MIN):
        raise SurfaceError(f"need x, y > 2, got ({x}, {y})")
    disc = (x * y) ** 2 - 4.0 * (x * x + y * y)
    if disc < 0.0:
        raise SurfaceError(f"discriminant {disc} < 0: no real branch roots")
    sq = math.sqrt(disc)
    if branch == "lower":
        z = (x * y - sq) / 2.0
    elif branch == "upper":
        z = (x * y + sq) / 2.0
    else:
        raise ValueError(f"branch must be 'lower' or 'upper', got {branch!r}")
    if z <= TRACE_MIN:
        raise SurfaceError(f"branch root z = {z} <= 2 is off the Fuchsian locus")
    return MarkedSurface(x, y, z)


def surface_from_triple(x: float, y: float, z: float) -> MarkedSurface:
    return MarkedSurface(x, y, z)


# canonical matrix gauge -----------------------------------------------------


@dataclass(frozen=True)
class Gauge:
    """A diagonalized, B symmetric with positive off-diagonal entries."""

    lam: float  # larger eigenvalue of A
    p: float
    q: float
    s: float

    def mat_a(self) -> Mat2:
        return Mat2(self.lam, 0.0, 0.0, 1.0 / self.lam)

    def mat_b(self) -> Mat2:
        return Mat2(self.p, self.q, self.q, self.s)


def gauge_matrices(surf: MarkedSurface) -> Gauge:
    """Canonical (A, B) realizing the trace triple.

    On the locus the Markov identity gives p*s - 1 = 4/(x^2 - 4) exactly
    (so the axes of A and B always cross); p and s are recovered with the
    better-conditioned one computed directly and the other from the exact
    product, which keeps the gauge stable at extreme twist positions.
    """
    x, y, z = surf.x, surf.y, surf.z
    d = math.sqrt(x * x - 4.0)
    lam = (x + d) / 2.0
    q = 2.0 / d
    ps = 1.0 + q * q
    p_raw = (z - y / lam) / d
    s_raw = (y * lam - z) / d
    if p_raw <= 0.0 or s_raw <= 0.0:
        raise GaugeError(f"gauge entries lost positivity: p={p_raw}, s={s_raw}")
    if p_raw >= s_raw:
        p, s = p_raw, ps / p_raw
    else:
        s = s_raw
        p = ps / s_raw
    return Gauge(lam, p, q, s)


def holonomy_of_slope(surf: MarkedSurface, gamma: Slope, step_cap: int = DEFAULT_WALK_CAP) -> Mat2:
    """Holonomy matrix of the slope word in the canonical gauge.

    Word convention: W(1/0) = A, W(0/1) = B, W(mediant(L, R)) = W(R) W(L)
    with R the larger slope; negative slopes use the (A, B^-1) marking.
    """
    g = gauge_matrices(surf)
    mat_a, mat_b = g.mat_a(), g.mat_b()
    if gamma.q == 0:
        return mat_a
    if gamma.p == 0:
        return mat_b
    p, q = gamma.p, gamma.q
    if p < 0:
        mat_b = mat_b.inv()
        p = -p
    lw, rw = mat_b, mat_a  # words at slopes 0/1 and 1/0
    lp, lq, rp, rq = 0, 1, 1, 0
    steps = 0
    while True:
        mp, mq = lp + rp, lq + rq
        mw = rw @ lw
        if (mp, mq) == (p, q):
            return mw
        if p * mq - q * mp < 0:  # target below the mediant
            rp, rq, rw = mp, mq, mw
        else:
            lp, lq, lw = mp, mq, mw
        steps += 1
        if steps > step_cap:
            raise RecursionBudgetError(f"slope walk for {gamma} exceeded {step_cap} steps")


# ---------------------------------------------------------------------------
# trace recursion with optional derivative transport


class _Jet:
    """Value plus gradient, multiplying with the product rule."""

    __slots__ = ("val", "grad")

    def __init__(self, val: float, grad: np.ndarray):
        self.val = val
        self.grad = grad

    def __mul__(self, other: "_Jet") -> "_Jet":
        return _Jet(self.val * other.val, self.grad * other.val + other.grad * self.val)

    def __sub__(self, other: "_Jet") -> "_Jet":
        return _Jet(self.val - other.val, self.grad - other.grad)


def _walk_jet(jl: _Jet, jr: _Jet, jo: _Jet, p: int, q: int, step_cap: int) -> _Jet:
    """Walk the Stern-Brocot tree from the (0/1, 1/0) base to slope p/q > 0."""
    lp, lq, rp, rq = 0, 1, 1, 0
    steps = 0
    while True:
        mp, mq = lp + rp, lq + rq
        jm = jl * jr - jo
        if (mp, mq) == (p, q):
            return jm
        if p * mq - q * mp < 0:
            rp, rq = mp, mq
            jr, jo = jm, jr
        else:
            lp, lq = mp, mq
            jl, jo = jm, jl
        steps += 1
        if steps > step_cap:
            raise RecursionBudgetError(f"slope walk for {p}/{q} exceeded {step_cap} steps")


def _chart_jets(surf: MarkedSurface, grad: bool) -> tuple[_Jet, _Jet, _Jet, _Jet]:
    """Jets of (x, y, z, xy - z) with gradients in the on-shell chart (x, y)."""
    x, y, z = surf.x, surf.y, surf.z
    if grad:
        denom = 2.0 * z - x * y
        if abs(denom) < 1e-12 * max(1.0, x * y):
            raise SurfaceError("chart fold: 2z = xy, trace-chart differentials degenerate")
        zx = (y * z - 2.0 * x) / denom
        zy = (x * z - 2.0 * y) / denom
        jx = _Jet(x, np.array([1.0, 0.0]))
        jy = _Jet(y, np.array([0.0, 1.0]))
        jz = _Jet(z, np.array([zx, zy]))
    else:
        zero = np.zeros(0)
        jx, jy, jz = _Jet(x, zero), _Jet(y, zero), _Jet(z, zero)
    jw = jx * jy - jz  # trace of slope -1/1
    return jx, jy, jz, jw


def _trace_jet(surf: MarkedSurface, gamma: Slope, grad: bool, step_cap: int) -> _Jet:
    jx, jy, jz, jw = _chart_jets(surf, grad)
    if gamma.q == 0:
        return jx
    if gamma.p == 0:
        return jy
    if gamma.p > 0:
        return _walk_jet(jy, jx, jw, gamma.p, gamma.q, step_cap)
    # slope -p/q: re-mark by b -> b^-1, which swaps the roles of z and xy - z
    return _walk_jet(jy, jx, jz, -gamma.p, gamma.q, step_cap)


def trace_of_slope(surf: MarkedSurface, gamma: Slope, step_cap: int = DEFAULT_WALK_CAP) -> float:
    """Trace of the primitive holonomy word of the given slope."""
    return _trace_jet(surf, gamma, False, step_cap).val


def trace_gradient(surf: MarkedSurface, gamma: Slope, step_cap: int = DEFAULT_WALK_CAP) -> tuple[float, np.ndarray]:
    """(trace, d trace / d(x, y)) with z eliminated along the Markov locus."""
    j = _trace_jet(surf, gamma, True, step_cap)
    return j.val, j.grad


# log-trace transport: traces grow doubly exponentially down the tree, so
# norms and suprema over deep slopes run the same recursion on
# (log t, d log t) instead, which never overflows.


class _LogJet:
    __slots__ = ("log", "grad")

    def __init__(self, log: float, grad: np.ndarray):
        self.log = log
        self.grad = grad


def _log_step(jl: _LogJet, jr: _LogJet, jo: _LogJet) -> _LogJet:
    s = jl.log + jr.log
    r = math.exp(min(jo.log - s, -1e-300))
    if r >= 1.0:
        raise SurfaceError("trace recursion left the Fuchsian locus (t_M <= 0)")
    return _LogJet(s + math.log1p(-r), (jl.grad + jr.grad - r * jo.grad) / (1.0 - r))


def _log_chart_jets(surf: MarkedSurface) -> tuple[_LogJet, _LogJet, _LogJet, _LogJet]:
    x, y, z = surf.x, surf.y, surf.z
    denom = 2.0 * z - x * y
    if abs(denom) < 1e-12 * max(1.0, x * y):
        raise SurfaceError("chart fold: 2z = xy, trace-chart differentials degenerate")
    zx = (y * z - 2.0 * x) / denom
    zy = (x * z - 2.0 * y) / denom
    w = x * y - z
    jx = _LogJet(math.log(x), np.array([1.0 / x, 0.0]))
    jy = _LogJet(math.log(y), np.array([0.0, 1.0 / y]))
    jz = _LogJet(math.log(z), np.array([zx / z, zy / z]))
    jw = _LogJet(math.log(w), np.array([(y - zx) / w, (x - zy) / w]))
    return jx, jy, jz, jw


def _walk_log(jl: _LogJet, jr: _LogJet, jo: _LogJet, p: int, q: int, step_cap: int) -> _LogJet:
    lp, lq, rp, rq = 0, 1, 1, 0
    steps = 0
    while True:
        mp, mq = lp + rp, lq + rq
        jm = _log_step(jl, jr, jo)
        if (mp, mq) == (p, q):
            return jm
        if p * mq - q * mp < 0:
            rp, rq = mp, mq
            jr, jo = jm, jr
        else:
            lp, lq = mp, mq
            jl, jo = jm, jl
        steps += 1
        if steps > step_cap:
            raise RecursionBudgetError(f"slope walk for {p}/{q} exceeded {step_cap} steps")


def trace_log_gradient(surf: MarkedSurface, gamma: Slope, step_cap: int = DEFAULT_WALK_CAP) -> tuple[float, np.ndarray]:
    """(log trace, d log trace / d(x, y)) along the Markov locus; overflow-free."""
    jx, jy, jz, jw = _log_chart_jets(surf)
    if gamma.q == 0:
        j = jx
    elif gamma.p == 0:
        j = jy
    elif gamma.p > 0:
        j = _walk_log(jy, jx, jw, gamma.p, gamma.q, step_cap)
    else:
        j = _walk_log(jy, jx, jz, -gamma.p, gamma.q, step_cap)
    return j.log, j.grad


class NonHyperbolicTraceError(ValueError):
    pass


def length_from_log_trace(log_t: float) -> float:
    """2 arccosh(t/2) from log t, stable for arbitrarily large traces."""
    u2inv = 4.0 * math.exp(-2.0 * log_t)  # (2/t)^2
    if u2inv >= 1.0:
        raise NonHyperbolicTraceError(f"log trace {log_t} is at or below 2")
    return 2.0 * (log_t - math.log(2.0) + math.log1p(math.sqrt(1.0 - u2inv)))


def length_of_slope(surf: MarkedSurface, lam: Slope | WeightedCurve) -> float:
    """Hyperbolic length 2 arccosh(tr/2), extended linearly in the weight."""
    wc = as_weighted(lam)
    log_t, _ = trace_log_gradient(surf, wc.slope)
    return wc.weight * length_from_log_trace(log_t)


def length_differential(surf: MarkedSurface, lam: Slope | WeightedCurve) -> np.ndarray:
    """Covector (d l / dx, d l / dy) of the length of a weighted slope."""
    wc = as_weighted(lam)
    log_t, g = trace_log_gradient(surf, wc.slope)
    scale = 2.0 / math.sqrt(1.0 - 4.0 * math.exp(-2.0 * log_t))
    return wc.weight * scale * g


# ---------------------------------------------------------------------------
# slope enumeration


def enumerate_slopes(depth: int) -> list[Slope]:
    """All slopes of Stern-Brocot depth <= depth, plus 0/1 and 1/0.

    Depth 0 is the two Farey roots 1/1 and -1/1; each level doubles each
    subtree.  Deterministic order: [0/1, 1/0, 1/1, -1/1], then level by
    level, positive tree before negative, left to right within a level.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    out = [Slope(0, 1), Slope(1, 0), Slope(1, 1), Slope(-1, 1)]
    pos_level = [((0, 1), (1, 1)), ((1, 1), (1, 0))]
    neg_level = [((0, 1), (1, 1)), ((1, 1), (1, 0))]  # mirrored via p -> -p
    for _ in range(depth):
        new_pos, new_neg = [], []
        for (lp, lq), (rp, rq) in pos_level:
            mp, mq = lp + rp, lq + rq
            out.append(Slope(mp, mq))
            new_pos.append(((lp, lq), (mp, mq)))
            new_pos.append(((mp, mq), (rp, rq)))
        for (lp, lq), (rp, rq) in neg_level:
            mp, mq = lp + rp, lq + rq
            out.append(Slope(-mp, mq))
            new_neg.append(((lp, lq), (mp, mq)))
            new_neg.append(((mp, mq), (rp, rq)))
        pos_level, neg_level = new_pos, new_neg
    return out


def enumerate_log_traces(surf: MarkedSurface, depth: int):
    """Vectorized (log trace, d log trace) for enumerate_slopes(depth).

    Runs the Fricke recursion in log space level by level, so deep levels
    and pinched surfaces never overflow.  Returns (slopes, logs, grads) with
    grads of shape (n, 2); row order matches enumerate_slopes.
    """
    slopes = enumerate_slopes(depth)
    jx, jy, jz, jw = _log_chart_jets(surf)

    def pack(j: _LogJet) -> np.ndarray:
        return np.concatenate(([j.log], j.grad))

    vx, vy, vz, vw = pack(jx), pack(jy), pack(jz), pack(jw)
    rows = [vy, vx, vz, vw]

    def step(tl: np.ndarray, tr: np.ndarray, to: np.ndarray) -> np.ndarray:
        s = tl[..., 0] + tr[..., 0]
        r = np.exp(np.minimum(to[..., 0] - s, -1e-300))
        if np.any(r >= 1.0):
            raise SurfaceError("trace recursion left the Fuchsian locus")
        out = np.empty_like(tl)
        out[..., 0] = s + np.log1p(-r)
        out[..., 1:] = (tl[..., 1:] + tr[..., 1:] - r[..., None] * to[..., 1:]) / (1.0 - r)[..., None]
        return out

    # positive tree state: (left, right, opposite); negative tree mirrors
    # with z and xy - z exchanged.
    pos = (np.array([vy, vz]), np.array([vz, vx]), np.array([vx, vy]))
    neg = (np.array([vy, vw]), np.array([vw, vx]), np.array([vx, vy]))
    for _ in range(depth):
        new_states = []
        for tl, tr, to in (pos, neg):
            tm = step(tl, tr, to)
            rows.append(tm)
            n = tl.shape[0]
            order = np.empty(2 * n, dtype=int)
            order[0::2] = np.arange(n)
            order[1::2] = np.arange(n) + n
            nl = np.concatenate([tl, tm], axis=0)[order]
            nr = np.concatenate([tm, tr], axis=0)[order]
            no = np.concatenate([tr, tl], axis=0)[order]
            new_states.append((nl, nr, no))
        pos, neg = new_states
    vals = np.concatenate([r.reshape(-1, 3) for r in rows], axis=0)
    return slopes, vals[:, 0], vals[:, 1:]


def enumerate_lengths(surf: MarkedSurface, depth: int, grad: bool = False):
    """Lengths (and chart differentials) of all slopes at the given depth."""
    slopes, logs, grads = enumerate_log_traces(surf, depth)
    u2inv = 4.0 * np.exp(-2.0 * logs)
    if np.any(u2inv >= 1.0):
        raise SurfaceError("non-hyperbolic trace in enumeration")
    ells = 2.0 * (logs - math.log(2.0) + np.log1p(np.sqrt(1.0 - u2inv)))
    if not grad:
        return slopes, ells
    dl = grads * (2.0 / np.sqrt(1.0 - u2inv))[:, None]
    return slopes, ells, dl


# ---------------------------------------------------------------------------
# marking changes and the twist flow


def _trace_value_extended(x, y, z, gamma: Slope, step_cap: int = DEFAULT_WALK_CAP):
    """Stern-Brocot trace walk in extended precision (x86 long double).

    Marking round trips recover small traces from differences of huge
    products; the extra mantissa bits keep that cancellation below 1e-11.
    """
    ld = np.longdouble
    jx, jy, jz = ld(x), ld(y), ld(z)
    jw = jx * jy - jz
    if gamma.q == 0:
        return jx
    if gamma.p == 0:
        return jy
    if gamma.p > 0:
        jl, jr, jo, p, q = jy, jx, jw, gamma.p, gamma.q
    else:
        jl, jr, jo, p, q = jy, jx, jz, -gamma.p, gamma.q
    lp, lq, rp, rq = 0, 1, 1, 0
    steps = 0
    while True:
        mp, mq = lp + rp, lq + rq
        jm = jl * jr - jo
        if (mp, mq) == (p, q):
            return jm
        if p * mq - q * mp < 0:
            rp, rq = mp, mq
            jr, jo = jm, jr
        else:
            lp, lq = mp, mq
            jl, jo = jm, jl
        steps += 1
        if steps > step_cap:
            raise RecursionBudgetError(f"slope walk for {p}/{q} exceeded {step_cap} steps")


def remark(surf: MarkedSurface, m: SL2Z) -> MarkedSurface:
    """Surface re-marked by m: trace_of_slope(remark(s, m), d) = trace_of_slope(s, m^-1 d)."""
    mi = m.inv()
    x = float(_trace_value_extended(surf.x, surf.y, surf.z, mi.apply(Slope(1, 0))))
    y = float(_trace_value_extended(surf.x, surf.y, surf.z, mi.apply(Slope(0, 1))))
    z = float(_trace_value_extended(surf.x, surf.y, surf.z, mi.apply(Slope(1, 1))))
    zz = _farey_corrected_z(x, y, z)
    return MarkedSurface(x, y, zz)


def _farey_corrected_z(x: float, y: float, z: float) -> float:
    """Snap z onto the exact Markov root it approximates (guards roundoff)."""
    disc = (x * y) ** 2 - 4.0 * (x * x + y * y)
    if disc < 0.0:
        return z
    sq = math.sqrt(disc)
    lo, hi = (x * y - sq) / 2.0, (x * y + sq) / 2.0
    near = lo if abs(z - lo) <= abs(z - hi) else hi
    # only snap when z is unambiguously close to one root
    if abs(near - z) < 1e-6 * max(1.0, abs(z)) and (sq > 1e-5 or abs(near - z) < 0.1 * max(sq, 1e-300)):
        return near
    return z


def _remark_triangle_traces(surf: MarkedSurface, m: SL2Z) -> tuple[float, float, float]:
    mi = m.inv()
    x = trace_of_slope(surf, mi.apply(Slope(1, 0)))
    y = trace_of_slope(surf, mi.apply(Slope(0, 1)))
    z = trace_of_slope(surf, mi.apply(Slope(1, 1)))
    return x, y, z


TWIST_TRACE_CAP = 600.0  # round trips through larger re-marked traces lose precision


def twist(surf: MarkedSurface, gamma: Slope, t: float) -> MarkedSurface:
    """Left earthquake (Fenchel-Nielsen twist flow) along gamma, displacement t.

    Positive t is the left earthquake; t = l_gamma realizes the Dehn-twist
    slope action of dehn_twist_matrix(gamma, 1) on traces.  Implemented by
    re-marking gamma to slope 1/0, replacing B -> B A_t with A_t sharing A's
    oriented axis and translation length |t|, and re-marking back.

    The re-marking round trip cancels catastrophically once intermediate
    traces are huge, so curves with trace beyond TWIST_TRACE_CAP (length
    beyond roughly 12) are rejected; long-curve shears should be performed
    in an adapted marking instead (as the pinching driver does).
    """
    if not math.isfinite(t):
        raise ValueError(f"twist displacement must be finite, got {t}")
    if t == 0.0:
        return surf
    ld = np.longdouble
    m = marking_to_infinity(gamma)
    mi = m.inv()
    xx = _trace_value_extended(surf.x, surf.y, surf.z, mi.apply(Slope(1, 0)))
    yy = _trace_value_extended(surf.x, surf.y, surf.z, mi.apply(Slope(0, 1)))
    zz = _trace_value_extended(surf.x, surf.y, surf.z, mi.apply(Slope(1, 1)))
    if not (xx <= TWIST_TRACE_CAP):
        raise GaugeError(
            f"twist curve trace {float(xx)} exceeds the stable cap {TWIST_TRACE_CAP}"
        )
    # diagonal gauge and the sheared dual entries, in extended precision
    d = np.sqrt(xx * xx - 4.0)
    lam = (xx + d) / 2.0
    p_raw = (zz - yy / lam) / d
    s_raw = (yy * lam - zz) / d
    if not (p_raw > 0.0 and s_raw > 0.0):
        raise GaugeError("twist gauge lost positivity")
    ps = xx * xx / (d * d)
    if p_raw >= s_raw:
        p_g, s_g = p_raw, ps / p_raw
    else:
        p_g, s_g = ps / s_raw, s_raw
    e_pos, e_neg = np.exp(ld(t) / 2.0), np.exp(-ld(t) / 2.0)
    y_t = p_g * e_pos + s_g * e_neg
    z_t = lam * p_g * e_pos + (s_g / lam) * e_neg
    if not (y_t < 1e12 and z_t < 1e12):
        raise GaugeError("twist displacement pushes traces beyond the stable range")
    x_new = float(_trace_value_extended(xx, y_t, z_t, m.apply(Slope(1, 0))))
    y_new = float(_trace_value_extended(xx, y_t, z_t, m.apply(Slope(0, 1))))
    z_new = float(_trace_value_extended(xx, y_t, z_t, m.apply(Slope(1, 1))))
    return MarkedSurface(x_new, y_new, _farey_corrected_z(x_new, y_new, z_new))


def twist_velocity(surf: MarkedSurface, gamma: Slope) -> np.ndarray:
    """Analytic d/dt at t=0 of the chart coordinates of twist(surf, gamma, t)."""
    m = marking_to_infinity(gamma)
    xx, yy, zz = _remark_triangle_traces(surf, m)
    g = gauge_matrices(MarkedSurface(xx, yy, _farey_corrected_z(xx, yy, zz)))
    dy = (g.p - g.s) / 2.0
    dz = (g.lam * g.p - g.s / g.lam) / 2.0
    # chart slopes expressed in the re-marked chart
    d_chart = []
    for delta in (Slope(1, 0), Slope(0, 1)):
        moved = m.apply(delta)
        grad = _offshell_gradient(xx, yy, zz, moved)
        d_chart.append(grad[1] * dy + grad[2] * dz)
    return np.array(d_chart)


def _offshell_gradient(x: float, y: float, z: float, gamma: Slope) -> np.ndarray:
    """d trace(gamma) / d(x, y, z) treating the triple as independent."""
    jx = _Jet(x, np.array([1.0, 0.0, 0.0]))
    jy = _Jet(y, np.array([0.0, 1.0, 0.0]))
    jz = _Jet(z, np.array([0.0, 0.0, 1.0]))
    jw = jx * jy - jz
    if gamma.q == 0:
        return np.array([1.0, 0.0, 0.0])
    if gamma.p == 0:
        return np.array([0.0, 1.0, 0.0])
    if gamma.p > 0:
        jet = _walk_jet(jy, jx, jw, gamma.p, gamma.q, DEFAULT_WALK_CAP)
    else:
        jet = _walk_jet(jy, jx, jz, -gamma.p, gamma.q, DEFAULT_WALK_CAP)
    return jet.grad


# ---------------------------------------------------------------------------
# tangent vectors and earthquake derivatives


@dataclass(frozen=True)
class TangentVector:
    """Tangent vector at a marked surface, components in the (x, y) chart."""

    base: MarkedSurface
    dx: float
    dy: float

    def __post_init__(self):
        if not (math.isfinite(self.dx) and math.isfinite(self.dy)):
            raise ValueError("tangent components must be finite")

    def components(self) -> np.ndarray:
        return np.array([self.dx, self.dy])

    def __neg__(self) -> "TangentVector":
        return TangentVector(self.base, -self.dx, -self.dy)

    def scaled(self, c: float) -> "TangentVector":
        return TangentVector(self.base, c * self.dx, c * self.dy)

    def norm2(self) -> float:
        return math.hypot(self.dx, self.dy)


class ConvergenceError(RuntimeError):
    """Finite-difference ladder failed to stabilize."""


def earthquake_vector(
    surf: MarkedSurface,
    lam: Slope | WeightedCurve,
    method: str = "analytic",
    rel_tol: float = 1e-9,
) -> TangentVector:
    """Infinitesimal earthquake e_lambda at surf, in chart components.

    method 'analytic' transports derivatives through the trace recursion;
    method 'fd' uses central differences of the twist flow with Richardson
    extrapolation, adapting the step until two levels agree to rel_tol.
    """
    wc = as_weighted(lam)
    if method == "analytic":
        v = wc.weight * twist_velocity(surf, wc.slope)
        return TangentVector(surf, v[0], v[1])
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")

    def chart_at(t: float) -> np.ndarray:
        s2 = twist(surf, wc.slope, t)
        return np.array([s2.x, s2.y])

    scale = max(1.0, surf.x, surf.y)
    prev = None
    for h in (1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4):
        d1 = (chart_at(h) - chart_at(-h)) / (2.0 * h)
        d2 = (chart_at(h / 2.0) - chart_at(-h / 2.0)) / h
        rich = (4.0 * d2 - d1) / 3.0
        if prev is not None:
            err = np.max(np.abs(rich - prev)) / max(scale, np.max(np.abs(rich)))
            if err < rel_tol:
                v = wc.weight * rich
                return TangentVector(surf, v[0], v[1])
        prev = rich
    raise ConvergenceError("Richardson ladder did not stabilize for the earthquake vector")


def pair(covector: np.ndarray, v: TangentVector) -> float:
    """Pairing <dl, v> of a chart covector with a tangent vector."""
    return float(covector[0] * v.dx + covector[1] * v.dy)


def length_pairing(surf: MarkedSurface, mu: Slope | WeightedCurve, lam: Slope | WeightedCurve) -> float:
    """<d l_mu, e_lambda> at surf, fully analytic."""
    return pair(length_differential(surf, mu), earthquake_vector(surf, lam))


# ---------------------------------------------------------------------------
# geometric cosine pairing


class WordEnumerationError(RuntimeError):
    """Could not locate all intersection lifts within the word-length budget."""


def _finite(p: tuple[float, float]) -> float | None:
    return None if p[1] == 0.0 else p[0]


def _crossing_lifts(
    surf: MarkedSurface,
    alpha: Slope,
    beta: Slope,
    max_word_len: int,
    dedupe_tol: float = 1e-9,
    frontier_cap: int = 300_000,
) -> list[Geodesic]:
    """Lifts of beta whose axes cross the alpha-axis, one per intersection point.

    Works in the alpha-diagonal gauge (alpha-axis = the vertical (0, inf));
    conjugate axes are deduplicated by crossing position along the alpha-axis
    modulo l_alpha, which enumerates the intersection points of the two
    closed geodesics exactly once each.
    """
    inum = intersection_number(alpha, beta)
    if inum == 0:
        raise ValueError("slopes do not intersect")
    m = marking_to_infinity(alpha)
    tilde = remark(surf, m)
    g = gauge_matrices(tilde)
    mats = {"A": g.mat_a(), "a": g.mat_a().inv(), "B": g.mat_b(), "b": g.mat_b().inv()}
    beta_axis = axis(holonomy_of_slope(tilde, m.apply(beta)))
    ell_alpha = length_from_trace(tilde.x)
    found: dict[int, Geodesic] = {}

    def consider(conj: Mat2):
        ax = Geodesic(conj.apply_boundary(beta_axis.start), conj.apply_boundary(beta_axis.end))
        u, v = _finite(ax.start), _finite(ax.end)
        if u is None or v is None or u == 0.0 or v == 0.0 or (u < 0.0) == (v < 0.0):
            return
        pos_mod = (0.5 * math.log(abs(u) * abs(v))) % ell_alpha
        if ell_alpha - pos_mod < 10.0 * dedupe_tol:
            pos_mod = 0.0
        key = int(round(pos_mod / dedupe_tol))
        if any(k in found for k in (key - 1, key, key + 1)):
            return
        found[key] = ax

    consider(Mat2.identity())
    frontier = [(Mat2.identity(), "")]
    for _ in range(max_word_len):
        if len(found) >= inum:
            break
        nxt = []
        for mat, last in frontier:
            for sym, gen in mats.items():
                if last and sym == last.swapcase():
                    continue
                m2 = (mat @ gen).normalize()
                consider(m2)
                nxt.append((m2, sym))
        frontier = nxt
        if len(frontier) > frontier_cap:
            raise WordEnumerationError("word enumeration overflow in crossing-lift search")
    if len(found) != inum:
        raise WordEnumerationError(
            f"found {len(found)} of {inum} intersection lifts within word length {max_word_len}"
        )
    return [found[k] for k in sorted(found)]


_ALPHA_AXIS = Geodesic((0.0, 1.0), (1.0, 0.0))


def cosine_pairing(surf: MarkedSurface, alpha: Slope, beta: Slope, max_word_len: int = 14) -> float:
    """Sum over intersection points of cos(angle from beta to alpha).

    Equals <d l_beta, e_alpha> (the derivative of l_beta along the left
    earthquake flow of alpha); each term has absolute value below one.
    """
    if alpha == beta:
        return 0.0
    lifts = _crossing_lifts(surf, alpha, beta, max_word_len)
    return float(sum(math.cos(angle_at_intersection(ax, _ALPHA_AXIS)) for ax in lifts))


def intersection_angles(surf: MarkedSurface, alpha: Slope, beta: Slope, max_word_len: int = 14) -> list[float]:
    """Anticlockwise angles from alpha to beta at each intersection point."""
    lifts = _crossing_lifts(surf, alpha, beta, max_word_len)
    return sorted(angle_at_intersection(_ALPHA_AXIS, ax) for ax in lifts)


# ---------------------------------------------------------------------------
# systole


def systole(surf: MarkedSurface, max_depth: int = 6000) -> tuple[Slope, float]:
    """Shortest slope and its length, certified by trace growth down the tree.

    A Farey triangle whose mediant trace is at least both endpoint traces
    heads a subtree in which every deeper trace exceeds the mediant trace
    (mediant' = tL*tM - tR >= (tL - 1) tM > tM on the locus), so the branch
    can be pruned once the mediant trace exceeds the incumbent.
    """
    base = [
        (Slope(0, 1), surf.y),
        (Slope(1, 0), surf.x),
        (Slope(1, 1), surf.z),
        (Slope(-1, 1), surf.x * surf.y - surf.z),
    ]
    best_slope, best_trace = base[0]
    for sl, tr in base[1:]:
        if tr < best_trace - 1e-12:
            best_slope, best_trace = sl, tr

    w = surf.x * surf.y - surf.z
    # triangle state: (depth, lp, lq, rp, rq, tL, tR, tM, sign) with sign -1
    # for the mirrored (negative-slope) tree; tM is the mediant trace
    stack = [
        (1, 0, 1, 1, 1, surf.y, surf.z, surf.y * surf.z - surf.x, 1),
        (1, 1, 1, 1, 0, surf.z, surf.x, surf.z * surf.x - surf.y, 1),
        (1, 0, 1, 1, 1, surf.y, w, surf.y * w - surf.x, -1),
        (1, 1, 1, 1, 0, w, surf.x, w * surf.x - surf.y, -1),
    ]
    steps = 0
    while stack:
        steps += 1
        if steps > 4_000_000:
            raise CertificationError("systole search exceeded its certification budget")
        depth, lp, lq, rp, rq, t_l, t_r, t_m, sign = stack.pop()
        if depth > max_depth:
            raise CertificationError(f"systole not certified within depth {max_depth}")
        mp, mq = lp + rp, lq + rq
        if t_m < best_trace - 1e-12:
            best_slope, best_trace = Slope(sign * mp, mq), t_m
        if t_m >= max(t_l, t_r) and t_m >= best_trace - 1e-12:
            continue  # certified: every deeper trace exceeds t_m
        stack.append((depth + 1, lp, lq, mp, mq, t_l, t_m, t_l * t_m - t_r, sign))
        stack.append((depth + 1, mp, mq, rp, rq, t_m, t_r, t_m * t_r - t_l, sign))
    return best_slope, length_from_trace(best_trace)


def systole_length(surf: MarkedSurface) -> float:
    return systole(surf)[1]


# ---------------------------------------------------------------------------
# Fenchel-Nielsen coordinates


def dual_slope(alpha: Slope) -> Slope:
    """Canonical slope with intersection number one against alpha."""
    m = marking_to_infinity(alpha)
    return m.inv().apply(Slope(0, 1))


def fn_coordinates(surf: MarkedSurface, alpha: Slope) -> tuple[float, float]:
    """(length, twist) of alpha; the twist origin is the surface minimizing
    the canonical dual length along the twist orbit, and tau increases along
    left twists."""
    m = marking_to_infinity(alpha)
    xx, yy, zz = _remark_triangle_traces(surf, m)
    tilde = MarkedSurface(xx, yy, _farey_corrected_z(xx, yy, zz))
    g = gauge_matrices(tilde)
    ell = length_from_trace(tilde.x)
    # dual trace along the orbit is p e^{u/2} + s e^{-u/2}, minimized at
    # u* = log(s/p); the signed twist from the minimizer is -u*.
    tau = math.log(g.p / g.s)
    return ell, tau


# ---------------------------------------------------------------------------
# Taylor remainder experiment


def taylor_remainder_check(
    surf: MarkedSurface,
    gamma: Slope,
    delta: Slope,
    t_lo: float = 1e-4,
    t_hi: float = 1e-2,
    n_points: int = 12,
) -> dict:
    """Fit the log-log slope of |tr_delta(E_t) - tr_delta - phi1 t| on [t_lo, t_hi].

    E_t is the unit-speed earthquake along gamma (displacement t / l_gamma);
    phi1 is the analytic first derivative.  A quadratic remainder gives a
    fitted exponent near 2.
    """
    if gamma == delta:
        raise ValueError("the remainder check needs delta distinct from gamma")
    ell = length_of_slope(surf, gamma)
    t0 = trace_of_slope(surf, delta)
    phi1 = pair_trace_derivative(surf, delta, gamma) / ell
    ts = np.geomspace(t_lo, t_hi, n_points)
    rems = []
    for t in ts:
        s2 = twist(surf, gamma, t / ell)
        rems.append(abs(trace_of_slope(s2, delta) - t0 - phi1 * t))
    rems = np.array(rems)
    if np.any(rems <= 0.0):
        raise ConvergenceError("degenerate remainder (exact cancellation)")
    slope_fit, intercept = np.polyfit(np.log(ts), np.log(rems), 1)
    return {
        "exponent": float(slope_fit),
        "phi1": float(phi1),
        "remainders": rems.tolist(),
        "t_values": ts.tolist(),
    }


def pair_trace_derivative(surf: MarkedSurface, delta: Slope, gamma: Slope) -> float:
    """d/dt tr_delta(twist(surf, gamma, t)) at t = 0, analytic."""
    m = marking_to_infinity(gamma)
    xx, yy, zz = _remark_triangle_traces(surf, m)
    g = gauge_matrices(MarkedSurface(xx, yy, _farey_corrected_z(xx, yy, zz)))
    dy = (g.p - g.s) / 2.0
    dz = (g.lam * g.p - g.s / g.lam) / 2.0
    grad = _offshell_gradient(xx, yy, zz, m.apply(delta))
    return float(grad[1] * dy + grad[2] * dz)


# ---------------------------------------------------------------------------
# sampling helpers


def random_surface(
    rng: np.random.Generator,
    trace_lo: float = 3.0,
    trace_hi: float = 6.5,
    min_disc: float = 1.0,
) -> MarkedSurface:
    """Seeded random surface in the thick-ish part of the Fuchsian locus."""
    for _ in range(1000):
        x = rng.uniform(trace_lo, trace_hi)
        y = rng.uniform(trace_lo, trace_hi)
        disc = (x * y) ** 2 - 4.0 * (x * x + y * y)
        if disc < min_disc:
            continue
        branch = "lower" if rng.uniform() < 0.5 else "upper"
        try:
            return from_traces(x, y, branch)
        except SurfaceError:
            continue
    raise RuntimeError("failed to sample a surface")


def pinched_surface(ell_alpha: float, margin: float = 0.2) -> MarkedSurface:
    """Surface whose 1/0 curve has the given short length; dual curve near
    the shortest value compatible with the cusp."""
    x = 2.0 * math.cosh(ell_alpha / 2.0)
    y_min = 2.0 * x / math.sqrt(x * x - 4.0)
    return from_traces(x, y_min * (1.0 + margin), "lower")
