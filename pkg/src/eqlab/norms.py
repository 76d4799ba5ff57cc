"""Finsler norms at a point: earthquake, Thurston and Weil-Petersson, plus
the indicatrix, symplectic duality residual, symmetrizations and the
direction-wise asymmetry sweep.

The earthquake norm of a twist vector is the length of its lamination; the
inverse problem (which lamination produced a given tangent vector?) is
solved by bisection over the projective slope circle, walking mediants of
the Stern-Brocot fan, which doubles as the continued-fraction refinement of
the matched direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import torus
from .hyp2 import length_from_trace
from .torus import (
    MarkedSurface,
    Slope,
    TangentVector,
    WeightedCurve,
    marking_to_infinity,
)


class DirectionMatchError(RuntimeError):
    """Inverse earthquake solver failed to match the requested direction."""


class WindingError(RuntimeError):
    """The slope-to-direction map failed its circle-homeomorphism check."""


class TruncationError(RuntimeError):
    """A truncated group sum shows a non-decreasing residual trend."""


# ---------------------------------------------------------------------------
# projective slope fan
#
# Rays of the lamination space are integer vectors (p, q) on the right half
# circle from (0, 1) through (1, 0) to (0, -1); the slope value runs once
# through R union {inf}.  Consecutive fan vectors are Farey neighbours, so
# the mediant (vector sum) refines any bracket.


def slope_fan(depth: int) -> list[tuple[int, int]]:
    """Ray vectors of the half-circle Stern-Brocot fan, mediant-complete."""
    fan = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    for _ in range(depth):
        new = [fan[0]]
        for left, right in zip(fan, fan[1:]):
            new.append((left[0] + right[0], left[1] + right[1]))
            new.append(right)
        fan = new
    return fan


def _ray_slope(vec: tuple[int, int]) -> Slope:
    return Slope(vec[0], vec[1])


@dataclass
class _SurfaceCache:
    """Per-surface data for fast earthquake vectors via symplectic duality."""

    surf: MarkedSurface
    omega: float  # coefficient of the WP symplectic form in the (x, y) chart
    grid_chis: np.ndarray | None = None
    grid_angs: np.ndarray | None = None
    winding_ok: bool = False

    @staticmethod
    def build(surf: MarkedSurface) -> "_SurfaceCache":
        alpha = Slope(1, 0)
        e_alpha = torus.twist_velocity(surf, alpha)
        g_alpha = torus.length_differential(surf, alpha)
        # omega (w x e) = dl(w) for the twist vector of alpha
        cands = []
        if abs(e_alpha[1]) > 1e-12:
            cands.append(g_alpha[0] / e_alpha[1])
        if abs(e_alpha[0]) > 1e-12:
            cands.append(-g_alpha[1] / e_alpha[0])
        if not cands:
            raise RuntimeError("degenerate twist vector while calibrating the symplectic form")
        if len(cands) == 2 and abs(cands[0] - cands[1]) > 1e-8 * max(abs(c) for c in cands):
            raise RuntimeError("inconsistent symplectic coefficient; chart may be folded")
        return _SurfaceCache(surf, float(np.mean(cands)))

    def earthquake_vec(self, gamma: Slope) -> tuple[np.ndarray, float]:
        """(chart components of e_gamma, l_gamma) via omega-duality.

        Runs on log traces, so arbitrarily deep slopes stay in range.
        """
        log_t, grad = torus.trace_log_gradient(self.surf, gamma)
        dl = (2.0 / math.sqrt(1.0 - 4.0 * math.exp(-2.0 * log_t))) * grad
        vec = np.array([-dl[1], dl[0]]) / self.omega
        return vec, torus.length_from_log_trace(log_t)


_cache_store: dict[tuple[float, float, float], _SurfaceCache] = {}


def _surface_cache(surf: MarkedSurface) -> _SurfaceCache:
    key = (surf.x, surf.y, surf.z)
    hit = _cache_store.get(key)
    if hit is None:
        if len(_cache_store) > 4096:
            _cache_store.clear()
        hit = _SurfaceCache.build(surf)
        _cache_store[key] = hit
    return hit


def unit_earthquake_point(surf: MarkedSurface, gamma: Slope) -> np.ndarray:
    """Indicatrix point e_gamma / l_gamma in chart components."""
    vec, ell = _surface_cache(surf).earthquake_vec(gamma)
    return vec / ell


def winding_check(surf: MarkedSurface, depth: int = 6, tol: float = 0.3) -> np.ndarray:
    """Verify the slope-to-direction map winds once and monotonically.

    Returns the unwrapped direction angles along the fan; raises
    WindingError on a failed check.
    """
    cache = _surface_cache(surf)
    fan = slope_fan(depth)
    angs = []
    for vec in fan:
        e, _ = cache.earthquake_vec(_ray_slope(vec))
        angs.append(math.atan2(e[1], e[0]))
    unwrapped = np.unwrap(np.array(angs))
    total = unwrapped[-1] - unwrapped[0]
    if abs(abs(total) - 2.0 * math.pi) > tol:
        raise WindingError(f"direction map winding {total} is not a full turn")
    steps = np.diff(unwrapped)
    if np.any(steps * np.sign(total) < -1e-9):
        raise WindingError("direction map is not monotone along the fan")
    return unwrapped


def earthquake_norm(
    v: TangentVector,
    rel_tol: float = 1e-6,
    max_iter: int = 120,
    grid: int = 256,
    cf_depth: int = 22,
    angle_tol: float = 1e-8,
) -> tuple[float, WeightedCurve]:
    """Earthquake norm of v and the weighted slope approximating its lamination.

    Solves e_lambda(x) = v: the slope-circle parameter chi (slope = tan chi)
    is bisected against the direction of e, each evaluation rationalizing
    tan(chi) by continued fractions; the weight is then the component ratio.
    Refinement continues until the norm stabilizes to rel_tol and the
    direction residual drops below angle_tol.
    """
    if v.norm2() == 0.0:
        raise ValueError("zero vector has no direction")
    surf = v.base
    cache = _surface_cache(surf)
    if not cache.winding_ok:
        winding_check(surf)  # homeomorphism precondition of the bisection
        cache.winding_ok = True
    target = math.atan2(v.dy, v.dx)

    def slope_at(chi: float) -> Slope:
        return torus.slope_from_float(math.tan(chi), max_depth=cf_depth)

    def angle_at(chi: float) -> float:
        e, _ = cache.earthquake_vec(slope_at(chi))
        return math.atan2(e[1], e[0])

    chis, angs = _direction_grid(cache, grid)
    sign = 1.0 if angs[-1] > angs[0] else -1.0
    mono = sign * angs
    t = sign * target
    while t < mono[0]:
        t += 2.0 * math.pi
    while t > mono[-1]:
        t -= 2.0 * math.pi
    idx = int(np.clip(np.searchsorted(mono, t), 1, len(chis) - 1))
    lo, hi = chis[idx - 1], chis[idx]
    a_lo = mono[idx - 1]

    prev_norm = None
    best: tuple[float, WeightedCurve] | None = None
    gap = math.inf
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gamma = slope_at(mid)
        e, ell = cache.earthquake_vec(gamma)
        a = sign * math.atan2(e[1], e[0])
        while a < a_lo - math.pi:
            a += 2.0 * math.pi
        while a > a_lo + math.pi:
            a -= 2.0 * math.pi
        weight = v.norm2() / float(np.hypot(e[0], e[1]))
        norm = weight * ell
        gap = _angle_gap(sign * a, target)
        best = (norm, WeightedCurve(gamma, weight))
        if gap < angle_tol and prev_norm is not None and abs(norm - prev_norm) <= rel_tol * abs(norm):
            return norm, WeightedCurve(gamma, weight)
        prev_norm = norm
        if a > t:
            hi = mid
        else:
            lo, a_lo = mid, a
    if best is not None and gap < 1e-6:
        return best
    raise DirectionMatchError(f"no direction match within {max_iter} bisections (residual {gap})")


def _angle_gap(a: float, b: float) -> float:
    d = (a - b) % (2.0 * math.pi)
    return min(d, 2.0 * math.pi - d)


# ---------------------------------------------------------------------------
# indicatrix


@dataclass
class IndicatrixSample:
    """Ordered unit-sphere sample of the earthquake norm."""

    base: MarkedSurface
    params: np.ndarray  # slope circle parameters in [0, pi)
    points: np.ndarray  # shape (n, 2), chart components, earthquake norm 1

    def cross_products(self) -> np.ndarray:
        """Normalized turn sines of consecutive sample triples."""
        pts = self.points
        d1 = np.roll(pts, -1, axis=0) - pts
        d2 = np.roll(pts, -2, axis=0) - np.roll(pts, -1, axis=0)
        raw = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        norm = np.linalg.norm(d1, axis=1) * np.linalg.norm(d2, axis=1)
        return raw / np.maximum(norm, 1e-300)

    def convexity_report(self, collinear_tol: float = 1e-8) -> dict:
        """Count convexity violations among well-resolved triples.

        Triples with |normalized cross| below collinear_tol are reported as
        numerically flat (the indicatrix flattens exponentially fast towards
        rational directions, far below double precision) and do not count as
        sign flips; a flip beyond the tolerance is a genuine violation.
        """
        cr = self.cross_products()
        dominant = 1.0 if np.median(cr) >= 0 else -1.0
        flips = int(np.sum(cr * dominant < -collinear_tol))
        flat = int(np.sum(np.abs(cr) <= collinear_tol))
        return {
            "sign_flips": flips,
            "flat_triples": flat,
            "min_signed_cross": float(np.min(cr * dominant)),
            "orientation": dominant,
        }

    def origin_inside(self) -> bool:
        angles = np.arctan2(self.points[:, 1], self.points[:, 0])
        total = np.sum((np.diff(np.concatenate([angles, angles[:1]])) + math.pi) % (2 * math.pi) - math.pi)
        return abs(abs(total) - 2.0 * math.pi) < 1e-6


def _direction_grid(cache: _SurfaceCache, grid: int = 256):
    """Cached monotone table chi -> direction angle of e_{slope(tan chi)}."""
    if cache.grid_chis is None or len(cache.grid_chis) != grid + 1:
        base = (np.arange(grid) + 0.5) * math.pi / grid
        angs = []
        for chi in base:
            e, _ = cache.earthquake_vec(torus.slope_from_float(math.tan(chi), max_depth=12, digit_budget=150))
            angs.append(math.atan2(e[1], e[0]))
        angs = np.unwrap(np.array(angs))
        wrap = 2.0 * math.pi if angs[-1] > angs[0] else -2.0 * math.pi
        cache.grid_chis = np.concatenate([base, [base[0] + math.pi]])
        cache.grid_angs = np.concatenate([angs, [angs[0] + wrap]])
    return cache.grid_chis, cache.grid_angs


def _chi_at_direction(cache: _SurfaceCache, phi: float, iters: int = 24, cf_depth: int = 14) -> float:
    """Slope-circle parameter whose earthquake direction is phi (bisection)."""
    chis, angs = _direction_grid(cache)
    sign = 1.0 if angs[-1] > angs[0] else -1.0
    mono = sign * angs
    t = sign * phi
    while t < mono[0]:
        t += 2.0 * math.pi
    while t > mono[-1]:
        t -= 2.0 * math.pi
    idx = int(np.clip(np.searchsorted(mono, t), 1, len(chis) - 1))
    lo, hi = chis[idx - 1], chis[idx]
    a_lo = mono[idx - 1]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        e, _ = cache.earthquake_vec(torus.slope_from_float(math.tan(mid), max_depth=cf_depth, digit_budget=200))
        a = sign * math.atan2(e[1], e[0])
        while a < a_lo - math.pi:
            a += 2.0 * math.pi
        while a > a_lo + math.pi:
            a -= 2.0 * math.pi
        if a > t:
            hi = mid
        else:
            lo, a_lo = mid, a
    return 0.5 * (lo + hi)


def indicatrix(surf: MarkedSurface, n_samples: int = 720) -> IndicatrixSample:
    """n ordered points e_gamma / l_gamma sweeping the projective slope circle.

    Samples are spaced uniformly in tangent direction (found by inverting
    the slope-to-direction homeomorphism), so consecutive points are well
    separated; the stored parameter is the slope-circle coordinate chi of
    each sample, strictly monotone around the circle.
    """
    if n_samples < 16:
        raise ValueError("need at least 16 samples")
    cache = _surface_cache(surf)
    phis = (np.arange(n_samples) + 0.5) * 2.0 * math.pi / n_samples
    params = np.empty(n_samples)
    pts = np.empty((n_samples, 2))
    for i, phi in enumerate(phis):
        chi = _chi_at_direction(cache, phi)
        params[i] = chi % math.pi
        gamma = torus.slope_from_float(math.tan(chi), max_depth=14, digit_budget=200)
        vec, ell = cache.earthquake_vec(gamma)
        pts[i] = vec / ell
    return IndicatrixSample(surf, params, pts)


# ---------------------------------------------------------------------------
# Thurston norm


def refine_sup_on_circle(value_at_param, chi0: float, half_window: float, steps: int = 30) -> tuple[float, float]:
    """Golden-section polish of a slope-circle supremum near parameter chi0.

    value_at_param maps a circle parameter chi (slope = tan chi) to a value;
    returns (best value, best parameter).  Rational slopes are produced by
    continued-fraction approximation inside value_at_param.
    """
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = chi0 - half_window, chi0 + half_window
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = value_at_param(c), value_at_param(d)
    for _ in range(steps):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = value_at_param(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = value_at_param(d)
    return (fc, c) if fc >= fd else (fd, d)


def _param_of_slope(s: Slope) -> float:
    """Circle parameter chi in (0, pi) with slope value tan(chi)."""
    return math.atan2(s.p, s.q) if s.q != 0 else math.pi / 2.0


def thurston_norm(
    v: TangentVector,
    depth: int = 12,
    refine_steps: int = 30,
    report_tol: float = 1e-6,
) -> tuple[float, float, Slope]:
    """Bracket [best, best * (1 + report_tol)] for sup over slopes of
    <d log l_gamma, v>, with the witnessing slope."""
    if v.norm2() == 0.0:
        raise ValueError("zero vector")
    surf = v.base
    slopes, ells, dl = torus.enumerate_lengths(surf, depth, grad=True)
    vals = (dl[:, 0] * v.dx + dl[:, 1] * v.dy) / ells
    best_idx = int(np.argmax(vals))
    best_val = float(vals[best_idx])
    best_slope = slopes[best_idx]

    def value_at(chi: float) -> float:
        gamma = torus.slope_from_float(math.tan(chi), max_depth=22)
        log_t, g = torus.trace_log_gradient(surf, gamma)
        ell = torus.length_from_log_trace(log_t)
        s = 2.0 / math.sqrt(1.0 - 4.0 * math.exp(-2.0 * log_t))
        return (s * g[0] * v.dx + s * g[1] * v.dy) / ell

    window = _param_window(slopes, best_idx)
    ref_val, _ = refine_sup_on_circle(value_at, _param_of_slope(best_slope), window, refine_steps)
    if ref_val > best_val:
        best_val = ref_val
    return best_val, best_val * (1.0 + report_tol), best_slope


def _param_window(slopes: list[Slope], best_idx: int) -> float:
    """Half-width of the parameter cell around the argmax of an enumeration."""
    params = np.sort(np.array([_param_of_slope(s) for s in slopes]))
    chi = _param_of_slope(slopes[best_idx])
    pos = np.searchsorted(params, chi)
    gaps = []
    if pos > 0:
        gaps.append(chi - params[pos - 1])
    if pos + 1 < len(params):
        gaps.append(params[min(pos + 1, len(params) - 1)] - chi)
    gap = max(g for g in gaps if g >= 0.0) if gaps else math.pi / 256.0
    return max(gap, 1e-9)


# ---------------------------------------------------------------------------
# Weil-Petersson: Riera gram sums, tensor reconstruction, norm


def _riera_terms(u: np.ndarray) -> np.ndarray:
    """u log((u+1)/(u-1)) - 2 evaluated through |.|, covering both the
    disjoint (u = cosh d > 1) and crossing (u = |cos theta| < 1) cases;
    the summand is even in u, so the sign ambiguity of cos is harmless.

    Large u cancels catastrophically in the direct form (the value decays
    like 2/(3u^2) while the subtraction noise is O(eps)), so the far tail
    switches to the asymptotic series.
    """
    a = np.abs(np.asarray(u, dtype=float))
    out = np.full_like(a, -2.0)
    far = a > 100.0
    if np.any(far):
        af = a[far]
        inv2 = 1.0 / (af * af)
        out[far] = inv2 * (2.0 / 3.0 + inv2 * (2.0 / 5.0 + inv2 * (2.0 / 7.0)))
    mid = (~far) & (a > 1.0 + 1e-14)
    if np.any(mid):
        am = a[mid]
        out[mid] = am * np.log1p(2.0 / (am - 1.0)) - 2.0
    low = (~far) & (a < 1.0 - 1e-14)
    if np.any(low):
        al = a[low]
        out[low] = al * np.log((1.0 + al) / (1.0 - al)) - 2.0
    return out


@dataclass
class GramResult:
    value: float
    partials: list[float]
    n_cosets: int
    reliable: bool


def _as_np(m) -> np.ndarray:
    return np.array([[m.a, m.b], [m.c, m.d]])


def _axis_endpoint_vectors(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Projective endpoint column vectors of the axis of a hyperbolic matrix."""
    a, b, c, d = w[0, 0], w[0, 1], w[1, 0], w[1, 1]
    if abs(c) < 1e-300:
        return np.array([1.0, 0.0]), np.array([b, d - a])
    disc = (a - d) ** 2 + 4.0 * b * c
    sq = math.sqrt(disc)
    t1 = ((a - d) + sq) / (2.0 * c)
    t2 = ((a - d) - sq) / (2.0 * c)
    return np.array([t1, 1.0]), np.array([t2, 1.0])


def wp_gram(
    surf: MarkedSurface,
    gamma1: Slope,
    gamma2: Slope,
    wordlen_cutoff: int = 14,
    pos_tol: float = 1e-7,
    block: int = 400_000,
) -> GramResult:
    """Truncated double-coset sum for <grad l_gamma1, grad l_gamma2>_WP.

    (2/pi) [ l_gamma1 * delta_{gamma1 gamma2} + sum over double cosets of
    u log((u+1)/(u-1)) - 2 ] with u = cosh(distance) between the axis of
    gamma1 and a conjugated axis of gamma2 when disjoint, |cos(angle)| when
    crossing.  Cosets are deduplicated by the conjugated axis normalized
    modulo the deck translation along gamma1.  Partial sums at increasing
    word lengths form the truncation diagnostic; a non-decreasing residual
    trend marks the result unreliable.
    """
    if wordlen_cutoff < 4:
        raise ValueError("cutoff must be at least 4")
    m = marking_to_infinity(gamma1)
    tilde = torus.remark(surf, m)
    g = torus.gauge_matrices(tilde)
    same = gamma1 == gamma2
    w2 = _as_np(g.mat_a()) if same else _as_np(torus.holonomy_of_slope(tilde, m.apply(gamma2)))
    e1, e2 = _axis_endpoint_vectors(w2)
    ell1 = length_from_trace(tilde.x)

    gens = np.stack(
        [
            _as_np(g.mat_a()),
            _as_np(g.mat_a().inv()),
            _as_np(g.mat_b()),
            _as_np(g.mat_b().inv()),
        ]
    )
    inverse_of = np.array([1, 0, 3, 2])
    conjs = np.eye(2)[None, :, :]
    last = np.array([-1])
    seen = np.empty(0, dtype=np.int64)
    total = 0.0
    partials: list[float] = []
    base = (2.0 / math.pi) * ell1 if same else 0.0
    for level in range(wordlen_cutoff + 1):
        terms, keys = _gram_terms(conjs, e1, e2, ell1, pos_tol, same)
        if keys.size:
            uniq_keys, first_idx = np.unique(keys, return_index=True)
            fresh = ~np.isin(uniq_keys, seen, assume_unique=False)
            if np.any(fresh):
                total += float(np.sum(terms[first_idx][fresh]))
                seen = np.union1d(seen, uniq_keys[fresh])
        partials.append(base + (2.0 / math.pi) * total)
        if level == wordlen_cutoff:
            break
        # grow the frontier in blocks, avoiding immediate cancellation; words
        # starting with A^{+-1} are skipped (left coset by the gamma1 deck
        # group), which the axis dedup also makes redundant
        pieces_m, pieces_l = [], []
        for s in range(0, conjs.shape[0], block):
            cm, cl = conjs[s : s + block], last[s : s + block]
            keep = cl[:, None] != inverse_of[None, :]
            if level == 0:
                keep[:, 0] = False
                keep[:, 1] = False
            prod = np.einsum("nij,gjk->ngik", cm, gens)
            pieces_m.append(prod[keep])
            pieces_l.append(np.tile(np.arange(4), cm.shape[0])[keep.reshape(-1)])
        conjs = np.concatenate(pieces_m, axis=0)
        last = np.concatenate(pieces_l)
        # projective entrywise normalization: scale-free and stable even when
        # gauge entries are huge (pinched surfaces)
        scale = np.max(np.abs(conjs), axis=(1, 2))
        conjs = conjs / scale[:, None, None]
    value = partials[-1]
    increments = np.abs(np.diff(partials))
    reliable = True
    if increments.size >= 4:
        tail = increments[-3:]
        reliable = bool(tail[-1] <= increments[-4] + 1e-15 or tail[-1] < 1e-10 * max(1.0, abs(value)))
    return GramResult(value, partials, int(seen.size), reliable)


def _gram_terms(conjs: np.ndarray, e1: np.ndarray, e2: np.ndarray, ell1: float, tol: float, same: bool):
    """Riera summands and axis dedup keys for a batch of conjugating matrices."""
    p1 = conjs @ e1
    p2 = conjs @ e2
    with np.errstate(divide="ignore", invalid="ignore"):
        a = p1[:, 0] / p1[:, 1]
        b = p2[:, 0] / p2[:, 1]
    ok = (
        np.isfinite(a)
        & np.isfinite(b)
        & (a != 0.0)
        & (b != 0.0)
        & (np.abs(a - b) > 1e-12 * (np.abs(a) + np.abs(b)))
    )
    a, b = a[ok], b[ok]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        uval = np.abs(a + b) / np.abs(b - a)
        pos = 0.5 * np.log(np.abs(a) * np.abs(b))
        ratio = np.log(np.abs(a / b))
    ok2 = np.isfinite(uval) & np.isfinite(pos) & np.isfinite(ratio)
    uval, pos, ratio, a, b = uval[ok2], pos[ok2], ratio[ok2], a[ok2], b[ok2]
    if same:
        # distinct lifts of one simple geodesic never cross; |u| near or
        # below 1 flags a numerically degenerate conjugate, not a term
        keep = uval > 1.0 + 1e-9
        uval, pos, ratio, a, b = uval[keep], pos[keep], ratio[keep], a[keep], b[keep]
    pos_mod = np.mod(pos, ell1)
    pos_mod[ell1 - pos_mod < 10.0 * tol] = 0.0
    # the pair (position mod deck step, endpoint ratio, endpoint signs)
    # identifies the conjugated axis, hence the double coset
    pos_b = np.round(pos_mod / tol).astype(np.int64)
    rat_b = np.clip(np.round(ratio / (10.0 * tol)), -2**27, 2**27).astype(np.int64)
    signs = (a > 0).astype(np.int64) + 2 * (b > 0).astype(np.int64)
    key = pos_b * np.int64(2**31) + rat_b * np.int64(4) + signs
    return _riera_terms(uval), key


def wp_gradient_pairing(surf: MarkedSurface, g1: Slope, g2: Slope, cutoff: int = 12) -> float:
    return wp_gram(surf, g1, g2, cutoff).value


@dataclass
class WPTensor:
    """Symmetric positive-definite metric in the (x, y) chart."""

    base: MarkedSurface
    g11: float
    g12: float
    g22: float
    condition: float
    residual: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])

    def norm(self, v: TangentVector) -> float:
        w = v.components()
        val = float(w @ self.matrix() @ w)
        if val < 0.0:
            raise RuntimeError("tensor lost positivity")
        return math.sqrt(val)


class TensorError(RuntimeError):
    pass


def wp_tensor(
    surf: MarkedSurface,
    slopes: tuple[Slope, Slope, Slope] = (Slope(0, 1), Slope(1, 0), Slope(1, 1)),
    cutoff: int = 12,
) -> WPTensor:
    """Reconstruct the WP metric from Riera gram values of three slopes.

    Solves dl_i G^{-1} dl_j^T = Gram_ij in least squares over all six pairs,
    then inverts; positive definiteness is enforced.
    """
    grads = [torus.length_differential(surf, s) for s in slopes]
    rows, rhs = [], []
    for i in range(3):
        for j in range(i, 3):
            gi, gj = grads[i], grads[j]
            rows.append([gi[0] * gj[0], gi[0] * gj[1] + gi[1] * gj[0], gi[1] * gj[1]])
            gram = wp_gram(surf, slopes[i], slopes[j], cutoff)
            rhs.append(gram.value)
    rows, rhs = np.array(rows), np.array(rhs)
    sol, res, rank, _ = np.linalg.lstsq(rows, rhs, rcond=None)
    if rank < 3:
        raise TensorError("gram system is rank deficient")
    h = np.array([[sol[0], sol[1]], [sol[1], sol[2]]])
    evals = np.linalg.eigvalsh(h)
    if evals.min() <= 0.0:
        raise TensorError(f"inverse metric not positive definite, eigenvalues {evals}")
    g = np.linalg.inv(h)
    cond = float(evals.max() / evals.min())
    residual = float(np.max(np.abs(rows @ sol - rhs)))
    return WPTensor(surf, g[0, 0], g[0, 1], g[1, 1], cond, residual)


def wp_norm(v: TangentVector, tensor: WPTensor | None = None, cutoff: int = 12) -> float:
    """Weil-Petersson norm sqrt(v^T G v)."""
    if tensor is None:
        tensor = wp_tensor(v.base, cutoff=cutoff)
    return tensor.norm(v)


def wp_twist_norm(surf: MarkedSurface, gamma: Slope, cutoff: int = 12) -> float:
    """||e_gamma||_WP = (1/2) ||grad l_gamma||_WP via the diagonal gram sum."""
    gram = wp_gram(surf, gamma, gamma, cutoff)
    return 0.5 * math.sqrt(max(0.0, gram.value))


# ---------------------------------------------------------------------------
# duality residual


def duality_check(
    surf: MarkedSurface,
    beta: Slope,
    alpha: Slope | None = None,
    step: float = 1e-5,
) -> float:
    """Sup-norm residual between omega(. , e_beta / l_beta) and d log l_beta.

    omega = dl_alpha ^ dtau_alpha is assembled from finite differences of the
    Fenchel-Nielsen functions of a reference curve alpha crossing beta.
    """
    if alpha is None:
        alpha = Slope(1, 0) if beta != Slope(1, 0) else Slope(0, 1)
    if torus.intersection_number(alpha, beta) < 1 and alpha != beta:
        raise ValueError("reference curve must cross beta")

    def fn(s2: MarkedSurface) -> np.ndarray:
        ell, tau = torus.fn_coordinates(s2, alpha)
        return np.array([ell, tau])

    x0 = np.array([surf.x, surf.y])
    jac = np.empty((2, 2))
    for k in range(2):
        h = step * max(1.0, abs(x0[k]))
        sp = _surface_at(x0 + h * _unit(k), surf)
        sm = _surface_at(x0 - h * _unit(k), surf)
        jac[:, k] = (fn(sp) - fn(sm)) / (2.0 * h)
    e = torus.earthquake_vector(surf, beta)
    ell_beta = torus.length_of_slope(surf, beta)
    ehat = e.components() / ell_beta
    j_ehat = jac @ ehat
    lhs = np.array(
        [
            jac[0, 0] * j_ehat[1] - jac[1, 0] * j_ehat[0],
            jac[0, 1] * j_ehat[1] - jac[1, 1] * j_ehat[0],
        ]
    )
    rhs = torus.length_differential(surf, beta) / ell_beta
    return float(np.max(np.abs(lhs - rhs)))


def _unit(k: int) -> np.ndarray:
    v = np.zeros(2)
    v[k] = 1.0
    return v


def _surface_at(chart: np.ndarray, like: MarkedSurface) -> MarkedSurface:
    return torus.from_traces(float(chart[0]), float(chart[1]), like.branch)


# ---------------------------------------------------------------------------
# symmetrization and asymmetry


def symmetrized_norm(v: TangentVector, p: float) -> float:
    """((||v||^p + ||-v||^p)/2)^(1/p) built on the earthquake norm."""
    if not (p >= 1.0):
        raise ValueError("p must be in [1, inf]")
    n_plus, _ = earthquake_norm(v)
    n_minus, _ = earthquake_norm(-v)
    if math.isinf(p):
        return max(n_plus, n_minus)
    return (0.5 * (n_plus**p + n_minus**p)) ** (1.0 / p)


def asymmetry_ratio(surf: MarkedSurface, n_dirs: int = 64) -> tuple[float, float]:
    """Max over sampled unit directions of max(||-v||, 1/||-v||) for ||v|| = 1.

    Returns (ratio, witnessing slope-circle parameter).
    """
    if n_dirs < 64:
        raise ValueError("need at least 64 directions")
    cache = _surface_cache(surf)
    best, best_par = 1.0, 0.0
    for i in range(n_dirs):
        chi = (i + 0.5) * math.pi / n_dirs
        gamma = torus.slope_from_float(math.tan(chi), max_depth=22)
        vec, ell = cache.earthquake_vec(gamma)
        unit = vec / ell
        v = TangentVector(surf, unit[0], unit[1])
        n_minus, _ = earthquake_norm(-v)
        ratio = max(n_minus, 1.0 / n_minus)
        if ratio > best:
            best, best_par = ratio, chi
    return best, best_par
