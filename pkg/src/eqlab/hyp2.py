"""Upper half-plane primitives: Mobius actions, geodesics, axes, angles,
translation lengths, collar widths and horocyclic segments.

Boundary points of H^2 are stored projectively as pairs (u, w) with w in
{0.0, 1.0} after normalization, so that infinity = (1.0, 0.0) is a
first-class value and no code path ever divides by zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

HYPERBOLIC_EPS = 1e-10  # |tr| must exceed 2 + eps to count as hyperbolic
DET_TOL = 1e-12


class NonHyperbolicError(ValueError):
    """Input matrix is not (safely) hyperbolic."""


class ParabolicError(NonHyperbolicError):
    """|tr| = 2 up to tolerance."""


class EllipticError(NonHyperbolicError):
    """|tr| < 2."""


class MarginalTraceError(NonHyperbolicError):
    """|tr| is within HYPERBOLIC_EPS of 2: too close to classify safely."""


class GeodesicConfigError(ValueError):
    """Geodesics are disjoint, share an endpoint, or are otherwise degenerate."""


@dataclass(frozen=True)
class Mat2:
    """Real 2x2 matrix, normally of determinant one."""

    a: float
    b: float
    c: float
    d: float

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def tr(self) -> float:
        return self.a + self.d

    def normalize(self) -> "Mat2":
        """Rescale to determinant one; raises if det <= 0 or non-finite."""
        det = self.det()
        if not math.isfinite(det) or det <= 0.0:
            raise ValueError(f"cannot normalize matrix with det {det}")
        s = 1.0 / math.sqrt(det)
        m = Mat2(self.a * s, self.b * s, self.c * s, self.d * s)
        if abs(m.det() - 1.0) > DET_TOL:
            raise ValueError(f"normalization failed, det {m.det()}")
        return m

    def inv(self) -> "Mat2":
        det = self.det()
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @staticmethod
    def identity() -> "Mat2":
        return Mat2(1.0, 0.0, 0.0, 1.0)

    def apply_boundary(self, p: tuple[float, float]) -> tuple[float, float]:
        """Projective action on a boundary point (u, w)."""
        u, w = p
        return normalize_boundary((self.a * u + self.b * w, self.c * u + self.d * w))


def normalize_boundary(p: tuple[float, float]) -> tuple[float, float]:
    """Scale a projective pair so the second coordinate lies in {0, 1}."""
    u, w = p
    if u == 0.0 and w == 0.0:
        raise ValueError("zero vector is not a projective boundary point")
    # Treat w as zero when it is negligible against u; this keeps points that
    # drift to infinity under conjugation from exploding into huge floats.
    if abs(w) <= 1e-306 * max(1.0, abs(u)):
        return (1.0, 0.0)
    return (u / w, 1.0)


def boundary_value(p: tuple[float, float]) -> float:
    """Finite value of a normalized boundary point; +inf for the point at infinity."""
    u, w = p
    return math.inf if w == 0.0 else u


@dataclass(frozen=True)
class HPoint:
    """Point of the upper half plane."""

    re: float
    im: float

    def __post_init__(self):
        if not (self.im > 0.0) or not math.isfinite(self.re) or not math.isfinite(self.im):
            raise ValueError(f"not an interior point of H^2: {self.re} + {self.im}i")

    def as_complex(self) -> complex:
        return complex(self.re, self.im)


@dataclass(frozen=True)
class Geodesic:
    """Oriented geodesic of H^2 given by two distinct boundary endpoints.

    Endpoints are projective pairs; orientation (start, end) matters for
    callers that track attracting/repelling fixed points, but the
    intersection angle below only uses the order of the two geodesics.
    """

    start: tuple[float, float]
    end: tuple[float, float]

    def __post_init__(self):
        s = normalize_boundary(self.start)
        e = normalize_boundary(self.end)
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)
        if s == e:
            raise ValueError("geodesic endpoints must be distinct")

    @staticmethod
    def from_values(u: float, v: float) -> "Geodesic":
        """Build from real endpoint values, math.inf allowed."""
        def pack(x: float) -> tuple[float, float]:
            return (1.0, 0.0) if math.isinf(x) else (x, 1.0)

        return Geodesic(pack(u), pack(v))

    def reversed(self) -> "Geodesic":
        return Geodesic(self.end, self.start)


def apply_mobius(m: Mat2, p: HPoint) -> HPoint:
    """Fractional-linear action of a unit-determinant matrix on H^2."""
    z = p.as_complex()
    den = m.c * z + m.d
    w = (m.a * z + m.b) / den
    if not (w.imag > 0.0):
        raise ValueError("Mobius image left the upper half plane; check det(m) = 1")
    return HPoint(w.real, w.imag)


def apply_mobius_geodesic(m: Mat2, g: Geodesic) -> Geodesic:
    return Geodesic(m.apply_boundary(g.start), m.apply_boundary(g.end))


def classify_trace(tr: float) -> str:
    t = abs(tr)
    if t > 2.0 + HYPERBOLIC_EPS:
        return "hyperbolic"
    if t < 2.0 - HYPERBOLIC_EPS:
        return "elliptic"
    return "marginal"


def require_hyperbolic(m: Mat2) -> float:
    """Return |tr| after checking the element is safely hyperbolic."""
    t = abs(m.tr())
    kind = classify_trace(t)
    if kind == "hyperbolic":
        return t
    if kind == "elliptic":
        raise EllipticError(f"|tr| = {t} < 2: elliptic element")
    if abs(t - 2.0) <= HYPERBOLIC_EPS and t <= 2.0 + HYPERBOLIC_EPS:
        # exactly-2 traces are parabolic; anything else in the band is marginal
        if abs(t - 2.0) < 1e-15:
            raise ParabolicError("|tr| = 2: parabolic element")
        raise MarginalTraceError(f"|tr| = {t} within {HYPERBOLIC_EPS} of 2")
    raise NonHyperbolicError(f"unclassifiable trace {t}")


def translation_length(m: Mat2) -> float:
    """Hyperbolic translation length 2*arccosh(|tr|/2)."""
    t = require_hyperbolic(m)
    return 2.0 * math.acosh(t / 2.0)


def length_from_trace(tr: float) -> float:
    t = abs(tr)
    if t <= 2.0 + HYPERBOLIC_EPS:
        raise NonHyperbolicError(f"trace {tr} is not safely hyperbolic")
    return 2.0 * math.acosh(t / 2.0)


def axis(m: Mat2) -> Geodesic:
    """Axis of a hyperbolic element, oriented repelling -> attracting."""
    require_hyperbolic(m)
    # Fixed points solve c t^2 + (d-a) t - b = 0, projectively
    #   [t : 1] with (c t + d) an eigenvalue of m.
    if abs(m.c) < 1e-300:
        # infinity is fixed; the other fixed point is b/(a-d)
        p_inf = (1.0, 0.0)
        other = (m.b, m.d - m.a) if m.d != m.a else None
        if other is None:
            raise NonHyperbolicError("degenerate fixed point data")
        # eigenvalue at infinity is a; attracting iff |a| > |d|
        if abs(m.a) > abs(m.d):
            return Geodesic(other, p_inf)
        return Geodesic(p_inf, other)
    disc = (m.a - m.d) ** 2 + 4.0 * m.b * m.c  # = tr^2 - 4 det
    if disc <= 0.0:
        raise NonHyperbolicError("no real fixed points")
    sq = math.sqrt(disc)
    t1 = ((m.a - m.d) + sq) / (2.0 * m.c)
    t2 = ((m.a - m.d) - sq) / (2.0 * m.c)
    # multiplier at fixed point t is 1/(c t + d)^2; attracting iff |c t + d| > 1
    lam1 = abs(m.c * t1 + m.d)
    if lam1 > 1.0:
        return Geodesic((t2, 1.0), (t1, 1.0))
    return Geodesic((t1, 1.0), (t2, 1.0))


def _cross(p: tuple[float, float], q: tuple[float, float]) -> float:
    """Projective determinant u_p w_q - w_p u_q."""
    return p[0] * q[1] - p[1] * q[0]


def normalizer_to_vertical(g: Geodesic) -> Mat2:
    """Orientation-preserving Mobius map sending g.start -> 0, g.end -> infinity."""
    p, q = g.start, g.end
    m = Mat2(p[1], -p[0], q[1], -q[0])
    if m.det() < 0.0:
        m = Mat2(-m.a, -m.b, m.c, m.d)
    if m.det() == 0.0:
        raise ValueError("degenerate geodesic")
    return m.normalize()


def geodesics_cross(g1: Geodesic, g2: Geodesic) -> bool:
    """True iff the endpoints interleave on the boundary circle."""
    m = normalizer_to_vertical(g1)
    u = boundary_value(m.apply_boundary(g2.start))
    v = boundary_value(m.apply_boundary(g2.end))
    if math.isinf(u) or math.isinf(v) or u == 0.0 or v == 0.0:
        return False  # shared endpoint
    return (u < 0.0) != (v < 0.0)


def angle_at_intersection(g1: Geodesic, g2: Geodesic) -> float:
    """Anti-clockwise angle in (0, pi) from the line of g1 to the line of g2.

    Computed by normalizing g1 to the vertical axis (0, infinity) and g2 to
    the configuration (-1, r); then cos(theta) = (1 - r)/(1 + r).  The result
    is independent of the orientations of both geodesics and flips to
    pi - theta when the two geodesics are exchanged.
    """
    m = normalizer_to_vertical(g1)
    u = boundary_value(m.apply_boundary(g2.start))
    v = boundary_value(m.apply_boundary(g2.end))
    if math.isinf(u) or math.isinf(v) or u == 0.0 or v == 0.0:
        raise GeodesicConfigError("geodesics share an endpoint")
    if (u < 0.0) == (v < 0.0):
        raise GeodesicConfigError("geodesics do not intersect in H^2")
    neg, pos = (u, v) if u < 0.0 else (v, u)
    r = pos / abs(neg)
    c = (1.0 - r) / (1.0 + r)
    c = max(-1.0, min(1.0, c))
    return math.acos(c)


def axis_separation_invariant(g1: Geodesic, g2: Geodesic) -> tuple[float, bool]:
    """Return (|u|, crossing) for a pair of disjoint or crossing geodesics.

    |u| = cosh(distance between the lines) when disjoint, and |cos(angle)|
    when they cross.  Shared endpoints give |u| = 1.
    """
    m = normalizer_to_vertical(g1)
    u = boundary_value(m.apply_boundary(g2.start))
    v = boundary_value(m.apply_boundary(g2.end))
    if math.isinf(u) or math.isinf(v):
        # g2 shares the endpoint at infinity with the normalized g1
        return (1.0, False)
    if u == v:
        raise ValueError("degenerate geodesic")
    val = abs(u + v) / abs(v - u)
    return (val, (u < 0.0) != (v < 0.0))


def width(t: float) -> float:
    """Half-width arcsinh(cosech(t/2)) of the standard collar of a geodesic of length t."""
    if not (t > 0.0):
        raise ValueError(f"collar width needs a positive length, got {t}")
    return math.asinh(1.0 / math.sinh(t / 2.0))


@dataclass(frozen=True)
class HorocyclePath:
    """Parametrized path t -> (conj * [[1,t],[0,1]] * conj^-1) applied to base.

    With conj = identity this is the unit-speed-in-parameter horocyclic
    segment based at `base`; conjugating transports the whole parametrized
    family by an isometry of H^2.
    """

    base: HPoint
    t0: float
    t1: float
    conj: Mat2

    def point(self, t: float) -> HPoint:
        h = Mat2(1.0, t, 0.0, 1.0)
        m = (self.conj @ h) @ self.conj.inv()
        return apply_mobius(m, self.base)

    def parameter_length(self) -> float:
        return self.t1 - self.t0

    def conjugated(self, m: Mat2) -> "HorocyclePath":
        return HorocyclePath(self.base, self.t0, self.t1, (m @ self.conj).normalize())


def horocycle_segment(base: HPoint, t_range: tuple[float, float]) -> HorocyclePath:
    """Horocyclic segment [[1,t],[0,1]] . base for t in t_range."""
    t0, t1 = t_range
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ValueError("horocycle segment needs a finite parameter range")
    return HorocyclePath(base, t0, t1, Mat2.identity())
