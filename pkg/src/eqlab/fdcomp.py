"""Certified FD-sequences and the forward FD-completion machinery at desk
scale.

All infinitary notions are certified-finite: an FDSeq is a lazy term
generator plus a producer-supplied tail certificate bounding its remaining
forward distance-series, which the library validates against probed partial
sums but cannot manufacture.  Equivalence of sequences is semi-decidable:
Proven when a witness interlacing validates, Unknown otherwise, with
non-equivalence only reported when a positive separation obstruction between
embedded points is found.  Extended distances on the completion come out as
intervals whose endpoints carry exactly the one-sided certainty the
certificates support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

from .asym import MetricOracle

SERIES_SLACK = 1e-12


class CertificateViolation(RuntimeError):
    """A probed partial sum exceeded the claimed tail bound."""


@dataclass
class FDSeq:
    """Lazy point sequence with a certified forward-distance-series tail.

    tail_bound(i) certifies sum_{k >= i} d(x_k, x_{k+1}); back_tail, when
    supplied, certifies the backward series sum_{k >= i} d(x_{k+1}, x_k).
    Indices are 1-based.  Terms and partial sums are memoized (plain dict
    writes, safe to probe concurrently under the GIL).
    """

    space: MetricOracle
    term: Callable[[int], object]
    tail_bound: Callable[[int], object] | None = None
    kind: str = "forward"
    back_tail: Callable[[int], object] | None = None
    label: str = ""
    _terms: dict = field(default_factory=dict, repr=False)
    _partials: dict = field(default_factory=dict, repr=False)

    def point(self, i: int):
        if i not in self._terms:
            self._terms[i] = self.term(i)
        return self._terms[i]

    def step(self, k: int):
        """d(x_k, x_{k+1})."""
        return self.space(self.point(k), self.point(k + 1))

    def partial(self, n: int):
        """Sum of d(x_k, x_{k+1}) for k = 1 .. n-1; non-decreasing in n."""
        if n < 1:
            raise ValueError("partial sums start at n = 1")
        if n not in self._partials:
            best = max((m for m in self._partials if m <= n), default=1)
            acc = self._partials.get(best, 0)
            for k in range(best, n):
                acc = acc + self.step(k)
            self._partials[n] = acc
        return self._partials[n]


def distance_series_partial(seq: FDSeq, n: int):
    return seq.partial(n)


@dataclass
class FDVerdict:
    proven: bool
    bound: object | None
    probed_to: int
    violations: list

    def as_json_dict(self) -> dict:
        return {
            "proven": self.proven,
            "bound": None if self.bound is None else float(self.bound),
            "probed_to": self.probed_to,
            "violations": self.violations,
        }


def is_fd(seq: FDSeq, budget: int = 64) -> FDVerdict:
    """Proven(partial + tail) when the certificate validates on probes.

    A probed partial sum exceeding the claimed tail is a hard
    CertificateViolation, never an Unknown.
    """
    if seq.tail_bound is None:
        return FDVerdict(False, None, budget, [])
    total = seq.partial(budget + 1)
    prev_tail = None
    for i in range(1, budget + 1):
        tail_i = seq.tail_bound(i)
        if prev_tail is not None and tail_i > prev_tail + SERIES_SLACK:
            raise CertificateViolation(f"tail bound increased at index {i}")
        window = total - seq.partial(i)  # sum_{k=i}^{budget} d(x_k, x_{k+1})
        if window > tail_i + SERIES_SLACK:
            raise CertificateViolation(
                f"partial sum {float(window)} beyond index {i} exceeds tail bound {float(tail_i)}"
            )
        prev_tail = tail_i
    bound = total + seq.tail_bound(budget + 1)
    return FDVerdict(True, bound, budget, [])


# ---------------------------------------------------------------------------
# interlacings and FD-equivalence


class ScheduleError(ValueError):
    pass


@dataclass
class Interlacing:
    """Merged sequence drawing strictly increasing indices from two parents."""

    a: FDSeq
    b: FDSeq
    schedule: list[tuple[str, int]]

    def __post_init__(self):
        last = {"a": 0, "b": 0}
        seen_src = {"a": False, "b": False}
        for src, idx in self.schedule:
            if src not in last:
                raise ScheduleError(f"unknown source {src!r}")
            if idx <= last[src]:
                raise ScheduleError(f"indices from {src} must strictly increase (got {idx})")
            last[src] = idx
            seen_src[src] = True
        if not (seen_src["a"] and seen_src["b"]):
            raise ScheduleError("schedule must draw from both sequences on the probed prefix")

    def point(self, k: int):
        src, idx = self.schedule[k - 1]
        return (self.a if src == "a" else self.b).point(idx)

    def __len__(self) -> int:
        return len(self.schedule)


def interlace(a: FDSeq, b: FDSeq, schedule: Iterable[tuple[str, int]]) -> Interlacing:
    return Interlacing(a, b, list(schedule))


def alternating_schedule(n: int) -> list[tuple[str, int]]:
    out = []
    for i in range(1, n + 1):
        out.append(("a", i))
        out.append(("b", i))
    return out


def subsequence_schedule(indices: list[int]) -> list[tuple[str, int]]:
    """Schedule replacing terms of a by the subsequence b(k) = a(indices[k]).

    Alternates a-terms and their b-copies so both parents appear with
    strictly increasing indices while the merged point sequence retraces a.
    """
    out = []
    for k, idx in enumerate(indices, start=1):
        out.append(("a", idx))
        out.append(("b", k))
    return out


@dataclass
class EquivalenceVerdict:
    proven: bool
    reason: str
    obstruction: object | None = None

    def __bool__(self) -> bool:
        return self.proven


def fd_equivalent(
    a: FDSeq,
    b: FDSeq,
    witness_schedule: Iterable[tuple[str, int]] | None = None,
    budget: int = 64,
    interlacing_tail: Callable[[int], object] | None = None,
) -> EquivalenceVerdict:
    """Proven when the witness interlacing validates as an FD-sequence.

    The interlacing needs its own tail certificate; one is derived from the
    parents' certificates when every probed cross-step has distance zero
    (subsequence-in-place and repeated-sequence witnesses), otherwise the
    caller must supply interlacing_tail.  Equivalence is only certified,
    never refuted, except that two embedded (constant) sequences at points
    with positive separation are reported with that obstruction.
    """
    va, vb = is_fd(a, budget), is_fd(b, budget)
    if not (va.proven and vb.proven):
        return EquivalenceVerdict(False, "parent sequences not proven FD")
    pa = {a.point(i) for i in range(1, 4)}
    pb = {b.point(i) for i in range(1, 4)}
    if len(pa) == 1 and len(pb) == 1:
        x, y = next(iter(pa)), next(iter(pb))
        if x != y:
            sep = a.space(x, y) + a.space(y, x)
            if sep > 0:
                return EquivalenceVerdict(
                    False,
                    "embedded points with positive separation are never equivalent",
                    obstruction=float(sep),
                )
    if witness_schedule is None:
        if all(a.point(i) == b.point(i) for i in range(1, min(budget, 8) + 1)):
            witness_schedule = alternating_schedule(budget)
        else:
            return EquivalenceVerdict(False, "no witness interlacing supplied")
    inter = interlace(a, b, witness_schedule)
    n = len(inter)
    steps = [a.space(inter.point(k), inter.point(k + 1)) for k in range(1, n)]
    derived = interlacing_tail is None
    tail_fn = interlacing_tail
    if tail_fn is None:
        # speculative combined certificate: remaining a-series plus remaining
        # b-series bounds the merged series whenever the interlacing retraces
        # parent steps (subsequence-in-place and repetition witnesses); it is
        # validated below and failure downgrades to Unknown
        def tail_fn(i: int):
            ia = next((idx for src, idx in inter.schedule[i - 1 :] if src == "a"), None)
            ib = next((idx for src, idx in inter.schedule[i - 1 :] if src == "b"), None)
            bound = 0
            if ia is not None:
                bound = bound + a.tail_bound(ia)
            if ib is not None:
                bound = bound + b.tail_bound(ib)
            return bound

    suffix = list(_suffix_sums(steps))  # suffix[i-1] = sum_{k >= i} step_k
    for i in range(1, n):
        window = suffix[i - 1]
        if window > tail_fn(i) + SERIES_SLACK:
            if derived:
                return EquivalenceVerdict(
                    False, "derived interlacing certificate failed to validate"
                )
            raise CertificateViolation(
                f"interlacing partial sum {float(window)} from index {i} exceeds tail bound"
            )
    return EquivalenceVerdict(True, "witness interlacing validates as FD")


def _suffix_sums(steps: list):
    acc = 0
    out = []
    for s in reversed(steps):
        acc = acc + s
        out.append(acc)
    return reversed(out)


# ---------------------------------------------------------------------------
# completion points and the extended distance


@dataclass
class CompletionPoint:
    representative: FDSeq
    label: str = ""

    def is_embedded(self) -> bool:
        pts = {self.representative.point(i) for i in range(1, 4)}
        return len(pts) == 1


def embed_point(oracle: MetricOracle, x) -> CompletionPoint:
    seq = FDSeq(
        space=oracle,
        term=lambda i: x,
        tail_bound=lambda i: 0,
        back_tail=lambda i: 0,
        label=f"const({x})",
    )
    return CompletionPoint(seq, label=str(x))


def extended_distance(xi: CompletionPoint, eta: CompletionPoint, k: int = 32) -> tuple[float, float]:
    """Certified interval for the forward metric extension d-bar(xi, eta).

    Upper endpoints use, per probed index j, the triangle route through the
    embedded point x_j (needs a backward certificate on xi, or xi constant);
    identical representative objects give upper 0 outright.  The lower
    endpoint needs a backward certificate on eta and is 0 otherwise.
    """
    sx, sy = xi.representative, eta.representative
    d = sx.space
    upper = math.inf
    if sx is sy:
        upper = 0.0
    lower = 0.0
    const_x = xi.is_embedded()
    for j in range(1, k + 1):
        dj = float(d(sx.point(j), sy.point(j)))
        tail_y = float(sy.tail_bound(j)) if sy.tail_bound else math.inf
        if const_x:
            upper = min(upper, dj + tail_y)
        elif sx.back_tail is not None:
            upper = min(upper, float(sx.back_tail(j)) + dj + tail_y)
        if sy.back_tail is not None and sx.tail_bound is not None:
            cand = dj - float(sx.tail_bound(j)) - float(sy.back_tail(j))
            lower = max(lower, cand)
    lower = max(0.0, lower)
    if upper < lower:
        upper = lower
    return (lower, upper)


# ---------------------------------------------------------------------------
# Cauchy bridging on symmetric oracles


def cauchy_tail_check(seq: FDSeq, budget: int = 48) -> dict:
    """On a symmetric oracle every proven FD-sequence is Cauchy: pairwise
    distances beyond index i must stay within the tail bound at i."""
    if not seq.space.symmetric:
        raise ValueError("Cauchy check needs a symmetric oracle")
    verdict = is_fd(seq, budget)
    worst = 0.0
    witness = None
    for i in range(1, budget):
        bound = float(seq.tail_bound(i))
        for j in range(i + 1, budget + 1):
            val = float(seq.space(seq.point(i), seq.point(j)))
            if val > bound + SERIES_SLACK and val - bound > worst:
                worst = val - bound
                witness = (i, j, val, bound)
    return {"proven_fd": verdict.proven, "cauchy_ok": witness is None, "witness": witness}


def fd_subsequence_from_cauchy(
    oracle: MetricOracle,
    term: Callable[[int], object],
    modulus: Callable[[float], int],
) -> FDSeq:
    """Extract an FD-subsequence from a Cauchy sequence with a modulus.

    modulus(eps) returns N with d(x_m, x_n) < eps for all m, n >= N; the
    subsequence at indices modulus(2^-k) has distance series below 1 with
    tail bound 2^(1-k).
    """
    indices: dict[int, int] = {}

    def idx(k: int) -> int:
        if k not in indices:
            n = modulus(2.0 ** (-k))
            if k > 1 and n <= indices.get(k - 1, 0):
                n = indices[k - 1] + 1
            indices[k] = n
        return indices[k]

    return FDSeq(
        space=oracle,
        term=lambda i: term(idx(i)),
        tail_bound=lambda i: 2.0 ** (1 - i),
        label="cauchy-extracted",
    )


# ---------------------------------------------------------------------------
# natural-number example space (exact arithmetic)


def nat_example_space() -> MetricOracle:
    """The asymmetric metric d(m, n) = 1/m - 1/n for m <= n, else 1, on the
    positive integers; exact Fraction arithmetic."""

    def d(m, n):
        if m == n:
            return Fraction(0)
        if m <= n:
            return Fraction(1, m) - Fraction(1, n)
        return Fraction(1)

    return MetricOracle(name="nat-example", dist=d, domain="positive integers")


def nat_canonical_sequence(oracle: MetricOracle | None = None) -> FDSeq:
    """The sequence (n) with its exact telescoping tail certificate 1/i."""
    if oracle is None:
        oracle = nat_example_space()
    return FDSeq(
        space=oracle,
        term=lambda i: i,
        tail_bound=lambda i: Fraction(1, i),
        label="(n)",
    )


# ---------------------------------------------------------------------------
# Lipschitz pushforward and hopping diagnostics


def lipschitz_extend(
    f: Callable[[object], object],
    lipschitz_k: float,
    seq: FDSeq,
    target: MetricOracle,
) -> FDSeq:
    """Push an FD-sequence through a K-Lipschitz map, scaling its certificate."""
    if seq.tail_bound is None:
        raise ValueError("need a certified sequence")
    return FDSeq(
        space=target,
        term=lambda i: f(seq.point(i)),
        tail_bound=lambda i: lipschitz_k * seq.tail_bound(i),
        back_tail=None if seq.back_tail is None else (lambda i: lipschitz_k * seq.back_tail(i)),
        label=f"pushforward({seq.label})",
    )


def hopping_schedule(n_rounds: int) -> list[tuple[int, str]]:
    """Diagnostic schedule of the infimal-representative construction: rounds
    hop from the base sequence out to the k-th approximant and back."""
    out = []
    for k in range(2, n_rounds + 2):
        out.append((1, "out"))
        out.append((k, "visit"))
        out.append((k, "return"))
        out.append((1, "home"))
    return out
