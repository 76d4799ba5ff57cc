"""Sample-based checks for asymmetric metric spaces.

Oracles are black boxes d(x, y) into [0, inf]; every check probes a finite
sample and reports pass/fail/inconclusive with witnessing tuples, mirroring
the axiomatic definitions without pretending to prove anything global.
Distance values may be any numeric type with arithmetic and comparison
(Fractions work, and keep the natural-number example exact).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable


@dataclass
class MetricOracle:
    """Black-box asymmetric distance on some point domain."""

    name: str
    dist: Callable[[object, object], object]
    domain: str = ""
    symmetric: bool = False

    def __call__(self, a, b):
        v = self.dist(a, b)
        if v < 0:
            raise ValueError(f"negative distance {v} from oracle {self.name}")
        return v


def verify_axioms(oracle: MetricOracle, samples: list, tol: float = 0.0) -> dict:
    """Probe identity, separation and the triangle inequality on samples."""
    if len(samples) < 3:
        raise ValueError("need at least three sample points")
    identity_bad = [x for x in samples if oracle(x, x) > tol]
    separation_bad = []
    for a, b in itertools.combinations(samples, 2):
        if a != b and oracle(a, b) <= tol and oracle(b, a) <= tol:
            separation_bad.append((a, b))
    triangle_bad = []
    for a, b, c in itertools.permutations(samples, 3):
        lhs = oracle(a, c)
        rhs = oracle(a, b) + oracle(b, c)
        if lhs > rhs + tol:
            triangle_bad.append((a, b, c, float(lhs), float(rhs)))
    return {
        "oracle": oracle.name,
        "n_samples": len(samples),
        "identity_violations": identity_bad,
        "separation_violations": separation_bad,
        "triangle_violations": triangle_bad,
        "passed": not (identity_bad or separation_bad or triangle_bad),
    }


def reverse(oracle: MetricOracle) -> MetricOracle:
    """Reverse metric d#(x, y) = d(y, x)."""
    return MetricOracle(
        name=f"reverse({oracle.name})",
        dist=lambda a, b: oracle.dist(b, a),
        domain=oracle.domain,
        symmetric=oracle.symmetric,
    )


def symmetrize(oracle: MetricOracle, p: float) -> MetricOracle:
    """p-symmetrization ((d(x,y)^p + d(y,x)^p)/2)^(1/p), max for p = inf."""
    if not (p >= 1.0):
        raise ValueError("p must be in [1, inf]")

    if math.isinf(p):
        def d(a, b):
            return max(oracle.dist(a, b), oracle.dist(b, a))
    else:
        def d(a, b):
            u, v = oracle.dist(a, b), oracle.dist(b, a)
            if p == 1:
                return (u + v) / 2  # exact for Fraction inputs
            return (0.5 * (float(u) ** p + float(v) ** p)) ** (1.0 / p)

    return MetricOracle(
        name=f"sym_{p}({oracle.name})", dist=d, domain=oracle.domain, symmetric=True
    )


@dataclass
class BusemannInstance:
    """A sequence with a candidate limit point for the biconvergence check."""

    terms: Callable[[int], object]
    limit: object
    label: str = ""


def busemannian_check(
    oracle: MetricOracle,
    instances: list[BusemannInstance],
    budget: int = 64,
    tol: float = 1e-9,
) -> dict:
    """Check forward/backward biconvergence d(x_n, x) -> 0 iff d(x, x_n) -> 0.

    Per instance the two distance tails are probed up to the budget and
    classified: 'biconvergent', 'violation' (exactly one side converges),
    'no_convergence' (neither side resolves to zero; consistent with the
    axiom but reported with the asymmetric tail values), or 'inconclusive'.
    """
    results = []
    for inst in instances:
        fwd = [float(oracle(inst.terms(n), inst.limit)) for n in range(1, budget + 1)]
        bwd = [float(oracle(inst.limit, inst.terms(n))) for n in range(1, budget + 1)]
        tail_f = min(fwd[-budget // 4 :])
        tail_b = min(bwd[-budget // 4 :])
        conv_f = tail_f <= tol
        conv_b = tail_b <= tol
        if conv_f and conv_b:
            status = "biconvergent"
        elif conv_f != conv_b:
            status = "violation"
        else:
            trending = fwd[-1] < fwd[0] - tol or bwd[-1] < bwd[0] - tol
            status = "inconclusive" if trending else "no_convergence"
        results.append(
            {
                "label": inst.label,
                "status": status,
                "forward_tail": tail_f,
                "backward_tail": tail_b,
                "asymmetric_tails": bool(abs(tail_f - tail_b) > tol),
            }
        )
    return {
        "oracle": oracle.name,
        "instances": results,
        "violations": [r for r in results if r["status"] == "violation"],
    }
