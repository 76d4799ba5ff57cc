"""Experiment runner: every paper-scale computation as a named subcommand
with CSV/JSON/SVG artifacts and a run manifest.

Outputs land in --out (or $EQLAB_OUT, default ./eqlab_out/<command>); reruns
with identical configuration are byte-identical apart from the manifest
timestamp and wall time.  Exit codes: 0 success, 2 usage error, 3 numerical
certification failure (diagnostic JSON still written).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import asym, fdcomp, metrics, norms, report, torus
from .torus import MarkedSurface, Slope


class CertificationFailure(RuntimeError):
    pass


_CERT_ERRORS = (
    torus.CertificationError,
    torus.SurfaceError,
    torus.GaugeError,
    torus.WordEnumerationError,
    metrics.PathSearchError,
    metrics.PinchError,
    norms.DirectionMatchError,
    norms.WindingError,
    norms.TruncationError,
    norms.TensorError,
    fdcomp.CertificateViolation,
    CertificationFailure,
)


def parse_theta(text: str) -> float:
    t = text.strip().lower()
    if t.endswith("pi"):
        return float(t[:-2]) * math.pi
    return float(t)


def surface_from_args(args) -> MarkedSurface:
    return torus.from_traces(args.x, args.y, args.branch)


def sample_surfaces(rng: np.random.Generator, n: int, thin_fraction: float = 0.3) -> list[MarkedSurface]:
    """Seeded mix of thick-part and moderately thin surfaces."""
    out = []
    for i in range(n):
        if i < int(round(thin_fraction * n)):
            ell = rng.uniform(0.25, 0.8)
            margin = rng.uniform(0.1, 0.8)
            out.append(torus.pinched_surface(ell, margin))
        else:
            out.append(torus.random_surface(rng))
    return out


def add_surface_args(p: argparse.ArgumentParser):
    p.add_argument("--x", type=float, default=3.0, help="trace of the first marking curve")
    p.add_argument("--y", type=float, default=3.0, help="trace of the second marking curve")
    p.add_argument("--branch", choices=["lower", "upper"], default="lower")


def add_common(p: argparse.ArgumentParser, seed: bool):
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--config", type=Path, default=None, help="JSON config overriding flags")
    if seed:
        p.add_argument("--seed", type=int, required=True, help="seed (mandatory, stochastic command)")


def resolve_outdir(args, command: str) -> Path:
    base = args.out or os.environ.get("EQLAB_OUT")
    out = Path(base) if base else Path("eqlab_out") / command.replace("-", "_")
    out.mkdir(parents=True, exist_ok=True)
    return out


def apply_config(args):
    if args.config is not None:
        overrides = json.loads(Path(args.config).read_text())
        for key, val in overrides.items():
            setattr(args, key.replace("-", "_"), val)
    return args


# ---------------------------------------------------------------------------
# commands


def cmd_indicatrix(args) -> dict:
    surf = surface_from_args(args)
    sample = norms.indicatrix(surf, args.n)
    rows = [
        [sample.params[i], sample.points[i, 0], sample.points[i, 1]]
        for i in range(len(sample.params))
    ]
    out = resolve_outdir(args, "indicatrix")
    report.write_csv(out / "indicatrix.csv", ["slope_param", "dx", "dy"], rows)
    fig = report.indicatrix_figure(sample.points, f"earthquake indicatrix at ({surf.x:g}, {surf.y:g})")
    report.save_svg(fig, out / "indicatrix.svg")
    conv = sample.convexity_report()
    summary = {
        "surface": {"x": surf.x, "y": surf.y, "branch": surf.branch},
        "n_samples": args.n,
        "convexity": conv,
        "origin_inside": sample.origin_inside(),
        "pass": conv["sign_flips"] == 0 and sample.origin_inside(),
    }
    report.write_json(out / "indicatrix.json", summary)
    if not summary["pass"]:
        raise CertificationFailure("indicatrix convexity check failed")
    return summary


def cmd_asymmetry(args) -> dict:
    rng = np.random.default_rng(args.seed)
    surfaces = sample_surfaces(rng, args.surfaces)
    rows, ratios = [], []
    for surf in surfaces:
        ratio, chi = norms.asymmetry_ratio(surf, args.n_dirs)
        rows.append([surf.x, surf.y, surf.branch, ratio, chi])
        ratios.append(ratio)
    out = resolve_outdir(args, "asymmetry")
    report.write_csv(out / "asymmetry.csv", ["x", "y", "branch", "max_ratio", "witness_param"], rows)
    frac = float(np.mean([r > 1.0 + 1e-6 for r in ratios]))
    summary = {
        "n_surfaces": args.surfaces,
        "n_dirs": args.n_dirs,
        "ratios": ratios,
        "min_ratio": min(ratios),
        "fraction_strictly_asymmetric": frac,
        "pass": frac >= 0.9,
    }
    report.write_json(out / "asymmetry.json", summary)
    fig, ax = report.new_figure()
    ax.hist(ratios, bins=16, color="#1f77b4")
    ax.set_xlabel("max direction ratio ||-v|| / ||v||")
    ax.set_ylabel("surfaces")
    ax.set_title("earthquake norm asymmetry")
    report.save_svg(fig, out / "asymmetry.svg")
    if not summary["pass"]:
        raise CertificationFailure("asymmetry below threshold on too many surfaces")
    return summary


def cmd_compare_norms(args) -> dict:
    rng = np.random.default_rng(args.seed)
    out = resolve_outdir(args, "compare_norms")

    def chain_constants(n_samples: int, rng_local) -> dict:
        k0 = k1 = k2 = 0.0
        rows_local = []
        surfaces = sample_surfaces(rng_local, max(4, n_samples // 8))
        for surf in surfaces:
            tensor = norms.wp_tensor(surf, cutoff=args.cutoff)
            sys_len = torus.systole(surf)[1]
            log_term = max(1.0, math.log(1.0 / sys_len))
            for _ in range(max(1, n_samples // len(surfaces))):
                chi = rng_local.uniform(0.0, math.pi)
                gamma = torus.slope_from_float(math.tan(chi), max_depth=10, digit_budget=40)
                v = torus.TangentVector(surf, *norms.unit_earthquake_point(surf, gamma))
                ne = 1.0
                nth = norms.thurston_norm(v, depth=args.depth)[0]
                nwp = tensor.norm(v)
                k0 = max(k0, sys_len * log_term * nth / ne)
                k1 = max(k1, ne / nwp)
                k2 = max(k2, nwp / nth)
                rows_local.append([surf.x, surf.y, sys_len, ne, nth, nwp])
        return {"K0": k0, "K1": k1, "K2": k2, "rows": rows_local}

    base = chain_constants(args.samples, np.random.default_rng(args.seed))
    double = chain_constants(2 * args.samples, np.random.default_rng(args.seed + 1))
    drift = {
        key: abs(double[key] - base[key]) / max(base[key], 1e-12) for key in ("K0", "K1", "K2")
    }

    # cosine formula and reciprocity on seeded random data
    cos_errs, rec_errs = [], []
    for _ in range(args.pairing_samples):
        surf = torus.random_surface(rng)
        alpha, beta = _random_slope_pair(rng, max_intersection=3, surf=surf)
        geo = torus.cosine_pairing(surf, alpha, beta)
        fd = _fd_pairing(surf, beta, alpha)
        cos_errs.append(abs(geo - fd) / max(1e-12, abs(fd)))
        rec = torus.length_pairing(surf, beta, alpha) + torus.length_pairing(surf, alpha, beta)
        rec_errs.append(abs(rec))

    # symmetrized norm chain on seeded vectors
    sym_rows = []
    for _ in range(args.sym_samples):
        surf = torus.random_surface(rng)
        chi = rng.uniform(0.0, math.pi)
        gamma = torus.slope_from_float(math.tan(chi), max_depth=10, digit_budget=40)
        v = torus.TangentVector(surf, *norms.unit_earthquake_point(surf, gamma))
        n1 = norms.symmetrized_norm(v, 1.0)
        n2 = norms.symmetrized_norm(v, 2.0)
        ninf = norms.symmetrized_norm(v, math.inf)
        sym_rows.append([n1, n2, ninf])
    sym_rows_np = np.array(sym_rows)
    sym_ok = bool(
        np.all(sym_rows_np[:, 2] <= 2.0 ** (1.0 / 2.0) * sym_rows_np[:, 1] + 1e-9)
        and np.all(sym_rows_np[:, 1] + 1e-9 >= sym_rows_np[:, 0])
    )

    # pinching-family window for ||e_alpha||_WP / sqrt(l_alpha)
    window_rows = []
    for ell in np.geomspace(args.pinch_lo, args.pinch_hi, args.pinch_points):
        surf = torus.pinched_surface(float(ell), margin=0.3)
        val = norms.wp_twist_norm(surf, Slope(1, 0), cutoff=args.cutoff)
        window_rows.append([ell, val / math.sqrt(ell)])
    window = np.array(window_rows)

    report.write_csv(out / "norm_chain.csv", ["x", "y", "l_sys", "e_norm", "th_norm", "wp_norm"], base["rows"])
    report.write_csv(out / "wp_window.csv", ["l_alpha", "wp_over_sqrt_l"], window_rows)
    summary = {
        "constants": {k: base[k] for k in ("K0", "K1", "K2")},
        "constants_doubled": {k: double[k] for k in ("K0", "K1", "K2")},
        "drift": drift,
        "cosine_rel_err_max": max(cos_errs),
        "reciprocity_max": max(rec_errs),
        "symmetrized_chain_ok": sym_ok,
        "wp_window_min": float(window[:, 1].min()),
        "wp_window_max": float(window[:, 1].max()),
        "wp_window_lower_bound": math.sqrt(1.0 / (2.0 * math.pi)),
        "pass": bool(
            max(cos_errs) <= 1e-6
            and max(rec_errs) <= 1e-6
            and all(v < 0.10 for v in drift.values())
            and sym_ok
            and window[:, 1].min() >= math.sqrt(1.0 / (2.0 * math.pi)) * 0.95
        ),
    }
    report.write_json(out / "compare_norms.json", summary)
    fig, ax = report.new_figure()
    ax.semilogx(window[:, 0], window[:, 1], "o-", ms=3)
    ax.axhline(math.sqrt(1.0 / (2.0 * math.pi)), ls="--", color="#d62728", lw=0.8)
    ax.set_xlabel("l_alpha")
    ax.set_ylabel("||e_alpha||_WP / sqrt(l_alpha)")
    report.save_svg(fig, out / "compare_norms.svg")
    if not summary["pass"]:
        raise CertificationFailure("norm comparison checks failed")
    return summary


_SMALL_SLOPES = [
    Slope(0, 1), Slope(1, 0), Slope(1, 1), Slope(-1, 1), Slope(2, 1), Slope(1, 2),
    Slope(-2, 1), Slope(-1, 2), Slope(3, 1), Slope(1, 3), Slope(3, 2), Slope(2, 3),
]


def _random_slope_pair(
    rng,
    max_intersection: int = 3,
    surf: MarkedSurface | None = None,
    trace_cap: float = 150.0,
) -> tuple[Slope, Slope]:
    for _ in range(200):
        a = _SMALL_SLOPES[rng.integers(0, len(_SMALL_SLOPES))]
        b = _SMALL_SLOPES[rng.integers(0, len(_SMALL_SLOPES))]
        inum = torus.intersection_number(a, b)
        if not (1 <= inum <= max_intersection):
            continue
        if surf is not None and (
            torus.trace_of_slope(surf, a) > trace_cap or torus.trace_of_slope(surf, b) > trace_cap
        ):
            continue
        return a, b
    raise CertificationFailure("no admissible slope pair at this surface")


def _fd_pairing(surf: MarkedSurface, mu: Slope, lam: Slope, h: float = 1e-4) -> float:
    """Central finite-difference d/dt l_mu(twist(s, lam, t)) with one
    Richardson step; independent of the analytic backend."""
    def val(t: float) -> float:
        return torus.length_of_slope(torus.twist(surf, lam, t), mu)

    d1 = (val(h) - val(-h)) / (2.0 * h)
    d2 = (val(h / 2.0) - val(-h / 2.0)) / h
    return (4.0 * d2 - d1) / 3.0


def cmd_de_bracket(args) -> dict:
    rng = np.random.default_rng(args.seed)
    out = resolve_outdir(args, "de_bracket")
    surfaces = sample_surfaces(rng, args.points, thin_fraction=0.0)
    rows = []
    violations = 0
    for i in range(args.pairs):
        a = surfaces[rng.integers(0, len(surfaces))]
        b = surfaces[rng.integers(0, len(surfaces))]
        if metrics.chart_distance(a, b) < 1e-12:
            continue
        est = metrics.de_bracket(
            a, b, max_segments=args.segments, restarts=args.restarts, seed=args.seed + i
        )
        if est.lower > est.upper:
            violations += 1
        rows.append([i, a.x, a.y, b.x, b.y, est.lower, est.upper, est.feasibility_gap])
    report.write_csv(
        out / "de_bracket.csv",
        ["pair", "x1", "y1", "x2", "y2", "lower", "upper", "gap"],
        rows,
    )
    summary = {
        "pairs": len(rows),
        "bracket_violations": violations,
        "max_gap": max(r[7] for r in rows),
        "pass": violations == 0 and all(r[7] <= metrics.CHART_GAP_TOL for r in rows),
    }
    report.write_json(out / "de_bracket.json", summary)
    fig, ax = report.new_figure()
    lows = [r[5] for r in rows]
    ups = [r[6] for r in rows]
    ax.plot(lows, ups, "o", ms=4)
    lim = max(ups) * 1.05
    ax.plot([0, lim], [0, lim], "--", lw=0.8, color="#888888")
    ax.set_xlabel("collar lower bound")
    ax.set_ylabel("witnessed upper bound")
    report.save_svg(fig, out / "de_bracket.svg")
    if not summary["pass"]:
        raise CertificationFailure("bracket consistency failed")
    return summary


def cmd_dth(args) -> dict:
    rng = np.random.default_rng(args.seed)
    out = resolve_outdir(args, "dth")
    rows = []
    worst_slack = 0.0
    for i in range(args.triples):
        a, b, c = (torus.random_surface(rng) for _ in range(3))
        d_ab = metrics.d_thurston(a, b, depth=args.depth)[0]
        d_bc = metrics.d_thurston(b, c, depth=args.depth)[0]
        d_ac = metrics.d_thurston(a, c, depth=args.depth)[0]
        slack = d_ac - d_ab - d_bc
        worst_slack = max(worst_slack, slack)
        rows.append([i, d_ab, d_bc, d_ac, slack])
    s0 = torus.random_surface(rng)
    d_self = metrics.d_thurston(s0, s0, depth=args.depth)[0]
    report.write_csv(out / "dth.csv", ["triple", "d_ab", "d_bc", "d_ac", "triangle_slack"], rows)
    summary = {
        "triples": args.triples,
        "worst_triangle_slack": worst_slack,
        "self_distance": d_self,
        "pass": worst_slack <= 1e-6 and abs(d_self) <= 1e-12,
    }
    report.write_json(out / "dth.json", summary)
    if not summary["pass"]:
        raise CertificationFailure("Thurston distance checks failed")
    return summary


def cmd_pinch(args) -> dict:
    out = resolve_outdir(args, "pinch")
    theta = parse_theta(args.theta)
    start = torus.pinched_surface(args.start_systole, margin=args.margin)
    ell0 = torus.systole(start)[1]
    res = metrics.pinch_path(start, vartheta=theta, target_length=args.target)
    denom = 2.0 * ell0 * max(1.0, math.log(1.0 / ell0))
    ratio = res.magnitude() / denom
    rows = [
        [st.step, str(st.slope), st.displacement, st.ell_alpha, st.magnitude_total]
        for st in res.ledger
    ]
    report.write_csv(
        out / "pinch_ledger.csv",
        ["step", "slope", "displacement", "l_alpha", "cumulative_magnitude"],
        rows,
    )
    lower = metrics.collar_lower_bound(res.ell_final, ell0)
    summary = {
        "theta": theta,
        "target": args.target,
        "start_systole": ell0,
        "final_length": res.ell_final,
        "legs": len(res.ledger),
        "magnitude": res.magnitude(),
        "normalizer_2l_log": denom,
        "ratio": ratio,
        "ratio_window": [1.0, 1.0 / abs(math.cos(theta)) + 0.1],
        "collar_lower_bound": lower,
        "pass": bool(lower <= res.magnitude()),
    }
    report.write_json(out / "pinch.json", summary)
    ells = np.array([st.ell_alpha for st in res.ledger])
    mags = np.array([st.magnitude_total for st in res.ledger])
    fig = report.pinch_figure(ells, mags, f"pinch at theta={args.theta}")
    report.save_svg(fig, out / "pinch.svg")
    if not summary["pass"]:
        raise CertificationFailure("pinch lower-bound sanity failed")
    return summary


def cmd_nongeodesic(args) -> dict:
    out = resolve_outdir(args, "nongeodesic")
    surf = surface_from_args(args)
    gamma = Slope(*args.slope)
    cert = metrics.nongeodesic_witness(
        surf,
        gamma,
        shrink=args.shrink,
        max_segments=args.segments,
        restarts=args.restarts,
        seed=args.seed,
    )
    summary = {
        "surface": {"x": surf.x, "y": surf.y, "branch": surf.branch},
        "gamma": str(gamma),
        "m": cert.m,
        "lhs_twist_path_cost": cert.lhs,
        "rhs_detour_cost": cert.rhs,
        "ell_gamma_x": cert.ell_x,
        "ell_gamma_y": cert.ell_y,
        "detour_out": cert.detour_out,
        "detour_back": cert.detour_back,
        "pass": cert.valid(),
    }
    report.write_json(out / "nongeodesic.json", summary)
    if not cert.valid():
        raise CertificationFailure("no strict witness produced")
    return summary


def cmd_horocycle_check(args) -> dict:
    out = resolve_outdir(args, "horocycle_check")
    rep = metrics.horocycle_config_check()
    report.write_json(out / "horocycle_check.json", rep)
    if not rep["consistent"]:
        raise CertificationFailure("horocycle configuration regression")
    return rep


def cmd_fd_demo(args) -> dict:
    out = resolve_outdir(args, "fd_demo")
    oracle = fdcomp.nat_example_space()
    seq = fdcomp.nat_canonical_sequence(oracle)
    partials = [(n, float(seq.partial(n))) for n in (2, 5, 10, 50)]
    verdict = fdcomp.is_fd(seq, budget=64)
    sub = fdcomp.FDSeq(
        space=oracle,
        term=lambda i: seq.point(2 * i),
        tail_bound=lambda i: fdcomp.Fraction(1, 2 * i),
        label="(2n)",
    )
    equiv = fdcomp.fd_equivalent(
        seq, sub, fdcomp.subsequence_schedule([2 * i for i in range(1, 33)]), budget=32
    )
    e2, e3 = fdcomp.embed_point(oracle, 2), fdcomp.embed_point(oracle, 3)
    emb_int = fdcomp.extended_distance(e2, e3)
    cls = fdcomp.CompletionPoint(seq)
    to_infty = fdcomp.extended_distance(fdcomp.embed_point(oracle, 5), cls)
    distinct = fdcomp.fd_equivalent(e2.representative, e3.representative)
    summary = {
        "partials": partials,
        "partial_formula_exact": all(
            seq.partial(n) == 1 - fdcomp.Fraction(1, n) for n, _ in partials
        ),
        "proven_fd": verdict.proven,
        "series_bound": float(verdict.bound),
        "subsequence_equivalent": equiv.proven,
        "embedded_distance_interval": emb_int,
        "embedded_distance_exact": float(oracle(2, 3)),
        "embed_to_class_interval": to_infty,
        "distinct_embeds_verdict": {"proven": distinct.proven, "reason": distinct.reason,
                                    "obstruction": distinct.obstruction},
        "pass": bool(
            verdict.proven
            and equiv.proven
            and abs(emb_int[0] - float(oracle(2, 3))) < 1e-15
            and abs(emb_int[1] - float(oracle(2, 3))) < 1e-15
            and not distinct.proven
        ),
    }
    report.write_json(out / "fd_demo.json", summary)
    if not summary["pass"]:
        raise CertificationFailure("FD machinery demo failed")
    return summary


def cmd_taylor_check(args) -> dict:
    rng = np.random.default_rng(args.seed)
    out = resolve_outdir(args, "taylor_check")
    rows = []
    for i in range(args.cases):
        surf = torus.random_surface(rng)
        gamma, delta = _random_slope_pair(rng, max_intersection=3, surf=surf)
        fit = torus.taylor_remainder_check(surf, gamma, delta)
        rows.append([i, surf.x, surf.y, str(gamma), str(delta), fit["exponent"], fit["phi1"]])
    report.write_csv(
        out / "taylor_check.csv",
        ["case", "x", "y", "gamma", "delta", "exponent", "phi1"],
        rows,
    )
    exps = [r[5] for r in rows]
    summary = {
        "cases": args.cases,
        "exponents": exps,
        "min_exponent": min(exps),
        "max_exponent": max(exps),
        "pass": all(1.9 <= e <= 2.1 for e in exps),
    }
    report.write_json(out / "taylor_check.json", summary)
    if not summary["pass"]:
        raise CertificationFailure("Taylor remainder exponent out of range")
    return summary


def cmd_bilipschitz_check(args) -> dict:
    out = resolve_outdir(args, "bilipschitz_check")
    surf = surface_from_args(args)
    radii = [args.radius / (2.0**k) for k in range(args.halvings + 1)]
    reports = []
    for r in radii:
        reports.append(
            metrics.local_bilipschitz_check(
                surf, r, n_pairs=args.pairs, seed=args.seed,
                max_segments=args.segments, restarts=args.restarts,
            )
        )
    rows = [[rep["radius"], rep["ratio_min"], rep["ratio_max"], rep["C"]] for rep in reports]
    report.write_csv(out / "bilipschitz.csv", ["radius", "ratio_min", "ratio_max", "C"], rows)
    cs = [rep["C"] for rep in reports]
    drifts = [abs(b - a) / a for a, b in zip(cs, cs[1:])]
    summary = {
        "surface": {"x": surf.x, "y": surf.y},
        "radii": radii,
        "C_values": cs,
        "drifts": drifts,
        "fwd_over_bwd": reports[0]["fwd_over_bwd"],
        "pass": all(d < 0.20 for d in drifts),
    }
    report.write_json(out / "bilipschitz.json", summary)
    if not summary["pass"]:
        raise CertificationFailure("bi-Lipschitz constant drifts beyond 20%")
    return summary


def cmd_suite(args) -> dict:
    results = {}
    failures = []
    specs = [
        ("horocycle-check", []),
        ("fd-demo", []),
        ("indicatrix", ["--n", "256"]),
        ("taylor-check", ["--seed", "7", "--cases", "8"]),
        ("asymmetry", ["--seed", "7", "--surfaces", "6", "--n-dirs", "64"]),
        ("dth", ["--seed", "7", "--triples", "8"]),
        ("de-bracket", ["--seed", "7", "--pairs", "4", "--points", "4"]),
        ("compare-norms", ["--seed", "7", "--samples", "16", "--pairing-samples", "12", "--sym-samples", "8"]),
        ("pinch", ["--theta", "0.9pi"]),
        ("nongeodesic", ["--seed", "7"]),
        ("bilipschitz-check", ["--seed", "7", "--pairs", "4", "--halvings", "1"]),
    ]
    outbase = args.out or Path(os.environ.get("EQLAB_OUT", "eqlab_out"))
    for name, extra in specs:
        argv = [name] + extra + ["--out", str(Path(outbase) / name.replace("-", "_"))]
        code = main(argv)
        results[name] = "pass" if code == 0 else f"exit {code}"
        if code != 0:
            failures.append(name)
    out = Path(outbase)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"results": results, "failures": failures, "pass": not failures}
    report.write_json(out / "suite.json", summary)
    print(json.dumps(summary, indent=2))
    return summary


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqlab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("indicatrix", help="sample the earthquake-norm unit sphere")
    add_surface_args(p)
    p.add_argument("--n", type=int, default=720)
    add_common(p, seed=False)
    p.set_defaults(func=cmd_indicatrix)

    p = sub.add_parser("asymmetry", help="direction-wise norm asymmetry sweep")
    p.add_argument("--surfaces", type=int, default=20)
    p.add_argument("--n-dirs", type=int, default=64)
    add_common(p, seed=True)
    p.set_defaults(func=cmd_asymmetry)

    p = sub.add_parser("compare-norms", help="norm comparison chain, pairings, symmetrizations")
    p.add_argument("--samples", type=int, default=40)
    p.add_argument("--pairing-samples", type=int, default=30)
    p.add_argument("--sym-samples", type=int, default=20)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--cutoff", type=int, default=9)
    p.add_argument("--pinch-lo", type=float, default=1e-3)
    p.add_argument("--pinch-hi", type=float, default=0.5)
    p.add_argument("--pinch-points", type=int, default=8)
    add_common(p, seed=True)
    p.set_defaults(func=cmd_compare_norms)

    p = sub.add_parser("de-bracket", help="earthquake distance brackets on random pairs")
    p.add_argument("--pairs", type=int, default=10)
    p.add_argument("--points", type=int, default=6)
    p.add_argument("--segments", type=int, default=2)
    p.add_argument("--restarts", type=int, default=2)
    add_common(p, seed=True)
    p.set_defaults(func=cmd_de_bracket)

    p = sub.add_parser("dth", help="Thurston distance brackets and triangle checks")
    p.add_argument("--triples", type=int, default=20)
    p.add_argument("--depth", type=int, default=10)
    add_common(p, seed=True)
    p.set_defaults(func=cmd_dth)

    p = sub.add_parser("pinch", help="angle-controlled pinching path")
    p.add_argument("--theta", type=str, default="0.9pi")
    p.add_argument("--target", type=float, default=1e-3)
    p.add_argument("--start-systole", type=float, default=2.75e-3)
    p.add_argument("--margin", type=float, default=0.25)
    add_common(p, seed=False)
    p.set_defaults(func=cmd_pinch)

    p = sub.add_parser("nongeodesic", help="long-twist non-geodesicity witness")
    add_surface_args(p)
    p.add_argument("--slope", type=int, nargs=2, default=(0, 1))
    p.add_argument("--shrink", type=float, default=0.5)
    p.add_argument("--segments", type=int, default=2)
    p.add_argument("--restarts", type=int, default=2)
    add_common(p, seed=True)
    p.set_defaults(func=cmd_nongeodesic)

    p = sub.add_parser("horocycle-check", help="explicit horocycle configuration")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_horocycle_check)

    p = sub.add_parser("fd-demo", help="FD-completion machinery on the integer example")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_fd_demo)

    p = sub.add_parser("taylor-check", help="quadratic remainder of the twist Taylor expansion")
    p.add_argument("--cases", type=int, default=20)
    add_common(p, seed=True)
    p.set_defaults(func=cmd_taylor_check)

    p = sub.add_parser("bilipschitz-check", help="local chart bi-Lipschitz sampling")
    add_surface_args(p)
    p.add_argument("--radius", type=float, default=0.05)
    p.add_argument("--halvings", type=int, default=2)
    p.add_argument("--pairs", type=int, default=6)
    p.add_argument("--segments", type=int, default=2)
    p.add_argument("--restarts", type=int, default=2)
    add_common(p, seed=True)
    p.set_defaults(func=cmd_bilipschitz_check)

    p = sub.add_parser("suite", help="run every command with small defaults and aggregate")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_suite)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    args = apply_config(args)
    t0 = time.time()
    command = args.command
    try:
        if command == "suite":
            summary = args.func(args)
            return 0 if summary["pass"] else 3
        summary = args.func(args)
    except _CERT_ERRORS as exc:
        out = resolve_outdir(args, command)
        report.write_json(
            out / "failure.json",
            {"command": command, "error": type(exc).__name__, "message": str(exc)},
        )
        report.write_manifest(out, command, _config_dict(args), t0)
        print(f"eqlab {command}: certification failure: {exc}", file=sys.stderr)
        return 3
    out = resolve_outdir(args, command)
    report.write_manifest(out, command, _config_dict(args), t0)
    print(json.dumps({"command": command, "pass": bool(summary.get("pass", True))}, indent=2))
    return 0


def _config_dict(args) -> dict:
    skip = {"func", "command", "out", "config"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}


if __name__ == "__main__":
    sys.exit(main())
