"""
btlab: configuration-driven runner for the verification suites.

    btlab run --suite hecke --config cfg.json --seed 7 --format json

The config is a JSON object of parameters (see DEFAULTS).  Random samples
come from random.Random(seed) (Python's Mersenne Twister), so reports are
byte-identical for equal (config, seed, version).  Runtimes are only
recorded with --timing, since they would break that.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
import time
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .linalg import Lambda
from .localfield import LocalFieldSpec

SUITES = ("tree", "locaut", "homology", "hecke", "etale", "iwasawa")

DEFAULTS = {
    "tree": {"q": 2, "depth": 4, "samples": 20},
    "locaut": {"q": 2, "e": 1, "m": 1, "K": 1, "cap": 200000},
    "homology": {"q": 2, "e": 1, "depth": 4, "r": 1, "system": ["constant", "steinberg"], "margin": 2},
    "hecke": {"q": 2, "e": 1, "W": "trivial", "lambda": [0, 1], "depth": 4},
    "etale": {"q": 2, "system": ["constant", "steinberg"], "m": [1, 2], "depth": None, "r": 1},
    "iwasawa": {"p": 2, "K": 1, "r": 2, "degree": 3},
}

# residue field sizes with a prime p <= 7 that the suites are sized for
FEASIBLE_Q = {2: (2, 1), 3: (3, 1), 4: (2, 2), 5: (5, 1), 7: (7, 1), 8: (2, 3), 9: (3, 2)}


class ConfigError(ValueError):
    pass


@dataclass
class Record:
    name: str
    anchor: str
    status: str  # pass, fail, capped, exploratory
    witness: object = None
    runtime: float | None = None


@dataclass
class Report:
    suite: str
    parameters: dict
    seed: int
    version: str = __version__
    records: list = field(default_factory=list)

    def ok(self) -> bool:
        return all(r.status in ("pass", "exploratory") for r in self.records)


def _listed(x):
    return x if isinstance(x, list) else [x]


def _spec(params, N=14) -> LocalFieldSpec:
    p, f = FEASIBLE_Q[params["q"]]
    return LocalFieldSpec(p, f, "equal", N)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    return repr(x)


# ---------------------------------------------------------------------------
# suites: each yields (name, anchor, callable returning (status, witness))


def _tree_checks(params, rng):
    from .tree import SIGMA, act, ball, distance, gmatrix, neighbors

    spec = _spec(params)
    q, D = spec.q, params["depth"]

    def metric():
        verts = ball(SIGMA, D, q)
        vs = set(verts)
        for a in verts:
            seen, dq = {a: 0}, deque([a])
            while dq:
                v = dq.popleft()
                for w in neighbors(v, q):
                    if w in vs and w not in seen:
                        seen[w] = seen[v] + 1
                        dq.append(w)
            for b in verts:
                if seen[b] != distance(a, b):
                    return "fail", {"a": repr(a), "b": repr(b)}
        return "pass", {"vertices": len(verts)}

    def isometry():
        verts = ball(SIGMA, 2, q)
        for _ in range(params["samples"]):
            a, b, c = (rng.randrange(q) for _ in range(3))
            g = gmatrix(spec, [[{0: 1, 1: a}, {0: b}], [{1: c}, 1]])
            for x in verts:
                for y in neighbors(x, q):
                    if distance(act(g, x), act(g, y)) != 1:
                        return "fail", {"g": (a, b, c), "x": repr(x)}
        return "pass", None

    yield "tree.metric_vs_bfs", "coordinate distance equals graph distance", metric
    yield "tree.action_is_isometry", "matrices act by tree automorphisms", isometry


def _locaut_checks(params, rng):
    from .locaut import check_propexp, closure_image_order, conjugate_index, hat_u_generators, is_p_power

    spec = _spec(params)
    e, m, K, cap = params["e"], params["m"], params["K"], params["cap"]

    def pro_p():
        n = closure_image_order(hat_u_generators(spec, e, m), m, cap)
        return ("pass" if is_p_power(n, spec.p) else "fail"), {"order": n}

    def index():
        r = conjugate_index(spec, e, m, cap)
        return ("pass" if r["index"] == r["formula"] else "fail"), r

    def propexp():
        if spec.q != spec.p:
            return "exploratory", "presentation check is run for prime residue fields"
        r = check_propexp(spec, e, K, cap)
        return ("pass" if r["ok"] else "fail"), r

    yield "locaut.closure_is_p_group", "finite images of hat-U_sigma are p-groups", pro_p
    yield "locaut.conjugate_index", "index of the t^m-conjugate matches the product formula", index
    yield "locaut.presentation", "H_K modulo the boundary image acts faithfully", propexp


def _homology_checks(params, rng):
    from .coeff import build_system, check_C_axioms, check_hyp123, check_invariants_bijection, homology, roundtrip

    spec = _spec(params)
    lam = Lambda(spec.p, params["r"])
    D, margin = params["depth"], params["margin"]
    for kind in _listed(params["system"]):
        F = build_system(kind, params["e"], D, spec, lam)

        def axioms(F=F):
            r = check_C_axioms(F)
            return ("pass" if r["ok"] else "fail"), r["failures"][:5]

        def hyps(F=F):
            r = check_hyp123(F)
            return ("pass" if r["ok"] else "fail"), r["failures"][:5]

        def h0(F=F):
            H0, H1 = homology(F)
            return "pass", {"H0": H0.length(), "H1": H1.length()}

        def bij(F=F):
            r = check_invariants_bijection(F, D - margin)
            return ("pass" if r["ok"] else "fail"), {"invariants": r["invariants"], "sigma": r["sigma"]}

        def rt(F=F):
            r = roundtrip(F, D, 2)
            return ("pass" if r["ok"] else "fail"), {"edges": r["checked_edges"], "vertices": r["checked_vertices"]}

        yield f"homology.{kind}.axioms", "transitions injective onto unipotent invariants, generating", axioms
        yield f"homology.{kind}.hypotheses", "injective, forward generating, invariant images", hyps
        yield f"homology.{kind}.homology", "H0 and H1 of the window", h0
        yield f"homology.{kind}.invariants_bijection", "hat-U invariants of H0 equal F(sigma)", bij
        yield f"homology.{kind}.roundtrip", "hat system rebuilt from H0 matches the input", rt


def _hecke_checks(params, rng):
    from .coeff import build_system
    from .hecke import (
        check_decomposition,
        convolve,
        coset_decompose,
        describe,
        hecke_element,
        kernel_window_check,
        module_law,
        packet_invariants,
        steinberg_operator,
        trivial_operator,
    )
    from .tree import SIGMA, X_PLUS, ball, edges_within, t_matrix

    spec = _spec(params)
    lam = Lambda(spec.p, 1)
    D = params["depth"]
    if params["W"] == "trivial":
        op = trivial_operator(spec, lam)
    elif params["W"] == "steinberg":
        op = steinberg_operator(spec, lam)
    else:
        raise ConfigError(f"unsupported W {params['W']!r}")

    e = params["e"]

    def cosets():
        C = coset_decompose(t_matrix(spec), e)
        ok = len(C) == spec.q and check_decomposition(C)["ok"]
        return ("pass" if ok else "fail"), {"count": len(C), "orbit_sizes": C.orbit_sizes}

    def law():
        F = build_system("constant", e, 3, spec, lam)
        verts = ball(SIGMA, 1, spec.q)
        v = np.zeros(len(verts), dtype=np.int64)
        v[verts.index(X_PLUS)] = 1
        A = hecke_element((1, t_matrix(spec), e))
        B = hecke_element((1, t_matrix(spec, -1), e))
        table = [[c, n] for c, n, _ in describe(convolve(A, B))]
        return ("pass" if module_law(F, v, 1, A, B) else "fail"), {"UtU*Ut^-1U": table}

    yield "hecke.cosets_UtU", "UtU splits into q right cosets", cosets
    yield "hecke.module_law", "(v.A).B = v.(A*B) on U-invariants of H0", law
    edges = edges_within(ball(SIGMA, 2, spec.q))
    for ev in params["lambda"]:
        def kern(ev=ev):
            bad = [repr(eta) for eta in edges if not kernel_window_check(op, ev, eta, D)]
            return ("fail" if bad else "pass"), bad or {"edges": len(edges)}

        def packet(ev=ev):
            r = packet_invariants(op, ev, D)
            return ("pass" if r["ok"] else "fail"), {"length": r["length"], "expected": r["expected"]}

        yield f"hecke.kernel.lambda={ev}", "(T - lambda) b supported on an edge forces b = 0", kern
        yield f"hecke.packet.lambda={ev}", "invariants of ind W / (T - lambda)", packet


def _etale_checks(params, rng):
    from .coeff import build_system
    from .phigamma import build_pair, check_etale, generator_bound, qp_fact_check

    spec = _spec(params)
    lam = Lambda(spec.p, params["r"])
    for kind in _listed(params["system"]):
        for m in _listed(params["m"]):
            def et(kind=kind, m=m):
                F = build_system(kind, 1, params["depth"] or m + 3, spec, lam)
                r = check_etale(build_pair(F), m)
                return ("pass" if r["ok"] else "fail"), r

            yield f"etale.{kind}.m={m}", "psi boundary phi = boundary; coset sum is the identity off the ball", et

        def gb(kind=kind):
            F = build_system(kind, 1, 4, spec, lam)
            r = generator_bound(F, 3)
            return ("pass" if r["ok"] else "fail"), {"n": r["n"], "dual": r["dual_count"]}

        def qp(kind=kind):
            F = build_system(kind, 1, 4, spec, lam)
            r = qp_fact_check(F, 3)
            if r["exploratory"]:
                return "exploratory", r
            return ("pass" if r["equal"] else "fail"), r

        yield f"etale.{kind}.generator_bound", "D generated by dim F(x_plus)^N mod p elements", gb
        yield f"etale.{kind}.qp_fact", "F(sigma) equals N_0-invariants of half-tree H0", qp


def _iwasawa_checks(params, rng):
    import itertools

    from .phigamma import IwasawaTruncSpec, all_normal_forms, generators, iwasawa_vs_group, normal_form_agrees

    if params["p"] not in (2, 3) or not 1 <= params["K"] <= 2 or not 1 <= params["r"] <= 2:
        raise ConfigError("iwasawa suite supports p in {2, 3}, K and r in {1, 2}")
    spec = IwasawaTruncSpec(params["p"], params["K"], params["r"], 1, max(params["degree"], 3))

    lit = iwasawa_vs_group(spec)
    cor = iwasawa_vs_group(spec, corrected=True)

    def instance(ok, witness=None):
        return lambda: (("pass" if ok else "fail"), witness)

    for x, y in zip(lit["records"], cor["records"]):
        rel = x["relation"]
        yield f"iwasawa.literal.{rel}", "commutation relation read literally on U-generators", instance(x["algebra"])
        yield f"iwasawa.corrected.{rel}", "commutation relation with correction U_a - U_a'", instance(y["algebra"])
        yield f"iwasawa.group.{rel}", "commutation relation among group generators e_a", instance(x["group"])
    for x in lit["quotient_records"]:
        yield f"iwasawa.quotient.{x['relation']}", "product over a residue class equals a p-th power", instance(
            x["algebra"])

    def confluence():
        bad = []
        for n in range(1, params["degree"] + 1):
            for w in itertools.product(generators(spec), repeat=n):
                if len(all_normal_forms(w, spec, True)) != 1 or not normal_form_agrees({w: 1}, spec):
                    bad.append(w)
        return ("fail" if bad else "pass"), {"group_order": lit["group_order"], "bad": bad[:5]}

    yield "iwasawa.confluence", "rewriting is confluent and agrees with the group algebra", confluence


CHECKS = {
    "tree": _tree_checks,
    "locaut": _locaut_checks,
    "homology": _homology_checks,
    "hecke": _hecke_checks,
    "etale": _etale_checks,
    "iwasawa": _iwasawa_checks,
}


def validate(suite: str, params: dict) -> dict:
    if suite not in CHECKS:
        raise ConfigError(f"unknown suite {suite!r}")
    unknown = set(params) - set(DEFAULTS[suite])
    if unknown:
        raise ConfigError(f"unknown parameters for {suite}: {sorted(unknown)}")
    merged = {**DEFAULTS[suite], **params}
    if "p" in merged and merged["p"] not in (2, 3, 5, 7):
        raise ConfigError(f"invalid p {merged['p']}")
    if "q" in merged and merged["q"] not in FEASIBLE_Q:
        raise ConfigError(f"invalid q {merged['q']}: need a prime power p^f <= 9")
    return merged


def run_suite(suite: str, params: dict | None = None, seed: int = 0, timing: bool = False) -> Report:
    params = validate(suite, params or {})
    rng = random.Random(seed)
    report = Report(suite, params, seed)
    for name, anchor, fn in CHECKS[suite](params, rng):
        t0 = time.perf_counter()
        try:
            status, witness = fn()
        except Exception as exc:  # a check that cannot run is reported, not raised
            from .locaut import CapExceeded

            status = "capped" if isinstance(exc, CapExceeded) else "fail"
            witness = f"{type(exc).__name__}: {exc}"
        rt = round(time.perf_counter() - t0, 3) if timing else None
        report.records.append(Record(name, anchor, status, _jsonable(witness), rt))
    report.records.sort(key=lambda r: r.name)
    return report


def run_all(config: dict, seed: int = 0, timing: bool = False) -> list:
    return [run_suite(s, config.get(s, {}), seed, timing) for s in SUITES]


def emit_report(reports, fmt: str = "json") -> str:
    if isinstance(reports, Report):
        reports = [reports]
    if fmt == "json":
        return json.dumps([asdict(r) for r in reports], indent=2, sort_keys=True) + "\n"
    if fmt == "text":
        lines = []
        for r in reports:
            for rec in r.records:
                lines.append(f"{rec.status.upper():12s} {rec.name}  [{rec.anchor}]")
        return "\n".join(lines) + ("\n" if lines else "")
    raise ConfigError(f"unknown format {fmt!r}")


def parse_report(text: str) -> list:
    out = []
    for d in json.loads(text):
        recs = [Record(**x) for x in d.pop("records")]
        out.append(Report(**d, records=recs))
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="btlab", description=__doc__.strip().splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run a verification suite")
    run.add_argument("--suite", required=True, choices=SUITES + ("all",))
    run.add_argument("--config", help="JSON file with parameters")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--format", choices=("json", "text"), default="json")
    run.add_argument("--timing", action="store_true", help="record runtimes (reports are then not reproducible)")
    args = ap.parse_args(argv)
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    if not 0 <= args.seed < 2**64:
        ap.error("seed must be an unsigned 64-bit integer")
    try:
        if args.suite == "all":
            reports = run_all(config, args.seed, args.timing)
        else:
            reports = [run_suite(args.suite, config, args.seed, args.timing)]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(emit_report(reports, args.format))
    return 0 if all(r.ok() for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
