"""Command line: ``ontic verify``, ``ontic analyze`` and ``ontic ks-color``.

Reports are streams of records.  Every random draw is derived from
``--seed``, so a rerun with the same arguments prints the same bytes.
Exit status: 0 when every check passes, 1 when one fails, 2 on usage or
input errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import analysis
from .devices import AertsModel
from .kscolor import (
    RayParseError,
    build_graph,
    contextual_witness,
    enumerate_triads,
    load_rays,
    search_coloring,
    shipped_rays,
)
from .models import MODEL_NAMES, get_model
from .ontology import DEFAULT_SAMPLES, SUPPORT_EPS, Integrator, predict
from .quantum import basis_state, angle_state, bloch_from_state, born_probability, complete_basis, random_state

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
VERDICTS = {
    "pass",
    "fail",
    "deficient",
    "not-deficient",
    "contextual",
    "non-contextual",
    "SAT",
    "UNSAT",
    "deterministic",
    "indeterministic",
    "macrodeterministic",
    "microdeterministic",
}
CHECKS = ("lemmas", "deficiency", "prep-contextuality", "meas-contextuality", "update-rule", "determinism-class")
LEMMA_ANCHORS = {
    "normalization": "epistemic-state-normalization",
    "lemma1": "preparation-support-within-test-support",
    "lemma2": "orthogonal-states-disjoint-supports",
    "lemma3": "pvm-supports-cover-ontic-space",
    "lemma4": "deterministic-pvm-supports-disjoint",
    "lemma5": "preparation-convexity",
    "lemma6": "measurement-convexity",
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    mc_samples: int = DEFAULT_SAMPLES
    epsilon: float = SUPPORT_EPS
    fmt: str = "json"
    model: Optional[str] = None
    support_samples: int = 10_000

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        if self.mc_samples < 1000:
            raise UsageError("--samples must be at least 1000")
        if not 0 < self.epsilon <= 1e-3:
            raise UsageError("--epsilon must lie in (0, 1e-3]")
        if self.support_samples < 1:
            raise UsageError("--support-samples must be positive")

    def rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))


@dataclass
class ReportRecord:
    check: str
    model: str
    inputs: dict
    estimate: Optional[float]
    se: Optional[float]
    verdict: str
    anchor: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")


def _plain(x):
    """Recursively convert numpy values into JSON-friendly Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return [[float(v.real), float(v.imag)] for v in x.reshape(-1)]
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _bloch(psi) -> list:
    return [float(v) for v in bloch_from_state(psi)]


# -- output ----------------------------------------------------------------


FIELDS = ("check", "model", "inputs", "estimate", "se", "verdict", "anchor", "details")


def render(records: Iterable[ReportRecord], fmt: str) -> str:
    rows = [_plain(asdict(r)) for r in records]
    if fmt == "json":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS)
        for r in rows:
            w.writerow([json.dumps(r[f], sort_keys=True) if isinstance(r[f], (dict, list)) else ("" if r[f] is None else r[f]) for f in FIELDS])
        return buf.getvalue()
    lines = []
    for r in rows:
        est = "" if r["estimate"] is None else f" estimate={r['estimate']:.6g}"
        se = "" if r["se"] is None else f" se={r['se']:.3g}"
        lines.append(f"{r['verdict']:<18} {r['check']:<22} {r['model']:<9}{est}{se}  [{r['anchor']}]")
    return "\n".join(lines) + ("\n" if lines else "")


# -- commands --------------------------------------------------------------


def cmd_verify(model_name: str, config: RunConfig, pairs: int = 100, workers: int = 1) -> list[ReportRecord]:
    """Born-rule reproduction over seeded random (state, measurement) pairs."""
    model = get_model(model_name)
    rng = config.rng(0)
    records = []
    for p in range(pairs):
        psi = random_state(rng, model.dim)
        basis = complete_basis(random_state(rng, model.dim))
        integ = Integrator(samples=config.mc_samples, seed=config.seed, key=(1, p), workers=workers)
        if isinstance(model, AertsModel):
            est = model.joint_predict(psi, basis, 0, integ)
        else:
            est = predict(model.epistemic(psi), model.measurement(basis), 0, integ)
        born = born_probability(psi, basis[0].projector())
        ok = abs(est.value - born) <= max(3.0 * est.se, 1e-3)
        records.append(
            ReportRecord(
                "born-reproduction",
                model_name,
                {"pair": p, "psi": _bloch(psi), "phi": _bloch(basis[0]), "born": born},
                est.value,
                est.se,
                "pass" if ok else "fail",
                "born-rule-reproduction",
            )
        )
    return records


def _analyze_one(check: str, name: str, config: RunConfig) -> list[ReportRecord]:
    model = get_model(name)
    n = config.support_samples
    rng = config.rng(2, MODEL_NAMES.index(name), CHECKS.index(check))
    eps = config.epsilon
    if check == "lemmas":
        integ = Integrator(samples=max(n, 1000), seed=config.seed, key=(3, MODEL_NAMES.index(name)))
        out = []
        for res in analysis.lemma_suite(model, n, integ, rng):
            out.append(
                ReportRecord(res.name, name, {"n": n}, res.estimate, res.se, "pass" if res.passed else "fail", LEMMA_ANCHORS[res.name], res.details)
            )
        return out
    if check == "deficiency":
        states = analysis.deficiency_states(model.dim, rng=rng)
        reports = [analysis.detect_deficiency(model, s, n=n, rng=rng, eps=eps) for s in states]
        deficient = any(r.deficient for r in reports)
        worst = max(reports, key=lambda r: r.diff_measure)
        return [
            ReportRecord(
                "deficiency",
                name,
                {"n": n, "states": [s.amplitudes for s in states]},
                worst.diff_measure,
                worst.radius,
                "deficient" if deficient else "not-deficient",
                "deficiency-strict-support-inclusion",
                {"relations": [r.relation for r in reports], "diff_measures": [r.diff_measure for r in reports]},
            )
        ]
    if check in ("prep-contextuality", "meas-contextuality"):
        demo = analysis.demo_preparation_contextuality if check == "prep-contextuality" else analysis.demo_measurement_contextuality
        rep = demo(model, n=n, rng=rng, eps=eps)
        return [
            ReportRecord(
                check,
                name,
                {"n": n, "decompositions": ["basis", "pi/8"]},
                rep.difference,
                rep.radius,
                "contextual" if rep.contextual else "non-contextual",
                f"{rep.kind}-contextuality",
                {"covered_fractions": list(rep.fractions)},
            )
        ]
    if check == "update-rule":
        psi, phi = basis_state(0), angle_state(math.pi / 8)
        w = analysis.check_update_rule_violation(model, psi, phi, n=n, rng=rng, eps=eps)
        return [
            ReportRecord(
                "update-rule",
                name,
                {"n": n, "psi": "|0>", "phi": "|pi/8>"},
                None,
                None,
                "deficient" if w is not None else "not-deficient",
                "update-rule-disturbance",
                {"witness": w},
            )
        ]
    if check == "determinism-class":
        kind = analysis.determinism_class(model, n=n, rng=rng)
        return [ReportRecord("determinism-class", name, {"n": n}, None, None, kind.lower(), "outcome-determinism")]
    raise UsageError(f"unknown check {check!r}")


def cmd_analyze(check: str, config: RunConfig) -> list[ReportRecord]:
    if check not in CHECKS:
        raise UsageError(f"unknown check {check!r}; choose from {', '.join(CHECKS)}")
    names = [config.model] if config.model else list(MODEL_NAMES)
    out = []
    for name in names:
        out.extend(_analyze_one(check, name, config))
    return out


SHIPPED = ("basis3", "peres33")


def _read_rays(path: str):
    p = Path(path)
    if p.exists():
        return load_rays(p)
    stem = p.name[: -len(".rays")] if p.name.endswith(".rays") else p.name
    if stem in SHIPPED and p.parent == Path("."):
        return shipped_rays(stem)
    raise UsageError(f"cannot read ray file {path!r}")


def cmd_kscolor(path: str, config: RunConfig, find_all: bool = False, tol: float = 1e-9, coloring_out: Optional[str] = None) -> list[ReportRecord]:
    rays = _read_rays(path)
    g = build_graph(rays, tol)
    triads = enumerate_triads(g)
    res = search_coloring(g, triads, find_all=find_all)
    details = {"nodes": res.nodes, "shared_vertices": [rays.labels[v] for v in contextual_witness(g, triads)]}
    if res.satisfiable:
        details["coloring"] = {rays.labels[v]: int(c) for v, c in enumerate(res.coloring)}
        if coloring_out:
            Path(coloring_out).write_text("".join(f"{rays.labels[v]} {'green' if c else 'red'}\n" for v, c in enumerate(res.coloring)))
    estimate = float(len(res.solutions)) if find_all else None
    return [
        ReportRecord(
            "ks-coloring",
            "",
            {"path": path, "rays": len(rays), "edges": len(g.edges), "triads": len(triads), "enumerate": find_all},
            estimate,
            None,
            res.verdict,
            "red-green-colouring",
            details,
        )
    ]


# -- entry point -----------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="Monte Carlo samples per integral")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.add_argument("--epsilon", type=float, default=SUPPORT_EPS, help="support threshold")
    p.add_argument("--model", choices=MODEL_NAMES, default=None)
    p.add_argument("--support-samples", type=int, default=10_000, help="points per support check")
    p.add_argument("--workers", type=int, default=1, help="threads per Monte Carlo integral")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ontic", description="Hidden-variable models of qubits: checks and colourings.")
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", parents=[common], help="Born-rule reproduction for one model")
    v.add_argument("model_name", metavar="model", choices=MODEL_NAMES)
    v.add_argument("--pairs", type=int, default=100, help="random state/measurement pairs")
    a = sub.add_parser("analyze", parents=[common], help="support, deficiency and contextuality checks")
    a.add_argument("check", choices=CHECKS)
    k = sub.add_parser("ks-color", parents=[common], help="colour the orthogonality graph of a ray file")
    k.add_argument("path")
    k.add_argument("--enumerate", action="store_true", help="list every valid colouring")
    k.add_argument("--tol", type=float, default=1e-9, help="orthogonality tolerance")
    k.add_argument("--coloring-out", default=None, help="write a found colouring here")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = RunConfig(args.seed, args.samples, args.epsilon, args.format, args.model, args.support_samples)
        if args.command == "verify":
            if args.pairs < 1:
                raise UsageError("--pairs must be positive")
            records = cmd_verify(args.model_name, config, args.pairs, max(1, args.workers))
        elif args.command == "analyze":
            records = cmd_analyze(args.check, config)
        else:
            records = cmd_kscolor(args.path, config, args.enumerate, args.tol, args.coloring_out)
    except (UsageError, RayParseError, OSError) as exc:
        print(f"ontic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"ontic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(render(records, config.fmt))
    return EXIT_FAIL if any(r.verdict == "fail" for r in records) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
