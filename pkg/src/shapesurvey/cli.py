"""Command-line front end.

Subcommands::

    shapesurvey estimate --data F --constraints F --variance linearization|dagjk:G|replicate:F
                         [--level 0.95] [--seed S] [--out F]
    shapesurvey simulate --config F --seed S [--reps R] [--threads T] --out DIR
    shapesurvey check-constraints --constraints F

Exit codes: 0 success, 2 malformed input, 3 reducible constraints,
4 empty domain.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .constraints import ConstraintError, ConstraintMatrix, check_irreducible
from .estimation import EmptyDomainError, SampleData, constrained_estimate, domain_estimates
from .fileio import (
    SCHEMA_VERSION,
    ReducibleError,
    SchemaError,
    constraints_from_spec,
    describe_certificate,
    dump_json,
    load_constraints,
    read_replicate_weights,
    read_sample_csv,
)
from .simulation import StudyConfig, run_study
from .variance import (
    ReplicateScheme,
    dagjk_replicates,
    linearized_variance,
    replicate_estimates,
    replicate_variance,
    wald_interval,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_REDUCIBLE = 3
EXIT_EMPTY = 4


def parse_variance(text: str):
    """``"linearization"``, ``"dagjk:G"`` or ``"replicate:PATH"`` -> (kind, arg)."""
    if text == "linearization":
        return "linearization", None
    kind, sep, arg = text.partition(":")
    if sep and kind == "dagjk":
        try:
            G = int(arg)
        except ValueError:
            raise SchemaError(f"bad group count in {text!r}") from None
        if G < 2:
            raise SchemaError("dagjk needs G >= 2")
        return "dagjk", G
    if sep and kind == "replicate" and arg:
        return "replicate", arg
    raise SchemaError(f"unknown variance method {text!r}")


def estimate_result(sample: SampleData, A: ConstraintMatrix, variance: str = "linearization",
                    level: float = 0.95, scheme: ReplicateScheme | None = None) -> dict:
    """Run the estimation pipeline and build the result document.

    ``variance`` is ``"linearization"`` or the label of a replicate method,
    in which case ``scheme`` supplies the replicate weights.
    """
    D = A.D
    est = domain_estimates(sample, D)
    ce = constrained_estimate(est, A)
    n_clamped = 0
    if scheme is None:
        lin_u = linearized_variance(sample, est)
        lin_c = linearized_variance(sample, est, ce.face, A)
        var_u, var_c = lin_u.variance, lin_c.variance
        n_clamped = lin_u.n_clamped + lin_c.n_clamped
    else:
        var_u = replicate_variance(est.hajek, replicate_estimates(sample, scheme, D), scheme.coefficients)
        var_c = replicate_variance(ce.theta, replicate_estimates(sample, scheme, D, A), scheme.coefficients)
    lo, hi = wald_interval(ce.theta, var_c, level)
    blocks = ce.block_ids()
    face = [int(j) + 1 for j in ce.face]
    records = []
    for d in range(D):
        records.append({
            "domain": d + 1,
            "n_d": int(est.n_d[d]),
            "N_hat": float(est.N_hat[d]),
            "unconstrained": float(est.hajek[d]),
            "constrained": float(ce.theta[d]),
            "se_unconstrained": float(np.sqrt(var_u[d])),
            "se_constrained": float(np.sqrt(var_c[d])),
            "ci_lo": float(lo[d]),
            "ci_hi": float(hi[d]),
            "pooled_block_id": None if blocks is None else int(blocks[d]) + 1,
            "face_J": face,
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "estimate",
        "D": D,
        "m": A.m,
        "variance": variance,
        "level": level,
        "face_J": face,
        "n_clamped": int(n_clamped),
        "records": records,
    }


def cmd_estimate(args) -> int:
    A = load_constraints(args.constraints)
    kind, arg = parse_variance(args.variance)
    if not 0 < args.level < 1:
        raise SchemaError("--level must lie in (0, 1)")
    sample, ids = read_sample_csv(args.data, A.D, design=args.design)
    scheme = None
    if kind == "dagjk":
        if args.seed is None:
            raise SchemaError("dagjk variance needs --seed")
        if sample.stratum is None:
            raise SchemaError("dagjk variance needs a 'stratum' column")
        try:
            scheme = dagjk_replicates(sample, arg, np.random.SeedSequence(args.seed))
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc
    elif kind == "replicate":
        scheme = read_replicate_weights(arg, ids, args.coefficients)
    try:
        result = estimate_result(sample, A, args.variance, args.level, scheme)
    except EmptyDomainError:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    if args.out:
        dump_json(result, args.out)
    else:
        print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        spec = json.loads(Path(args.constraints).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{args.constraints}: invalid JSON ({exc})") from exc
    A = constraints_from_spec(spec)
    cert = check_irreducible(A)
    verdict = "irreducible" if cert else "reducible"
    print(f"{verdict}, {A.m} constraints, {A.D} domains")
    print(f"rows sum to zero: {'yes' if A.rows_sum_to_zero else 'no'}")
    if not cert:
        print(describe_certificate(cert))
        return EXIT_REDUCIBLE
    return EXIT_OK


def load_scenarios(path) -> list:
    """Scenario list from a config file: one object, or ``{"scenarios": [...]}``.

    Each scenario may carry a ``"name"``; the rest are :class:`StudyConfig`
    fields.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    items = doc.get("scenarios", [doc]) if isinstance(doc, dict) else None
    if not isinstance(items, list) or not items:
        raise SchemaError(f"{path}: expected a scenario object or a nonempty 'scenarios' list")
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise SchemaError(f"{path}: scenario {i + 1} is not an object")
        item = dict(item)
        name = str(item.pop("name", f"scenario{i + 1}"))
        out.append((name, item))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise SchemaError(f"{path}: duplicate scenario names")
    return out


def _domain_rows(report) -> tuple:
    D1 = report.config.D1
    ests = report.estimators
    header = ["domain", "x1", "x2", "ybar", "N_d"]
    for name, s in ests.items():
        header += [f"{name}_mean", f"{name}_p025", f"{name}_p975", f"{name}_mc_variance"]
        for meth in s.mean_variance:
            header += [f"{name}_{meth}_mean_variance", f"{name}_{meth}_coverage"]
    rows = []
    for d in range(report.ybar.size):
        row = [d + 1, d % D1 + 1, d // D1 + 1, repr(float(report.ybar[d])), int(report.N_d[d])]
        for s in ests.values():
            row += [repr(float(v[d])) for v in (s.mean, s.p025, s.p975, s.mc_variance)]
            for meth in s.mean_variance:
                row += [repr(float(s.mean_variance[meth][d])), repr(float(s.coverage[meth][d]))]
        rows.append(row)
    return header, rows


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_simulate(args) -> int:
    scenarios = load_scenarios(args.config)
    configs = []
    for name, item in scenarios:
        item.update(seed=args.seed)
        if args.reps is not None:
            item["reps"] = args.reps
        if args.threads is not None:
            item["threads"] = args.threads
        try:
            configs.append((name, StudyConfig.from_dict(item)))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"scenario {name!r}: {exc}") from exc
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    table = []
    for name, cfg in configs:
        report = run_study(cfg)
        doc = {"schema_version": SCHEMA_VERSION, "kind": "simulation", "name": name, **report.to_dict()}
        # thread count does not affect results; keep it out of the files
        doc["config"].pop("threads", None)
        dump_json(doc, outdir / f"{name}.json")
        _write_csv(outdir / f"{name}_domains.csv", *_domain_rows(report))
        wm = report.wmse_table()
        table.append([name, cfg.sigma, sum(cfg.allocation), cfg.reps] +
                     [repr(wm[k]) if k in wm else "" for k in ("unconstrained", "x1", "double")])
        cells = " ".join(f"{k}={v:.4f}" for k, v in wm.items())
        print(f"{name}: sigma={cfg.sigma:g} n={sum(cfg.allocation)} R={cfg.reps} WMSE {cells}")
    _write_csv(outdir / "wmse_table.csv",
               ["scenario", "sigma", "n", "reps", "unconstrained", "x1", "double"], table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shapesurvey", description="Shape-constrained domain mean estimation.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate domain means from a sample file")
    e.add_argument("--data", required=True, help="sample CSV (unit_id, y, pi|weight, domain[, stratum])")
    e.add_argument("--constraints", required=True, help="constraint spec JSON")
    e.add_argument("--variance", default="linearization",
                   help="linearization, dagjk:G or replicate:FILE (default: linearization)")
    e.add_argument("--coefficients", help="replicate coefficient JSON (default: FILE stem + .coef.json)")
    e.add_argument("--level", type=float, default=0.95)
    e.add_argument("--seed", type=int, help="seed for jackknife grouping")
    e.add_argument("--design", choices=["stratified_srswor", "poisson"], default="stratified_srswor",
                   help="design used for the linearization variance")
    e.add_argument("--out", help="output JSON (default: stdout)")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="run a Monte-Carlo study")
    s.add_argument("--config", required=True, help="scenario JSON")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--reps", type=int)
    s.add_argument("--threads", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check-constraints", help="certify a constraint spec")
    c.add_argument("--constraints", required=True)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ReducibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REDUCIBLE
    except EmptyDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (SchemaError, ConstraintError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
