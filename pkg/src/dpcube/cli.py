"""Command-line entry point: ingest, budget, release, evaluate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .core import AttributeSchema, Workload, load_workload, read_spec_file
from .evaluate import compare, to_csv, to_text
from .ingest import IngestError, ingest_csv, load_schema
from .mechanism import PrivacySpec, PrivacyViolation, check_privacy
from .pipeline import PipelineConfig, make_plan, run_release

log = logging.getLogger("dpcube")

EXIT_ERROR = 2
EXIT_PRIVACY = 3


@dataclass(frozen=True)
class RunConfig:
    command: str
    schema: str | None = None
    data: str | None = None
    workload: str | None = None
    dim: int | None = None
    strategy: str = "workload"
    user_marginals: str | None = None
    epsilon: float = 1.0
    delta: float | None = None
    budget: str = "optimal"
    recovery: str = "natural"
    consistency: bool = False
    seed: int | None = None
    trials: int = 1000
    out: str | None = None
    noiseless: bool = False

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in vars(ns).items() if k in names})

    def header(self) -> list[str]:
        """Flat key=value lines describing this run."""
        lines = [f"version={__version__}"]
        for k, v in asdict(self).items():
            if k == "out":
                continue
            lines.append(f"{k}={'' if v is None else v}")
        return lines


def _write(path: Path, lines: list[str]) -> None:
    path.write_text("".join(line + "\n" for line in lines))


def _commented(cfg: RunConfig, body: list[str]) -> list[str]:
    return ["# " + h for h in cfg.header()] + body


def _fmt(v) -> str:
    v = float(v)
    return repr(v) if np.isfinite(v) else ("inf" if v > 0 else ("nan" if np.isnan(v) else "-inf"))


def _schema(cfg: RunConfig) -> AttributeSchema | None:
    return load_schema(cfg.schema) if cfg.schema else None


def _workload(cfg: RunConfig, schema) -> Workload:
    if not cfg.workload:
        raise ValueError("--workload is required")
    return load_workload(cfg.workload, schema, cfg.dim)


def _spec(cfg: RunConfig) -> PrivacySpec:
    return PrivacySpec(cfg.epsilon, cfg.delta)


def _pipeline(cfg: RunConfig, schema, budget: str | None = None, strategy: str | None = None) -> PipelineConfig:
    strategy = (strategy or cfg.strategy).lower()
    strategy = {"q": "workload", "i": "identity", "f": "fourier", "c": "marginals",
                "user": "marginals", "h": "hierarchical"}.get(strategy, strategy)
    centroids, assign = None, {}
    if strategy == "marginals":
        if not cfg.user_marginals:
            raise ValueError("--strategy marginals needs --user-marginals")
        spec = read_spec_file(cfg.user_marginals, schema, cfg.dim if schema is None else None)
        centroids, assign = tuple(spec.marginals), spec.assign
    elif cfg.user_marginals:
        spec = read_spec_file(cfg.user_marginals, schema, cfg.dim if schema is None else None)
        if spec.kind:
            strategy = spec.kind
    return PipelineConfig(strategy=strategy, budget=budget or cfg.budget, recovery=cfg.recovery,
                          consistency=cfg.consistency, centroids=centroids, assign=assign)


def cmd_ingest(cfg: RunConfig) -> int:
    schema = load_schema(cfg.schema)
    x, enc = ingest_csv(cfg.data, schema)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    fmt = f"0{schema.d}b"
    body = ["cell,bits,count"] + [f"{j},{j:{fmt}},{_fmt(c)}" for j, c in enumerate(x.cells)]
    _write(out / "contingency.csv", _commented(cfg, body))
    doc = {"run": dict(line.split("=", 1) for line in cfg.header()), "dictionary": enc.dictionary()}
    (out / "dictionary.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write(out / "metadata.txt", cfg.header() + [f"d={schema.d}", f"records={_fmt(x.total)}"])
    print(f"ingested {int(x.total)} records into {x.cells.size} cells -> {out}")
    return 0


def _budget_tables(plan) -> tuple[list[str], list[str]]:
    G, sol = plan.grouping, plan.budget
    s = G.group_sums(plan.b)
    groups = ["group,constant,s,eta"] + [
        f"{r},{_fmt(G.constants[r])},{_fmt(s[r])},{_fmt(sol.eta[r])}" for r in range(G.g)]
    labels = plan.strategy.row_labels()
    rows = ["row,label,group,b,eps,variance,suppressed"] + [
        f"{i},{labels[i]},{G.group_of[i]},{_fmt(plan.b[i])},{_fmt(sol.eps[i])},"
        f"{_fmt(sol.sigma_diag[i])},{int(sol.suppressed[i])}" for i in range(plan.strategy.m)]
    return groups, rows


def cmd_budget(cfg: RunConfig) -> int:
    schema = _schema(cfg)
    w = _workload(cfg, schema)
    spec = _spec(cfg)
    plan = make_plan(_pipeline(cfg, schema), w, spec)
    check_privacy(plan.strategy, plan.eps, spec)
    groups, rows = _budget_tables(plan)
    summary = [f"groups={plan.grouping.g}", f"budget_objective={_fmt(plan.budget.objective)}",
               f"predicted_total_variance={_fmt(plan.total_variance)}",
               f"optimality_guaranteed={int(plan.budget.optimal)}"]
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "groups.csv", _commented(cfg, groups))
        _write(out / "rows.csv", _commented(cfg, rows))
        _write(out / "metadata.txt", cfg.header() + summary)
    print("\n".join(summary))
    print("\n".join(groups))
    return 0


def cmd_release(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ValueError("release needs an explicit --seed")
    schema = load_schema(cfg.schema)
    x, _ = ingest_csv(cfg.data, schema)
    w = _workload(cfg, schema)
    spec = _spec(cfg)
    plan = make_plan(_pipeline(cfg, schema), w, spec)
    bundle = run_release(plan, x, cfg.seed, noiseless=cfg.noiseless)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)

    labels = plan.strategy.row_labels()
    nz = bundle.noisy
    zrows = ["row,label,value,eps,variance,suppressed"] + [
        f"{i},{labels[i]},{_fmt(nz.z[i])},{_fmt(plan.eps[i])},{_fmt(nz.variance[i])},{int(nz.suppressed[i])}"
        for i in range(plan.strategy.m)]
    _write(out / "z.csv", _commented(cfg, zrows))

    head = "marginal,cell,value,predicted_variance" + (",consistent_value" if bundle.consistent_y is not None else "")
    yrows = [head]
    for i, (marg, cell) in enumerate(w.row_labels()):
        line = f"{marg},{cell},{_fmt(bundle.y[i])},{_fmt(bundle.variance[i])}"
        if bundle.consistent_y is not None:
            line += f",{_fmt(bundle.consistent_y[i])}"
        yrows.append(line)
    _write(out / "y.csv", _commented(cfg, yrows))

    groups, rows = _budget_tables(plan)
    _write(out / "budget.csv", _commented(cfg, rows))
    _write(out / "metadata.txt", cfg.header() + [
        f"strategy_kind={plan.strategy.kind}", f"recovery={plan.recovery.source}",
        f"groups={plan.grouping.g}", f"budget_objective={_fmt(plan.budget.objective)}",
        f"predicted_total_variance={_fmt(bundle.total_variance)}",
        "budget_vector=" + " ".join(_fmt(e) for e in plan.eps)])
    print(f"released {w.q} answers from {plan.strategy.m} strategy rows -> {out}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    if cfg.trials < 1:
        raise ValueError("--trials must be >= 1")
    schema = load_schema(cfg.schema)
    x, _ = ingest_csv(cfg.data, schema)
    w = _workload(cfg, schema)
    spec = _spec(cfg)
    budgets = ["uniform", "optimal"] if cfg.budget == "both" else [cfg.budget]
    configs = [_pipeline(cfg, schema, budget=b, strategy=s.strip())
               for s in cfg.strategy.split(",") for b in budgets]
    reports = compare(configs, x, w, spec, trials=cfg.trials, seed=cfg.seed or 0)
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "results.csv", _commented(cfg, to_csv(reports).splitlines()))
    (out / "results.txt").write_text(to_text(reports, with_time=False))
    _write(out / "timings.csv", ["config,seconds"] + [f"{r.label},{r.runtime:.6f}" for r in reports])
    sys.stdout.write(to_text(reports))
    return 0


COMMANDS = {"ingest": cmd_ingest, "budget": cmd_budget, "release": cmd_release, "evaluate": cmd_evaluate}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpcube", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, workload=True, privacy=True):
        p.add_argument("--schema", required=data)
        if data:
            p.add_argument("--data", required=True)
        p.add_argument("--out")
        if workload:
            p.add_argument("--workload", required=True)
            p.add_argument("--dim", type=int, help="dimension for mask-only workloads without a schema")
            p.add_argument("--strategy", default="workload")
            p.add_argument("--user-marginals")
            p.add_argument("--recovery", choices=["natural", "gls"], default="natural")
            p.add_argument("--consistency", action="store_true")
        if privacy:
            p.add_argument("--epsilon", type=float, required=True)
            p.add_argument("--delta", type=float)

    common(sub.add_parser("ingest", help="CSV -> contingency vector"), workload=False, privacy=False)
    p = sub.add_parser("budget", help="noise budgets and predicted objective")
    common(p, data=False)
    p.add_argument("--budget", choices=["uniform", "optimal"], default="optimal")
    p = sub.add_parser("release", help="one private release")
    common(p)
    p.add_argument("--budget", choices=["uniform", "optimal"], default="optimal")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--noiseless", action="store_true", help="testing only: no noise")
    p = sub.add_parser("evaluate", help="compare strategies by Monte Carlo")
    common(p)
    p.add_argument("--budget", choices=["uniform", "optimal", "both"], default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1000)
    return parser


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = RunConfig.from_args(ns)
    try:
        return COMMANDS[cfg.command](cfg)
    except PrivacyViolation as exc:
        print(f"dpcube {cfg.command}: privacy check failed: {exc}", file=sys.stderr)
        return EXIT_PRIVACY
    except (IngestError, ValueError, KeyError, OSError) as exc:
        print(f"dpcube {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
