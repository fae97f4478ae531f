"""Command-line front end: generate / run / compare / sweep / selfcheck.

Configuration-file-first: flags only override scalar fields, so the
provenance of an experiment lives in one JSON file.  All outputs land
under --out, and identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import selfcheck
from .errors import EfsimError
from .harness import RunConfig, compare, emit_csv, emit_svg, execute, summary_to_json


class _Parser(argparse.ArgumentParser):
    """argparse that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="efsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a synthetic problem + run-config skeleton")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--n", type=int, default=16)
    gen.add_argument("--d", type=int, default=10)
    gen.add_argument("--n-per-client", type=int, default=10)
    gen.add_argument("--l-target", type=float, default=50.0)
    gen.add_argument("--mu", type=float, default=1.0)
    gen.add_argument("--q", type=float, default=1.0)
    gen.add_argument("--z", type=float, default=10.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--regularizer", choices=("l2", "nonconvex"), default="nonconvex")
    gen.add_argument("--lam", type=float, default=0.001)

    run = sub.add_parser("run", help="execute one run config")
    run.add_argument("--config", required=True, help="path to a run-config JSON file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--rounds", type=int, default=None, help="override the round budget")
    run.add_argument("--format", choices=("csv", "svg", "both"), default="both")

    cmp_cmd = sub.add_parser("compare", help="execute a list of configs on a shared problem")
    cmp_cmd.add_argument("--config", required=True, help="JSON file with {\"runs\": [...]}")
    cmp_cmd.add_argument("--out", required=True)
    cmp_cmd.add_argument("--seed", type=int, default=None)
    cmp_cmd.add_argument("--rounds", type=int, default=None)
    cmp_cmd.add_argument("--format", choices=("csv", "svg", "both"), default="both")

    sweep = sub.add_parser("sweep", help="vary q, z or participation over a grid")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--param", choices=("q", "z", "p"), required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--rounds", type=int, default=None)

    check = sub.add_parser("selfcheck", help="run the lemma/inequality property suites")
    check.add_argument("--full", action="store_true", help="full sample counts (slower)")
    return parser


def _load_config(path: str) -> dict:
    cfg_path = Path(path)
    if not cfg_path.exists():
        raise EfsimError(f"config file not found: {path}")
    with cfg_path.open("r", encoding="utf-8") as handle:
        return json.load(handle)


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "rounds", None) is not None:
        cfg["rounds"] = args.rounds
    return cfg


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _cmd_generate(args) -> int:
    out = Path(args.out)
    skeleton = {
        "problem": {
            "source": "synthetic",
            "n": args.n,
            "d": args.d,
            "n_per_client": args.n_per_client,
            "l_target": args.l_target,
            "mu": args.mu,
            "q": args.q,
            "z": args.z,
            "seed": args.seed,
            "regularizer": args.regularizer,
            "lam": args.lam,
        },
        "algorithm": "ef21w",
        "compressor": {"kind": "topk", "k": 1},
        "stepsize": {"rule": "ef21w", "multiplier": 1.0},
        "rounds": 1000,
        "seed": args.seed,
    }
    RunConfig.from_dict(skeleton)  # validate before writing
    _write(out / "config.json", json.dumps(skeleton, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'config.json'}")
    return 0


def _cmd_run(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    config = RunConfig.from_dict(cfg)
    rows, summary = execute(config)
    out = Path(args.out)
    if args.format in ("csv", "both"):
        _write(out / "metrics.csv", emit_csv(rows))
    if args.format in ("svg", "both"):
        _write(out / "curve.svg", emit_svg([(config.algorithm, rows)]))
    _write(out / "summary.json", summary_to_json(summary))
    print(
        f"{config.algorithm}: gamma={summary.gamma:.6g} "
        f"min ||grad f||^2 = {summary.min_grad_norm_sq:.6g} over {config.rounds} rounds"
    )
    return 0


def _cmd_compare(args) -> int:
    raw = _load_config(args.config)
    runs = raw.get("runs")
    if not isinstance(runs, list) or len(runs) < 2:
        raise EfsimError('compare config must contain a "runs" list with >= 2 entries')
    configs = [RunConfig.from_dict(_apply_overrides(entry, args)) for entry in runs]
    report = compare(configs, labels=raw.get("labels"))
    out = Path(args.out)
    if args.format in ("csv", "both"):
        _write(out / "compare.csv", report.joint_csv())
        _write(out / "thresholds.csv", report.threshold_table())
    if args.format in ("svg", "both"):
        _write(out / "compare.svg", report.joint_svg())
    gammas = {label: s.gamma for label, s in zip(report.labels, report.summaries)}
    _write(
        out / "report.json",
        json.dumps(
            {"gammas": gammas, "gamma_ratios": dict(zip(report.labels, report.gamma_ratios))},
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    for label, ratio in zip(report.labels, report.gamma_ratios):
        print(f"{label}: gamma ratio vs {report.labels[0]} = {ratio:.6g}")
    return 0


def _cmd_sweep(args) -> int:
    base = _apply_overrides(_load_config(args.config), args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise EfsimError(f"could not parse sweep values {args.values!r}") from None
    if not values:
        raise EfsimError("sweep needs at least one value")
    out = Path(args.out)
    lines = ["value,gamma,min_grad_norm_sq,mean_grad_norm_sq,final_f"]
    for value in values:
        cfg = json.loads(json.dumps(base))
        if args.param == "p":
            cfg["participation"] = value
        else:
            cfg.setdefault("problem", {})[args.param] = value
        config = RunConfig.from_dict(cfg)
        rows, summary = execute(config)
        tag = format(value, "g").replace("-", "m").replace(".", "_")
        _write(out / f"summary_{args.param}_{tag}.json", summary_to_json(summary))
        lines.append(
            f"{value:.17g},{summary.gamma:.17g},{summary.min_grad_norm_sq:.17g},"
            f"{summary.mean_grad_norm_sq:.17g},{summary.final_f:.17g}"
        )
        print(f"{args.param}={value:g}: gamma={summary.gamma:.6g}")
    _write(out / "sweep.csv", "\n".join(lines) + "\n")
    return 0


def _cmd_selfcheck(args) -> int:
    results = selfcheck.run_all(fast=not args.full)
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{result.name}: {status} ({result.detail})")
        failed += 0 if result.passed else 1
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "run": _cmd_run,
        "compare": _cmd_compare,
        "sweep": _cmd_sweep,
        "selfcheck": _cmd_selfcheck,
    }
    try:
        return handlers[args.command](args)
    except EfsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
