"""Command-line entry points: single runs, sweeps, weak-scaling studies,
and inspection dumps.

Exit codes: 0 success, 2 usage/config error, 3 infeasible initial round,
4 diverged sample, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import controller
from .config import ConfigError, RunConfig
from .report import RoundCsvWriter, TraceCsvWriter, build_report, dump_report
from .scheduler import fit_weak_scaling
from .seeding import sample_seed

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_DIVERGED = 4


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.set:
        cfg.apply_overrides(args.set)
    if args.seed is not None:
        cfg.set("seed", str(args.seed))
    if args.mode is not None:
        cfg.set("exec_mode", args.mode)
    if args.workers is not None:
        cfg.set("workers", str(args.workers))
    return cfg


def run_experiment(cfg: RunConfig, out_dir: Path) -> tuple[dict, int]:
    """One budgeted run; writes rounds.csv, report.json, optional trace.csv."""
    out_dir.mkdir(parents=True, exist_ok=True)
    model = cfg.build_model()
    bmlmc_cfg = cfg.build_controller_config()
    trace = TraceCsvWriter(out_dir / "trace.csv") if cfg["trace"] else None
    scheduler = cfg.build_scheduler(trace_sink=trace)
    rounds_csv = RoundCsvWriter(out_dir / "rounds.csv", cfg["max_level"])
    try:
        result = controller.run(bmlmc_cfg, model, scheduler,
                                round_sink=rounds_csv)
    finally:
        rounds_csv.close()
        if trace is not None:
            trace.close()
    report = build_report(result, cfg.echo_dict())
    dump_report(report, out_dir / "report.json")
    if "infeasible-init" in result.flags:
        return report, EXIT_INFEASIBLE
    if "diverged-sample" in result.flags:
        return report, EXIT_DIVERGED
    return report, EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    report, code = run_experiment(cfg, Path(args.out))
    final = report["final"]
    print(f"stop={final['stop_reason']} q_hat={final['q_hat']} "
          f"err_rmse={final['err_rmse']} "
          f"consumed={report['budget']['consumed']}/{report['budget']['initial']}")
    return code


def _sanitize(value: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "._-" else "_" for ch in value)


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        print("sweep needs at least one value", file=sys.stderr)
        return EXIT_USAGE
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    table = []
    worst = EXIT_OK
    for value in values:
        member = RunConfig(dict(cfg.values))
        member.set(args.param, value)
        report, code = run_experiment(
            member, out_root / f"{_sanitize(args.param)}={_sanitize(value)}")
        worst = max(worst, code)
        table.append({
            "param": args.param, "value": value,
            "q_hat": report["final"]["q_hat"],
            "err_rmse": report["final"]["err_rmse"],
            "err_disc": report["final"]["err_disc"],
            "err_input": report["final"]["err_input"],
            "consumed": report["budget"]["consumed"],
            "budget": report["budget"]["initial"],
            "rates": report["rates"],
            "exit_code": code,
        })
    with open(out_root / "sweep.json", "w", encoding="utf-8") as fh:
        json.dump({"param": args.param, "members": table}, fh,
                  sort_keys=True, indent=2)
    with open(out_root / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("param,value,q_hat,err_rmse,err_disc,err_input,consumed,budget\n")
        for row in table:
            fh.write(f"{row['param']},{row['value']},{row['q_hat']!r},"
                     f"{row['err_rmse']!r},{row['err_disc']!r},"
                     f"{row['err_input']!r},{row['consumed']!r},"
                     f"{row['budget']!r}\n")
    for row in table:
        print(f"{row['param']}={row['value']}: err_rmse={row['err_rmse']}")
    return worst


def weak_scaling_study(cfg: RunConfig, out_dir: Path, k_max: int,
                       reps: int) -> dict:
    """BMLMC once per machine size p = p_size * 2^k, k = 0..k_max.

    Fixed time budget per unit; the fit coordinate counts halvings below
    the largest machine, so the fitted curve grows with it.
    """
    if cfg["time_budget"] <= 0.0:
        raise ConfigError("weak-scaling needs time_budget > 0")
    if cfg["accounting"] != "cluster":
        raise ConfigError("weak-scaling needs accounting = cluster")
    out_dir.mkdir(parents=True, exist_ok=True)
    base_p = cfg["p_size"]
    base_seed = cfg["seed"]
    members = []
    partial = False
    for k in range(k_max + 1):
        p = base_p * 2**k
        rmses = []
        for rep in range(reps):
            member = RunConfig(dict(cfg.values))
            member.set("p_size", str(p))
            member.set("seed", str(base_seed + rep))
            try:
                report, code = run_experiment(member, out_dir / f"k{k}-rep{rep}")
            except Exception as exc:          # member failure -> partial sweep
                print(f"member k={k} rep={rep} failed: {exc}", file=sys.stderr)
                partial = True
                continue
            if code != EXIT_OK:
                partial = True
                continue
            rmses.append(report["final"]["err_rmse"])
        members.append({
            "k": k, "p": p, "budget": p * cfg["time_budget"],
            "rmse_mean": float(np.mean(rmses)) if rmses else None,
            "rmse_runs": rmses,
        })
    points = [(k_max - m["k"], m["rmse_mean"]) for m in members
              if m["rmse_mean"] is not None]
    fit = None
    if len(points) >= 3:
        f = fit_weak_scaling(points)
        fit = {"err_s": f.err_s, "err_p": f.err_p, "delta_hat": f.delta_hat,
               "residual": f.residual, "degenerate": f.degenerate}
    result = {"members": members, "fit": fit, "partial": partial,
              "reps": reps, "time_budget": cfg["time_budget"]}
    with open(out_dir / "scaling.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, sort_keys=True, indent=2)
    with open(out_dir / "scaling.csv", "w", encoding="utf-8") as fh:
        fh.write("k,p,budget,rmse\n")
        for m in members:
            if m["rmse_mean"] is not None:
                fh.write(f"{k_max - m['k']},{m['p']},{m['budget']!r},"
                         f"{m['rmse_mean']!r}\n")
    return result


def _cmd_weak_scaling(args) -> int:
    cfg = _load_config(args)
    result = weak_scaling_study(cfg, Path(args.out), args.k_max, args.reps)
    for m in result["members"]:
        print(f"k={m['k']} p={m['p']}: rmse={m['rmse_mean']}")
    if result["fit"]:
        f = result["fit"]
        print(f"fit: err_s={f['err_s']} err_p={f['err_p']} "
              f"delta_hat={f['delta_hat']}")
    else:
        print("fit: skipped (need >= 3 points)")
    return EXIT_OK if not result["partial"] else 1


def _cmd_fit_scaling(args) -> int:
    points = []
    with open(args.input, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        ki = header.index("k")
        ri = header.index("rmse")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) > max(ki, ri):
                points.append((float(parts[ki]), float(parts[ri])))
    if len(points) < 3:
        print("fit refused: need >= 3 points", file=sys.stderr)
        return EXIT_USAGE
    f = fit_weak_scaling(points)
    print(f"err_s={f.err_s} err_p={f.err_p} delta_hat={f.delta_hat} "
          f"residual={f.residual} degenerate={f.degenerate}")
    return EXIT_OK


def _cmd_dump_field(args) -> int:
    cfg = _load_config(args)
    from .models.field import CovSpec, FieldSampler
    cov = CovSpec(sigma=cfg["wave.sigma"], corr_length=cfg["wave.corr_length"],
                  smoothness=cfg["wave.smoothness"])
    sampler = FieldSampler(cov, args.cells)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "field.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x," + ",".join(f"sample{i}" for i in range(args.count)) + "\n")
        fields = [sampler.sample(sample_seed(cfg["seed"], 0, i))
                  for i in range(args.count)]
        x = (np.arange(args.cells) + 0.5) / args.cells
        for row in range(args.cells):
            vals = ",".join(repr(float(f[row])) for f in fields)
            fh.write(f"{float(x[row])!r},{vals}\n")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_dump_solution(args) -> int:
    cfg = _load_config(args)
    cfg.set("model", "wave1d")
    model = cfg.build_model()
    seed = sample_seed(cfg["seed"], args.level, args.ordinal)
    x, rho, v, p = model.snapshot(args.level, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "solution.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,rho,v,p\n")
        for i in range(len(x)):
            fh.write(f"{float(x[i])!r},{float(rho[i])!r},"
                     f"{float(v[i])!r},{float(p[i])!r}\n")
    print(f"wrote {path}")
    return EXIT_OK


def _add_common(parser) -> None:
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    parser.add_argument("--mode", choices=("simulated", "threaded"),
                        default=None, help="execution mode")
    parser.add_argument("--workers", type=int, default=None,
                        help="evaluation thread count")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bmlmc",
        description="Budget-constrained multilevel Monte Carlo engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one budgeted experiment")
    _add_common(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="equal-budget parameter sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", required=True, help="config key to sweep")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_ws = sub.add_parser("weak-scaling",
                          help="fixed time budget, growing machine")
    _add_common(p_ws)
    p_ws.add_argument("--k-max", type=int, default=5,
                      help="largest machine is p_size * 2^k_max")
    p_ws.add_argument("--reps", type=int, default=3,
                      help="runs per machine size")
    p_ws.set_defaults(fn=_cmd_weak_scaling)

    p_fit = sub.add_parser("fit-scaling", help="refit a scaling.csv")
    p_fit.add_argument("--input", required=True)
    p_fit.set_defaults(fn=_cmd_fit_scaling)

    p_field = sub.add_parser("dump-field", help="dump field realizations")
    _add_common(p_field)
    p_field.add_argument("--cells", type=int, default=256)
    p_field.add_argument("--count", type=int, default=4)
    p_field.set_defaults(fn=_cmd_dump_field)

    p_sol = sub.add_parser("dump-solution", help="dump one wave solve")
    _add_common(p_sol)
    p_sol.add_argument("--level", type=int, default=1)
    p_sol.add_argument("--ordinal", type=int, default=0,
                       help="sample ordinal used for the seed")
    p_sol.set_defaults(fn=_cmd_dump_solution)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
