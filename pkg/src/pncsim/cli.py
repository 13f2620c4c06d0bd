"""Command line entry point: ``pncsim run|sweep|validate|tables``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .linkadapt import LinkTables, default_tables
from .scenario import POLICY_NAMES, ScenarioConfig, ScenarioError, reference_scenario
from .sim import dumps_json, metadata, run, sweep


def _load_scenario(path) -> ScenarioConfig:
    return reference_scenario() if path is None else ScenarioConfig.load(path)


def _apply_policy_args(scn: ScenarioConfig, args) -> ScenarioConfig:
    over = {}
    if getattr(args, "horizon", None) is not None:
        over["policy.horizon"] = args.horizon
    if getattr(args, "constituency", None) is not None:
        over["policy.constituency"] = args.constituency
    return scn.with_overrides(**over) if over else scn


def cmd_run(args) -> int:
    scn = _apply_policy_args(_load_scenario(args.scenario), args)
    seed = scn.seed if args.seed is None else args.seed
    t0 = time.perf_counter()
    res = run(scn, args.policy or scn.policy.name, seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(res.kpi.to_csv())
    meta = metadata(scn, res)
    out.with_suffix(".meta.json").write_text(dumps_json(meta))
    if not args.no_plot:
        from .plotting import plot_run
        plot_run(res, scn, out.with_suffix(".png"))
    print(f"{res.policy} seed {seed}: window throughput {res.window_throughput_bps / 1e6:.3f} Mbit/s, "
          f"delivered {res.delivered_bits} bits, dropped {res.dropped_bits} "
          f"({time.perf_counter() - t0:.1f} s) -> {out}")
    return 0


def cmd_sweep(args) -> int:
    scn = _apply_policy_args(_load_scenario(args.scenario), args)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    bad = [p for p in policies if p not in POLICY_NAMES]
    if bad:
        raise ScenarioError(f"unknown policies {bad}; choose from {sorted(POLICY_NAMES)}")
    seeds = range(args.seed_start, args.seed_start + args.seeds)
    t0 = time.perf_counter()
    res = sweep(scn, seeds, policies, jobs=args.jobs)
    baseline = args.baseline if args.baseline in policies else None
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    prefix.with_suffix(".csv").write_text(res.to_csv(baseline))
    Path(f"{prefix}.seeds.csv").write_text(res.per_seed_csv())
    report = {"scenario": scn.name, "seeds": [seeds.start, seeds.stop], "aggregate": res.aggregate(),
              "safety": res.safety()}
    if baseline:
        report["paired_gain"] = [res.paired_gain(p, baseline) for p in policies if p != baseline]
    prefix.with_suffix(".json").write_text(dumps_json(report))
    if not args.no_plot:
        from .plotting import plot_sweep
        plot_sweep(res, prefix.with_suffix(".png"), baseline)
    for row in res.aggregate():
        print(f"{row['policy']:>10}: {row['mean_bps'] / 1e6:.3f} Mbit/s "
              f"[{row['ci_low_bps'] / 1e6:.3f}, {row['ci_high_bps'] / 1e6:.3f}]")
    for g in report.get("paired_gain", []):
        print(f"{g['policy']} vs {g['baseline']}: {100 * g['relative_gain']:+.1f}% "
              f"(95% CI {100 * g['rel_ci_low']:+.1f}% .. {100 * g['rel_ci_high']:+.1f}%)")
    print(f"{len(seeds)} seeds in {time.perf_counter() - t0:.1f} s -> {prefix}.csv")
    return 0


def cmd_validate(args) -> int:
    scn = _load_scenario(args.scenario)
    small = ", ".join(str(c.id) for c in scn.small_cells) or "none"
    print(f"ok: {scn.name} (schema {scn.schema_version}), {scn.duration_ttis} TTIs, "
          f"macro {scn.macro.id}, small cells {small}, policy {scn.policy.name}")
    return 0


def cmd_tables(args) -> int:
    tables = LinkTables.load(args.tables) if args.tables else default_tables()
    text = json.dumps(tables.as_dict(), indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pncsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_arg(p):
        p.add_argument("--scenario", default=None,
                       help="scenario JSON file (default: bundled reference scenario)")

    p = sub.add_parser("run", help="simulate one seed and write the KPI CSV")
    scenario_arg(p)
    p.add_argument("--policy", choices=sorted(POLICY_NAMES), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="KPI CSV path (metadata and figure go alongside)")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--constituency", choices=["small-cell-exclusive", "wireless-exclusive"], default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run several policies over many seeds and aggregate")
    scenario_arg(p)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--policies", default="pnc,a6")
    p.add_argument("--baseline", default="a6")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--constituency", choices=["small-cell-exclusive", "wireless-exclusive"], default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a scenario file")
    scenario_arg(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("tables", help="dump the loaded CQI/MCS/TBS tables")
    p.add_argument("--tables", default=None, help="alternative table JSON")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tables)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"pncsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
