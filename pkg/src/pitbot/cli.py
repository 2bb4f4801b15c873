"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 infeasible
(hop cannot be planned, or every robot ends depleted or blocked).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from pitbot import hopplan, navloc, propulsion, simcore, terrain

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _nonneg(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a number >= 0, got {text!r}")
    return v


def _count(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text!r}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _lengths(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("hop lengths must be positive")
    return vals


def _write(path, text):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    simcore.atomic_write(path, text)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="pitbot", description="Pit-bot lava-tube exploration simulator.", formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("budget", help="propellant, range, endurance and tank-fit report", formatter_class=fmt)
    b.add_argument("--scenario", type=Path, default=None, help="take robot specs from this scenario file")
    b.add_argument("--gravity", default="moon", help="moon, mars or a value in m/s^2 (ignored with --scenario)")
    b.add_argument("--technology", action="store_true", help="also print the technology comparison table")
    b.add_argument("--modes", type=_lengths, default=None, metavar="L1,L2,...",
                   help="also print a hop-length comparison for these lengths (m)")
    b.add_argument("--modes-csv", type=Path, default=None, help="write the hop-length comparison as CSV")
    b.add_argument("--json", action="store_true", help="print JSON instead of a table")

    h = sub.add_parser("plan-hop", help="minimum-fuel ballistic hop", formatter_class=fmt)
    h.add_argument("--range", dest="range_m", type=_positive, required=True, help="horizontal hop length (m)")
    h.add_argument("--dz", type=float, default=0.0, help="landing height above the launch point (m)")
    h.add_argument("--gravity", default="moon", help="moon, mars or a value in m/s^2")
    h.add_argument("--ceiling", type=_positive, default=None,
                   help="flat ceiling height above the launch point (m); omit for open sky")
    h.add_argument("--margin", type=_nonneg, default=0.0, help="clearance kept from floor and ceiling (m)")
    h.add_argument("--mass", type=_positive, default=propulsion.NOMINAL_TOTAL_KG, help="wet mass at launch (kg)")
    h.add_argument("--isp", type=_positive, default=330.0, help="main engine specific impulse (s)")
    h.add_argument("--trajectory", type=Path, default=None, help="write the sampled arc as CSV")
    h.add_argument("--dt", type=_positive, default=0.1, help="trajectory sample interval (s)")
    h.add_argument("--json", action="store_true", help="print JSON")

    m = sub.add_parser("localize-mc", help="Monte Carlo of localization error growth", formatter_class=fmt)
    m.add_argument("--legs", type=_count, default=143, help="formation legs per trial")
    m.add_argument("--leg-length", type=_positive, default=7.0, help="leg length (m), 5 to 9")
    m.add_argument("--trials", type=_count, default=1000, help="Monte Carlo trials")
    m.add_argument("--seed", type=_seed, required=True, help="base seed; trial i uses (seed, i)")
    m.add_argument("--robots", type=int, choices=(1, 2, 3), default=3, help="formation size")
    m.add_argument("--channels", choices=("stereo", "laser", "both"), default="stereo",
                   help="measurement channels; stereo alone is the calibrated error-budget configuration")
    m.add_argument("--no-noise", action="store_true", help="noise-free measurements")
    m.add_argument("--stereo-sigma", type=_positive, default=0.25, help="per-axis stereo fix sigma (m)")
    m.add_argument("--laser-sigma", type=_positive, default=2.5e-5, help="laser range sigma as a fraction of range")
    m.add_argument("--absolute", action="store_true",
                   help="chain fixes off estimated anchors instead of IMU-heading relative fixes")
    m.add_argument("--trace", type=Path, default=None, help="write per-leg trace CSV")
    m.add_argument("--json", action="store_true", help="print JSON")

    r = sub.add_parser("run", help="simulate a full mission", formatter_class=fmt)
    r.add_argument("--scenario", type=Path, required=True, help="scenario JSON file")
    r.add_argument("--seed", type=_seed, default=None, help="override the scenario seed")
    r.add_argument("--out", type=Path, default=None, help="directory for report.json, events.jsonl and CSVs")

    s = sub.add_parser("presets", help="list terrain and technology presets", formatter_class=fmt)
    s.add_argument("--json", action="store_true", help="print JSON")
    return p


# ---------------------------------------------------------------- commands


def _cmd_budget(args) -> int:
    if args.scenario is not None:
        scenario = simcore.load_scenario(args.scenario)
        body, spec = scenario.body, scenario.robots[0]
        rows = simcore.budget_report(scenario)
    else:
        body, spec = hopplan.body_from(args.gravity), simcore.RobotSpec("A")
        rows = simcore.budget_report(body=body)
    tech = modes = None
    if args.technology:
        tech = propulsion.technology_report(
            propulsion.load_technology_presets(), 100.0, body.g, spec.engine, spec.budget
        )
    if args.modes:
        modes = hopplan.compare_modes(body, args.modes, spec.budget, spec.engine)
        if args.modes_csv:
            _write(args.modes_csv, hopplan.modes_csv(modes))
    if args.json:
        out = {"budget": [asdict(r) for r in rows]}
        if tech is not None:
            out["technology"] = [asdict(t) for t in tech]
        if modes is not None:
            out["modes"] = [asdict(mr) | {"dv_per_meter": mr.dv_per_meter} for mr in modes]
        print(json.dumps(out, sort_keys=True, indent=2))
        return EXIT_OK
    sys.stdout.write(simcore.budget_text(rows))
    if tech is not None:
        print()
        print(f"{'technology':<28}{'energy Wh/kg':>14}{'mass kg':>9}{'range km':>10}{'claimed':>9}"
              f"{'hover hr':>10}{'claimed':>9}")
        for t in tech:
            print(f"{t.name:<28}{t.specific_energy_label:>14}{t.mass_kg:>9g}{t.computed_range_km:>10.3g}"
                  f"{t.claimed_range_label:>9}{t.computed_hover_hr:>10.3g}{t.claimed_fly_time_hr:>9g}"
                  + (f"  ({'; '.join(t.notes)})" if t.notes else ""))
    if modes is not None:
        print()
        print(f"{'hop_m':>8}{'dv/hop m/s':>12}{'kg/hop':>11}{'flight s':>10}{'range m':>10}{'dv/m':>9}")
        for mr in modes:
            print(f"{mr.hop_length_m:>8g}{mr.dv_per_hop_mps:>12.4f}{mr.propellant_per_hop_kg:>11.5f}"
                  f"{mr.flight_time_s:>10.3f}{mr.total_range_m:>10g}{mr.dv_per_meter:>9.4f}")
    return EXIT_OK


def _cmd_plan_hop(args) -> int:
    body = hopplan.body_from(args.gravity)
    origin, target = (0.0, 0.0), (args.range_m, args.dz)
    profile = None
    if args.ceiling is not None:
        if args.ceiling <= max(0.0, args.dz):
            raise ValueError("--ceiling must be above both the launch and landing points")
        profile = terrain.TubeProfile.from_stations(
            "plan-hop", [[0.0, 0.0, args.ceiling], [args.range_m, args.dz, args.ceiling]], width_m=10.0
        )
    engine = propulsion.EngineSpec(isp_main_s=args.isp, isp_acs_s=min(180.0, args.isp))
    try:
        plan = hopplan.plan_min_fuel_hop(origin, target, body, profile, args.margin, m0=args.mass, engine=engine)
    except hopplan.HopInfeasible as exc:
        sys.stderr.write(f"infeasible hop ({exc.binding}): {exc}\n")
        return EXIT_INFEASIBLE
    if args.trajectory:
        rows = ["t_s,s_m,z_m,vs_mps,vz_mps\n"]
        for t, s, z, vs, vz in hopplan.sample_trajectory(plan, args.dt):
            rows.append(f"{t!r},{s!r},{z!r},{vs!r},{vz!r}\n")
        _write(args.trajectory, "".join(rows))
    fields = {
        "range_m": plan.range_m,
        "dz_m": args.dz,
        "gravity_mps2": plan.g,
        "launch_angle_deg": plan.launch_angle,
        "launch_speed_mps": plan.launch_speed,
        "flight_time_s": plan.flight_time,
        "apex_z_m": plan.apex_z,
        "dv_launch_mps": plan.dv_launch,
        "dv_land_mps": plan.dv_land,
        "dv_total_mps": plan.dv_total,
        "propellant_kg": plan.propellant_kg,
    }
    if args.json:
        print(json.dumps(fields, sort_keys=True, indent=2))
    else:
        for k, v in fields.items():
            print(f"{k}: {v:.6f}" if k != "propellant_kg" else f"{k}: {v:.6e}")
    return EXIT_OK


def _cmd_localize(args) -> int:
    spec = navloc.SensorSpec(
        leg_length_m=args.leg_length,
        stereo_fix_sigma_m=args.stereo_sigma,
        laser_rel_sigma=args.laser_sigma,
        imu_heading=not args.absolute,
    )
    trace = [] if args.trace else None
    stats = navloc.run_localization_mc(
        args.legs, args.trials, args.seed, spec,
        robots=args.robots, use_laser=args.channels != "stereo", use_stereo=args.channels != "laser",
        noise=not args.no_noise, trace=trace,
    )
    if args.trace:
        _write(args.trace, navloc.trace_csv(trace))
    if args.json:
        print(json.dumps(stats.to_dict(), sort_keys=True, indent=2))
    else:
        sys.stdout.write(stats.to_text())
    return EXIT_OK


def _cmd_run(args) -> int:
    scenario = simcore.load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    result = simcore.run(scenario)
    if args.out:
        for path in simcore.write_outputs(result, args.out):
            print(f"wrote {path}")
    r = result.report
    print(f"scenario: {r.scenario}")
    print(f"seed: {r.seed}")
    print(f"arrived: {str(r.arrived).lower()} ({r.end_reason})")
    print(f"legs: {r.legs}  hops: {r.hops}  duration_s: {r.duration_s:.1f}")
    print(f"distance_covered_m: {r.distance_covered_m:.3f}")
    print(f"final_radial_error_m: {r.final_radial_error_m:.6g} ({r.final_relative_error_pct:.4g} %)")
    print(f"coverage_fraction: {r.coverage_fraction:.4f}")
    print(f"wheeled_infeasible: {str(r.wheeled_infeasible).lower()} (max slope {r.max_traversed_slope_deg:.1f} deg)")
    for rid, led in sorted(r.robots.items()):
        print(f"robot {rid}: mode={led['mode']} hops={led['hops']} propellant_used_kg={led['propellant_used_kg']:.6f} "
              f"battery_used_wh={led['battery_used_wh']:.4f}")
    if r.arrived:
        return EXIT_OK
    return EXIT_INFEASIBLE


def _cmd_presets(args) -> int:
    data = terrain._load_presets()
    profiles = []
    for name in terrain.PRESET_NAMES:
        prof = terrain.preset(name)
        profiles.append({
            "name": name,
            "description": data[name].get("description", ""),
            "length_m": prof.length,
            "width_m": prof.width_m,
            "stations": len(prof.s),
            "max_slope_deg": terrain.max_slope_between(prof, 0.0, prof.length),
        })
    tech = [asdict(t) for t in propulsion.load_technology_presets()]
    if args.json:
        print(json.dumps({"terrain": profiles, "technology": tech}, sort_keys=True, indent=2))
        return EXIT_OK
    print("terrain presets:")
    for p in profiles:
        print(f"  {p['name']:<18} {p['length_m']:>7g} m long, {p['stations']} stations, "
              f"max slope {p['max_slope_deg']:.1f} deg. {p['description']}")
    print("technology presets:")
    for t in tech:
        print(f"  {t['key']:<10} {t['name']}")
    return EXIT_OK


COMMANDS = {
    "budget": _cmd_budget,
    "plan-hop": _cmd_plan_hop,
    "localize-mc": _cmd_localize,
    "run": _cmd_run,
    "presets": _cmd_presets,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except (simcore.ScenarioError, terrain.TerrainError, propulsion.PropulsionError, ValueError) as exc:
        sys.stderr.write(f"pitbot {args.command}: error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"pitbot {args.command}: I/O error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
