"""Command-line front end.

Subcommands: simulate (integrate and report tail statistics), check (run
every criterion and write a JSON report), map-analyze (study the auxiliary
interval map at a given delay load), sweep (evaluate criteria over a
parameter grid, in parallel), reproduce (rerun the built-in scenarios
against their reference values).

Exit codes: 0 success (for check: some global-attractivity criterion is
satisfied; for reproduce: all reference checks pass), 1 negative outcome
(no criterion holds / a reference check fails), 2 usage or data error.
"""

import argparse
import copy
import csv
import json
import math
import os
import sys
from concurrent import futures

import numpy as np

from . import criteria, diffmap, equilibria, integrator
from . import scenario as scenario_mod
from ._backend import BACKEND
from .errors import (
    ExprError,
    MapUndefined,
    NoPositiveEquilibrium,
    PositivityLoss,
    ScenarioError,
)
from .model import check_history, validate

_G = "%.17g"


class CommandError(Exception):
    def __init__(self, message, code=2):
        super().__init__(message)
        self.code = code


def _fmt(x):
    return _G % float(x)


def _load_scenario(args):
    if getattr(args, "scenario", None) and getattr(args, "example", None):
        raise CommandError("use either --scenario or --example, not both")
    if getattr(args, "example", None):
        sc = scenario_mod.builtin(args.example)
    elif getattr(args, "scenario", None):
        sc = scenario_mod.load(args.scenario)
    else:
        raise CommandError("a scenario is required (--scenario FILE or --example ID)")
    data = sc.to_dict()
    changed = False
    if getattr(args, "horizon", None) is not None:
        data.setdefault("run", {})["T"] = args.horizon
        changed = True
    if getattr(args, "step", None) is not None:
        data.setdefault("run", {})["h"] = args.step
        changed = True
    if getattr(args, "tail_window", None) is not None:
        data.setdefault("run", {})["tail_window"] = args.tail_window
        changed = True
    if getattr(args, "zeta", None) is not None:
        data.setdefault("overrides", {})["zeta_M"] = args.zeta
        changed = True
    if changed:
        sc = scenario_mod.Scenario(data, name=sc.name)
    return sc


class Prepared:
    """Validated scenario with the derived quantities every command needs."""

    def __init__(self, scenario, need_zeta=True):
        self.scenario = scenario
        self.model = scenario.model
        self.history = scenario.history
        report = validate(self.model, overrides=scenario.overrides or None)
        if not report.ok:
            raise CommandError(
                "scenario validation failed:\n  " + "\n  ".join(report.violations)
            )
        self.aggregates = report.aggregates
        bad_history = check_history(
            self.history, self.model, self.aggregates.tau_max
        )
        if bad_history:
            raise CommandError(
                "history validation failed:\n  " + "\n  ".join(bad_history)
            )
        try:
            self.equilibrium = equilibria.carrying_capacity(self.model)
        except NoPositiveEquilibrium:
            self.equilibrium = None
        self.zeta_stats = None
        if "zeta_M" in scenario.overrides:
            self.zeta_M = scenario.overrides["zeta_M"]
            self.zeta_source = "override"
        elif need_zeta and self.equilibrium is not None:
            self.zeta_stats = integrator.delay_integral_sup(
                self.model, self.equilibrium.K
            )
            self.zeta_M = self.zeta_stats.zeta_M
            self.zeta_source = "sampled"
        else:
            self.zeta_M = None
            self.zeta_source = "sampled"

    def criteria_report(self):
        stats = self.zeta_stats
        return criteria.assemble_report(
            self.model,
            self.aggregates,
            equilibrium=self.equilibrium,
            zeta_M=self.zeta_M,
            zeta_source=self.zeta_source,
            zeta_per_pair=stats.zeta_per_pair if stats is not None else (),
            las_lhs=stats.las_lhs if stats is not None else None,
        )


def _run_value(scenario, key, default):
    value = scenario.run.get(key)
    return default if value is None else value


def _write_json(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    sc = _load_scenario(args)
    prep = Prepared(sc, need_zeta=False)
    model = prep.model
    T = _run_value(sc, "T", model.t0 + 500.0)
    h = sc.run.get("h")
    traj = integrator.integrate(model, prep.history, T, h=h)
    window = _run_value(
        sc, "tail_window", integrator.default_tail_window(prep.aggregates.tau_max)
    )
    tail = integrator.tail_extrema(traj, window)
    name = sc.name or "<scenario>"
    print(
        f"simulate {name}: backend={BACKEND} t0={_fmt(model.t0)} "
        f"T={_fmt(traj.t_end)} h={_fmt(traj.h)} steps={traj.n_steps}"
    )
    print(
        f"tail window {_fmt(tail.window)}: l_est={_fmt(tail.l_est)} "
        f"L_est={_fmt(tail.L_est)} spread={_fmt(tail.L_est - tail.l_est)}"
    )
    if prep.equilibrium is not None:
        K = prep.equilibrium.K
        print(
            f"K={_fmt(K)}: |l_est-K|={_fmt(abs(tail.l_est - K))} "
            f"|L_est-K|={_fmt(abs(tail.L_est - K))}"
        )
    else:
        print("no positive equilibrium (p <= delta); distances relative to 0:")
        print(f"|l_est|={_fmt(abs(tail.l_est))} |L_est|={_fmt(abs(tail.L_est))}")
    if args.out:
        integrator.export_csv(traj, args.out)
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# check


def _check_csv(report, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["criterion", "status", "satisfied", "lhs", "rhs", "margin"])
        for name, verdict in report.criterion_verdicts().items():
            writer.writerow(
                [
                    name,
                    verdict.status,
                    str(verdict.satisfied).lower(),
                    "" if verdict.lhs is None else _fmt(verdict.lhs),
                    "" if verdict.rhs is None else _fmt(verdict.rhs),
                    "" if verdict.margin is None else _fmt(verdict.margin),
                ]
            )


def cmd_check(args):
    sc = _load_scenario(args)
    prep = Prepared(sc)
    report = prep.criteria_report()
    doc = {"scenario": sc.name}
    doc.update(report.to_dict())
    out = args.out or ("report.csv" if args.format == "csv" else "report.json")
    if args.format == "csv":
        _check_csv(report, out)
    else:
        _write_json(doc, out)
    for name, verdict in report.criterion_verdicts().items():
        extra = f" [{verdict.reason}]" if verdict.reason else ""
        if verdict.lhs is not None:
            extra = f" (lhs={verdict.lhs:.6g} rhs={verdict.rhs:.6g})"
        print(f"{name}: {verdict.status}{extra}")
    ok = report.global_attractivity_holds
    print(f"global attractivity: {'yes' if ok else 'no'}")
    print(f"wrote {out}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# map-analyze


def cmd_map_analyze(args):
    sc = _load_scenario(args)
    prep = Prepared(sc)
    if prep.equilibrium is None:
        raise CommandError("no positive equilibrium: p <= delta")
    zeta = args.zeta if args.zeta is not None else prep.zeta_M
    if zeta is None:
        raise CommandError("a delay load is required (--zeta or overrides.zeta_M)")
    model = prep.model
    K = prep.equilibrium.K
    try:
        map_spec = diffmap.build_map(model, K, zeta)
    except MapUndefined as exc:
        raise CommandError(str(exc)) from exc
    if map_spec.mu > 0.0:
        x_hi = diffmap.h_eval(map_spec, map_spec.theta)
    else:
        x_hi = 2.0 * K
    verdict = diffmap.attractor_check(map_spec, x_hi)
    expansive = diffmap.expansive_interval_search(map_spec, x_hi)
    hp = diffmap.h_prime_at_K(map_spec)
    grid = (
        np.geomspace(map_spec.theta, x_hi, 1001)
        if x_hi > map_spec.theta
        else np.full(1001, map_spec.theta)
    )
    sf = diffmap.schwarzian_f(model, grid)
    orbit = diffmap.iterate(map_spec, map_spec.theta, 200)
    out = args.out or "map_report.json"
    orbit_path = os.path.splitext(out)[0] + "_orbit.csv"
    diffmap.export_orbit_csv(orbit, orbit_path)
    doc = {
        "scenario": sc.name,
        "zeta": zeta,
        "K": K,
        "theta": map_spec.theta,
        "mu": map_spec.mu,
        "theta_1": map_spec.theta_1,
        "h_prime_at_K": hp,
        "x_hi": x_hi,
        "sf": {"min": float(sf.min()), "max": float(sf.max()), "points": len(grid)},
        "attractor": verdict.to_dict(),
        "expansive_interval": (
            None if expansive is None else {"c": expansive[0], "d": expansive[1]}
        ),
        "orbit_csv": orbit_path,
    }
    _write_json(doc, out)
    print(
        f"map at zeta={_fmt(zeta)}: theta={_fmt(map_spec.theta)} "
        f"h'(K)={_fmt(hp)} Sf in [{_fmt(sf.min())}, {_fmt(sf.max())}]"
    )
    if map_spec.theta_1 is not None:
        print(f"theta_1={_fmt(map_spec.theta_1)}")
    print(f"attractor check: {verdict.status} (flags: {', '.join(verdict.flags) or '-'})")
    print(
        "expansive interval: "
        + ("none found" if expansive is None else f"[{_fmt(expansive[0])}, {_fmt(expansive[1])}]")
    )
    print(f"wrote {out} and {orbit_path}")
    return 0


# ---------------------------------------------------------------------------
# sweep


def _sweep_worker(payload):
    base, name, assignment, names, simulate = payload
    row = {path: value for path, value in assignment}
    try:
        data = copy.deepcopy(base)
        for path, value in assignment:
            scenario_mod.set_path(data, path, value)
        sc = scenario_mod.Scenario(data, name=name)
        prep = Prepared(sc)
        report = prep.criteria_report()
        verdicts = report.criterion_verdicts()
        for crit in names:
            row[crit] = verdicts[crit].status
        row["global_attractivity_holds"] = str(
            report.global_attractivity_holds
        ).lower()
        if simulate:
            model = prep.model
            T = _run_value(sc, "T", model.t0 + 500.0)
            traj = integrator.integrate(model, prep.history, T, h=sc.run.get("h"))
            window = _run_value(
                sc,
                "tail_window",
                integrator.default_tail_window(prep.aggregates.tau_max),
            )
            tail = integrator.tail_extrema(traj, window)
            target = prep.equilibrium.K if prep.equilibrium is not None else 0.0
            converged = (
                abs(tail.l_est - target) < 1e-3 and abs(tail.L_est - target) < 1e-3
            )
            row["converged"] = str(converged).lower()
    except Exception as exc:  # noqa: BLE001 - a bad grid point must not kill the sweep
        for crit in names:
            row.setdefault(crit, "error")
        row.setdefault("global_attractivity_holds", "error")
        if simulate:
            row.setdefault("converged", "error")
        row["error"] = str(exc)
    return row


def cmd_sweep(args):
    sc = _load_scenario(args)
    if not args.sweep:
        raise CommandError("a sweep spec is required (--sweep FILE)")
    with open(args.sweep, "r", encoding="utf-8") as fh:
        try:
            spec_data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CommandError(f"invalid sweep JSON: {exc}") from exc
    spec = scenario_mod.parse_sweep(spec_data)
    names = list(spec.criteria or criteria.CRITERION_NAMES)
    unknown = [n for n in names if n not in criteria.CRITERION_NAMES]
    if unknown:
        raise CommandError(
            "unknown criteria: "
            + ", ".join(unknown)
            + " (known: "
            + ", ".join(criteria.CRITERION_NAMES)
            + ")"
        )
    base = sc.to_dict()
    # Resolve every path against the base data up front so a bad path fails
    # before any work is scheduled.
    for param in spec.params:
        probe = copy.deepcopy(base)
        scenario_mod.set_path(probe, param.path, param.lo)
    points = spec.points()
    paths = [param.path for param in spec.params]
    payloads = [
        (base, sc.name, tuple(point.items()), tuple(names), spec.simulate)
        for point in points
    ]
    workers = args.workers or min(os.cpu_count() or 1, 8)
    if workers <= 1 or len(payloads) == 1:
        rows = [_sweep_worker(p) for p in payloads]
    else:
        with futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_worker, payloads))
    out = args.out or "sweep.csv"
    header = list(paths) + names + ["global_attractivity_holds"]
    if spec.simulate:
        header.append("converged")
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            record = [_fmt(row[path]) for path in paths]
            record += [row.get(col, "") for col in header[len(paths):]]
            writer.writerow(record)
    print(f"swept {len(rows)} points over {', '.join(paths)}")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# reproduce


def _bisect_flip(fn, lo, hi, tol=1e-6):
    """Largest-precision location where boolean fn flips between lo and hi."""
    ok_lo = fn(lo)
    if fn(hi) == ok_lo:
        raise CommandError("no criterion flip inside the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) == ok_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _reference_checks_39():
    sc = scenario_mod.builtin("3.9")
    model = sc.model
    eq = equilibria.carrying_capacity(model)
    K = eq.K
    checks = [("equilibrium K", K, 5.0, 1e-10)]

    # Derivative of the auxiliary map at K against its closed form.
    worst = 0.0
    for z in (0.5, 1.0, 1.5, 2.0):
        hp = diffmap.h_prime_at_K(diffmap.build_map(model, K, z))
        worst = max(worst, abs(hp - (-4.4 * math.expm1(0.1 * z))))
    checks.append(("map slope closed form, max deviation", worst, 0.0, 1e-9))

    z_ref = 10.0 * math.log(27.0 / 22.0)
    z_star = _bisect_flip(
        lambda z: abs(diffmap.h_prime_at_K(diffmap.build_map(model, K, z))) <= 1.0,
        1.0,
        3.0,
    )
    checks.append(("unit-slope delay load", z_star, z_ref, 1e-6))
    hp_ref = abs(diffmap.h_prime_at_K(diffmap.build_map(model, K, z_ref)))
    checks.append(("|h'(K)| at the unit-slope load", hp_ref, 1.0, 1e-9))

    _, M_hi = criteria.permanence_bounds(
        model, K, validate(model, overrides=sc.overrides).aggregates
    )
    _, _, c_domain, _ = criteria.check_claims_route(model, K, z_ref, M_hi)
    domain_ref = (3.0 * math.exp(20.0 / 27.0) + 2.0 * math.exp(25.0 / 27.0)) / 27.0
    checks.append(("map domain bound at the unit-slope load", c_domain.lhs, domain_ref, 5e-4))
    checks.append(("map domain bound below 1", c_domain.lhs, 1.0, "lt"))

    product = model.delta * 1.5 * (2.0 + math.log(model.p_total / model.delta))
    checks.append(("stability product at the override load", product, 0.978, 1e-3))
    las = criteria.check_local_stability(model, K, 1.5)
    checks.append(("simplified stability verdict at the override load", las.simple))

    z_h2 = _bisect_flip(
        lambda z: criteria.check_ga_multi(model, K, z)[1].satisfied, 0.0, 3.0
    )
    checks.append(("size-condition threshold", z_h2, 10.0 * math.log(1.2), 1e-6))
    return checks


def _reference_checks_310():
    sc = scenario_mod.builtin("3.10")
    model = sc.model
    eq = equilibria.carrying_capacity(model)
    checks = [("equilibrium residual", eq.residual, 0.0, 1e-10)]
    z_ref = (100.0 / 9.0) * math.log(1.0 + 4.0 / (5.0 * math.log(10.0 / 9.0)))
    z_star = _bisect_flip(
        lambda z: criteria.check_ga_multi_noK(model, z).satisfied, 20.0, 30.0
    )
    checks.append(("equilibrium-free size threshold", z_star, z_ref, 1e-2))
    report_sc = Prepared(sc).criteria_report()
    checks.append(
        ("combined equilibrium-free verdict at the override load",
         report_sc.ga_multi_nok_combined)
    )
    return checks


def cmd_reproduce(args):
    example = args.example
    if not example:
        raise CommandError("an id is required (--example 3.9|3.10)")
    if example == "3.9":
        checks = _reference_checks_39()
    elif example == "3.10":
        checks = _reference_checks_310()
    else:
        raise CommandError(f"unknown built-in id {example!r} (known: 3.9, 3.10)")
    lines = []
    all_ok = True
    for entry in checks:
        if len(entry) == 2:
            label, verdict = entry
            ok = verdict.satisfied
            lines.append(f"{label}: status={verdict.status} {'PASS' if ok else 'FAIL'}")
        else:
            label, computed, reference, tol = entry
            if tol == "lt":
                ok = computed < reference
                lines.append(
                    f"{label}: computed={_fmt(computed)} bound={_fmt(reference)} "
                    f"{'PASS' if ok else 'FAIL'}"
                )
            else:
                diff = abs(computed - reference)
                ok = diff <= tol
                lines.append(
                    f"{label}: computed={_fmt(computed)} reference={_fmt(reference)} "
                    f"|diff|={diff:.3g} tol={tol:.3g} {'PASS' if ok else 'FAIL'}"
                )
        all_ok = all_ok and ok
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    return 0 if all_ok else 1


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub):
    sub.add_argument("--scenario", help="scenario JSON file")
    sub.add_argument("--example", help="built-in scenario id (3.9 or 3.10)")
    sub.add_argument("--out", help="output file path")
    sub.add_argument("--horizon", type=float, help="integration end time T")
    sub.add_argument("--step", type=float, help="integration step h")
    sub.add_argument("--tail-window", type=float, dest="tail_window",
                     help="tail statistics window length")
    sub.add_argument("--zeta", type=float, help="exact delay-load bound zeta_M")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nicholson-lab",
        description="Simulate the delayed recruitment model and check its "
        "permanence, stability and global attractivity criteria.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="integrate and report tail statistics")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("check", help="evaluate every criterion")
    _add_common(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_check)

    p = subs.add_parser("map-analyze", help="study the auxiliary interval map")
    _add_common(p)
    p.set_defaults(func=cmd_map_analyze)

    p = subs.add_parser("sweep", help="evaluate criteria over a parameter grid")
    _add_common(p)
    p.add_argument("--sweep", help="sweep spec JSON file")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("reproduce", help="rerun built-in reference values")
    _add_common(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ScenarioError, ExprError, NoPositiveEquilibrium) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PositivityLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MapUndefined as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
