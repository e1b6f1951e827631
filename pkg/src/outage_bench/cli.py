"""Command-line front end.

Subcommands:

* ``analytic``    - per-user selection probabilities and outage bounds
* ``simulate``    - Monte Carlo outage estimates under a chosen scheduler
* ``sweep-rate``  - bounds plus MC estimates over a required-rate grid
* ``sweep-error`` - bounds plus MC estimates over an estimate-error grid
* ``validate``    - run the built-in oracle checks and print pass/fail

Scenarios come from a JSON file (see the README for the schema) or from a
named preset; scalar fields can be overridden with flags. Results are CSV
(RFC-4180, '.' decimal separator, 12 significant digits) to stdout or
--out, or the same rows as JSON with --format json. The sweep commands
can additionally render the curves to an image with --plot.

Monte Carlo output is bit-identical for a fixed (seed, trials) regardless
of the OUTAGE_BENCH_THREADS worker cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, replace
from typing import Sequence

from .analytic import SystemConfig, bound_report
from .channel import UserProfile
from .errors import CapabilityError, ConfigurationError, DomainError
from .mc import McConfig, OutageReport, estimate_outage, estimate_outage_sweep

__all__ = ["Scenario", "load_scenario", "preset_scenario", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2

_SCENARIO_KEYS = {
    "snr_db", "rho", "rate", "slots", "users", "scheduler",
    "trials", "seed", "pf_epsilon",
}


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario file plus simulation controls."""

    rho: float
    rate: float
    slots: int
    users: tuple[UserProfile, ...]
    scheduler: str = "max"
    trials: int = 1_000_000
    seed: int = 12345
    pf_epsilon: float = 1e-6

    def system(self) -> SystemConfig:
        return SystemConfig(
            profiles=self.users, rho=self.rho, rate=self.rate, n_slots=self.slots
        )

    def mc(self) -> McConfig:
        return McConfig(
            trials=self.trials, seed=self.seed, scheduler=self.scheduler,
            pf_epsilon=self.pf_epsilon,
        )


def preset_scenario(name: str) -> Scenario:
    """Named scenario presets.

    ``linear12``: 12 users with linearly increasing fading variance
    sigma2_j = 0.9 + 0.1 j and estimate-error power xi2_j = 0.025 (j - 1)
    for j = 1..12 (user 1 therefore has a perfect estimate), 5-slot delay
    window, 10 dB SNR.
    """
    if name == "linear12":
        users = tuple(
            UserProfile(0.9 + 0.1 * j, 0.025 * (j - 1)) for j in range(1, 13)
        )
        return Scenario(rho=10.0, rate=1.0, slots=5, users=users)
    raise ConfigurationError(f"unknown preset {name!r} (available: linear12)")


def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: scenario must be a JSON object")
    unknown = set(raw) - _SCENARIO_KEYS
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    has_snr = "snr_db" in raw
    has_rho = "rho" in raw
    if has_snr == has_rho:
        raise ConfigurationError(
            f"{path}: exactly one of 'snr_db' or 'rho' must be present"
        )
    rho = 10.0 ** (float(raw["snr_db"]) / 10.0) if has_snr else float(raw["rho"])
    for key in ("rate", "slots", "users"):
        if key not in raw:
            raise ConfigurationError(f"{path}: missing required key '{key}'")
    users_raw = raw["users"]
    if not isinstance(users_raw, list) or not users_raw:
        raise ConfigurationError(f"{path}: 'users' must be a nonempty list")
    users = []
    for j, entry in enumerate(users_raw):
        if not isinstance(entry, dict) or "sigma2" not in entry:
            raise ConfigurationError(f"{path}: users[{j}] needs a 'sigma2' field")
        extra = set(entry) - {"sigma2", "xi2"}
        if extra:
            raise ConfigurationError(f"{path}: users[{j}] unknown keys {sorted(extra)}")
        users.append(UserProfile(float(entry["sigma2"]), float(entry.get("xi2", 0.0))))
    scenario = Scenario(
        rho=rho,
        rate=float(raw["rate"]),
        slots=int(raw["slots"]),
        users=tuple(users),
        scheduler=str(raw.get("scheduler", "max")),
        trials=int(raw.get("trials", 1_000_000)),
        seed=int(raw.get("seed", 12345)),
        pf_epsilon=float(raw.get("pf_epsilon", 1e-6)),
    )
    scenario.system()  # surface invariant violations now
    scenario.mc()
    return scenario


def _apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    updates = {}
    if getattr(args, "rate", None) is not None:
        updates["rate"] = args.rate
    if getattr(args, "slots", None) is not None:
        updates["slots"] = args.slots
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "scheduler", None) is not None:
        updates["scheduler"] = args.scheduler
    scenario = replace(scenario, **updates) if updates else scenario
    scenario.system()
    scenario.mc()
    return scenario


def _fmt(value) -> str:
    """CSV cell formatting: 12 significant digits for floats."""
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _emit(rows: list[dict], header: list[str], args: argparse.Namespace) -> None:
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in header])
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _exit_code(rows: list[dict]) -> int:
    return EXIT_OK if all(r.get("status") == "ok" for r in rows) else EXIT_PARTIAL


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_analytic(scenario: Scenario, args: argparse.Namespace) -> int:
    system = scenario.system()
    rows = []
    for k in range(system.n_users):
        row = {"user": k + 1, "status": "ok"}
        try:
            rep = bound_report(system, k)
            row.update(
                p_select=rep.p_select,
                loose_bound=rep.loose_bound,
                tight_bound=rep.tight_bound,
                p_out_1=rep.p_out_one_slot,
                p_out_2=rep.p_out_two_slots,
            )
        except CapabilityError as exc:
            row["status"] = str(exc)
        rows.append(row)
    header = ["user", "p_select", "loose_bound", "tight_bound", "p_out_1",
              "p_out_2", "status"]
    _emit(rows, header, args)
    return _exit_code(rows)


def _simulate_rows(report: OutageReport) -> list[dict]:
    n = report.n_slots
    rows = []
    for k in range(report.outage.size):
        row = {
            "user": k + 1,
            "outage": float(report.outage[k]),
            "std_error": float(report.std_error[k]),
            "p_hat": float(report.p_hat[k]),
            "status": "ok",
        }
        for i in range(n + 1):
            row[f"slots_{i}"] = int(report.slot_hist[k, i])
        for i in range(n + 1):
            cond = report.conditional(k, i)
            row[f"cond_out_{i}"] = None if cond.low_support else cond.value
        rows.append(row)
    return rows


def cmd_simulate(scenario: Scenario, args: argparse.Namespace) -> int:
    report = estimate_outage(scenario.system(), scenario.mc())
    rows = _simulate_rows(report)
    n = scenario.slots
    header = (
        ["user", "outage", "std_error", "p_hat"]
        + [f"slots_{i}" for i in range(n + 1)]
        + [f"cond_out_{i}" for i in range(n + 1)]
        + ["status"]
    )
    _emit(rows, header, args)
    return _exit_code(rows)


def _parse_grid(text: str, what: str) -> list[float]:
    try:
        grid = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigurationError(f"invalid {what} grid {text!r}") from exc
    if not grid:
        raise ConfigurationError(f"{what} grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError(f"{what} grid must be strictly increasing")
    return grid


def _sweep_rows(sweep_values, per_value_systems, scenario, mc_reports):
    rows = []
    for value, system, report in zip(sweep_values, per_value_systems, mc_reports):
        for k in range(system.n_users):
            row = {"sweep_value": float(value), "user": k + 1, "status": "ok"}
            try:
                rep = bound_report(system, k)
                row.update(
                    loose_bound=rep.loose_bound, tight_bound=rep.tight_bound
                )
            except CapabilityError as exc:
                row["status"] = str(exc)
            row["mc_outage"] = float(report.outage[k])
            row["mc_se"] = float(report.std_error[k])
            rows.append(row)
    return rows


_SWEEP_HEADER = ["sweep_value", "user", "loose_bound", "tight_bound",
                 "mc_outage", "mc_se", "status"]


def cmd_sweep_rate(scenario: Scenario, args: argparse.Namespace) -> int:
    grid = _parse_grid(args.rates, "rate")
    if any(r < 0 for r in grid):
        raise ConfigurationError("rates must be >= 0")
    base = scenario.system()
    systems = [
        SystemConfig(profiles=base.profiles, rho=base.rho, rate=r,
                     n_slots=base.n_slots)
        for r in grid
    ]
    reports = estimate_outage_sweep(base, scenario.mc(), grid)
    rows = _sweep_rows(grid, systems, scenario, reports)
    _emit(rows, _SWEEP_HEADER, args)
    if args.plot:
        from .plotting import plot_rate_sweep

        plot_rate_sweep(rows, args.plot)
    return _exit_code(rows)


def cmd_sweep_error(scenario: Scenario, args: argparse.Namespace) -> int:
    grid = _parse_grid(args.xi2_grid, "xi2")
    if any(v < 0 for v in grid):
        raise ConfigurationError("xi2 values must be >= 0")
    try:
        swept = sorted({int(u) for u in args.users.split(",")})
    except ValueError as exc:
        raise ConfigurationError(f"invalid user list {args.users!r}") from exc
    if not swept or any(u < 1 or u > len(scenario.users) for u in swept):
        raise ConfigurationError(
            f"swept users must be 1-based indices in 1..{len(scenario.users)}"
        )
    systems = []
    for xi2 in grid:
        users = []
        for j, profile in enumerate(scenario.users, start=1):
            if j in swept:
                if xi2 > profile.sigma2:
                    raise ConfigurationError(
                        f"swept xi2={xi2} exceeds sigma2={profile.sigma2} of user {j}"
                    )
                users.append(UserProfile(profile.sigma2, xi2))
            else:
                users.append(profile)
        systems.append(
            SystemConfig(profiles=tuple(users), rho=scenario.rho,
                         rate=scenario.rate, n_slots=scenario.slots)
        )
    reports = [estimate_outage(system, scenario.mc()) for system in systems]
    rows = _sweep_rows(grid, systems, scenario, reports)
    _emit(rows, _SWEEP_HEADER, args)
    if args.plot:
        from .plotting import plot_error_sweep

        plot_error_sweep(rows, args.plot, swept_users=swept)
    return _exit_code(rows)


def cmd_validate(scenario: Scenario, args: argparse.Namespace) -> int:
    from .validate import run_checks

    results = run_checks(scenario, trials=scenario.trials, seed=scenario.seed)
    failed = 0
    for name, passed, detail in results:
        marker = "PASS" if passed else "FAIL"
        print(f"{marker}  {name}: {detail}")
        failed += 0 if passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_PARTIAL


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_scenario_args(parser: argparse.ArgumentParser, mc_flags: bool) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", help="path to a scenario JSON file")
    source.add_argument("--preset", help="named preset (linear12)")
    parser.add_argument("--rate", type=float, help="override required rate")
    parser.add_argument("--slots", type=int, help="override delay window")
    parser.add_argument("--out", help="write output to this path instead of stdout")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    if mc_flags:
        parser.add_argument("--trials", type=int, help="override trial count")
        parser.add_argument("--seed", type=int, help="override RNG seed")
        parser.add_argument(
            "--scheduler", choices=("max", "random", "pf"),
            help="override scheduler policy",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outage-bench",
        description="Outage lower bounds and Monte Carlo simulation for "
                    "max-based downlink scheduling with imperfect channel "
                    "estimates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="per-user bounds from the closed forms")
    _add_scenario_args(p, mc_flags=False)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", help="Monte Carlo outage estimates")
    _add_scenario_args(p, mc_flags=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep-rate", help="bounds and MC over a rate grid")
    _add_scenario_args(p, mc_flags=True)
    p.add_argument("--rates", required=True,
                   help="comma-separated strictly increasing rate grid")
    p.add_argument("--plot", help="also render the curves to this image path")
    p.set_defaults(func=cmd_sweep_rate)

    p = sub.add_parser("sweep-error", help="bounds and MC over an error grid")
    _add_scenario_args(p, mc_flags=True)
    p.add_argument("--xi2-grid", required=True, dest="xi2_grid",
                   help="comma-separated strictly increasing xi2 grid")
    p.add_argument("--users", required=True,
                   help="comma-separated 1-based user indices to sweep")
    p.add_argument("--plot", help="also render the curves to this image path")
    p.set_defaults(func=cmd_sweep_error)

    p = sub.add_parser("validate", help="run the oracle checks")
    _add_scenario_args(p, mc_flags=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = (
            preset_scenario(args.preset) if args.preset
            else load_scenario(args.scenario)
        )
        scenario = _apply_overrides(scenario, args)
        return args.func(scenario, args)
    except (ConfigurationError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
