"""Command-line interface: ``gen``, ``fit``, ``expect``, ``adjudicate``, ``simulate``, ``risk``.

Options come from three layers, later ones winning: built-in defaults, an
optional JSON file given with ``--config``, and command-line flags. The
effective options are written into ``manifest.json`` in the output
directory together with SHA-256 digests of every input and output file.

Exit codes: 0 ok, 2 invalid input, 3 model fit did not converge, 4 I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional

from . import __version__, files
from .benefits import adjudicate
from .domain import ValidationError
from .engine import (
    GeneratorSpec,
    SimulationConfig,
    SimulationError,
    expected_totals,
    generate_synthetic_portfolio,
    run_simulation,
)
from .glm import ConvergenceError, FitSpecs, ThreePartModel, fit_report, fit_three_part_model
from .risk import BASES, DEFAULT_ALPHA, N_BOOTSTRAP, RiskConfig, scr

logger = logging.getLogger("hpsolvency")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4

GLOBAL_DEFAULTS = {"seed": 0, "threads": None, "out": "."}

COMMAND_DEFAULTS = {
    "gen": {"spec": None},
    "fit": {"portfolio": None, "episodes": None, "modelspec": None, "branches": None, "plot": True},
    "expect": {"model": None, "portfolio": None},
    "adjudicate": {"portfolio": None, "episodes": None, "plan": None},
    "simulate": {
        "model": None,
        "portfolio": None,
        "plan": None,
        "scenarios": 10000,
        "initial_capital": 0.0,
        "plot": True,
    },
    "risk": {
        "distribution": None,
        "alpha": DEFAULT_ALPHA,
        "basis": "quantile_of_loss",
        "bootstrap": N_BOOTSTRAP,
        "plot": True,
    },
}

# options naming input files; their digests go into the manifest
INPUT_KEYS = ("spec", "portfolio", "episodes", "modelspec", "model", "plan", "distribution")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


# -- argument parsing ---------------------------------------------------------


def _global_options(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="master seed (default 0)")
    g.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    g.add_argument("--out", help="output directory (default .)")
    g.add_argument("--config", help="JSON file of option values; command-line flags take precedence")


def _flag(parser, name: str, **kw) -> None:
    parser.add_argument(f"--{name.replace('_', '-')}", dest=name, **kw)


def _bool_flag(parser, name: str, help: str) -> None:
    parser.add_argument(f"--{name}", dest=name, action="store_true", help=help)
    parser.add_argument(f"--no-{name}", dest=name, action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpsolvency",
        description="Health-plan expenditure model, Monte Carlo profit distribution and solvency capital.",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", default=False)
    _global_options(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help, argument_default=argparse.SUPPRESS)
        _global_options(p)
        return p

    p = command("gen", "draw a synthetic portfolio and claim history from a generator spec")
    _flag(p, "spec", help="generator spec JSON (r, H, J, optional true coefficients)")

    p = command("fit", "fit the three-part model to a portfolio and its episodes")
    _flag(p, "portfolio", help="portfolio CSV")
    _flag(p, "episodes", help="episode history CSV")
    _flag(p, "modelspec", help="JSON with model terms (optional; default intercept + age + sex)")
    _flag(p, "branches", type=int, help="number of branches J (default: largest branch id in the episodes)")
    _bool_flag(p, "plot", "write fitted_curves.png (default on)")

    p = command("expect", "closed-form expected expenditure by member, family and plan")
    _flag(p, "model", help="fitted model JSON")
    _flag(p, "portfolio", help="portfolio CSV")

    p = command("adjudicate", "reimbursements per family and branch for an episode file")
    _flag(p, "portfolio", help="portfolio CSV")
    _flag(p, "episodes", help="episode CSV")
    _flag(p, "plan", help="plan design JSON")

    p = command("simulate", "Monte Carlo distributions of total expenditure, reimbursement and profit")
    _flag(p, "model", help="fitted model JSON")
    _flag(p, "portfolio", help="portfolio CSV")
    _flag(p, "plan", help="plan design JSON")
    _flag(p, "scenarios", type=int, help="number of simulated years (default 10000)")
    _flag(p, "initial_capital", type=float, help="capital added to U in the summary only (default 0)")
    _bool_flag(p, "plot", "write density_U.png (default on)")

    p = command("risk", "VaR, TVaR and solvency capital from a simulated profit distribution")
    _flag(p, "distribution", help="distribution CSV written by simulate (dist_U.csv)")
    _flag(p, "alpha", type=float, help=f"confidence level (default {DEFAULT_ALPHA})")
    _flag(p, "basis", choices=BASES, help="capital basis (default quantile_of_loss)")
    _flag(p, "bootstrap", type=int, help=f"bootstrap resamples for standard errors (default {N_BOOTSTRAP})")
    _bool_flag(p, "plot", "write loss_density.png (default on)")
    return parser


def effective_options(args: argparse.Namespace) -> Dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cmd = args.command
    opts = {**GLOBAL_DEFAULTS, **COMMAND_DEFAULTS[cmd]}
    given = {k: v for k, v in vars(args).items() if k not in ("command", "verbose", "config")}
    config_path = getattr(args, "config", None)
    if config_path:
        doc = _load_json(config_path, "config")
        if not isinstance(doc, dict):
            raise CliError(EXIT_VALIDATION, "validation", f"{config_path}: config must be a JSON object")
        # a config may hold shared keys at top level and per-command sections
        section = doc.get(cmd, {})
        flat = {k: v for k, v in doc.items() if k not in COMMAND_DEFAULTS}
        for k, v in {**flat, **section}.items():
            if k not in opts:
                raise CliError(EXIT_VALIDATION, "validation", f"{config_path}: unknown option {k!r} for {cmd}")
            opts[k] = v
    opts.update(given)
    return opts


# -- helpers ------------------------------------------------------------------


def _load_json(path, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_VALIDATION, "validation", f"{path}: {what} is not valid JSON ({exc})") from None


def _require(opts: Dict, *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) in (None, "")]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise CliError(EXIT_VALIDATION, "validation", f"missing required option(s): {flags}")


def _load_model(path) -> ThreePartModel:
    return ThreePartModel.from_dict(_load_json(path, "model"))


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, command: str, opts: Dict, outputs: List[str], started: str) -> None:
    """One ``manifest.json`` per output directory; rewritten by every run."""
    config_text = json.dumps(opts, sort_keys=True, separators=(",", ":"), default=str)
    inputs = {}
    for key in INPUT_KEYS:
        path = opts.get(key)
        if path:
            inputs[key] = {"path": str(path), "sha256": files.sha256_file(path)}
    doc = {
        "command": command,
        "tool_version": __version__,
        "seed": int(opts["seed"]),
        "config": opts,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "inputs": inputs,
        "outputs": {name: files.sha256_file(out / name) for name in sorted(outputs)},
        "started_at": started,
        "finished_at": _utc_now(),
    }
    files.write_json(doc, out / "manifest.json")


# -- commands -----------------------------------------------------------------


def cmd_gen(opts: Dict, out: Path) -> List[str]:
    _require(opts, "spec")
    doc = _load_json(opts["spec"], "generator spec")
    if not isinstance(doc, dict):
        raise ValidationError("generator spec must be a JSON object")
    spec = GeneratorSpec.from_dict(doc)
    data = generate_synthetic_portfolio(spec, int(opts["seed"]))
    files.write_portfolio(data.portfolio, out / "portfolio.csv")
    files.write_episodes(data.episodes, out / "episodes.csv")
    # top-level "terms" lets this file double as --modelspec for fit
    truth = {
        "terms": [t.to_dict() for t in spec.terms],
        "generator": spec.to_dict(),
        "seed": int(opts["seed"]),
        "model": data.truth.to_dict(),
    }
    files.write_json(truth, out / "true_parameters.json")
    logger.info("generated %d members, %d families, %d episodes", spec.r, spec.H, len(data.episodes))
    return ["portfolio.csv", "episodes.csv", "true_parameters.json"]


def cmd_fit(opts: Dict, out: Path) -> List[str]:
    _require(opts, "portfolio", "episodes")
    episodes = files.read_episodes(opts["episodes"])
    J = opts.get("branches") or max((e.branch_id for e in episodes), default=0)
    if J < 2:
        raise ValidationError("need at least two branches to fit the type model")
    portfolio = files.read_portfolio(opts["portfolio"], int(J))
    files.check_episode_members(episodes, portfolio)
    specs = FitSpecs.default()
    if opts.get("modelspec"):
        specs = FitSpecs.from_dict(_load_json(opts["modelspec"], "model spec"))
    outcome = fit_three_part_model(portfolio, episodes, specs)
    report = fit_report(outcome.model)
    report["data"] = {
        "n_members": outcome.n_members,
        "n_episodes": outcome.n_episodes,
        "n_zero_expenditure_excluded": outcome.n_zero_excluded,
    }
    files.write_json(outcome.model.to_dict(), out / "model.json")
    files.write_json(report, out / "fit_report.json")
    written = ["model.json", "fit_report.json"]
    if opts.get("plot"):
        from .plotting import plot_fitted_curves

        plot_fitted_curves(outcome.model, out / "fitted_curves.png")
        written.append("fitted_curves.png")
    return written


def cmd_expect(opts: Dict, out: Path) -> List[str]:
    _require(opts, "model", "portfolio")
    model = _load_model(opts["model"])
    portfolio = files.read_portfolio(opts["portfolio"], model.J)
    rep = expected_totals(model, portfolio)
    summary = {
        "total": rep.total,
        "n_members": portfolio.r,
        "n_families": portfolio.H,
        "per_branch": dict(zip(map(str, model.branch_ids), [math.fsum(c) for c in rep.per_member_branch.T])),
        "per_family": dict(zip(rep.family_ids, rep.per_family.tolist())),
    }
    files.write_json(summary, out / "expected.json")
    header = ["member_id", "family_id", "expected_total"] + [f"branch_{j}" for j in model.branch_ids]
    fam = {m.member_id: m.family_id for m in portfolio.members}
    rows = (
        [mid, fam[mid], float(tot)] + row.tolist()
        for mid, tot, row in zip(rep.member_ids, rep.per_member, rep.per_member_branch)
    )
    files.write_csv(out / "expected_members.csv", header, rows)
    return ["expected.json", "expected_members.csv"]


def cmd_adjudicate(opts: Dict, out: Path) -> List[str]:
    _require(opts, "portfolio", "episodes", "plan")
    plan = files.read_plan(opts["plan"])
    portfolio = files.read_portfolio(opts["portfolio"], plan.n_branches)
    episodes = files.read_episodes(opts["episodes"])
    files.check_episode_members(episodes, portfolio)
    result = adjudicate(episodes, portfolio, plan)
    rows = ([c.family_id, c.branch_id, c.k_hj, "true" if c.capped else "false"] for c in result.cells)
    files.write_csv(out / "reimbursements.csv", ["family_id", "branch_id", "k_hj", "capped"], rows)
    files.write_json(
        {"Z": result.Z, "K": result.K, "n_episodes": len(episodes), "n_cells": len(result.cells)},
        out / "adjudication.json",
    )
    return ["reimbursements.csv", "adjudication.json"]


def cmd_simulate(opts: Dict, out: Path) -> List[str]:
    _require(opts, "model", "portfolio", "plan")
    model = _load_model(opts["model"])
    plan = files.read_plan(opts["plan"])
    portfolio = files.read_portfolio(opts["portfolio"], model.J)
    seed = int(opts["seed"])
    config = SimulationConfig(int(opts["scenarios"]), seed, opts.get("threads"))
    res = run_simulation(model, portfolio, plan, config)

    written = []
    for label, values in (("Z", res.Z), ("K", res.K), ("U", res.U)):
        files.write_distribution(values, out / f"dist_{label}.csv", label, seed)
        files.write_histogram(values, out / f"hist_{label}.csv", label, seed)
        written += [f"dist_{label}.csv", f"hist_{label}.csv"]
    summary = res.summary()
    a0 = float(opts.get("initial_capital") or 0.0)
    summary["initial_capital"] = a0
    summary["net_asset_value_mean"] = a0 + summary["U"]["mean"]
    summary["expected_total_Z"] = expected_totals(model, portfolio).total
    files.write_json(summary, out / "summary.json")
    written.append("summary.json")
    if opts.get("plot"):
        from .plotting import plot_density

        plot_density(res.U, out / "density_U.png", "U")
        written.append("density_U.png")
    return written


def cmd_risk(opts: Dict, out: Path) -> List[str]:
    _require(opts, "distribution")
    dist = files.read_distribution(opts["distribution"])
    if dist.label not in ("U", ""):
        raise ValidationError(f"risk measures need the profit distribution U, got label {dist.label!r}")
    config = RiskConfig(float(opts["alpha"]), opts["basis"], int(opts["bootstrap"]), int(opts["seed"]))
    report = scr(dist, config)
    doc = report.to_dict()
    doc["distribution_seed"] = dist.seed
    files.write_json(doc, out / "risk.json")
    written = ["risk.json"]
    if opts.get("plot"):
        from .plotting import plot_density

        plot_density(dist.values, out / "loss_density.png", "U", var=report.var, tvar=report.tvar)
        written.append("loss_density.png")
    return written


COMMANDS = {
    "gen": cmd_gen,
    "fit": cmd_fit,
    "expect": cmd_expect,
    "adjudicate": cmd_adjudicate,
    "simulate": cmd_simulate,
    "risk": cmd_risk,
}


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"status": "error", "kind": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    started = _utc_now()
    try:
        opts = effective_options(args)
        if opts.get("threads") is not None and int(opts["threads"]) < 1:
            raise ValidationError("--threads must be >= 1")
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command](opts, out)
        write_manifest(out, args.command, opts, written, started)
    except CliError as exc:
        return _fail(exc.kind, str(exc), exc.code)
    except ValidationError as exc:
        return _fail("validation", str(exc), EXIT_VALIDATION)
    except ConvergenceError as exc:
        return _fail("convergence", str(exc), EXIT_CONVERGENCE)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    except (ValueError, TypeError) as exc:
        # malformed numbers and similar input defects that surface below validation
        return _fail("validation", str(exc), EXIT_VALIDATION)
    except (SimulationError, MemoryError) as exc:
        return _fail("resources", str(exc) or "out of memory", 1)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
