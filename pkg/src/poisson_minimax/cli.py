"""Command-line front end.

Every subcommand reads a JSON config (``--config``), applies flag overrides,
prints one JSON document to stdout, and writes that document plus any CSV
dumps to ``--out`` when given.  Exit status: 0 success, 1 runtime or solver
failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .boundary import Boundaries, extract_boundaries, solve_value
from .config import RunConfig, load_config
from .detector import detect, read_timestamps
from .errors import ConfigError, MinimaxError, UndecidedError
from .fode import solve_fode
from .lfd import (
    estimate_h,
    find_lfd,
    gamma_mc,
    jbar_from_batch,
    jbar_immediate,
)
from .model import PriorOdds, Regime, classify_regime
from .pathsim import Interval, functionals, simulate_exits

log = logging.getLogger("poisson_minimax")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, list | tuple):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _boundaries(cfg: RunConfig) -> Boundaries | None:
    if classify_regime(cfg.model, cfg.costs) is Regime.TRIVIAL:
        return None
    if cfg.alpha_star is not None:
        return Boundaries(cfg.alpha_star, cfg.beta_star)
    grid = solve_value(cfg.model, cfg.costs, cfg.dp_config)
    if cfg.output_dir:
        grid.to_csv(Path(cfg.output_dir) / "value_grid.csv")
    return extract_boundaries(grid, cfg.dp_config.contact_tol)


def _require_nontrivial(bnd: Boundaries | None) -> Boundaries:
    if bnd is None:
        raise MinimaxError("trivial regime: stopping at once is optimal, nothing to simulate")
    return bnd


def _h_dict(e) -> dict:
    return {"phi0": e.phi0, "h": e.h, "se": e.se, "p_lower": e.p_lower,
            "mean_int": e.mean_int, "n_paths": e.n_paths}


def cmd_solve(cfg: RunConfig, args) -> dict:
    regime = classify_regime(cfg.model, cfg.costs)
    if regime is Regime.TRIVIAL:
        return {"regime": regime.value, "alpha_star": None, "beta_star": None,
                "ratio": None, "lfd": cfg.costs.threshold}
    bnd = _boundaries(cfg)
    return {"regime": regime.value, "alpha_star": bnd.alpha_star,
            "beta_star": bnd.beta_star, "ratio": bnd.ratio}


def cmd_fode(cfg: RunConfig, args) -> dict:
    bnd = _require_nontrivial(_boundaries(cfg))
    sol = solve_fode(cfg.model, cfg.costs, bnd.ratio, cfg.fode_steps)
    if cfg.output_dir:
        sol.to_csv(Path(cfg.output_dir) / "fode.csv")
    return {"alpha_star": bnd.alpha_star, "beta_star": bnd.beta_star, "ratio": bnd.ratio,
            "f0_ratio": float(sol.f0[-1]), "f1_ratio": float(sol.f1[-1]),
            "gamma_star": sol.gamma_star, "grid_points": len(sol.phis)}


def cmd_gamma(cfg: RunConfig, args) -> dict:
    bnd = _require_nontrivial(_boundaries(cfg))
    sol = solve_fode(cfg.model, cfg.costs, bnd.ratio, cfg.fode_steps)
    est, se = gamma_mc(cfg.model, cfg.costs, bnd.ratio, cfg.n_paths, cfg.seed, args.workers)
    return {"ratio": bnd.ratio, "gamma_mc": est, "gamma_mc_se": se,
            "gamma_fode": sol.gamma_star, "n_paths": cfg.n_paths}


def cmd_h(cfg: RunConfig, args) -> dict:
    bnd = _require_nontrivial(_boundaries(cfg))
    phi0 = args.phi0 if args.phi0 is not None else cfg.costs.threshold
    est = estimate_h(cfg.model, cfg.costs, bnd, phi0, cfg.n_paths, cfg.seed, args.workers)
    return {"alpha_star": bnd.alpha_star, "beta_star": bnd.beta_star, **_h_dict(est)}


def cmd_jbar(cfg: RunConfig, args) -> dict:
    psi = args.psi if args.psi is not None else cfg.costs.threshold
    bnd = _boundaries(cfg)
    if bnd is None:
        return {"regime": Regime.TRIVIAL.value, "psi": psi,
                "jbar": jbar_immediate(cfg.costs, psi), "se": 0.0}
    phi0 = args.phi0 if args.phi0 is not None else cfg.costs.threshold
    batch = simulate_exits(cfg.model, Interval(bnd.alpha_star / phi0, bnd.beta_star / phi0),
                           1.0, cfg.n_paths, cfg.seed, workers=args.workers)
    est, se = jbar_from_batch(batch, cfg.costs, psi)
    return {"regime": Regime.NONTRIVIAL.value, "phi0": phi0, "psi": psi, "jbar": est, "se": se}


def cmd_simulate(cfg: RunConfig, args) -> dict:
    bnd = _require_nontrivial(_boundaries(cfg))
    if args.phi0 is None:
        interval = Interval(bnd.ratio, 1.0, upper_closed=True)
    else:
        interval = Interval(bnd.alpha_star / args.phi0, bnd.beta_star / args.phi0)
    batch = simulate_exits(cfg.model, interval, 1.0, cfg.n_paths, cfg.seed, workers=args.workers)
    if cfg.output_dir:
        batch.to_csv(Path(cfg.output_dir) / "paths.csv")
    f = functionals(batch)
    return {"lower": interval.lower, "upper": interval.upper,
            "upper_closed": interval.upper_closed, "n_paths": f.n_paths,
            "p_lower": f.p_lower, "se_p_lower": f.se_p_lower,
            "mean_int_l_minus_1": f.mean_int_l_minus_1, "se_int_l_minus_1": f.se_int_l_minus_1,
            "mean_tau": f.mean_tau, "se_tau": f.se_tau}


def cmd_detect(cfg: RunConfig, args) -> dict:
    bnd = _require_nontrivial(_boundaries(cfg))
    psi = args.psi if args.psi is not None else cfg.costs.threshold
    prior = PriorOdds(psi)
    if args.stream in (None, "-"):
        out = detect(cfg.model, bnd, prior, read_timestamps(sys.stdin), cfg.costs, args.horizon)
    else:
        with open(args.stream) as fh:
            out = detect(cfg.model, bnd, prior, read_timestamps(fh), cfg.costs, args.horizon)
    return out.to_dict()


def cmd_find_lfd(cfg: RunConfig, args) -> dict:
    rep = find_lfd(cfg.model, cfg.costs, cfg.lfd_config(workers=args.workers))
    if cfg.output_dir:
        with open(Path(cfg.output_dir) / "saddle.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["psi", "jbar", "se"])
            for p, j, s in rep.saddle_curve:
                w.writerow([f"{p:.17g}", f"{j:.17g}", f"{s:.17g}"])
    b = rep.boundaries
    return {
        "regime": rep.regime.value,
        "alpha_star": b.alpha_star if b else None,
        "beta_star": b.beta_star if b else None,
        "ratio": b.ratio if b else None,
        "gamma_star": {"fode": rep.gamma_fode, "mc": rep.gamma_mc, "mc_se": rep.gamma_mc_se},
        "existence_guaranteed": rep.existence_guaranteed,
        "phi0": rep.phi0,
        "l_interval": list(rep.l_interval) if rep.l_interval else None,
        "h_at_phi0": rep.h_at_phi0,
        "h_at_phi0_se": rep.h_at_phi0_se,
        "h_tolerance": rep.h_tolerance,
        "h_at_threshold": _h_dict(rep.h_at_threshold) if rep.h_at_threshold else None,
        "bracket": list(rep.bracket) if rep.bracket else None,
        "sign_changes": [list(s) for s in rep.sign_changes],
        "prescan": [_h_dict(e) for e in rep.prescan],
        "evaluations": [_h_dict(e) for e in rep.evaluations],
        "jbar_at_phi0": list(rep.jbar_at_phi0) if rep.jbar_at_phi0 else None,
        "saddle_curve": [list(t) for t in rep.saddle_curve],
        "note": rep.note,
    }


COMMANDS = {
    "solve": cmd_solve,
    "fode": cmd_fode,
    "gamma": cmd_gamma,
    "h": cmd_h,
    "find-lfd": cmd_find_lfd,
    "jbar": cmd_jbar,
    "simulate": cmd_simulate,
    "detect": cmd_detect,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the Monte Carlo seed")
    common.add_argument("--paths", type=int, help="override n_paths")
    common.add_argument("--phi0", type=float, help="candidate least favorable prior odds")
    common.add_argument("--psi", type=float, help="prior odds to evaluate at")
    common.add_argument("--out", help="directory for JSON/CSV artifacts")
    common.add_argument("--stream", help="timestamp file, or - for stdin (detect)")
    common.add_argument("--horizon", type=float,
                        help="stream known complete up to this time (detect; inf allowed)")
    common.add_argument("--workers", type=int, default=1, help="threads for path simulation")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="poisson-minimax",
        description="Minimax sequential testing of a Poisson intensity.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _emit(doc: dict, out_dir: str | None, name: str) -> None:
    text = dumps(doc)
    print(text)
    if out_dir:
        (Path(out_dir) / f"{name}.json").write_text(text + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    name = args.command
    try:
        if args.workers < 1:
            raise ConfigError("workers must be at least 1", field="workers")
        cfg = load_config(args.config, {"seed": args.seed, "n_paths": args.paths,
                                        "output_dir": args.out})
        if cfg.output_dir:
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        doc = COMMANDS[name](cfg, args)
    except ConfigError as e:
        _emit({"error": {"type": "config", "message": str(e), "field": e.field}}, None, name)
        return EXIT_CONFIG
    except UndecidedError as e:
        _emit({"error": {"type": "undecided", "message": str(e), "state": e.state.to_dict()}},
              None, name)
        return EXIT_FAILURE
    except (MinimaxError, OSError) as e:
        _emit({"error": {"type": type(e).__name__, "message": str(e)}}, None, name)
        return EXIT_FAILURE
    doc["config_echo"] = cfg.echo()
    _emit(doc, cfg.output_dir, name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
