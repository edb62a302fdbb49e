"""Command line entry point: ``lambda-mutual <subcommand> ...``."""

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .baseline import baseline_simulate, baseline_solve
from .config import RunConfig, load_config
from .economy import MechanismConfig
from .exceptions import ConfigError, LambdaMutualError
from .mechanism import LinearFixedPointProblem, check_ic, lambda_next, neumann_solve
from .output import csv_text, format_value, read_csv, write_atomic
from .simulation import PANEL_COLUMNS, STATS_COLUMNS, cross_section_stats, simulate_panel
from .utility import vbar1

log = logging.getLogger("lambda_mutual")

EXIT_IO = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def _configure_logging():
    level = os.environ.get("LAMBDA_MUTUAL_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"LAMBDA_MUTUAL_LOG: expected one of {sorted(levels)}, got {level!r}")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(levels[level])
    log.propagate = False


def _run_config(path):
    return load_config(path) if path else RunConfig()


def _pick(flag, fallback):
    return fallback if flag is None else flag


def _csv_floats(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--lambda-grid: not a comma separated list of numbers: {text!r}") from None
    if not values:
        raise ConfigError("--lambda-grid: empty")
    return values


def cmd_simulate(args):
    rc = _run_config(args.config)
    agents = _pick(args.agents, rc.simulation.get("agents", 100_000))
    periods = _pick(args.periods, rc.simulation.get("periods", 50))
    seed = rc.seed if args.seed is None else args.seed
    panel_out = args.panel_out or rc.outputs.get("panel")
    stats_out = args.stats_out or rc.outputs.get("stats")

    panel = simulate_panel(rc.utility, rc.mechanism, rc.economy, agents, periods, seed,
                           threads=args.threads)
    stats = cross_section_stats(panel, vbar1(rc.utility, rc.mechanism.lambda0))
    log.info("simulated %d agents x %d periods, %d censored", agents, periods,
             int(stats.infeasible_count.sum()))
    log.info("terminal value gap: %s", stats.terminal_summary())

    outputs = {}
    if panel_out:
        rows = ((r.t, r.agent, r.lam, r.income, r.transfer, r.consumption, r.value)
                for r in panel.records())
        outputs[panel_out] = csv_text(PANEL_COLUMNS, rows)
    if stats_out:
        outputs[stats_out] = csv_text(STATS_COLUMNS, stats.rows())
    if not outputs:
        sys.stdout.write(csv_text(STATS_COLUMNS, stats.rows()))
    return outputs


def cmd_check_ic(args):
    rc = _run_config(args.config)
    convention = args.convention or rc.mechanism.deviation_scaling
    cfg = MechanismConfig(rc.mechanism.beta, rc.mechanism.lambda0, convention)
    rows = []
    worst = np.inf
    for lam in _csv_floats(args.lambda_grid):
        report = check_ic(rc.utility, cfg, rc.economy, lam, lambda_next(rc.utility, cfg, rc.economy, lam))
        worst = min(worst, report.min_slack)
        for violation in report.violations():
            log.error("IC violated at lambda=%r: e=%r reporting %r, slack=%r", lam, *violation)
        rows.extend(report.rows())
    log.info("minimum IC slack %s under %s scaling", format_value(worst), convention)
    text = csv_text(("lambda", "e", "e_report", "slack"), rows)
    if args.out:
        return {args.out: text}
    sys.stdout.write(text)
    return {}


def cmd_baseline(args):
    rc = _run_config(args.config)
    grid_size = _pick(args.grid_size, rc.baseline.get("grid_size", 200))
    tol = _pick(args.tol, rc.baseline.get("tol", 1e-8))
    ic = rc.baseline.get("incentive_compatible", True) and not args.no_ic
    model = baseline_solve(rc.utility, rc.mechanism, rc.economy, grid_size, tol, ic,
                           interpolation=rc.baseline.get("interpolation", "cubic"))
    log.info("value iteration converged in %d sweeps, decay ratio %.4f, %d clamp events",
             len(model.residuals), model.decay_rate(), model.clamp_count)
    if args.simulate:
        agents = _pick(args.agents, rc.simulation.get("agents", 10_000))
        periods = _pick(args.periods, rc.simulation.get("periods", 50))
        seed = rc.seed if args.seed is None else args.seed
        stats = baseline_simulate(model, rc.utility, rc.mechanism, rc.economy, agents, periods, seed)
        log.info("max promise-keeping residual on simulated nodes %.3e", stats.max_pk_residual)
        text = csv_text(("t", "mean_w", "var_w", "censored_count"), stats.rows())
    else:
        rows = zip(model.grid, model.value)
        text = csv_text(("w", "value"), rows)
    out = args.out or rc.outputs.get("baseline")
    if out:
        return {out: text}
    sys.stdout.write(text)
    return {}


def cmd_neumann(args):
    with open(args.problem, encoding="utf-8") as fh:
        problem = LinearFixedPointProblem.from_text(fh.read())
    result = neumann_solve(problem, args.tol)
    log.info("Neumann series: %d terms, residual %.3e", result.iterations, result.residual)
    text = csv_text(("i", "x"), enumerate(result.solution.tolist()))
    print(f"# iterations={result.iterations} residual={format_value(result.residual)}",
          file=sys.stderr)
    if args.out:
        return {args.out: text}
    sys.stdout.write(text)
    return {}


def summarize_stats(paths):
    """Plain-text table summarising one or more stats CSVs."""
    header = ("file", "periods", "mean_value[0]", "mean_value[T]", "max|drift|",
              "var_value[T]", "min_mobility", "infeasible")
    lines = []
    for path in paths:
        rows = read_csv(path)
        if not rows:
            raise ConfigError(f"{path}: no rows")
        missing = set(STATS_COLUMNS) - set(rows[0])
        if missing:
            raise ConfigError(f"{path}: missing columns {sorted(missing)}")
        mean = np.array([float(r["mean_value"]) for r in rows])
        var = np.array([float(r["var_value"]) for r in rows])
        mob = np.array([float(r["rank_mobility"]) for r in rows])
        infeasible = sum(int(r["infeasible_count"]) for r in rows)
        lines.append((os.path.basename(path), str(len(rows) - 1), f"{mean[0]:.6g}",
                      f"{mean[-1]:.6g}", f"{np.max(np.abs(mean - mean[0])):.3e}",
                      f"{var[-1]:.6g}", f"{mob.min():.4f}", str(infeasible)))
    widths = [max(len(h), *(len(ln[i]) for ln in lines)) for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    out += [fmt.format(*ln) for ln in lines]
    return "\n".join(out) + "\n"


def cmd_report(args):
    text = summarize_stats(args.stats)
    if args.out:
        return {args.out: text}
    sys.stdout.write(text)
    return {}


def build_parser():
    parser = _Parser(prog="lambda-mutual", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=1,
                        help="cap on internal parallelism (0 = auto)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="Monte Carlo panel under the lambda-mechanism")
    p.add_argument("--config")
    p.add_argument("--agents", type=int)
    p.add_argument("--periods", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--panel-out")
    p.add_argument("--stats-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-ic", help="truth-telling slack over a grid of weights")
    p.add_argument("--config")
    p.add_argument("--lambda-grid", default="0.25,0.5,1,2,4")
    p.add_argument("--convention", choices=("definition", "prop1"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_ic)

    p = sub.add_parser("baseline", help="promised-utility contract by value iteration")
    p.add_argument("--config")
    p.add_argument("--grid-size", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--no-ic", action="store_true", help="drop the incentive constraints")
    p.add_argument("--simulate", action="store_true")
    p.add_argument("--agents", type=int)
    p.add_argument("--periods", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("neumann", help="solve x = Lx + b by the Neumann series")
    p.add_argument("problem")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_neumann)

    p = sub.add_parser("report", help="summarise stats CSVs")
    p.add_argument("stats", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def _fail(code, exc):
    message = " ".join(str(exc).split())
    print(f"error code={code} type={type(exc).__name__} message={message}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        outputs = args.func(args)
        for path in outputs:
            directory = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(directory):
                raise FileNotFoundError(f"output directory does not exist: {directory}")
        for path, text in outputs.items():
            write_atomic(path, text)
    except LambdaMutualError as exc:
        return _fail(exc.exit_code, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
