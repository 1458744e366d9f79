import os
import sys
import json
import argparse
import logging
from dotenv import load_dotenv

# services read their settings at import time
load_dotenv()

import numpy as np

from .core import (
    ValidationError, DomainError, DegenerateColumnError, StudyError, center, standardize,
)
from .providers.csv_data import read_dataset
from .services import pdf, report
from .services.adaptive import AdaptiveConfig, default_gamma
from .services.simulation import TABLES, run_study, table_scenarios
from .services.solver import SolverConfig, kkt_scale
from .services.tuning import METHODS, tune
from .storage.cache import ensure_dirs

LOG_LEVEL = os.getenv("ADENET_LOG_LEVEL", "INFO").upper()

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_NONCONVERGED = 4


# ------------- Commands -------------
def cmd_fit(args) -> int:
    data, names = read_dataset(args.input)
    if not np.any(data.y):
        logging.warning("response column is all zeros; every coefficient will be zero")
    data = center(data)
    norms = None
    solver_config = SolverConfig()
    if args.standardize:
        data, norms = standardize(data)
        solver_config = SolverConfig(standardized=True)

    gamma = args.gamma if args.gamma is not None else default_gamma(data.n, data.p)
    adaptive_config = AdaptiveConfig(gamma=gamma, zero_mode=args.zero_mode)
    fit, chosen = tune(data, args.method, None, adaptive_config, solver_config)

    coef = None
    if norms is not None:
        coef = np.where(norms > 0, np.asarray(fit.beta) / np.where(norms > 0, norms, 1.0), 0.0)
    kkt = fit.kkt_residual / kkt_scale(data)
    print(report.format_fit(fit, chosen, names, coef, kkt), end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report.fit_to_json(fit, chosen, names, coef, kkt), f, indent=2)
        logging.info("fit report written to %s", args.out)
    return EXIT_OK if fit.converged else EXIT_NONCONVERGED


def cmd_reproduce(args) -> int:
    table = f"table{args.table}"
    layout = TABLES[table]
    use_cache = not args.no_cache
    if use_cache:
        ensure_dirs()
    tables = []
    for scenario in table_scenarios(table, args.scale, args.reps, args.seed):
        adaptive_config = AdaptiveConfig(gamma=scenario.gamma, zero_mode=args.zero_mode)
        tables.append(run_study(scenario, layout.methods, adaptive_config=adaptive_config, use_cache=use_cache))

    text = report.table_to_csv(tables, args.out)
    if not args.out:
        sys.stdout.write(text)
    if args.pdf:
        pdf.render_study_pdf(tables, args.pdf, title=f"Table {args.table} ({args.scale} scale)")
        logging.info("PDF written to %s", args.pdf)
    bad = sum(t.nonconverged for t in tables)
    if bad:
        logging.warning("%d fit(s) did not converge", bad)
        return EXIT_NONCONVERGED
    return EXIT_OK


# ------------- CLI -------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adenet", description="Adaptive elastic-net fits and simulation studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="tune and fit one method on a CSV dataset")
    f.add_argument("--input", required=True, help="CSV with a header; first column is y")
    f.add_argument("--method", required=True, choices=METHODS)
    f.add_argument("--standardize", action="store_true", help="scale predictors to unit norm before fitting")
    f.add_argument("--gamma", type=float, default=None, help="adaptive weight exponent")
    f.add_argument("--zero-mode", choices=("offset", "exclude"), default="offset")
    f.add_argument("--out", default=None, help="write a JSON report here")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("reproduce", help="rerun a simulation table")
    r.add_argument("--table", required=True, type=int, choices=(1, 2, 3))
    r.add_argument("--reps", type=int, default=100)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--scale", choices=("desk", "full"), default="desk")
    r.add_argument("--zero-mode", choices=("offset", "exclude"), default="offset")
    r.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    r.add_argument("--pdf", default=None, help="also render the tables as a PDF")
    r.add_argument("--no-cache", action="store_true", help="ignore and do not write the replication cache")
    r.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=getattr(logging, LOG_LEVEL, logging.INFO))
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        logging.exception("input error")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, DegenerateColumnError) as e:
        logging.exception("degenerate problem")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except StudyError as e:
        cause = e.__cause__
        if isinstance(cause, ValidationError):
            code = EXIT_INPUT
        elif isinstance(cause, (DomainError, DegenerateColumnError)):
            code = EXIT_DEGENERATE
        else:
            raise
        logging.exception("study failed")
        print(f"error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
