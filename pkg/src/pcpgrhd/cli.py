"""Command line entry point: ``pcpgrhd run|check-config|converge|props``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigError, PCPError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INADMISSIBLE = 3
EXIT_FAILED = 4


def _parser():
    ap = argparse.ArgumentParser(prog="pcpgrhd", description="Positivity-preserving GRHD solvers.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log retries and progress")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a configured problem")
    p.add_argument("config", type=Path)
    p = sub.add_parser("check-config", help="validate a configuration file")
    p.add_argument("config", type=Path)
    p = sub.add_parser("converge", help="smooth-wave convergence study")
    p.add_argument("config", type=Path)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--output", type=Path, default=None, help="order-table CSV (default: <output_dir>/order_table.csv)")
    p = sub.add_parser("props", help="run the quick property checks")
    p.add_argument("--seed", type=int, default=0)
    return ap


def _output_dir(cfg):
    out = Path(cfg.output_dir)
    return out if out.is_absolute() else cfg.base_dir / out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    # imported late so that PCPGRHD_THREADS is honoured before numpy spins up
    from . import driver, props
    from .config import load_config
    from .errors import InadmissibleStateError

    try:
        if args.command == "props":
            return EXIT_OK if props.run_all(seed=args.seed) else EXIT_FAILED
        cfg = load_config(args.config)
        if args.command == "check-config":
            print(f"{args.config}: ok ({cfg.scheme}, t_end={cfg.t_end})")
            return EXIT_OK
        if args.command == "run":
            res = driver.run(cfg)
            print(f"finished: t={res.t:.6g} after {res.steps} steps; output in {_output_dir(cfg)}")
            return EXIT_OK
        out = args.output
        if out is None:
            _output_dir(cfg).mkdir(parents=True, exist_ok=True)
            out = _output_dir(cfg) / "order_table.csv"
        rows = driver.converge(cfg, args.levels, output=out)
        for r in rows:
            order = f"{r['order']:.3f}" if r["order"] != "" else "-"
            print(f"{r['scheme']:6s} n={r['n']:5d} L1={r['l1_error']:.4e} order={order}")
        return EXIT_OK
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except InadmissibleStateError as exc:
        print(f"aborted: inadmissible state: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except PCPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
