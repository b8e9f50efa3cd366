"""``lab <kind> --config PATH [--seed S] [--out PATH] [--workers K] [--tsv]``.

Exit status: 0 on success, 2 for invalid input or configuration, 3 when a
numerical routine fails.
"""
import argparse
import os
import sys

from .config import KINDS, load_config
from .errors import CapabilityError, InputError, NumericalError
from .experiments import run

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="lab", description="Run a configured experiment and write its table as CSV.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", required=True, help="flat key = value configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--workers", type=int, help="process count; LAB_WORKERS takes precedence")
    p.add_argument("--tsv", action="store_true", help="also write a header-only TSV next to the CSV")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, kind=args.kind, seed=args.seed, out=args.out, workers=args.workers)
        run(cfg, tsv=args.tsv, stream=None if cfg.out else sys.stdout)
    except (InputError, CapabilityError) as exc:
        print(f"lab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
