"""The ``coldsim`` command line tool."""

from __future__ import annotations

import argparse
import sys

from coldsim.errors import ConfigError
from coldsim.harness import ExperimentConfig, load_config, run, run_certify, run_sweep


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coldsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("config")
    p_run.add_argument("--force", action="store_true", help="override contract/stepsize guards")
    p_run.add_argument("--reproducible", action="store_true", help="suppress the timestamp header")
    p_run.add_argument("--out", default=None, help="output directory (overrides the config)")

    p_cert = sub.add_parser("certify", help="check a trace CSV against its embedded certificate")
    p_cert.add_argument("trace")
    p_cert.add_argument("--theorem", default=None, help="t1..t5; must match the embedded certificate")
    p_cert.add_argument("--mode", default="fitted", choices=["fitted", "envelope"])
    p_cert.add_argument("--burn-in", type=int, default=10)
    p_cert.add_argument("--margin", type=float, default=0.0)

    p_sweep = sub.add_parser("sweep", help="re-run a config over a swept key")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--vary", required=True, help="e.g. compressor=C1,C2,C3,C4")
    p_sweep.add_argument("--force", action="store_true")
    p_sweep.add_argument("--reproducible", action="store_true")
    p_sweep.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            result = run(load_config(args.config, force=args.force), force=args.force,
                         reproducible=args.reproducible, out=args.out)
            for path in result["traces"]:
                print(path)
            print(result["summary"])
            for eps, bits in result["bits_to_eps"].items():
                print(f"bits to reach {eps:g}: {'not reached' if bits is None else format(bits, '.6g')}")
            return 0
        if args.command == "certify":
            cfg = ExperimentConfig(
                task="certify", trace=args.trace, theorem=args.theorem,
                mode=args.mode, burn_in=args.burn_in, margin=args.margin,
            )
            report = run_certify(cfg)
            status = "PASS" if report.passed else "FAIL"
            print(f"{status} [{report.mode}] bound={report.bound:.6g} {report.details}")
            return 0 if report.passed else 1
        result = run_sweep(load_config(args.config, force=args.force), vary=args.vary, force=args.force,
                           reproducible=args.reproducible, out=args.out)
        print(result["table"])
        return 0
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except Exception as exc:  # surface everything else as a one-line failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
