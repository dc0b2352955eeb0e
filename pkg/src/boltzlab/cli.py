"""Command-line entry points: diagnose, sweep, evolve, fit, choose-c."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, NumericalError
from .experiment import (_load_config, choose_c, compare_scaling, fit_scaling,
                         run_diagnose, run_evolve, run_sweep)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="boltzlab",
        description="Entropy-production diagnostics for the 2D homogeneous "
                    "Boltzmann operator with square-configuration kernels.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, msg in (
            ("diagnose", "one density: report JSON + per-region CSV"),
            ("sweep", "sweep (a, delta): CSV + scaling-fit JSON"),
            ("evolve", "flow a density: time-series CSV"),
            ("fit", "fit a power law to (a, value) samples"),
            ("choose-c", "pick the inner-ball coefficient c")):
        q = sub.add_parser(name, help=msg)
        q.add_argument("--config", required=True, help="JSON config path")
        q.add_argument("--out", default="out", help="output directory")
        q.add_argument("--threads", type=int, default=1)
        q.add_argument("--quad-scale", type=float, default=1.0,
                       help="uniformly refine every quadrature by this factor")
        if name == "diagnose":
            q.add_argument("--check-regions", action="store_true",
                           help="fail if the region magnitude map is wrong")
        if name == "fit":
            q.add_argument("--with-log", action="store_true",
                           help="include the log-correction regressor")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "diagnose":
            payload = run_diagnose(args.config, args.out,
                                   quad_scale=args.quad_scale,
                                   check_regions=args.check_regions)
            print(f"dtd_total = {payload['dtd_total']!r}")
        elif args.command == "sweep":
            result = run_sweep(args.config, args.out,
                               quad_scale=args.quad_scale,
                               threads=args.threads)
            bad = [r for r in result["rows"] if r["error"]]
            print(f"sweep: {len(result['rows'])} cells, {len(bad)} failed")
        elif args.command == "evolve":
            series = run_evolve(args.config, args.out,
                                quad_scale=args.quad_scale)
            d = series.column("D")
            print(f"evolve: {len(series.records)} samples, "
                  f"D[0] = {d[0]!r}, D[-1] = {d[-1]!r}")
        elif args.command == "fit":
            cfg = _load_config(args.config)
            samples = cfg.get("samples")
            if not samples:
                raise ConfigError("fit config needs a 'samples' list of "
                                  "[a, value] pairs")
            if args.with_log:
                out = fit_scaling(samples, with_log=True).to_json()
            else:
                out = compare_scaling(samples)
            print(json.dumps(out, sort_keys=True, indent=1))
        elif args.command == "choose-c":
            cfg = _load_config(args.config)
            prof = cfg.get("profile") or cfg
            c = choose_c(float(prof["a"]),
                         rho=float(prof.get("rho", 0.1)),
                         floor_delta=float(prof.get("floor_delta", 1e-6)),
                         r_domain=float(prof.get("r_domain", 8.0)),
                         smoothing_width=float(prof.get("smoothing_width", 0.0)))
            print(repr(c))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyError as e:
        print(f"config error: missing key {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
