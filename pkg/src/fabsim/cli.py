"""Command line interface.

    fabsim run <config.json> [--out DIR] [--seed S] [--repeat K] [--jobs J]
    fabsim preset <name> [--scale N] [--out DIR] [--seed S] [--repeat K]
                  [--jobs J] [key=value ...]
    fabsim validate <config.json>

Exit codes: 0 success, 2 configuration error, 3 simulation failure.
Sweep points are independent; --jobs runs them in parallel worker
processes without changing any per-point result.
"""

import argparse
import os
import sys

from .config import ConfigError, load_config, save_config
from .metrics import summarize, write_reports
from .presets import PRESETS
from .simulation import Simulation

EXIT_CONFIG = 2
EXIT_SIM = 3


def _parse_args(argv):
    p = argparse.ArgumentParser(prog="fabsim",
                                description="coherent fabric simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a JSON experiment config")
    run.add_argument("config")
    _run_flags(run)

    pre = sub.add_parser("preset", help="run a named preset")
    pre.add_argument("name", choices=sorted(PRESETS))
    pre.add_argument("params", nargs="*", metavar="key=value",
                     help="preset keyword overrides")
    pre.add_argument("--scale", type=int, default=None,
                     help="system scale (requesters + endpoints)")
    _run_flags(pre)

    val = sub.add_parser("validate", help="check a config and exit")
    val.add_argument("config")
    # key=value params may be interleaved with flags; sweep up leftovers
    args, extras = p.parse_known_args(argv)
    if extras:
        if args.command != "preset":
            p.error(f"unrecognized arguments: {' '.join(extras)}")
        args.params.extend(extras)
    return args


def _run_flags(p):
    p.add_argument("--out", default=None, help="report directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--repeat", type=int, default=None,
                   help="runs per config, seeds seed..seed+K-1")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes across sweep points")
    p.add_argument("--format", choices=("csv",), default="csv",
                   help="report format (csv only)")


def _coerce(value):
    if "," in value:
        return tuple(_coerce(v) for v in value.split(",") if v)
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def _run_one(label, cfg, target, repeat):
    summaries = []
    n = repeat if repeat is not None else cfg.repeat
    for k in range(n):
        sim = Simulation(cfg, seed=cfg.seed + k).run()
        summaries.append(summarize(sim))
    write_reports(target, summaries)
    save_config(cfg, os.path.join(target, "config.json"))
    s = summaries[0]
    return (f"{label}: completed={s.completed} window={s.window_ns}ns "
            f"bw={s.bandwidth:.4f}B/ns norm={s.normalized_bandwidth:.3f} "
            f"mean_lat={s.mean_latency:.1f}ns")


def _run_configs(labelled, out_dir, repeat, jobs=1):
    points = [(label, cfg,
               os.path.join(out_dir, label) if len(labelled) > 1 else out_dir)
              for label, cfg in labelled.items()]
    if jobs > 1 and len(points) > 1:
        # sweep points are independent simulations; each worker runs one
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, label, cfg, target, repeat)
                       for label, cfg, target in points]
            lines = [f.result() for f in futures]
    else:
        lines = [_run_one(label, cfg, target, repeat)
                 for label, cfg, target in points]
    for line in lines:
        print(line)


def main(argv=None):
    args = _parse_args(sys.argv[1:] if argv is None else argv)
    try:
        if args.command == "validate":
            load_config(args.config)
            print("ok")
            return 0
        if args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            labelled = {"run": cfg}
            out_dir = args.out or cfg.output_dir
        else:
            kw = {}
            for item in args.params:
                if "=" not in item:
                    raise ConfigError(f"preset parameter {item!r} "
                                      "is not key=value")
                key, value = item.split("=", 1)
                kw[key] = _coerce(value)
            if args.seed is not None:
                kw["seed"] = args.seed
            if args.scale is not None:
                kw["scale"] = args.scale
            labelled = PRESETS[args.name](**kw)
            out_dir = args.out or os.path.join("out", args.name)
    except (ConfigError, TypeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        _run_configs(labelled, out_dir, args.repeat, args.jobs)
    except Exception as e:
        print(f"simulation error: {e}", file=sys.stderr)
        return EXIT_SIM
    return 0


if __name__ == "__main__":
    sys.exit(main())
