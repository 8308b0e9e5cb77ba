"""Command-line front end: `cigen test|synth|calibrate|bench`.

Exit codes are a stable contract: 0 = test ran and did not reject,
10 = test rejected, 64 = usage error, 70 = internal error.  All
randomness flows from the --seed flag.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import bench, crt, engine, gan, stats, synth

EXIT_OK = 0
EXIT_REJECT = 10
EXIT_USAGE = 64
EXIT_INTERNAL = 70


class CsvSchemaError(ValueError):
    pass


class UsageError(ValueError):
    pass


def load_csv(path):
    """Read a dataset CSV with columns x|x1..xdx, y|y1..ydy, z1..zdz."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvSchemaError(f"{path}: empty file")
        cols = {"x": [], "y": [], "z": []}
        for j, name in enumerate(header):
            name = name.strip()
            prefix = name[:1].lower()
            if prefix in cols and (len(name) == 1 or name[1:].isdigit()):
                cols[prefix].append(j)
            else:
                raise CsvSchemaError(
                    f"{path}: column {j + 1} {name!r} does not match the "
                    f"x/x1../y/y1../z1.. schema")
        for prefix in ("x", "y", "z"):
            if not cols[prefix]:
                raise CsvSchemaError(
                    f"{path}: at least one {prefix} column is required "
                    f"(prefixes x, y, z)")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvSchemaError(
                    f"{path}:{lineno}: expected {len(header)} cells, "
                    f"got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                bad = next(i for i, c in enumerate(row)
                           if not _is_number(c))
                raise CsvSchemaError(
                    f"{path}:{lineno}: non-numeric cell in column "
                    f"{bad + 1} ({row[bad]!r})")
    if not rows:
        raise CsvSchemaError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    return synth.Dataset(x=data[:, cols["x"]], y=data[:, cols["y"]],
                         z=data[:, cols["z"]], provenance=path)


def _is_number(c):
    try:
        float(c)
        return True
    except ValueError:
        return False


def save_csv(dataset, path):
    """Write a dataset in the schema accepted by load_csv."""
    d_x, d_y, d_z = (dataset.x.shape[1], dataset.y.shape[1],
                     dataset.z.shape[1])
    header = (["x"] if d_x == 1 else [f"x{i+1}" for i in range(d_x)])
    header += (["y"] if d_y == 1 else [f"y{i+1}" for i in range(d_y)])
    header += [f"z{i+1}" for i in range(d_z)]
    block = np.hstack([dataset.x, dataset.y, dataset.z])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in block:
            w.writerow([repr(float(v)) for v in row])


def _test_config(args):
    gan_config = gan.GanConfig(lam=args.lam)
    return engine.TestConfig(statistic=args.statistic, m=args.m,
                             alpha=args.alpha, gan=gan_config,
                             seed=args.seed)


def cmd_test(args):
    dataset = load_csv(args.data)
    config = _test_config(args)
    if args.method == "crt":
        if dataset.x.shape[1] != 1:
            raise UsageError("--method crt requires univariate x")
        result = crt.crt_test(dataset, config)
    else:
        result = engine.gcit_test(dataset, config)
    payload = result.to_json()
    print(payload)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(payload + "\n")
    return EXIT_REJECT if result.reject else EXIT_OK


def cmd_synth(args):
    band = _parse_band(args.mi_band) if args.mi_band else None
    spec = synth.SynthSpec(setting=args.setting, hypothesis=args.hypothesis,
                           n=args.n, d_z=args.dz, sigma=args.sigma,
                           alpha_strength=args.strength, mi_band=band,
                           max_redraws=args.max_redraws, seed=args.seed)
    if band is not None:
        dataset, _ = synth.generate_mi_controlled(spec)
    else:
        dataset = synth.generate(spec)
    save_csv(dataset, args.out)
    return EXIT_OK


def cmd_calibrate(args):
    dataset = load_csv(args.data)
    grid = [float(v) for v in args.lambda_grid.split(",") if v != ""]
    config = _test_config(args)
    result = engine.calibrate_lambda(dataset, grid, config,
                                     replicates=args.replicates)
    print(json.dumps({
        "chosen_lambda": result.chosen_lam,
        "type1_by_lambda": {str(k): v for k, v in result.type1_by_lam.items()},
        "replicates": result.replicates,
        "tolerance": result.tolerance,
    }, sort_keys=True))
    return EXIT_OK


def cmd_bench(args):
    plan = read_plan_file(args.plan)
    if args.workers is not None:
        plan = replace(plan, workers=args.workers)
    table = bench.run_plan(plan)
    table.to_csv(args.out)
    print(table.to_json_summary())
    return EXIT_OK


def _parse_band(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise UsageError("--mi-band expects lo,hi")
    return tuple(parts)


def read_plan_file(path):
    """Parse a key=value plan file into a BenchPlan.

    Recognized keys: methods, settings, hypotheses, dz, lambdas (comma
    lists); n, replications, m, seed, workers (ints); alpha (float);
    statistic; mi_band (lo,hi); oracle (0/1).
    """
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    plan = bench.BenchPlan()
    kwargs = {}
    for key, val in values.items():
        if key == "methods":
            kwargs["methods"] = tuple(val.split(","))
        elif key == "settings":
            kwargs["settings"] = tuple(val.split(","))
        elif key == "hypotheses":
            kwargs["hypotheses"] = tuple(val.split(","))
        elif key == "dz":
            kwargs["d_z_grid"] = tuple(int(v) for v in val.split(","))
        elif key == "lambdas":
            kwargs["lambdas"] = tuple(float(v) for v in val.split(","))
        elif key in ("n", "replications", "m", "workers"):
            kwargs[{"n": "n", "replications": "replications", "m": "m",
                    "workers": "workers"}[key]] = int(val)
        elif key == "seed":
            kwargs["base_seed"] = int(val)
        elif key == "alpha":
            kwargs["alpha"] = float(val)
        elif key == "statistic":
            kwargs["statistic"] = val
        elif key == "mi_band":
            kwargs["mi_band"] = _parse_band(val)
        elif key == "oracle":
            kwargs["use_oracle_sampler"] = bool(int(val))
        elif key == "gan_iterations":
            kwargs["gan"] = replace(gan.GanConfig(), iterations=int(val))
        else:
            raise UsageError(f"{path}: unknown plan key {key!r}")
    return replace(plan, **kwargs)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cigen",
        description="Conditional independence testing with generated null samples")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_test_flags(p):
        p.add_argument("--statistic", choices=stats.STAT_KINDS, default="dcor")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--m", type=int, default=500)
        p.add_argument("--lambda", dest="lam", type=float, default=0.0)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("test", help="run one conditional independence test")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("gcit", "crt"), default="gcit")
    add_test_flags(p)
    p.add_argument("--json", help="also write the result JSON to this path")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p.add_argument("--setting", choices=synth.SETTINGS, default="gaussian")
    p.add_argument("--hypothesis", choices=synth.HYPOTHESES, default="H0")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--dz", type=int, default=10)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--mi-band", default=None)
    p.add_argument("--max-redraws", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate",
                       help="choose lambda on surrogate null data")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda-grid", required=True)
    p.add_argument("--replicates", type=int, default=20)
    add_test_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bench", help="run a benchmark plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--workers", type=int,
                   default=None if "CIGEN_WORKERS" not in os.environ
                   else int(os.environ["CIGEN_WORKERS"]))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems; remap to the contract
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (UsageError, CsvSchemaError, crt.UnsupportedBaselineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
