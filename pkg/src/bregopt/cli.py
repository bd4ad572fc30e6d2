"""Command-line entry point: ``bregopt gen|run|verify``.

Configuration for ``run`` is a flat key=value file with sections
([problem], [solver], [output]); command-line flags override file values
and unknown keys are rejected. Exit codes: 0 success, 1 verification
failure, 2 usage or configuration error, 3 I/O error, 4 solver step
failure (the partial trace CSV is retained).
"""

import argparse
import configparser
import sys

from .errors import BregoptError, ParseError
from .metrics import rate_fit
from .problems import (
    gen_gaussian_logistic_data,
    gen_interpolation,
    gen_preconditioned,
    gen_tomography,
    load_instance,
    load_libsvm,
    save_instance,
    write_manifest,
)
from .solver import METHODS, POLICIES, RunFailure, SolverConfig, run
from .verify import run_battery

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SOLVER = 4

GENERATORS = ("interpolation", "tomography", "preconditioned")

_SOLVER_KEYS = {
    "method", "eta", "policy", "step_multiplier", "seed", "epochs", "p",
    "record_every", "max_halvings",
}
_PROBLEM_KEYS = {
    "generator", "instance", "n", "d", "size", "angles", "nodes", "samples",
    "n_prec", "lam", "c_prec", "seed", "noise", "data", "rows", "separation",
}
_OUTPUT_KEYS = {"trace"}


class ConfigError(Exception):
    pass


def _build_problem(opts):
    """Instantiate a ProblemInstance from a [problem] option mapping."""
    if "instance" in opts:
        return load_instance(opts["instance"])
    gen = opts.get("generator")
    seed = int(opts.get("seed", 0))
    if gen == "interpolation":
        return gen_interpolation(int(opts.get("n", 2000)), int(opts.get("d", 100)), seed)
    if gen == "tomography":
        return gen_tomography(
            int(opts.get("size", 64)), int(opts.get("angles", 60)), seed,
            noise=opts.get("noise", "true").lower() != "false",
        )
    if gen == "preconditioned":
        n_nodes = int(opts.get("nodes", 10))
        per_node = int(opts.get("samples", 200))
        if "data" in opts:
            data = load_libsvm(opts["data"])
        else:
            rows = int(opts.get("rows", n_nodes * per_node))
            data = gen_gaussian_logistic_data(
                rows, int(opts.get("d", 20)), seed,
                separation=float(opts.get("separation", 1.0)),
            )
        return gen_preconditioned(
            data, n_nodes=n_nodes, N=per_node,
            n_prec=int(opts.get("n_prec", per_node)),
            lam=float(opts.get("lam", 1e-5)),
            c_prec=float(opts.get("c_prec", 1e-5)), seed=seed,
        )
    raise ConfigError(f"unknown or missing generator: {gen!r}")


def _load_config(path):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise OSError(f"cannot read config file {path}")
    sections = {"problem": _PROBLEM_KEYS, "solver": _SOLVER_KEYS,
                "output": _OUTPUT_KEYS}
    config = {}
    for section in parser.sections():
        if section not in sections:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in sections[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            config[f"{section}.{key}"] = value
    return config


def cmd_gen(args):
    opts = {
        "generator": args.generator, "seed": args.seed,
        "n": args.n, "d": args.d, "size": args.size, "angles": args.angles,
        "nodes": args.nodes, "samples": args.samples, "n_prec": args.n_prec,
        "lam": args.lam, "c_prec": args.c_prec,
    }
    if args.data is not None:
        opts["data"] = args.data
    if not args.noise:
        opts["noise"] = "false"
    opts = {k: v for k, v in opts.items() if v is not None}
    problem = _build_problem(opts)
    # the phantom image is derivable from the generator; keep the file lean
    problem.meta.pop("phantom", None)
    save_instance(args.output, problem)
    write_manifest(args.output + ".manifest", problem)
    obj = problem.objective
    print(f"wrote {args.output} ({obj.kind}, n={obj.n_components}, d={obj.dim})")
    return EXIT_OK


def cmd_run(args):
    config = _load_config(args.config) if args.config else {}
    # flags override file values
    overrides = {
        "solver.method": args.method, "solver.eta": args.eta,
        "solver.epochs": args.epochs, "solver.seed": args.seed,
        "solver.step_multiplier": args.step_multiplier, "solver.p": args.p,
        "solver.policy": args.policy, "solver.record_every": args.record_every,
        "problem.instance": args.instance, "output.trace": args.output,
    }
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    problem_opts = {k.split(".", 1)[1]: v for k, v in config.items()
                    if k.startswith("problem.")}
    if not problem_opts:
        raise ConfigError("no problem configured (need an instance or generator)")
    problem = _build_problem(problem_opts)

    solver_kwargs = {k.split(".", 1)[1]: v for k, v in config.items()
                     if k.startswith("solver.")}
    casts = {"method": str, "eta": float, "policy": str,
             "step_multiplier": float, "seed": int, "epochs": float,
             "p": float, "record_every": int, "max_halvings": int}
    try:
        solver_kwargs = {k: casts[k](v) for k, v in solver_kwargs.items()}
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad solver option: {exc}")
    solver_config = SolverConfig(**solver_kwargs)
    try:
        solver_config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc))

    out_path = config.get("output.trace", "trace.csv")
    try:
        trace = run(solver_config, problem)
    except RunFailure as exc:
        exc.trace.to_csv(out_path)  # retain the partial trace
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    trace.to_csv(out_path)
    final = trace.final
    try:
        rate = rate_fit(trace, max(len(trace) // 3, 2))
        rate_text = f"{rate:.6f}"
    except BregoptError:
        rate_text = "n/a"
    print(
        f"{solver_config.method} iters={final.iter} epochs={final.epoch:g} "
        f"f_gap={final.f_gap:.6e} dh_gap={final.dh_gap:.6e} "
        f"rate={rate_text} halvings={final.halvings} trace={out_path}"
    )
    return EXIT_OK


def cmd_verify(args):
    report = run_battery(samples=args.samples, quick=args.quick,
                         negative_control=args.negative_control)
    text = report.text()
    print(text)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK if report.passed else EXIT_VERIFY_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="bregopt")
    parser.add_argument("--seed", type=int, default=None,
                        help="global seed override")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a problem instance file")
    gen.add_argument("generator", choices=GENERATORS)
    gen.add_argument("--n", type=int)
    gen.add_argument("--d", type=int)
    gen.add_argument("--size", type=int)
    gen.add_argument("--angles", type=int)
    gen.add_argument("--nodes", type=int)
    gen.add_argument("--samples", type=int)
    gen.add_argument("--n-prec", dest="n_prec", type=int)
    gen.add_argument("--lam", type=float)
    gen.add_argument("--c-prec", dest="c_prec", type=float)
    gen.add_argument("--data", help="LibSVM file for the preconditioned generator")
    gen.add_argument("--no-noise", dest="noise", action="store_false")
    gen.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    gen.add_argument("-o", "--output", required=True)

    runp = sub.add_parser("run", help="run a solver and write a trace CSV")
    runp.add_argument("-c", "--config", help="key=value config file")
    runp.add_argument("--instance", help="instance file path")
    runp.add_argument("--method", choices=METHODS)
    runp.add_argument("--policy", choices=POLICIES)
    runp.add_argument("--eta", type=float)
    runp.add_argument("--step-multiplier", dest="step_multiplier", type=float)
    runp.add_argument("--epochs", type=float)
    runp.add_argument("--p", type=float)
    runp.add_argument("--record-every", dest="record_every", type=int)
    runp.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    runp.add_argument("-o", "--output", help="trace CSV path")

    ver = sub.add_parser("verify", help="run the certification battery")
    ver.add_argument("--samples", type=int, default=1000)
    ver.add_argument("--quick", action="store_true",
                     help="fast structural subset only")
    ver.add_argument("--negative-control", action="store_true",
                     help="inject a known fault; the battery must fail")
    ver.add_argument("--report", help="also write the report to this file")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            code = cmd_gen(args)
        elif args.command == "run":
            code = cmd_run(args)
        else:
            code = cmd_verify(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        code = EXIT_IO
    except BregoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    return code


if __name__ == "__main__":
    sys.exit(main())
