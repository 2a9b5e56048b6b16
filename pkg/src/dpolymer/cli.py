"""Command-line interface.

Subcommands:
  verify      run the identity/verification suite; exit 0 iff all checks pass
  scaling     fluctuation/exit-time scaling experiment, CSV/JSON/plot output
  exit-times  per-replica exact exit distributions as CSV
  dump-env    sample an environment and write it to an npz record
"""

import argparse
import json
import sys

import numpy as np

from . import experiments, lattice, partition, quenched, verify


def _add_model_flags(p):
    p.add_argument("--model", required=True, choices=[k.value for k in lattice.ModelKind],
                   help="model kind: ig, g, b or ib")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


_DEFAULT_PARAMS = {
    "ig": (2.0, 1.0), "ib": (2.0, 1.0),
    "g": (1.0, 0.5), "b": (1.0, 0.5),
}


def _resolve_model(args):
    mu, theta = _DEFAULT_PARAMS[args.model]
    if args.mu is not None:
        mu = args.mu
    if args.theta is not None:
        theta = args.theta
    return lattice.make_model(args.model, mu, theta, args.beta), mu, theta


def _parse_n_list(text):
    return tuple(int(tok) for tok in text.split(",") if tok)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dpolymer",
        description="Stationary lattice polymers: exact identity checks and scaling runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the verification suite")
    _add_model_flags(p)
    p.add_argument("--fast", action="store_true", help="reduced replica counts")

    p = sub.add_parser("scaling", help="scaling experiment over an N-list")
    _add_model_flags(p)
    p.add_argument("--config", default=None,
                   help="JSON file of defaults (same keys as the long flags)")
    p.add_argument("--N", default="64,128,256", help="comma-separated strictly increasing sizes")
    p.add_argument("--replicas", type=int, default=500)
    p.add_argument("--gamma-offset", type=float, default=0.0)
    p.add_argument("--off-characteristic", action="store_true",
                   help="double m relative to the characteristic direction")
    p.add_argument("--threads", type=int, default=0,
                   help=f"worker processes (0: ${experiments.WORKERS_ENV_VAR} or 1)")
    p.add_argument("--out", default="scaling")
    p.add_argument("--format", default="csv", choices=["csv", "json", "plot"])

    p = sub.add_parser("exit-times", help="exact exit distributions per replica")
    _add_model_flags(p)
    p.add_argument("--N", type=int, default=32)
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--gamma-offset", type=float, default=0.0)
    p.add_argument("--out", default="exit_times.csv")

    p = sub.add_parser("dump-env", help="sample and dump one environment")
    _add_model_flags(p)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--replica", type=int, default=0)
    p.add_argument("--gamma-offset", type=float, default=0.0)
    p.add_argument("--out", default="environment.npz")
    return parser


def _cmd_verify(args):
    spec, _, _ = _resolve_model(args)
    print(f"verification suite for {spec.label()}, seed {args.seed}")
    ok = verify.run_verify(spec, fast=args.fast)
    print("all checks passed" if ok else "CHECKS FAILED")
    return 0 if ok else 1


_SCALING_DEFAULTS = {
    "N": "64,128,256", "replicas": 500, "gamma_offset": 0.0, "beta": 1.0,
    "seed": 0, "threads": 0, "out": "scaling", "format": "csv",
    "off_characteristic": False, "mu": None, "theta": None,
}


def _cmd_scaling(args):
    if args.config:
        # config supplies values for flags left at their built-in defaults
        with open(args.config) as fh:
            loaded = json.load(fh)
        for key, val in loaded.items():
            dest = key.replace("-", "_")
            if dest in _SCALING_DEFAULTS and getattr(args, dest) == _SCALING_DEFAULTS[dest]:
                setattr(args, dest, val)
    spec, mu, theta = _resolve_model(args)
    config = experiments.RunConfig(
        kind=args.model, mu=mu, theta=theta, beta=args.beta,
        n_list=_parse_n_list(args.N) if isinstance(args.N, str) else tuple(args.N),
        replicas=args.replicas, seed=args.seed,
        gamma_offset=args.gamma_offset, workers=args.threads,
        m_factor=2.0 if args.off_characteristic else 1.0,
    )
    result = experiments.run_scaling(config)
    paths = experiments.emit_report(result, args.format, args.out)
    for sp in result.points:
        var, se = sp.variance()
        line = f"N={sp.N} (m={sp.m}, n={sp.n}): Var(logZ)={var:.4f}+-{se:.4f}"
        if sp.t1_mean is not None:
            t1, t1se = sp.exit_mean()
            line += f", E[t1]={t1:.3f}+-{t1se:.3f}"
        print(line)
    for name, fit in result.fits.items():
        print(f"fit {name}: slope {fit.slope:.4f} (WLS CI [{fit.ci_lo:.3f}, {fit.ci_hi:.3f}])")
    print("wrote " + ", ".join(paths))
    return 0


def _cmd_exit_times(args):
    spec, _, _ = _resolve_model(args)
    m, n = lattice.characteristic_shape(spec, args.N, args.gamma_offset)
    batch = lattice.sample_environment_batch(spec, m, n, args.seed, args.replicas, r_max=0)
    fwd = partition.log_partition_batch(batch)
    rev = quenched.reverse_partition_batch(batch)
    qs = quenched.exit_probs_batch(batch, fwd, rev, "south")
    qw = quenched.exit_probs_batch(batch, fwd, rev, "west")
    with open(args.out, "w") as fh:
        fh.write("replica,axis,l,q\n")
        for i in range(args.replicas):
            for l, q in enumerate(qs[i]):
                fh.write(f"{i},south,{l},{float(q)!r}\n")
            for l, q in enumerate(qw[i]):
                fh.write(f"{i},west,{l},{float(q)!r}\n")
    means = (qs * np.arange(m + 1)).sum(axis=1)
    print(f"(m, n) = ({m}, {n}); mean E^Q[t1] = {means.mean():.3f}; wrote {args.out}")
    return 0


def _cmd_dump_env(args):
    spec, _, _ = _resolve_model(args)
    m, n = lattice.characteristic_shape(spec, args.N, args.gamma_offset)
    env = lattice.sample_environment(spec, m, n, args.seed, replica=args.replica)
    lattice.dump_environment(env, args.out)
    print(f"wrote {args.out} (model {spec.label()}, m={m}, n={n}, seed={args.seed})")
    return 0


_COMMANDS = {
    "verify": _cmd_verify,
    "scaling": _cmd_scaling,
    "exit-times": _cmd_exit_times,
    "dump-env": _cmd_dump_env,
}


def cli_main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return _COMMANDS[args.command](args)


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
