"""``mlr-em`` command-line entry point.

Exit status: 0 on success, 1 when a validation check fails, 2 on a
configuration error.
"""
import argparse
import os
import sys

from . import config as cfgmod
from . import experiments, specfun, validation
from .experiments import write_csv, write_meta

COMMANDS = ("trajectory", "convergence", "mixing", "weights-compare", "validate")
_BLOCK = {"weights-compare": "weights_compare"}


def build_parser():
    p = argparse.ArgumentParser(
        prog="mlr-em",
        description="EM for symmetric two-component mixed linear regression: "
                    "experiments and validation suites.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI configuration file")
    p.add_argument("--seed", type=int, help="override the block's master seed")
    p.add_argument("--out", help="output directory (overrides [global] output_dir)")
    p.add_argument("--exact-noiseless", action="store_true",
                   help="noiseless data with the sign-based EM steps")
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.add_argument("--workers", type=int, help="thread-pool size (0 = all cores)")
    p.add_argument("--perturb-k0", type=float, default=None, help=argparse.SUPPRESS)
    return p


def _apply_overrides(cfg, args):
    block = cfg.block(_BLOCK.get(args.command, args.command))
    if args.seed is not None:
        block.seed = args.seed
    if args.trials is not None:
        if not hasattr(block, "trials"):
            raise cfgmod.ConfigError(f"--trials does not apply to {args.command}")
        block.trials = args.trials
    if args.out is not None:
        cfg.global_.output_dir = args.out
    if args.exact_noiseless:
        cfg.global_.exact_noiseless = True
    if args.workers is not None:
        cfg.global_.workers = args.workers
    return cfg.check()


def _quad(g):
    return specfun.QuadratureSpec(g.quad_abs_tol, g.quad_rel_tol, g.quad_max_subdivisions,
                                  g.quad_truncation_exponent)


def cmd_trajectory(cfg, out):
    g = cfg.global_
    r = experiments.trajectory(cfg.trajectory, g.exact_noiseless, g.n_workers(), out)
    print(f"trajectory: {cfg.trajectory.trials} trials, median cycloid residual "
          f"{r['median_residual']:.4g}")
    return 0


def cmd_convergence(cfg, out):
    g = cfg.global_
    r = experiments.convergence(cfg.convergence, g.exact_noiseless, g.n_workers(), out)
    for key, (_, _, slope, _) in r.items():
        print(f"convergence: snr={key} slope={slope:.4f}")
    return 0


def cmd_mixing(cfg, out):
    g = cfg.global_
    r = experiments.mixing(cfg.mixing, g.exact_noiseless, g.n_workers(), out)
    for snr, v in r.items():
        print(f"mixing: snr={snr} slope={v['slope']:.4f} (reference {v['reference_slope']:.4f}) "
              f"pearson={v['pearson']:.4f}")
    return 0


def cmd_weights_compare(cfg, out):
    g = cfg.global_
    r = experiments.weights_compare(cfg.weights_compare, g.exact_noiseless, g.n_workers(), out)
    for p1, v in r.items():
        print(f"weights-compare: pi_star={p1} final mean theta err={v['mean_theta_err'][-1]:.4g} "
              f"median pi err={v['median_pi_err'][-1]:.4g}")
    return 0


def cmd_validate(cfg, out):
    v = cfg.validate
    rows = validation.run_suites(v.suites, v.mc_draws, v.seed, _quad(cfg.global_),
                                 cfg.global_.n_workers())
    write_csv(os.path.join(out, "validation_report.csv"),
              ("check_name", "value", "reference", "tolerance", "pass"),
              [tuple(r) for r in rows])
    failed = [r for r in rows if not r.passed]
    write_meta(os.path.join(out, "validation_report.meta.json"),
               {"command": "validate", "suites": v.suites, "mc_draws": v.mc_draws, "seed": v.seed,
                "checks": len(rows), "failed": [r.name for r in failed],
                "k0_scale": specfun.k0_scale(), "backend": specfun.BACKEND})
    for r in failed:
        print(f"FAIL {r.name}: value={r.value!r} reference={r.reference!r} tol={r.tolerance!r}")
    print(f"validate: {len(rows) - len(failed)}/{len(rows)} checks passed")
    return 1 if failed else 0


HANDLERS = {
    "trajectory": cmd_trajectory,
    "convergence": cmd_convergence,
    "mixing": cmd_mixing,
    "weights-compare": cmd_weights_compare,
    "validate": cmd_validate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(cfgmod.load(args.config), args)
    except cfgmod.ConfigError as exc:
        print(f"mlr-em: configuration error: {exc}", file=sys.stderr)
        return 2
    out = cfg.global_.output_dir
    os.makedirs(out, exist_ok=True)
    handler = HANDLERS[args.command]
    if args.perturb_k0 is not None:
        with specfun.perturbed_k0(args.perturb_k0):
            return handler(cfg, out)
    return handler(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
