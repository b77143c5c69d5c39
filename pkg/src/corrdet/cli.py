"""Command-line interface.

Every command prints a one-line JSON summary on stdout; data goes to files.
Exit codes: 0 success, 1 usage error, 2 config/data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .errors import CorrdetError, NumericalError
from .harness import ExperimentConfig, run_experiment
from .hypothesis_tests import SIDES, test_uncorrelated, test_uniformity
from .matrix_core import cholesky_logdet, read_data_csv, read_matrix_csv, write_csv
from .moments import INFINITE_KURTOSIS, MomentInputs, clt_moments, standardize
from .population import build_correlation, parse_population
from .sampler import kurtosis_of, parse_distribution, sample_correlation
from .vine import draw_vine, draw_vine_logdet, logdet_from_partials, reconstruct_matrix

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3

SIM_KINDS = {
    "size": "size",
    "power": "power",
    "hist": "histogram",
    "expansion": "expansion",
    "uniformity": "uniformity_size",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def fmt_number(x: float) -> str:
    return format(x, ".17g")


def dumps(obj) -> str:
    """Compact JSON with floats at 17 significant digits; non-finite floats become null."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_number(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    return dumps(float(obj))


def _kurtosis_arg(text: str) -> float:
    if text.lower() in ("inf", "infinite", "infinity"):
        return INFINITE_KURTOSIS
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid kurtosis {text!r}") from None


def _default_threads() -> int | None:
    env = os.environ.get("CORRDET_THREADS")
    if env is None:
        return None
    try:
        return max(1, int(env))
    except ValueError:
        return None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master random seed")
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker processes (default: $CORRDET_THREADS, else config or 1)")
    common.add_argument("--out", default=None, help="primary output file")

    parser = _Parser(prog="corrdet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    stat = sub.add_parser("stat", parents=[common],
                          help="CLT moments, and the standardized statistic of a data matrix")
    stat.add_argument("--input", help="p x n data CSV (rows are variables)")
    stat.add_argument("--p", type=int, help="dimension (when no --input)")
    stat.add_argument("--n", type=int, help="sample size (when no --input)")
    stat.add_argument("--centered", action="store_true", help="subtract the sample mean")
    stat.add_argument("--population", default="identity",
                      help="identity | ar1:<a> | equi:<rho> | file:<R.csv>")
    group = stat.add_mutually_exclusive_group()
    group.add_argument("--dist", help="noise law giving the fourth moment: normal | t:<df> | siginv:<a>")
    group.add_argument("--kurtosis", type=_kurtosis_arg, help="fourth moment E|x|^4 (or 'inf')")

    test = sub.add_parser("test", help="hypothesis tests")
    tsub = test.add_subparsers(dest="test_kind", required=True)
    unc = tsub.add_parser("uncorr", parents=[common], help="test H0: Corr(y) = I")
    unc.add_argument("--input", required=True, help="p x n data CSV (rows are variables)")
    unc.add_argument("--centered", action="store_true", help="subtract the sample mean")
    unc.add_argument("--alpha", type=float, default=0.05, help="test level")
    unc.add_argument("--sided", choices=SIDES, default="lower", help="rejection tail")
    uni = tsub.add_parser("uniform", parents=[common],
                          help="test H0: eta = 1 for a random correlation matrix")
    src = uni.add_mutually_exclusive_group(required=True)
    src.add_argument("--logdet", type=float, help="observed log-determinant")
    src.add_argument("--matrix", help="p x p correlation matrix CSV")
    uni.add_argument("--p", type=int, help="dimension (required with --logdet)")
    uni.add_argument("--alpha", type=float, default=0.05, help="test level")
    uni.add_argument("--sided", choices=SIDES, default="two", help="rejection tail")

    gen = sub.add_parser("gen", help="generators")
    gsub = gen.add_subparsers(dest="gen_kind", required=True)
    vine = gsub.add_parser("vine", parents=[common],
                           help="random correlation matrix with density ~ det(R)^(eta-1)")
    vine.add_argument("--p", type=int, required=True, help="dimension")
    vine.add_argument("--eta", type=float, required=True, help="shape eta > 0")
    vine.add_argument("--logdet-only", action="store_true",
                      help="print only the log-determinant (no matrix is formed)")

    sim = sub.add_parser("sim", help="Monte Carlo experiments")
    ssub = sim.add_subparsers(dest="sim_kind", required=True)
    for name, kind in SIM_KINDS.items():
        sp = ssub.add_parser(name, parents=[common], help=f"{kind} experiment")
        sp.add_argument("--config", required=True, help="experiment JSON config")
        sp.add_argument("--raw", help="file for raw per-replicate values (one per line)")
    return parser


def _cmd_stat(args) -> dict:
    if args.kurtosis is not None:
        kurt = args.kurtosis
    elif args.dist is not None:
        kurt = kurtosis_of(parse_distribution(args.dist))
    else:
        kurt = 3.0
    y = None
    if args.input:
        y = read_data_csv(args.input)
        p, n = y.shape
    elif args.p is not None and args.n is not None:
        p, n = args.p, args.n
    else:
        raise UsageError("stat needs --input or both --p and --n")
    spec = parse_population(args.population, p)
    centering = "centered" if args.centered else "noncentered"
    if spec.family == "identity":
        inputs = MomentInputs(p=p, n=n, kurtosis=kurt, centering=centering)
    else:
        inputs = MomentInputs.from_correlation(build_correlation(spec), (p, n), kurt, centering)
    m = clt_moments(inputs)
    out = {"p": p, "n": n, "centered": args.centered, "mu": m.mu, "sigma2": m.sigma2}
    if y is not None:
        logdet = cholesky_logdet(sample_correlation(y, args.centered))
        out.update(logdet=logdet, statistic=standardize(logdet, m))
    return out


def _cmd_test(args) -> dict:
    if args.test_kind == "uncorr":
        y = read_data_csv(args.input)
        return test_uncorrelated(y, args.centered, args.alpha, args.sided).as_dict()
    if args.matrix:
        return test_uniformity(matrix=read_matrix_csv(args.matrix), p=args.p,
                               alpha=args.alpha, sided=args.sided).as_dict()
    if args.p is None:
        raise UsageError("--logdet requires --p")
    return test_uniformity(args.logdet, args.p, alpha=args.alpha, sided=args.sided).as_dict()


def _cmd_gen(args):
    seed = 0 if args.seed is None else args.seed
    if args.logdet_only:
        return fmt_number(draw_vine_logdet(args.p, args.eta, seed))
    sample = draw_vine(args.p, args.eta, seed)
    out = {"p": args.p, "eta": args.eta, "seed": seed, "logdet": logdet_from_partials(sample)}
    if args.out:
        write_csv(args.out, reconstruct_matrix(sample))
        out["out"] = args.out
    return out


def _cmd_sim(args) -> dict:
    kind = SIM_KINDS[args.sim_kind]
    cfg = ExperimentConfig.from_json(args.config, kind)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg.workers = args.threads
    result = run_experiment(cfg)
    out_path = args.out or f"{cfg.kind}_results.csv"
    result.to_csv(out_path)
    summary = {"kind": cfg.kind, "out": out_path, "rows": len(result.rows),
               "seed": cfg.master_seed, "workers": cfg.workers}
    if args.raw and result.samples:
        raw_paths = []
        for cell in sorted(result.samples):
            path = args.raw if len(result.samples) == 1 else f"{args.raw}.cell{cell}"
            result.write_samples(path, cell)
            raw_paths.append(path)
        summary["raw"] = raw_paths
    return summary


COMMANDS = {"stat": _cmd_stat, "test": _cmd_test, "gen": _cmd_gen, "sim": _cmd_sim}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"corrdet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"corrdet: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CorrdetError, OSError, ValueError) as exc:
        print(f"corrdet: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(result if isinstance(result, str) else dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
