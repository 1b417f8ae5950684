"""Command-line front end: ``triax <subcommand> --model FILE [options]``.

Coordinates are 1-based on the command line and in every artifact. JSON goes
to ``--out`` (or stdout); CSV floats use the shortest round-trip repr.
Exit status is 0 on success, 1 for malformed input or a rejected model and
2 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from triax import _streams
from triax._io import open_text
from triax.errors import ModelError, TriaxError
from triax.estimators import constants_recursive, goldie_constant, hill, rank_regression, survival_scaling
from triax.garch import simulate_garch
from triax.model import build_depgraph, lyapunov_mc, lyapunov_sufficient, tail_profile, validate
from triax.modelfile import load_model
from triax.simulate import PathConfig, decompose, stationary_sample, u_sequence, write_batch_csv

# aux stream tags, so that derived streams never collide with path streams
_TAG_GOLDIE = 1
_TAG_USEQ = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int(text: str) -> int:
    return int(text, 0)


def _positive(text: str) -> int:
    v = int(text, 0)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg(text: str) -> int:
    v = int(text, 0)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, type=Path, help="model file")
    common.add_argument("--seed", type=_int, default=_streams.DEFAULT_SEED, help="master seed (default 0x5EED)")
    common.add_argument("--paths", type=_positive, help="number of independent paths")
    common.add_argument("--burnin", type=_nonneg, help="burn-in steps (default: chosen from the model)")
    common.add_argument("--s", type=_positive, help="horizon (decompose) or largest s (useq)")
    common.add_argument("--truncation", type=_positive, help="series terms kept by decompose")
    common.add_argument("--k", type=_positive, help="order statistics used by tail estimators")
    common.add_argument("--eps", type=float, help="moment order of the Lyapunov sufficiency check")
    common.add_argument("--workers", type=_positive, default=None, help="worker threads (default $TRIAX_WORKERS or 1)")
    common.add_argument("--out", type=Path, help="output file (default stdout)")

    p = _Parser(prog="triax", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check the model assumptions")
    sub.add_parser("indices", parents=[common], help="marginal and inherited tail indices")
    sub.add_parser("simulate", parents=[common], help="stationary sample as CSV")
    est = sub.add_parser("estimate", parents=[common], help="Hill and rank-regression tail indices")
    est.add_argument("--curve-out", type=Path, help="write survival-scaling CSVs to PREFIX_<coordinate>.csv")
    for name, text in (("decompose", "per-path decomposition trace"), ("useq", "u(s) sequence")):
        q = sub.add_parser(name, parents=[common], help=text)
        q.add_argument("--coord", type=_positive, help="coordinate (default: smallest dominated one)")
        if name == "decompose":
            q.add_argument("--s1", type=_positive, help="split point of the horizon (default s/2)")
    sub.add_parser("constants", parents=[common], help="tail constants via Goldie and u propagation")
    ly = sub.add_parser("lyapunov", parents=[common], help="stationarity evidence")
    ly.add_argument("--steps", type=_positive, default=500, help="product length for the Monte Carlo estimate")
    g = sub.add_parser("garch", parents=[common], help="simulate a GARCH model file")
    g.add_argument("--steps", type=_positive, default=10_000, help="length of the simulated series")
    g.add_argument("--analyze", action="store_true", help="also report indices and Hill estimates")
    return p


def _emit_json(obj, path: Path | None) -> None:
    with open_text(sys.stdout if path is None else path) as fh:
        fh.write(json.dumps(obj, indent=2) + "\n")


def _emit_csv(writer, path: Path | None) -> None:
    """Run ``writer(target)`` on ``--out`` or stdout."""
    writer(sys.stdout if path is None else path)


def _config(args, paths_default: int) -> PathConfig:
    return PathConfig(
        paths=args.paths or paths_default,
        burn_in=args.burnin,
        horizon=args.s or 10,
        truncation=args.truncation,
        seed=args.seed,
        workers=args.workers,
    )


def _coordinate(args, profile) -> int:
    if args.coord is not None:
        if not 1 <= args.coord <= len(profile.alpha):
            raise ModelError(f"--coord {args.coord} outside 1..{len(profile.alpha)}")
        return args.coord - 1
    dominated = [i for i in range(len(profile.alpha)) if profile.dominated(i)]
    if not dominated:
        raise ModelError("no coordinate inherits its index from another one")
    return dominated[0]


def _estimates(sample: np.ndarray, k, seed, coordinates) -> list[dict]:
    out = []
    for i in coordinates:
        for fn in (hill, rank_regression):
            e = fn(sample[:, i], k)
            rec = e.to_dict()
            rec.update(coordinate=i + 1, seed=seed)
            out.append({key: rec[key] for key in ("coordinate", "method", "point", "std_error", "k", "n", "seed")})
    return out


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec_file = load_model(args.model)
    spec = spec_file.spec
    cmd = args.command

    if cmd == "validate":
        report = validate(spec)
        _emit_json(report.to_dict(), args.out)
        if not report.accepted:
            print(f"triax: model rejected: {', '.join(report.failed()) or 'lyapunov'}", file=sys.stderr)
            return 1
        return 0

    if cmd == "indices":
        _emit_json(tail_profile(spec).to_dict(), args.out)
        return 0

    if cmd == "lyapunov":
        ok, rho = lyapunov_sufficient(spec, args.eps)
        mc = lyapunov_mc(spec, args.steps, args.paths or 1000, args.seed, args.workers)
        _emit_json(
            {
                "sufficient": ok,
                "spectral_radius": rho,
                "eps": args.eps if args.eps is not None else 0.5 * min(tail_profile(spec).alpha),
                "estimate": mc.estimate,
                "std_error": mc.std_error,
                "steps": mc.n,
                "paths": mc.paths,
                "seed": mc.seed,
            },
            args.out,
        )
        return 0

    if cmd == "simulate":
        sample = stationary_sample(spec, _config(args, 10_000))
        _emit_csv(lambda p: write_batch_csv(sample, p), args.out)
        return 0

    if cmd == "estimate":
        profile = tail_profile(spec)
        sample = stationary_sample(spec, _config(args, 100_000))
        _emit_json(_estimates(sample, args.k, args.seed, range(spec.d)), args.out)
        if args.curve_out is not None:
            for i in range(spec.d):
                curve = survival_scaling(sample[:, i], profile.tilde_alpha[i])
                curve.to_csv(f"{args.curve_out}_{i + 1}.csv")
        return 0

    if cmd == "decompose":
        profile = tail_profile(spec)
        l = _coordinate(args, profile)
        trace = decompose(spec, l, args.s or 10, _config(args, 1000), s1=args.s1)
        _emit_csv(trace.to_csv, args.out)
        return 0

    if cmd == "useq":
        profile = tail_profile(spec)
        l = _coordinate(args, profile)
        seq = u_sequence(spec, l, args.s or 30, _config(args, 10_000))
        _emit_csv(seq.to_csv, args.out)
        return 0

    if cmd == "constants":
        profile = tail_profile(spec)
        graph = build_depgraph(spec)
        config = _config(args, 100_000)
        sample = stationary_sample(spec, config)
        goldie = {}
        for k in range(spec.d):
            if not profile.dominated(k):
                est = goldie_constant(spec, k, sample, _streams.derive(args.seed, _TAG_GOLDIE + 16 * k), profile)
                goldie[k] = (est.point, est.std_error)
        u = {}
        for k in range(spec.d):
            if profile.dominated(k):
                cfg = PathConfig(
                    paths=config.paths, seed=_streams.derive(args.seed, _TAG_USEQ + 16 * k), workers=config.workers
                )
                u[k] = u_sequence(spec, k, args.s or 30, cfg).limit
        report = constants_recursive(profile, graph, u, goldie)
        _emit_json(report.to_dict(), args.out)
        return 0

    if cmd == "garch":
        if spec_file.garch is None:
            raise ModelError("the garch subcommand needs a model file with a garch section")
        path = simulate_garch(spec_file.garch, args.steps, args.burnin if args.burnin is not None else 1000, args.seed)
        _emit_csv(path.to_csv, args.out)
        if args.analyze:
            profile = tail_profile(spec)
            coords = range(spec.d)
            report = {
                "indices": profile.to_dict(),
                "sigma2": _estimates(path.sigma2, args.k, args.seed, coords),
                "squared_returns": _estimates(path.x**2, args.k, args.seed, coords),
            }
            text = json.dumps(report, indent=2) + "\n"
            (sys.stderr if args.out is None else sys.stdout).write(text)
        return 0

    raise AssertionError(cmd)


def main(argv=None) -> int:
    try:
        return run(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else 1
    except TriaxError as exc:
        print(f"triax: {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_status
    except (OSError, ValueError) as exc:
        print(f"triax: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
