"""Command-line front end.

Subcommands: ``run`` (success-vs-M rows over a doubling grid), ``sweep``
(threshold search varied over n or eta), ``threshold`` (single point),
``model`` (closed-form curves), ``oracle`` (example dumps), and ``state``
(post-selected register distribution dumps).

Exit codes: 0 success, 2 invalid arguments, 3 censored threshold,
4 output I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from datetime import datetime, timezone
from pathlib import Path

from .bitcore import BitString, RngStream
from .harness import (
    ALGORITHMS,
    ExperimentSpec,
    SweepTable,
    ThresholdEstimate,
    doubling_grid,
    emit_outputs,
    estimate_sample_threshold,
    resolve_epochs,
    run_trials,
)
from .model import ModelParams, ilpn_curve, rlpn_curve
from .oracle import Dataset, ParityInstance, draw_example
from .qsim import RoundSampler

EXIT_OK = 0
EXIT_BAD_SPEC = 2
EXIT_CENSORED = 3
EXIT_IO = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--algo", required=True, choices=ALGORITHMS)
    parser.add_argument("--epochs", default="1", help="literal int, 'n', or 'n^2'")
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-samples", type=int, default=1 << 12)
    parser.add_argument("--threshold", type=float, default=2.0 / 3.0)
    parser.add_argument("--filter", action="store_true", dest="filtering")
    parser.add_argument("--randomize-secret", action="store_true")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--plot", action="store_true", help="also write plot.svg")


def _spec_from_args(args: argparse.Namespace, ns: tuple[int, ...], etas: tuple[float, ...]) -> ExperimentSpec:
    return ExperimentSpec(
        algo=args.algo,
        ns=ns,
        etas=etas,
        epochs_rule=args.epochs,
        trials=args.trials,
        base_seed=args.seed,
        filtering=args.filtering,
        max_samples=args.max_samples,
        threshold=args.threshold,
        randomize_secret=args.randomize_secret,
        out_dir=args.out,
        workers=args.workers,
    )


def _cmd_run(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args, (args.n,), (args.eta,))
    started = datetime.now(timezone.utc).isoformat()
    table = SweepTable()
    for m in doubling_grid(spec.max_samples):
        table.append(run_trials(spec, (args.n, args.eta, m)))
    if spec.out_dir:
        emit_outputs(table, spec, started_at=started, plot=args.plot)
    sys.stdout.write(table.to_csv())
    return EXIT_OK


def _cmd_threshold(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args, (args.n,), (args.eta,))
    started = datetime.now(timezone.utc).isoformat()
    estimate = estimate_sample_threshold(spec, (args.n, args.eta))
    table = SweepTable(list(estimate.rows))
    if spec.out_dir:
        emit_outputs(table, spec, started_at=started, plot=args.plot)
    _print_threshold(estimate)
    return EXIT_CENSORED if estimate.censored else EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if args.vary == "n":
        ns = tuple(int(v) for v in values)
        etas = (args.eta,)
        points = [(n, args.eta) for n in ns]
    else:
        ns = (args.n,)
        etas = tuple(float(v) for v in values)
        points = [(args.n, eta) for eta in etas]
    spec = _spec_from_args(args, ns, etas)
    started = datetime.now(timezone.utc).isoformat()
    table = SweepTable()
    estimates: list[ThresholdEstimate] = []
    for point in points:
        estimate = estimate_sample_threshold(spec, point)
        estimates.append(estimate)
        table.extend(estimate.rows)
    if spec.out_dir:
        paths = emit_outputs(table, spec, started_at=started, plot=args.plot)
        _write_thresholds(Path(paths["results"]).parent / "thresholds.csv", spec, estimates)
    for estimate in estimates:
        _print_threshold(estimate)
    return EXIT_CENSORED if any(e.censored for e in estimates) else EXIT_OK


def _print_threshold(estimate: ThresholdEstimate) -> None:
    if estimate.censored:
        sys.stdout.write(
            f"n={estimate.n} eta={estimate.eta} threshold=censored\n"
        )
    else:
        sys.stdout.write(
            f"n={estimate.n} eta={estimate.eta} threshold={estimate.m_threshold} "
            f"wilson=[{estimate.wilson_lo:.4f},{estimate.wilson_hi:.4f}]\n"
        )


def _write_thresholds(path: Path, spec: ExperimentSpec, estimates: list[ThresholdEstimate]) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["algo", "n", "eta", "m_threshold", "wilson_lo", "wilson_hi", "censored"]
            )
            for est in estimates:
                writer.writerow(
                    [
                        spec.algo,
                        est.n,
                        repr(float(est.eta)),
                        "" if est.m_threshold is None else est.m_threshold,
                        "" if est.wilson_lo is None else repr(float(est.wilson_lo)),
                        "" if est.wilson_hi is None else repr(float(est.wilson_hi)),
                        int(est.censored),
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write thresholds to {path}: {exc}") from exc


def _cmd_model(args: argparse.Namespace) -> int:
    params = ModelParams(args.n, args.eta, resolve_epochs(args.epochs, args.n))
    curve = (ilpn_curve if args.model == "ilpn" else rlpn_curve)(params, args.m_max)
    out = sys.stdout
    out.write("M,r,p_success\n")
    for i in range(curve.m.size):
        out.write(f"{int(curve.m[i])},{float(curve.r[i])!r},{float(curve.p_success[i])!r}\n")
    return EXIT_OK


def _cmd_oracle(args: argparse.Namespace) -> int:
    inst = ParityInstance(BitString(args.secret, args.n) if args.secret is not None
                          else BitString(RngStream(args.seed, 1 << 40).bits(args.n), args.n),
                          args.eta)
    rng = RngStream(args.seed, 0)
    sys.stdout.write("draw_index,x,label\n")
    for i in range(args.count):
        ex = draw_example(inst, rng, i)
        sys.stdout.write(f"{ex.draw_index},{ex.x},{ex.label}\n")
    return EXIT_OK


def _cmd_state(args: argparse.Namespace) -> int:
    inst = ParityInstance(BitString(args.secret, args.n) if args.secret is not None
                          else BitString(RngStream(args.seed, 1 << 40).bits(args.n), args.n),
                          args.eta)
    rng = RngStream(args.seed, 0)
    ds = Dataset(args.n)
    for i in range(args.count):
        ds.add(draw_example(inst, rng, i))
    guess = BitString.from_string(args.guess) if args.guess else BitString.zero(args.n)
    dist = RoundSampler.from_dataset(ds).distribution(guess.value)
    lines = ["z,prob\n"]
    for z in range(1 << args.n):
        lines.append(f"{BitString(z, args.n)},{float(dist.probs[z])!r}\n")
    text = "".join(lines)
    if args.dump:
        try:
            Path(args.dump).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write state dump to {args.dump}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpnlab",
        description="Parity-learning simulators, error models, and benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="success rate over a doubling sample grid")
    _add_common(p_run)
    p_run.add_argument("--n", type=int, required=True)
    p_run.add_argument("--eta", type=float, required=True)
    p_run.set_defaults(func=_cmd_run)

    p_thr = sub.add_parser("threshold", help="smallest M reaching the target rate")
    _add_common(p_thr)
    p_thr.add_argument("--n", type=int, required=True)
    p_thr.add_argument("--eta", type=float, required=True)
    p_thr.set_defaults(func=_cmd_threshold)

    p_sweep = sub.add_parser("sweep", help="thresholds over a grid of n or eta")
    _add_common(p_sweep)
    p_sweep.add_argument("--vary", choices=("n", "eta"), required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated list")
    p_sweep.add_argument("--n", type=int, default=8)
    p_sweep.add_argument("--eta", type=float, default=0.0)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_model = sub.add_parser("model", help="closed-form error curves as CSV")
    p_model.add_argument("--model", choices=("ilpn", "rlpn"), required=True)
    p_model.add_argument("--n", type=int, required=True)
    p_model.add_argument("--eta", type=float, required=True)
    p_model.add_argument("--epochs", default="1")
    p_model.add_argument("--m-max", type=int, required=True)
    p_model.set_defaults(func=_cmd_model)

    p_oracle = sub.add_parser("oracle", help="dump oracle examples as CSV")
    p_oracle.add_argument("--n", type=int, required=True)
    p_oracle.add_argument("--eta", type=float, required=True)
    p_oracle.add_argument("--count", type=int, required=True)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--secret", type=int, default=None,
                          help="hidden string value (default: derived from seed)")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_state = sub.add_parser("state", help="dump a post-selected distribution")
    p_state.add_argument("--n", type=int, required=True)
    p_state.add_argument("--eta", type=float, required=True)
    p_state.add_argument("--count", type=int, required=True)
    p_state.add_argument("--seed", type=int, default=0)
    p_state.add_argument("--secret", type=int, default=None)
    p_state.add_argument("--guess", default=None, help="big-endian bit string")
    p_state.add_argument("--dump", default=None, help="write CSV here instead of stdout")
    p_state.set_defaults(func=_cmd_state)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_BAD_SPEC
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
