"""Experiment orchestration: seeded multi-trial sweeps and persistence.

Every trial is a pure function of (base seed, trial index) — trial t
always draws from stream t — so results are identical no matter how many
worker processes run them, and re-running a recorded manifest reproduces
the table byte for byte.  By default the hidden string is fixed per
(n, eta) point (drawn from a dedicated stream) and only the example
draws vary across trials; ``randomize_secret`` draws a fresh hidden
string per trial instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .bitcore import BitString, RngStream
from .learners import (
    DEFAULT_EPSILON,
    GREEDY_FULL,
    GREEDY_MARKOV,
    LearnerConfig,
    Policy,
    PolicyKind,
    al_solve,
    bkw_solve,
    lyu_solve,
    run_ilpn,
    run_rlpn,
)
from .oracle import Dataset, ParityInstance, draw_example

ALGORITHMS = ("ilpn", "rlpn", "rlpn-markov", "rlpn-eps", "al", "bkw", "lyu-approx")

CSV_COLUMNS = (
    "algo",
    "n",
    "eta",
    "epochs",
    "M",
    "trials",
    "successes",
    "success_rate",
    "wilson_lo",
    "wilson_hi",
    "wall_ms",
    "seed",
)

# Hidden-string streams must never collide with per-trial streams (ids
# 0..trials-1), so they live above bit 40, keyed by (n, micro-eta).
_SECRET_STREAM_BASE = 1 << 40


@dataclass(frozen=True)
class ExperimentSpec:
    """Declarative description of a sweep; all runs derive from it."""

    algo: str
    ns: tuple[int, ...]
    etas: tuple[float, ...]
    epochs_rule: str = "1"
    trials: int = 200
    base_seed: int = 0
    filtering: bool = False
    max_samples: int = 1 << 12
    threshold: float = 2.0 / 3.0
    randomize_secret: bool = False
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "ns", tuple(int(v) for v in self.ns))
        object.__setattr__(self, "etas", tuple(float(v) for v in self.etas))
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}; use one of {ALGORITHMS}")
        if not self.ns or not self.etas:
            raise ValueError("need at least one n and one eta")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.5 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0.5, 1)")
        if self.max_samples < 1:
            raise ValueError("max_samples must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for eta in self.etas:
            if not 0.0 <= eta < 0.5:
                raise ValueError(f"eta must be in [0, 0.5), got {eta}")
        for n in self.ns:
            resolve_epochs(self.epochs_rule, n)  # fail fast on bad rules


def resolve_epochs(rule: str | int, n: int) -> int:
    """Resolve an epochs rule ('1', 'n', 'n^2', or a literal int) at size n."""
    if isinstance(rule, int):
        value = rule
    else:
        text = str(rule).strip().lower()
        if text == "n":
            value = n
        elif text in ("n^2", "n2", "n**2"):
            value = n * n
        else:
            try:
                value = int(text)
            except ValueError:
                raise ValueError(f"bad epochs rule {rule!r}; use an int, 'n', or 'n^2'")
    if value < 1:
        raise ValueError(f"epochs must be positive, got {value}")
    return value


@dataclass
class SweepRow:
    algo: str
    n: int
    eta: float
    epochs: int
    M: int
    trials: int
    successes: int
    success_rate: float
    wilson_lo: float
    wilson_hi: float
    wall_ms: float
    seed: int


@dataclass
class SweepTable:
    rows: list[SweepRow] = field(default_factory=list)

    def append(self, row: SweepRow) -> None:
        self.rows.append(row)

    def extend(self, rows: list[SweepRow]) -> None:
        self.rows.extend(rows)

    def to_csv(self) -> str:
        """Render the table deterministically (timing column zeroed).

        Measured wall times live in the manifest; keeping them out of the
        CSV lets identical seeds reproduce identical files.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(
                [
                    row.algo,
                    row.n,
                    _fmt_float(row.eta),
                    row.epochs,
                    row.M,
                    row.trials,
                    row.successes,
                    _fmt_float(row.success_rate),
                    _fmt_float(row.wilson_lo),
                    _fmt_float(row.wilson_hi),
                    0,
                    row.seed,
                ]
            )
        return buf.getvalue()


def _fmt_float(value: float) -> str:
    return repr(float(value))


def wilson_interval(
    successes: int, total: int, z: float = 1.959963984540054
) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= successes <= total:
        raise ValueError("successes must be in 0..total")
    phat = successes / total
    denom = 1.0 + z * z / total
    centre = phat + z * z / (2 * total)
    spread = z * math.sqrt(phat * (1.0 - phat) / total + z * z / (4 * total * total))
    return max(0.0, (centre - spread) / denom), min(1.0, (centre + spread) / denom)


def secret_for(base_seed: int, n: int, eta: float) -> BitString:
    """Fixed hidden string for an (n, eta) point, stable across sample counts."""
    stream_id = _SECRET_STREAM_BASE | (n << 24) | int(round(eta * 1e6))
    return BitString(RngStream(base_seed, stream_id).bits(n), n)


def _policy_for(algo: str) -> Policy:
    if algo == "rlpn":
        return GREEDY_FULL
    if algo == "rlpn-markov":
        return GREEDY_MARKOV
    if algo == "rlpn-eps":
        return Policy(PolicyKind.EPSILON_GREEDY, DEFAULT_EPSILON)
    raise ValueError(f"{algo} has no policy")


def run_one_trial(
    algo: str,
    n: int,
    eta: float,
    epochs: int,
    samples: int,
    filtering: bool,
    base_seed: int,
    trial: int,
    secret_value: int | None,
) -> bool:
    """One independent trial; draws everything from stream ``trial``.

    With ``secret_value`` None the hidden string is drawn first from the
    trial's own stream, then the examples follow.
    """
    rng = RngStream(base_seed, trial)
    if secret_value is None:
        secret_value = rng.bits(n)
    inst = ParityInstance(BitString(secret_value, n), eta)
    if algo == "ilpn":
        cfg = LearnerConfig(n, epochs, GREEDY_FULL, rng, samples, filtering)
        return run_ilpn(cfg, inst).success
    if algo in ("rlpn", "rlpn-markov", "rlpn-eps"):
        cfg = LearnerConfig(n, epochs, _policy_for(algo), rng, samples, filtering)
        return run_rlpn(cfg, inst).success
    if algo == "al":
        ds = Dataset(n)
        for i in range(samples):
            ds.add(draw_example(inst, rng, i))
        return al_solve(ds) == inst.s
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if algo == "bkw":
            return bkw_solve(inst, samples, rng) == inst.s
        if algo == "lyu-approx":
            ds = Dataset(n)
            for i in range(samples):
                ds.add(draw_example(inst, rng, i))
            return lyu_solve(ds, rng) == inst.s
    raise ValueError(f"unknown algorithm {algo!r}")


def _trial_star(args: tuple) -> bool:
    return run_one_trial(*args)


def run_trials(spec: ExperimentSpec, point: tuple[int, float, int]) -> SweepRow:
    """Evaluate one (n, eta, M) point with ``spec.trials`` independent runs."""
    n, eta, samples = point
    epochs = resolve_epochs(spec.epochs_rule, n)
    secret = None if spec.randomize_secret else secret_for(spec.base_seed, n, eta).value
    started = time.perf_counter()
    jobs = [
        (spec.algo, n, eta, epochs, samples, spec.filtering, spec.base_seed, t, secret)
        for t in range(spec.trials)
    ]
    if spec.workers > 1 and spec.trials > 1:
        chunk = max(1, spec.trials // (spec.workers * 4))
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(_trial_star, jobs, chunksize=chunk))
    else:
        outcomes = [_trial_star(job) for job in jobs]
    successes = int(sum(outcomes))
    wall_ms = (time.perf_counter() - started) * 1000.0
    lo, hi = wilson_interval(successes, spec.trials)
    return SweepRow(
        algo=spec.algo,
        n=n,
        eta=eta,
        epochs=epochs,
        M=samples,
        trials=spec.trials,
        successes=successes,
        success_rate=successes / spec.trials,
        wilson_lo=lo,
        wilson_hi=hi,
        wall_ms=wall_ms,
        seed=spec.base_seed,
    )


@dataclass
class ThresholdEstimate:
    """Smallest sample count whose empirical success rate meets the target."""

    n: int
    eta: float
    m_threshold: int | None
    wilson_lo: float | None
    wilson_hi: float | None
    censored: bool
    rows: list[SweepRow] = field(default_factory=list)


def doubling_grid(max_samples: int) -> list[int]:
    grid = []
    m = 1
    while m <= max_samples:
        grid.append(m)
        m *= 2
    if grid[-1] != max_samples:
        grid.append(max_samples)
    return grid


def estimate_sample_threshold(
    spec: ExperimentSpec, point: tuple[int, float]
) -> ThresholdEstimate:
    """Doubling search then bisection on the empirical success curve.

    Every probed sample count is evaluated with the full trial budget;
    both bracket endpoints come from measured rows, and the reported
    threshold is the bisection crossing.  Censored when even
    ``max_samples`` misses the target.
    """
    n, eta = point
    rows: list[SweepRow] = []
    lo, hi, hi_row = 0, None, None
    for m in doubling_grid(spec.max_samples):
        row = run_trials(spec, (n, eta, m))
        rows.append(row)
        if row.success_rate >= spec.threshold:
            hi, hi_row = m, row
            break
        lo = m
    if hi is None:
        return ThresholdEstimate(n, eta, None, None, None, True, rows)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        row = run_trials(spec, (n, eta, mid))
        rows.append(row)
        if row.success_rate >= spec.threshold:
            hi, hi_row = mid, row
        else:
            lo = mid
    return ThresholdEstimate(n, eta, hi, hi_row.wilson_lo, hi_row.wilson_hi, False, rows)


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
    except (OSError, subprocess.SubprocessError):
        return ""
    return out.stdout.strip() if out.returncode == 0 else ""


def emit_outputs(
    table: SweepTable,
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    started_at: str | None = None,
    plot: bool = False,
) -> dict[str, Path]:
    """Write results.csv, manifest.json, and optionally plot.svg.

    The CSV is a pure function of (spec, seed); timings and timestamps go
    to the manifest only.  I/O failures surface as OSError with the
    offending path.
    """
    if out_dir is None:
        out_dir = spec.out_dir
    if out_dir is None:
        raise ValueError("no output directory given")
    out = Path(out_dir)
    finished = datetime.now(timezone.utc).isoformat()
    paths: dict[str, Path] = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "results.csv"
        csv_path.write_text(table.to_csv())
        paths["results"] = csv_path
        manifest = {
            "spec": asdict(spec),
            "base_seed": spec.base_seed,
            "tool_version": __version__,
            "started_at": started_at or finished,
            "finished_at": finished,
            "git_describe": _git_describe(),
            "timings_ms": [round(row.wall_ms, 3) for row in table.rows],
        }
        manifest_path = out / "manifest.json"
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
        paths["manifest"] = manifest_path
        if plot:
            paths["plot"] = _emit_plot(table, out / "plot.svg")
    except OSError as exc:
        raise OSError(f"cannot write experiment outputs under {out}: {exc}") from exc
    return paths


def spec_from_manifest(manifest: dict) -> ExperimentSpec:
    """Rebuild the spec recorded in a manifest (for replay)."""
    return ExperimentSpec(**manifest["spec"])


def _emit_plot(table: SweepTable, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict[tuple, list[SweepRow]] = {}
    for row in table.rows:
        series.setdefault((row.algo, row.n, row.eta), []).append(row)
    for (algo, n, eta), rows in sorted(series.items()):
        rows = sorted(rows, key=lambda r: r.M)
        ax.plot(
            [r.M / (1 << n) for r in rows],
            [r.success_rate for r in rows],
            marker="o",
            label=f"{algo} n={n} eta={eta}",
        )
    ax.set_xlabel("samples / 2^n")
    ax.set_ylabel("success rate")
    ax.axhline(2.0 / 3.0, color="grey", linestyle=":")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
