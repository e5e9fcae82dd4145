"""Command-line entry point: ``hdqcka keyrate | simulate | verify-sampling``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import finite_key, protocol, sampling
from .finite_key import ParamsTemplate, ProtocolParams, SWEEP_COLUMNS, default_threads
from .streams import make_stream

SCHEMA_LINE = "# hdqcka-schema v1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3

FIG_N_GRID = "1e4:1e9:21-log"

SUMMARY_COLUMNS = ["seed", "d", "p", "Q", "N", "N_total", "abort", "abort_reason", "w_s", "Q_Z", "ell", "rate"]
VERIFY_COLUMNS = ["delta", "word", "weight", "frequency", "sigma", "bound", "exact", "status"]


class ConfigError(ValueError):
    pass


def parse_number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_int(text: str) -> int:
    v = parse_number(text)
    if not math.isfinite(v) or v != int(v):
        raise ConfigError(f"not an integer: {text!r}")
    return int(v)


def parse_grid(text: str, cast: Callable = float) -> list:
    """Comma list of values and ranges.

    A range is ``start:stop:points`` (linear) or ``start:stop:points-log``
    (log-spaced). Numbers may use scientific notation.
    """
    values: list = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise ConfigError(f"bad range {item!r}; expected start:stop:points[-log]")
            start, stop = parse_number(parts[0]), parse_number(parts[1])
            spec = parts[2].lower()
            log = spec.endswith("log")
            count = parse_int(spec[:-3].rstrip("-") if log else spec)
            if count < 1:
                raise ConfigError(f"range {item!r} needs at least one point")
            if log:
                if start <= 0 or stop <= 0:
                    raise ConfigError(f"log range {item!r} needs positive bounds")
                pts = np.logspace(math.log10(start), math.log10(stop), count)
            else:
                pts = np.linspace(start, stop, count)
            values.extend(float(x) for x in pts)
        else:
            values.append(parse_number(item))
    if not values:
        raise ConfigError(f"empty grid {text!r}")
    out = []
    for v in values:
        if cast is int:
            v = int(round(v))
        if v not in out:
            out.append(v)
    return out


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render(rows: List[Dict[str, object]], columns: Sequence[str], fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"schema": SCHEMA_LINE[2:], "rows": [{c: r.get(c) for c in columns} for r in rows]},
                          indent=1) + "\n"
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_format(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(text: str, path: Optional[str]) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _add_security_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=parse_number, default=finite_key.DEFAULT_EPSILON)
    p.add_argument("--epsilon-ec", type=parse_number, default=finite_key.DEFAULT_EPSILON_EC)
    p.add_argument("--m-fraction", type=parse_number, default=finite_key.DEFAULT_M_FRACTION,
                   help="test sample size as a fraction of N (default 0.07)")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default $HDQCKA_THREADS or CPU count)")
    p.add_argument("--seed", type=parse_int, default=0)


def fig_points(fig: int, p: int) -> List[tuple]:
    ns = parse_grid(FIG_N_GRID, int)
    if fig == 1:
        return finite_key.grid_points([2], [p], [0.10], ns)
    if fig == 2:
        return finite_key.grid_points([2, 4, 8, 16], [p], [0.10, 0.30], ns)
    if fig == 3:
        pts = []
        for N in ns:
            pts += [(4, p, 0.10, N), (2, p, 0.10, 2 * N)]
        return pts
    raise ConfigError(f"unknown figure preset {fig}")


def cmd_keyrate(args) -> int:
    ps = parse_grid(args.p, int)
    if args.fig:
        if len(ps) != 1:
            raise ConfigError("figure presets take a single --p")
        points = fig_points(args.fig, ps[0])
    else:
        points = finite_key.grid_points(parse_grid(args.d, int), ps, parse_grid(args.Q), parse_grid(args.N, int))
    template = ParamsTemplate(args.epsilon, args.epsilon_ec, args.m_fraction)
    rows = finite_key.sweep(points, template, args.noise_model, threads=args.threads)
    emit(render([r.as_row() for r in rows], SWEEP_COLUMNS, args.format), args.output)
    if all(r.error for r in rows):
        print("error: every grid point failed: " + rows[0].error, file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = ProtocolParams(d=args.d, p=args.p, N=parse_int(args.N), epsilon=args.epsilon,
                            epsilon_ec=args.epsilon_ec, m_fraction=args.m_fraction)
    if params.n_total > args.max_N:
        raise ConfigError(
            f"N_total = {params.n_total} exceeds the cap of {args.max_N}; "
            f"lower --N or raise --max-N if the memory is available"
        )
    record = protocol.run_protocol(params, args.Q, args.seed, insecure_dump=args.insecure_dump)
    if args.transcript:
        with open(args.transcript, "w", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")
    emit(render([record.summary()], SUMMARY_COLUMNS, args.format), args.output)
    return EXIT_OK


def verify_rows(d: int, p: int, N: int, m: int, deltas: Iterable[float], trials: int, seed: int,
                threads: Optional[int] = None) -> List[dict]:
    family = sampling.adversarial_family(d, p, N)
    jobs = [(i, delta, j, word) for i, delta in enumerate(deltas) for j, word in enumerate(family)]

    def one(job):
        i, delta, j, (name, q_a, q_bs) = job
        strategy = sampling.SamplingStrategy(N, m, delta)
        rng = make_stream(np.random.SeedSequence(seed, spawn_key=(i, j)))
        freq = sampling.mc_failure_frequency(q_a, q_bs, strategy, trials, rng)
        sigma = math.sqrt(freq * (1 - freq) / trials)
        bound = strategy.error_bound()
        s = sampling.round_sums(q_a, q_bs)
        exact = sampling.exact_failure_probability(int(np.count_nonzero(s.symbols)), strategy)
        return {
            "delta": delta, "word": name, "weight": sampling.relative_hamming_weight(s),
            "frequency": freq, "sigma": sigma, "bound": bound, "exact": exact,
            "status": "PASS" if freq <= bound + 3 * sigma else "FAIL",
        }

    threads = threads or default_threads()
    if threads <= 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, jobs))


def cmd_verify_sampling(args) -> int:
    N, m, trials = parse_int(args.N), parse_int(args.m), parse_int(args.trials)
    if trials < 1:
        raise ConfigError("--trials must be at least 1")
    if N > 10**4:
        raise ConfigError("--N above 1e4 is too large for the Monte Carlo check")
    deltas = parse_grid(args.delta)
    for delta in deltas:
        sampling.SamplingStrategy(N, m, delta)
    rows = verify_rows(args.d, args.p, N, m, deltas, trials, args.seed, args.threads)
    emit(render(rows, VERIFY_COLUMNS, args.format), args.output)
    return EXIT_VERIFY if any(r["status"] == "FAIL" for r in rows) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdqcka", description="High-dimensional quantum conference key agreement")
    sub = parser.add_subparsers(dest="command", required=True)

    kr = sub.add_parser("keyrate", help="finite-key rate sweep")
    kr.add_argument("--d", default="2", help="dimension grid")
    kr.add_argument("--p", default="2", help="number-of-Bobs grid")
    kr.add_argument("--Q", default="0.10", help="depolarisation grid")
    kr.add_argument("--N", default="1e6", help="rounds grid (test + key rounds)")
    kr.add_argument("--fig", type=int, choices=(1, 2, 3), default=None, help="figure reproduction preset")
    kr.add_argument("--noise-model", choices=finite_key.NOISE_MODELS, default="nominal",
                    help="Fourier statistic model: 'nominal' = Q/d, 'exact' = Q(1-1/d)")
    _add_security_flags(kr)
    _add_common(kr)
    kr.set_defaults(func=cmd_keyrate)

    sim = sub.add_parser("simulate", help="Monte Carlo protocol run")
    sim.add_argument("--d", type=parse_int, default=2)
    sim.add_argument("--p", type=parse_int, default=2)
    sim.add_argument("--Q", type=parse_number, default=0.10)
    sim.add_argument("--N", default="1e5")
    sim.add_argument("--max-N", type=parse_int, default=10**8, help="cap on signals sent (N_total)")
    sim.add_argument("--transcript", default="transcript.json", help="transcript JSON path ('' to skip)")
    sim.add_argument("--insecure-dump", action="store_true", help="store final keys in the transcript (testing only)")
    _add_security_flags(sim)
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)

    vs = sub.add_parser("verify-sampling", help="Monte Carlo check of the sampling bound")
    vs.add_argument("--N", default="200")
    vs.add_argument("--m", default="100")
    vs.add_argument("--delta", default="0.1", help="tolerance grid")
    vs.add_argument("--trials", default="1e5")
    vs.add_argument("--d", type=parse_int, default=2)
    vs.add_argument("--p", type=parse_int, default=2)
    _add_common(vs)
    vs.set_defaults(func=cmd_verify_sampling)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
