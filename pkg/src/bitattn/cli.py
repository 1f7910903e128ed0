"""Command-line front end: ``bitattn {validate,bench,tif,train,report}``.

Exit codes: 0 success, 1 a property or verification failed, 2 usage error,
3 I/O error. ``BITATTN_SEED`` overrides the default seed of 42.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
import time

import numpy as np

from . import validate
from .attention import bitwise_attention, naive_bitwise_attention
from .bitcore import dump
from .costmodel import (compare_costs, count_bitwise_attention, count_float_attention,
                        energy_pj_exact)
from .errors import DomainError
from .matrixcore import naive_reference_attention, reference_attention
from .tif import TifConfig, spike_sum_report, tif_convert
from .toytrain import SynthTask, TrainingDiverged, train

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

BENCH_HEADER = ["impl", "n", "d", "T", "reps", "mean_ns", "stddev_ns", "flops", "sops", "energy_pj"]


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("BITATTN_SEED")
    if raw is None:
        return 42
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"BITATTN_SEED must be an integer, got {raw!r}")


def _positive(value: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _open_out(path: str):
    return sys.stdout if path == "-" else open(path, "w", newline="")


def _write(path: str, text: str) -> None:
    fh = _open_out(path)
    try:
        fh.write(text)
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_validate(args) -> int:
    rep = validate.report(seed=args.seed, threads=args.threads, sabotage=args.sabotage)
    for p in rep["properties"]:
        status = "PASS" if p["passed"] else "FAIL"
        print(f"{status} {p['name']}: measured={p['measured']:.6g} tol={p['tolerance']:.6g}",
              file=sys.stderr if args.json == "-" else sys.stdout)
    if args.json:
        _write(args.json, json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if rep["passed"] else EXIT_FAIL


def _time(fn, reps: int) -> tuple[float, float]:
    fn()  # warm-up
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return statistics.fmean(samples), statistics.stdev(samples)


def bench_rows(n: int, d: int, T: int, reps: int, seed: int, threads: int = 1) -> list[dict]:
    """Time float softmax attention and both bitwise kernels on the same inputs."""
    rng = np.random.default_rng(seed)
    q, k, v = (rng.normal(size=(n, d)) for _ in range(3))
    cfg = TifConfig(T)
    q_b, k_b = tif_convert(q, cfg), tif_convert(k, cfg)

    fast = bitwise_attention(q_b, k_b, v, threads=threads)
    slow = naive_bitwise_attention(q_b, k_b, v)
    if not (np.array_equal(fast.scores, slow.scores) and np.max(np.abs(fast.output - slow.output)) <= 1e-12):
        raise AssertionError("packed and naive bitwise attention disagree")
    if np.max(np.abs(reference_attention(q, k, v) - naive_reference_attention(q, k, v))) > 1e-10:
        raise AssertionError("float attention disagrees with its naive oracle")

    flt = count_float_attention(n, d)
    bit = count_bitwise_attention(n, d, T)
    impls = [
        ("float_ref", lambda: reference_attention(q, k, v), flt.mac_ops, flt.ac_ops),
        ("bitwise_naive", lambda: naive_bitwise_attention(q_b, k_b, v), bit.mac_ops, bit.ac_ops),
        ("bitwise_packed", lambda: bitwise_attention(q_b, k_b, v, threads=threads), bit.mac_ops, bit.ac_ops),
    ]
    rows = []
    for name, fn, flops, sops in impls:
        mean, std = _time(fn, reps)
        rows.append({"impl": name, "n": n, "d": d, "T": T, "reps": reps,
                     "mean_ns": f"{mean:.1f}", "stddev_ns": f"{std:.1f}",
                     "flops": flops, "sops": sops, "energy_pj": str(energy_pj_exact(flops, sops))})
    return rows


def cmd_bench(args) -> int:
    if args.reps < 3:
        raise UsageError("--reps must be >= 3")
    try:
        rows = bench_rows(args.n, args.d, args.T, args.reps, args.seed, args.threads)
    except AssertionError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_tif(args) -> int:
    try:
        rep = spike_sum_report(args.x, TifConfig(args.T))
    except DomainError as exc:
        raise UsageError(str(exc))
    note = "" if rep.agrees else "  (T*x sits on an integer; rounding lost a spike)"
    print(" ".join(map(str, rep.spikes)) + f" | sum={rep.spike_sum} floor={rep.floor_tx}{note}")
    if args.dump:
        dump(tif_convert([[args.x]], TifConfig(args.T, norm_mode="raw")), args.dump)
    return EXIT_OK


def cmd_train(args) -> int:
    if not args.lr >= 0:
        raise UsageError("--lr must be non-negative")
    task = SynthTask(seed=args.seed)
    try:
        log = train(task, TifConfig(args.T), epochs=args.epochs, lr=args.lr, seed=args.seed)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(args.out, log.to_csv())
    if args.model:
        log.model.save(args.model)
    return EXIT_OK


def cmd_report(args) -> int:
    c = compare_costs(args.n, args.d, args.T)
    if args.json:
        print(json.dumps(c, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"n={args.n} d={args.d} T={args.T}")
    print(f"{'impl':<10}{'flops':>14}{'sops':>14}{'energy_pj':>18}")
    for name in ("float", "bitwise"):
        r = c[name]
        exact = energy_pj_exact(r["flops"], r["sops"])
        print(f"{name:<10}{r['flops']:>14}{r['sops']:>14}{str(exact):>18}")
    print(f"score-stage op ratio (bitwise/float): {c['score_stage_op_ratio']:g}")
    print(f"score-stage energy ratio: {c['score_stage_energy_ratio']:.4f}")
    print(f"per-bit score ops T*n^2*d = {c['per_bit_score_ops']} (row-level count T*n^2 = {c['headline_row_ops']})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bitattn", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=_positive, default=1, help="cap on internal parallelism")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="run the invariant suite")
    v.add_argument("--json", metavar="PATH", help="write the JSON report ('-' for stdout)")
    v.add_argument("--sabotage", action="store_true", help="flip one packed padding bit first")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="time float vs bitwise attention, write CSV")
    b.add_argument("--n", type=_positive, default=16)
    b.add_argument("--d", type=_positive, default=32)
    b.add_argument("--T", type=_positive, default=4)
    b.add_argument("--reps", type=_positive, default=5)
    b.add_argument("--out", default="-")
    b.add_argument("--seed", type=int)
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("tif", help="spike a single value")
    t.add_argument("--x", type=float, required=True)
    t.add_argument("--T", type=_positive, required=True)
    t.add_argument("--dump", metavar="PATH", help="write the spike tensor in BITT format")
    t.set_defaults(func=cmd_tif)

    tr = sub.add_parser("train", help="train the toy model, write the epoch log CSV")
    tr.add_argument("--T", type=_positive, default=8)
    tr.add_argument("--epochs", type=_positive, default=30)
    tr.add_argument("--lr", type=float, default=0.5)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--out", default="-")
    tr.add_argument("--model", metavar="PATH", help="also save the trained weights (.npz)")
    tr.set_defaults(func=cmd_train)

    r = sub.add_parser("report", help="op-count and energy comparison")
    r.add_argument("--n", type=_positive, required=True)
    r.add_argument("--d", type=_positive, required=True)
    r.add_argument("--T", type=_positive, required=True)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if getattr(args, "seed", 0) is None:
            args.seed = default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"bitattn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"bitattn: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
