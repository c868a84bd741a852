"""Command-line entry point.

One executable, one subcommand per experiment. Every run is controlled by
an explicit seed, every CSV is self-describing (a `#` comment header with
the full configuration and package version), and equal configurations
produce byte-identical data sections regardless of thread count.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__
from .kazhdan import correct, hom_from_subgroup, perturb_hom
from .net import covering_check, build_net, net_load, net_save, nn_query_many, nn_scan_many
from .rng import default_threads, stream
from .roundgroup import assoc_rate, cancellativity_profile, energy_estimate
from .so3 import centralizer_ratio_scan, haar_quats
from .words import (
    commutator_word,
    finite_subgroup,
    genericity_scan,
    verify_word_on_group,
    w_star_word,
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_csv(path, command: str, params: dict, columns, rows) -> None:
    """CSV with a `#` comment header carrying the full configuration."""
    lines = [f"# command={command}", f"# version={__version__}"]
    for key in sorted(params):
        lines.append(f"# {key}={_fmt(params[key])}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _stats_row(net, stats):
    return [net.delta, len(net), stats.trials, stats.hits, stats.rate,
            stats.ci95[0], stats.ci95[1], stats.seed]


_STATS_COLUMNS = ["delta", "n", "trials", "hits", "rate", "ci_lo", "ci_hi", "seed"]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_net(args) -> int:
    if args.net_action == "build":
        t0 = time.monotonic()
        net = build_net(args.delta, args.seed, args.stop)
        dt = time.monotonic() - t0
        net_save(net, args.out)
        print(f"built net: delta={args.delta} seed={args.seed} "
              f"points={len(net)} ({dt:.2f}s) -> {args.out}")
        return 0
    net = net_load(args.infile)
    report = covering_check(net, args.samples, args.seed, threads=args.threads)
    word = "pass" if report.passed else "FAIL"
    print(f"covering check: {word} max_gap={report.max_gap:.6g} "
          f"delta={net.delta} samples={args.samples}")
    if args.csv:
        write_csv(args.csv, "net-check",
                  dict(infile=args.infile, delta=net.delta, n=len(net),
                       samples=args.samples, seed=args.seed, threads=args.threads),
                  ["delta", "n", "samples", "max_gap", "passed", "seed"],
                  [[net.delta, len(net), args.samples, report.max_gap,
                    int(report.passed), args.seed]])
    return 0


def cmd_assoc(args) -> int:
    net = net_load(args.net)
    stats = assoc_rate(net, args.trials, args.seed,
                       exhaustive=args.exhaustive, threads=args.threads)
    print(f"associativity: rate={stats.rate:.6g} "
          f"ci95=({stats.ci95[0]:.6g}, {stats.ci95[1]:.6g}) "
          f"hits={stats.hits}/{stats.trials}")
    if args.csv:
        write_csv(args.csv, "assoc",
                  dict(net=args.net, trials=args.trials, seed=args.seed,
                       exhaustive=int(args.exhaustive), threads=args.threads),
                  _STATS_COLUMNS, [_stats_row(net, stats)])
    return 0


def cmd_cancel(args) -> int:
    net = net_load(args.net)
    prof = cancellativity_profile(net, args.trials, args.seed, threads=args.threads)
    print(f"cancellativity: max_fiber={prof.max_fiber} over {prof.trials} samples")
    if args.csv:
        rows = [[net.delta, len(net), prof.trials, size, int(count), args.seed]
                for size, count in enumerate(prof.counts)]
        write_csv(args.csv, "cancel",
                  dict(net=args.net, trials=args.trials, seed=args.seed,
                       threads=args.threads, max_fiber=prof.max_fiber),
                  ["delta", "n", "trials", "fiber_size", "count", "seed"], rows)
    return 0


def cmd_energy(args) -> int:
    net = net_load(args.net)
    stats = energy_estimate(net, args.trials, args.seed, mode=args.mode,
                            eta=args.eta, threads=args.threads)
    print(f"energy ({args.mode}): rate={stats.rate:.6g} "
          f"normalized={stats.normalized:.6g} hits={stats.hits}/{stats.trials}")
    if args.csv:
        write_csv(args.csv, "energy",
                  dict(net=args.net, trials=args.trials, seed=args.seed,
                       mode=args.mode, eta=args.eta, threads=args.threads),
                  _STATS_COLUMNS, [_stats_row(net, stats)])
    return 0


def cmd_lemma51(args) -> int:
    scan = centralizer_ratio_scan(args.samples, args.seed, threads=args.threads)
    print(f"commutator/centralizer scan: max_ratio={scan.max_ratio:.6g} "
          f"samples={scan.samples} dropped={scan.dropped}")
    if args.csv:
        write_csv(args.csv, "lemma51",
                  dict(samples=args.samples, seed=args.seed,
                       threads=args.threads, max_ratio=scan.max_ratio,
                       dropped=scan.dropped),
                  ["a_norm", "comm_norm", "dist", "ratio"],
                  scan.rows.tolist())
    return 0


_WORD_CHOICES = {"wstar": w_star_word}


def _resolve_word(name: str):
    if name in _WORD_CHOICES:
        return _WORD_CHOICES[name]()
    if name.startswith("w") and name[1:].isdigit():
        return commutator_word(int(name[1:]))
    raise ValueError(f"unknown word {name!r} (use wstar or w1..w8)")


def _resolve_group(spec: str):
    if ":" in spec:
        kind, num = spec.split(":", 1)
        return finite_subgroup(kind, int(num))
    return finite_subgroup(spec)


def cmd_words(args) -> int:
    if args.words_action == "lengths":
        rows = [[s, len(commutator_word(s))] for s in range(1, args.max_s + 1)]
        for s, length in rows:
            print(f"tower depth {s}: length {length}")
        if args.csv:
            write_csv(args.csv, "words-lengths", dict(max_s=args.max_s),
                      ["s", "length"], rows)
        return 0
    if args.words_action == "verify":
        word = _resolve_word(args.word)
        grp = _resolve_group(args.group)
        dev = verify_word_on_group(word, grp)
        print(f"max |{args.word}| on {grp.name} ({len(grp)} elements): {dev:.3e}")
        if args.csv:
            write_csv(args.csv, "words-verify",
                      dict(word=args.word, group=args.group),
                      ["word", "group", "order", "max_deviation"],
                      [[args.word, grp.name, len(grp), dev]])
        return 0
    etas = [float(e) for e in args.etas.split(",")]
    table = genericity_scan(args.s, etas, args.samples, args.seed,
                            threads=args.threads)
    for eta, count, prob in zip(table.etas, table.counts, table.probs):
        print(f"P(|w| <= {eta:g}) ~= {prob:.6g}  ({count}/{table.samples})")
    if args.csv:
        rows = [[eta, int(c), p] for eta, c, p in
                zip(table.etas, table.counts, table.probs)]
        write_csv(args.csv, "words-generic",
                  dict(s=args.s, samples=args.samples, seed=args.seed,
                       etas=args.etas, threads=args.threads),
                  ["eta", "count", "prob"], rows)
    return 0


def cmd_kazhdan(args) -> int:
    grp = _resolve_group(args.group)
    rho = hom_from_subgroup(grp)
    phi = perturb_hom(rho, args.delta, args.seed)
    result = correct(phi, tol=args.tol, max_iter=args.max_iter)
    word = "converged" if result.converged else "DID NOT CONVERGE"
    print(f"correction on {grp.name}: {word} after {result.iterations} iterations, "
          f"defect={result.final_defect:.3e} sup_dist={result.sup_dist:.3e} "
          f"(input defect {phi.defect:.3e})")
    if args.csv:
        rows = [[k + 1, d, s] for k, (d, s) in enumerate(result.history)]
        write_csv(args.csv, "kazhdan",
                  dict(group=args.group, delta=args.delta, seed=args.seed,
                       tol=args.tol, max_iter=args.max_iter,
                       converged=int(result.converged)),
                  ["iter", "defect", "sup_dist"], rows)
    return 0 if result.converged else 1


def cmd_bench(args) -> int:
    t0 = time.monotonic()
    net = net_load(args.net)
    load_time = time.monotonic() - t0
    queries = haar_quats(stream(args.seed, 0), args.queries)

    t0 = time.monotonic()
    idx_tree, _ = nn_query_many(net, queries)
    tree_time = time.monotonic() - t0

    t0 = time.monotonic()
    idx_scan, _ = nn_scan_many(net, queries)
    scan_time = time.monotonic() - t0

    same = bool(np.array_equal(idx_tree, idx_scan))
    print(f"net: {len(net)} points (load {load_time:.2f}s)")
    print(f"index: {args.queries / max(tree_time, 1e-9):,.0f} queries/s   "
          f"scan: {args.queries / max(scan_time, 1e-9):,.0f} queries/s")
    print(f"answers identical: {same}")
    if not same:
        print("error: index and linear scan disagree", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p, trials_default=100000):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: SO3ROUND_THREADS or CPU count); "
                        "results do not depend on it")
    p.add_argument("--csv", default=None, help="write results to this CSV file")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="so3round",
        description="Rounding to separated nets on SO(3): construction, "
                    "statistics, word maps, and near-homomorphism correction.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("net", help="build or check a net")
    nsub = p.add_subparsers(dest="net_action", required=True)
    b = nsub.add_parser("build", help="greedy random packing")
    b.add_argument("--delta", type=float, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--stop", type=int, default=None,
                   help="consecutive rejections before stopping "
                        "(default: max(1000, 20*size))")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_net)
    c = nsub.add_parser("check", help="statistical covering check")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--samples", type=int, default=100000)
    _add_common(c)
    c.set_defaults(func=cmd_net)

    p = sub.add_parser("assoc", help="associativity rate of the rounding operation")
    p.add_argument("--net", required=True)
    p.add_argument("--trials", type=int, default=1000000)
    p.add_argument("--exhaustive", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_assoc)

    p = sub.add_parser("cancel", help="fiber-size profile of x o y = z")
    p.add_argument("--net", required=True)
    p.add_argument("--trials", type=int, default=10000)
    _add_common(p)
    p.set_defaults(func=cmd_cancel)

    p = sub.add_parser("energy", help="multiplicative energy estimate")
    p.add_argument("--net", required=True)
    p.add_argument("--mode", choices=["table", "metric"], default="table")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--trials", type=int, default=1000000)
    _add_common(p)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("lemma51",
                       help="commutator norm vs distance to the commuting set")
    p.add_argument("--samples", type=int, default=100000)
    _add_common(p)
    p.set_defaults(func=cmd_lemma51)

    p = sub.add_parser("words", help="word lengths, group triviality, genericity")
    wsub = p.add_subparsers(dest="words_action", required=True)
    w = wsub.add_parser("lengths", help="commutator tower lengths")
    w.add_argument("--max-s", dest="max_s", type=int, default=8)
    w.add_argument("--csv", default=None)
    w.set_defaults(func=cmd_words)
    w = wsub.add_parser("verify", help="max |word| over a finite subgroup")
    w.add_argument("--word", default="wstar")
    w.add_argument("--group", required=True,
                   help="cyclic:N | dihedral:N | tetra | octa | icosa")
    w.add_argument("--csv", default=None)
    w.set_defaults(func=cmd_words)
    w = wsub.add_parser("generic", help="CDF of |w| on Haar 8-tuples")
    w.add_argument("--s", type=int, default=1)
    w.add_argument("--samples", type=int, default=100000)
    w.add_argument("--etas", default="0.001,0.01,0.1,0.5")
    _add_common(w)
    w.set_defaults(func=cmd_words)

    p = sub.add_parser("kazhdan",
                       help="perturb a homomorphism and correct it back")
    p.add_argument("--group", required=True,
                   help="cyclic:N | dihedral:N | tetra | octa | icosa")
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=200)
    _add_common(p)
    p.set_defaults(func=cmd_kazhdan)

    p = sub.add_parser("bench", help="index vs linear-scan query throughput")
    p.add_argument("--net", required=True)
    p.add_argument("--queries", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args) or 0)
    except Exception as exc:          # noqa: BLE001 - uniform CLI diagnostics
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
