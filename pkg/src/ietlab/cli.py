"""Command line interface: ``ietlab <subcommand> ...``.

Exit status 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from fractions import Fraction
from typing import Sequence

from .core import Permutation, format_iet, make_iet, parse_lengths
from .errors import IETError, InsufficientData
from .experiments import (
    SamplerConfig,
    dump_record,
    frac,
    read_records,
    run_census,
    sample_iet,
    summarize,
)
from .product import ProductSystem, product_orbit_averages, random_starts
from .rauzy import StopRule, acceptable_words, detect_acceptable, expand, rauzy_class
from .rigidity import DensityPredicate, rigidity_times, scan_rigidity
from .sampling import random_iet, sample_seed
from .spectral import (
    StepFunction,
    correlation_series,
    disjointness_witness,
    low_correlation_set,
    wiener_average,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _pair(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'alpha,delta', got {text!r}")
    return tuple(_fraction(p) for p in parts)


def _rect(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected 'a,b,c,d', got {text!r}")
    a, b, c, d = (_fraction(p) for p in parts)
    return ((a, b), (c, d))


def _perm(text: str) -> Permutation:
    try:
        return Permutation.parse(text)
    except IETError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _add_iet(p, suffix="", required=False):
    p.add_argument(f"--lengths{suffix}", help="comma separated lengths, e.g. '1/3,2/3'", required=required)
    p.add_argument(f"--perm{suffix}", type=_perm, help="permutation images, e.g. '2 1'", required=required)


def _add_sampling(p):
    p.add_argument("--class-seed", type=_perm, help="sample permutations from this permutation's Rauzy class")
    p.add_argument("--perm", type=_perm, help="fixed permutation")
    p.add_argument("--denom-bits", type=int, default=128)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _add_density(p):
    p.add_argument("--avoid", type=_pair, action="append", default=[], metavar="ALPHA,DELTA",
                   help="exclude n with ||n alpha|| < delta (repeatable)")
    p.add_argument("--exclude-mod", action="append", default=[], metavar="R:M",
                   help="exclude n = R mod M (repeatable)")


def _density(args) -> DensityPredicate:
    A = DensityPredicate.avoiding_rotations(args.avoid)
    for item in args.exclude_mod:
        try:
            r, m = (int(x) for x in item.split(":"))
        except ValueError:
            raise UsageError(f"bad --exclude-mod {item!r}")
        A &= DensityPredicate.avoiding_progressions([(r, m)])
    return A


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ietlab", description="Exact interval exchange experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    p = add("sample", help="emit sampled IETs")
    _add_sampling(p)

    p = add("expand", help="Rauzy-Veech trace of one IET")
    _add_iet(p, required=True)
    p.add_argument("--max-norm", type=int)
    p.add_argument("--max-steps", type=int)

    p = add("rigidity", help="rigidity times of one IET")
    _add_iet(p, required=True)
    p.add_argument("--epsilon", type=_fraction, action="append", required=True)
    p.add_argument("--max-n", type=int, help="scan every n up to this bound")
    p.add_argument("--max-norm", type=int, help="search induction candidates below this norm")
    _add_density(p)

    p = add("census", help="Monte Carlo census to JSONL")
    _add_sampling(p)
    p.add_argument("--epsilon", type=_fraction, action="append", default=[])
    p.add_argument("--max-norm", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--events", choices=("all", "flagged", "none"), default="flagged")
    p.add_argument("--search", action="store_true", help="also search rigidity times inside the density set")
    _add_density(p)

    p = add("summarize", help="summary table of census JSONL")
    p.add_argument("files", nargs="+")
    p.add_argument("--bins", help="dyadic range for the regression, e.g. 8:16")

    p = add("spectral", help="correlation series, Wiener average, witnesses")
    _add_iet(p, required=True)
    p.add_argument("--max-n", type=int, required=True)
    p.add_argument("--indicator", default="0,1/2", help="f = 1_[a,b) - (b - a); give 'a,b'")
    p.add_argument("--threshold", type=_fraction, default=Fraction(1, 20))
    p.add_argument("--k-range", type=int, default=2)
    p.add_argument("--witness-samples", type=int, default=0, help="search this many sampled partners")
    p.add_argument("--class-seed", type=_perm, default=Permutation.parse("3 2 1"))
    p.add_argument("--seed", type=int, default=0)

    p = add("product", help="Birkhoff averages of a product of two IETs")
    _add_iet(p)
    _add_iet(p, "2")
    p.add_argument("--class-seed", type=_perm, default=Permutation.parse("3 2 1"),
                   help="class for sampled components")
    p.add_argument("--denom-bits", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rect", type=_rect, action="append", help="rectangle 'a,b,c,d' = [a,b) x [c,d)")
    p.add_argument("--starts", type=int, default=100)
    p.add_argument("--max-n", type=int, default=10**5)

    p = add("class", help="Rauzy class and acceptable words")
    p.add_argument("--perm", type=_perm, required=True)
    return parser


def _iet(lengths, perm, flag=""):
    if lengths is None or perm is None:
        raise UsageError(f"need both --lengths{flag} and --perm{flag}")
    return make_iet(parse_lengths(lengths), perm)


class _Writer:
    def __init__(self, out, fmt):
        self.out, self.fmt = out, fmt
        self.csv = csv.writer(out, lineterminator="\n") if fmt == "csv" else None
        self.header = None

    def row(self, rec: dict):
        if self.fmt == "jsonl":
            self.out.write(dump_record(rec) + "\n")
            return
        if self.header is None:
            self.header = list(rec)
            self.csv.writerow(self.header)
        self.csv.writerow([rec.get(k) if not isinstance(rec.get(k), (list, dict)) else json.dumps(rec[k]) for k in self.header])


def _cmd_sample(args, w):
    cfg = _config(args, max_norm=2)
    for i in range(args.samples):
        T = sample_iet(cfg, i)
        w.row({"id": i, "seed": sample_seed(args.seed, i), "iet": format_iet(T)})


def _config(args, **kw) -> SamplerConfig:
    seed_perm = args.class_seed or args.perm
    if seed_perm is None:
        raise UsageError("need --perm or --class-seed")
    return SamplerConfig(class_seed=seed_perm, perm=args.perm, bits=args.denom_bits,
                         seed=args.seed, samples=args.samples, **kw)


def _cmd_expand(args, w):
    T = _iet(args.lengths, args.perm)
    if args.max_norm is None and args.max_steps is None:
        raise UsageError("need --max-norm or --max-steps")
    table = acceptable_words(rauzy_class(T.perm)) if T.perm.irreducible else None
    st = expand(T, StopRule(max_steps=args.max_steps, max_norm=args.max_norm), table)
    acc = {n for n, _ in detect_acceptable(st, table)} if table else set()
    for n in range(1, st.steps + 1):
        w.row({
            "step": n,
            "type": st.word[n - 1],
            "perm": str(st.perm_trace[n]),
            "norm": st.cmax[n],
            "dyadic": st.cmax[n].bit_length() - 1,
            "balance": frac(st.balance_at(n)),
            "acceptable": n in acc,
        })
    if st.degenerate:
        sys.stderr.write(f"induction tied at step {st.tie_step}\n")


def _cmd_rigidity(args, w):
    T = _iet(args.lengths, args.perm)
    A = _density(args)
    if args.max_n is None and args.max_norm is None:
        raise UsageError("need --max-n or --max-norm")
    for eps in args.epsilon:
        if eps <= 0:
            raise UsageError("--epsilon must be positive")
        if args.max_n is not None:
            rep = scan_rigidity(T, eps, args.max_n, A)
        else:
            table = acceptable_words(rauzy_class(T.perm)) if T.perm.irreducible else None
            rep = rigidity_times(T, eps, A, args.max_norm, table, want=16)
        for d in rep.detections:
            w.row({"epsilon": frac(eps), "n": d.n, "defect": frac(d.defect),
                   "defect_decimal": float(d.defect), "source": d.source})


def _cmd_census(args, w):
    kw = dict(max_norm=args.max_norm, max_steps=args.max_steps, epsilons=tuple(args.epsilon),
              density=_density(args).describe(), events=args.events, search=args.search)
    if args.max_norm is None and args.max_steps is None:
        kw["max_norm"] = 2**18
    for rec in run_census(_config(args, **kw)):
        w.row(rec)


def _cmd_summarize(args, w):
    bins = None
    if args.bins:
        try:
            lo, hi = (int(x) for x in args.bins.split(":"))
        except ValueError:
            raise UsageError(f"bad --bins {args.bins!r}")
        bins = range(lo, hi + 1)
    records = []
    for name in args.files:
        with open(name) as fh:
            records += read_records(fh)
    try:
        table = summarize(records, bins, verify_every=100)
        status = 0
    except InsufficientData as exc:
        table = getattr(exc, "table", None)
        if table is None:
            raise
        sys.stderr.write(f"ietlab: {exc}\n")
        status = 2
    if args.format == "csv":
        w.out.write(table.to_csv())
    else:
        w.row({"samples": table.samples, "slope": table.slope, "slope_bins": list(table.slope_bins),
               "bins": table.bins, "histograms": table.histograms})
    return status


def _cmd_spectral(args, w):
    T = _iet(args.lengths, args.perm)
    try:
        a, b = (Fraction(x) for x in args.indicator.split(","))
    except ValueError:
        raise UsageError(f"bad --indicator {args.indicator!r}")
    f = StepFunction.centered_indicator(a, b)
    series = correlation_series(T, f, args.max_n)
    avg = wiener_average(series, args.max_n)
    if args.witness_samples:
        rc = rauzy_class(args.class_seed)
        table = acceptable_words(rc)
        perms = rc.permutations

        def sampler(i):
            return random_iet(random.Random(sample_seed(args.seed, i)), perms)

        res = disjointness_witness(T, f, args.threshold, sampler, args.witness_samples,
                                   k_range=args.k_range, horizon=args.max_n - args.k_range,
                                   table=table, series=series)
        for wit in res.witnesses:
            w.row({"index": wit.index, "seed": sample_seed(args.seed, wit.index), "S": format_iet(wit.S),
                   "n": wit.n, "defect": frac(wit.defect), "max_corr": frac(wit.max_corr),
                   "source": wit.source})
        sys.stderr.write(f"{len(res.witnesses)} witnesses from {res.examined} samples\n")
        return 0
    if args.format == "csv":
        w.out.write(series.to_csv())
    else:
        low = low_correlation_set(series, args.threshold, args.k_range)
        w.row({"N": args.max_n, "c0": frac(series.c0), "wiener": frac(avg),
               "wiener_ratio": float(avg / series.c0**2),
               "low_correlation_density": frac(low.density(low.limit))})


def _cmd_product(args, w):
    rc = rauzy_class(args.class_seed)
    rng = random.Random(sample_seed(args.seed, 0))
    T = _iet(args.lengths, args.perm) if args.lengths else random_iet(rng, rc.permutations, args.denom_bits)
    S = _iet(args.lengths2, args.perm2, "2") if args.lengths2 else random_iet(rng, rc.permutations, args.denom_bits)
    rects = args.rect or [((0, Fraction(1, 2)), (0, Fraction(1, 2)))]
    starts = random_starts(args.starts, sample_seed(args.seed, 1), args.denom_bits)
    for st in product_orbit_averages(ProductSystem(T, S), rects, starts, args.max_n):
        (ra, rb), (rc_, rd) = st.rect
        w.row({"first": format_iet(T), "second": format_iet(S),
               "rect": [frac(ra), frac(rb), frac(rc_), frac(rd)], "N": st.N,
               "target": frac(st.target), "max_deviation": frac(st.max_deviation),
               "max_deviation_decimal": float(st.max_deviation)})


def _cmd_class(args, w):
    rc = rauzy_class(args.perm)
    table = acceptable_words(rc)
    for perm in rc.permutations:
        word = table[perm]
        w.row({"perm": str(perm), "r": rc.r, "word": word.word,
               "measure": frac(word.measure), "nu": frac(word.nu)})


COMMANDS = {
    "sample": _cmd_sample,
    "expand": _cmd_expand,
    "rigidity": _cmd_rigidity,
    "census": _cmd_census,
    "summarize": _cmd_summarize,
    "spectral": _cmd_spectral,
    "product": _cmd_product,
    "class": _cmd_class,
}


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.error("a subcommand is required")
        out = open(args.out, "w") if args.out else sys.stdout
        try:
            status = COMMANDS[args.command](args, _Writer(out, args.format))
        finally:
            if args.out:
                out.close()
        return status or 0
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except (IETError, ValueError, OSError) as exc:
        sys.stderr.write(f"ietlab: error: {exc}\n")
        return 2


def main() -> None:  # console script
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
