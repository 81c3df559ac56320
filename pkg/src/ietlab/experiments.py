"""Monte Carlo censuses over the simplex, JSONL persistence and summaries."""
from __future__ import annotations

import csv
import io
import json
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterable, Iterator, Sequence

from .core import IET, Permutation, as_rational, format_iet, parse_iet
from .errors import FormatError, IETError, InsufficientData
from .rauzy import (
    AcceptableWordTable,
    RauzyClass,
    StopRule,
    acceptable_words,
    cylinder_measure,
    detect_acceptable,
    dyadic_index,
    expand,
    rauzy_class,
    word_matrix,
)
from .rigidity import DefectCache, DensityPredicate, detect_expected, rigidity_times
from .sampling import random_iet, sample_seed

CLAIMS = {
    "acceptable-multiplicity": ("summarize",),
    "same-norm-scarcity": ("summarize", "run_census"),
    "cylinder-measure": ("cylinder_law",),
    "rigidity-sequence-in-density-set": ("run_census",),
    "acceptable-windows-dense": ("run_census",),
}


def frac(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def unfrac(text: str) -> Fraction:
    return Fraction(text)


@dataclass(frozen=True)
class SamplerConfig:
    """What to sample and how far to expand each sample.

    ``perm`` fixes the permutation; otherwise it is drawn uniformly from the
    Rauzy class of ``class_seed``.  ``events`` is ``"all"`` (one row per
    induction step), ``"flagged"`` (acceptable steps and the last step) or
    ``"none"``.  ``search`` adds a rigidity-time search inside ``density``
    for every epsilon.
    """

    class_seed: Permutation
    perm: Permutation | None = None
    bits: int = 128
    seed: int = 0
    samples: int = 1
    max_norm: int | None = 2**18
    max_steps: int | None = None
    epsilons: tuple = ()
    density: str = "all"
    nu0: Fraction = Fraction(100)
    events: str = "flagged"
    defects: bool = True
    search: bool = False

    def __post_init__(self):
        if self.bits < 32:
            raise ValueError("denominator bits must be >= 32")
        if self.samples < 0:
            raise ValueError("sample count must be >= 0")
        if self.max_norm is None and self.max_steps is None:
            raise ValueError("need max_norm or max_steps")
        if self.events not in ("all", "flagged", "none"):
            raise ValueError(f"unknown events mode {self.events!r}")
        object.__setattr__(self, "epsilons", tuple(as_rational(e) for e in self.epsilons))
        object.__setattr__(self, "nu0", as_rational(self.nu0))
        if self.perm is not None and self.perm not in rauzy_class(self.class_seed):
            raise ValueError("perm is not in the Rauzy class of class_seed")
        DensityPredicate.parse(self.density)

    @property
    def stop(self) -> StopRule:
        return StopRule(max_steps=self.max_steps, max_norm=self.max_norm)

    @property
    def windows(self) -> int:
        """Largest dyadic index ``i`` whose window ``P_i`` is fully covered."""
        if self.max_norm is None:
            return 0
        return max(self.max_norm.bit_length() - 2, 0)

    def describe(self) -> dict:
        return {
            "class_seed": str(self.class_seed),
            "perm": None if self.perm is None else str(self.perm),
            "bits": self.bits,
            "seed": self.seed,
            "samples": self.samples,
            "max_norm": self.max_norm,
            "max_steps": self.max_steps,
            "epsilons": [frac(e) for e in self.epsilons],
            "density": self.density,
            "nu0": frac(self.nu0),
        }


def sample_iet(config: SamplerConfig, index: int) -> IET:
    rng = random.Random(sample_seed(config.seed, index))
    perms = [config.perm] if config.perm is not None else rauzy_class(config.class_seed).permutations
    return random_iet(rng, perms, config.bits)


class _Context:
    def __init__(self, config: SamplerConfig):
        self.rc: RauzyClass = rauzy_class(config.class_seed)
        self.table: AcceptableWordTable = acceptable_words(self.rc)
        self.A = DensityPredicate.parse(config.density)


def census_record(config: SamplerConfig, index: int, ctx: _Context | None = None) -> dict:
    ctx = ctx or _Context(config)
    T = sample_iet(config, index)
    rec: dict = {
        "id": index,
        "seed": sample_seed(config.seed, index),
        "perm": str(T.perm),
        "lengths": format_iet(T).split(";")[0],
    }
    try:
        _fill_record(rec, T, config, ctx)
    except IETError as exc:  # captured, never fatal for the census
        rec["error"] = f"{type(exc).__name__}: {exc}"
    return rec


def _fill_record(rec: dict, T: IET, config: SamplerConfig, ctx: _Context) -> None:
    state = expand(T, config.stop)
    n_steps = state.steps
    rec["word"] = state.word
    rec["steps"] = n_steps
    rec["final_norm"] = state.cmax[-1]
    rec["tie_step"] = state.tie_step
    acc = detect_acceptable(state, ctx.table)
    expected = {e: {n for n, _ in detect_expected(state, ctx.table, e)} for e in config.epsilons if e <= 1}
    acc_steps = {n for n, _ in acc}

    if config.events == "none":
        rec["events"] = []
    else:
        rows = range(1, n_steps + 1)
        if config.events == "flagged":
            rows = sorted(acc_steps | ({n_steps} if n_steps else set()))
        rec["events"] = [
            {
                "step": n,
                "norm": state.cmax[n],
                "dyadic": dyadic_index(state.cmax[n]),
                "balance": frac(state.balance_at(n)),
                "acceptable": n in acc_steps,
                "expected": [frac(e) for e in config.epsilons if n in expected.get(e, ())],
            }
            for n in rows
        ]

    A = ctx.A
    dets = []
    for n, m in acc:
        kinds = [("acceptable", None)]
        kinds += [("expected", e) for e in config.epsilons if n in expected.get(e, ())]
        for kind, e in kinds:
            dets.append(
                {
                    "step": n,
                    "m": m,
                    "kind": kind,
                    "epsilon": None if e is None else frac(e),
                    "dyadic": dyadic_index(m),
                    "in_A": m in A,
                }
            )
    rec["detections"] = dets

    defects = []
    if config.defects and acc:
        cache = DefectCache(T, state)
        for m in sorted({m for _, m in acc}):
            defects.append({"m": m, "defect": frac(cache(m))})
    rec["defects"] = defects

    i_max = config.windows
    density: dict = {"A": A.describe(), "windows": i_max}
    if i_max:
        density["acceptable"] = sorted({d["dyadic"] for d in dets if d["dyadic"] <= i_max})
        density["proxy"] = frac(Fraction(len(density["acceptable"]), i_max))
        for e in config.epsilons:
            hits = sorted(
                {d["dyadic"] for d in dets if d["epsilon"] == frac(e) and d["dyadic"] <= i_max}
            )
            density[f"expected@{frac(e)}"] = hits
            density[f"proxy@{frac(e)}"] = frac(Fraction(len(hits), i_max))
        nu = config.nu0
        density["balanced"] = sorted(
            {
                dyadic_index(state.cmax[n])
                for n in range(1, n_steps + 1)
                if state.cmax[n] < nu * state.cmin[n] and dyadic_index(state.cmax[n]) <= i_max
            }
        )
    rec["density"] = density

    if config.search:
        found = {}
        limit = config.max_norm or (state.cmax[-1] + 1)
        for e in config.epsilons:
            rep = rigidity_times(T, e, A, max_norm=limit, table=ctx.table, state=state)
            d = rep.first
            found[frac(e)] = None if d is None else {
                "n": d.n,
                "defect": frac(d.defect),
                "source": d.source,
            }
        rec["rigidity"] = found


def run_census(config: SamplerConfig) -> Iterator[dict]:
    """One record per sample index, in index order; deterministic given ``config``."""
    if config.samples == 0:
        return
    ctx = _Context(config)
    for index in range(config.samples):
        yield census_record(config, index, ctx)


def dump_record(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"), sort_keys=True)


def write_census(config: SamplerConfig, out: IO[str]) -> int:
    count = 0
    for rec in run_census(config):
        out.write(dump_record(rec) + "\n")
        count += 1
    return count


def read_records(lines: Iterable[str]) -> list:
    out = []
    for k, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {k}: {exc}") from exc
        if not isinstance(rec, dict) or "id" not in rec:
            raise FormatError(f"line {k}: not a census record")
        out.append(rec)
    return out


# ------------------------------------------------------------ summaries


@dataclass
class SummaryTable:
    samples: int
    bins: list  # dicts, one per dyadic index
    slope: float | None
    slope_bins: tuple
    multiplicity: dict  # dyadic index -> max number of samples sharing one exact m
    histograms: dict  # proxy name -> counts over ten equal bins of [0, 1]
    notes: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["dyadic", "samples", "acceptable_freq", "per_m_freq", "max_multiplicity", "balanced_freq"]
        extra = sorted({k for b in self.bins for k in b if k.startswith("expected@")})
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols + extra + ["slope"])
        slope = "" if self.slope is None else f"{self.slope:.6f}"
        for b in self.bins:
            w.writerow(
                [b["dyadic"], b["samples"], f"{b['acceptable_freq']:.6g}", f"{b['per_m_freq']:.6g}",
                 b["max_multiplicity"], f"{b['balanced_freq']:.6g}"]
                + [f"{b.get(k, 0):.6g}" for k in extra]
                + [slope]
            )
        return buf.getvalue()


def _covered(rec: dict, i: int) -> bool:
    """Did the expansion sweep the whole window ``P_i``?"""
    return rec.get("final_norm", 0) >= 2 ** (i + 1)


def least_squares_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise InsufficientData("regression needs two distinct abscissae")
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


def summarize(records: Sequence[dict], bins: Sequence[int] | None = None, verify_every: int = 0) -> SummaryTable:
    """Bin acceptable detections by dyadic window and regress log frequency on log m.

    ``per_m_freq`` of window ``i`` is the number of acceptable pairs with
    ``m`` in ``P_i`` per covering sample, divided by ``|P_i| = 2^i``: the
    average frequency of one exact value of ``|C_max|``.  With
    ``verify_every = k`` every ``k``-th record's defects are recomputed.
    """
    records = [r for r in records if "error" not in r]
    if not records:
        raise InsufficientData("no usable records")
    if verify_every:
        for rec in records[::verify_every]:
            verify_record(rec)
    top = max((d["dyadic"] for r in records for d in r["detections"]), default=0)
    top = max(top, max(r.get("density", {}).get("windows", 0) for r in records))
    idx = range(0, top + 1) if bins is None else bins
    by_m: dict = defaultdict(Counter)
    for r in records:
        for m in {d["m"] for d in r["detections"] if d["kind"] == "acceptable"}:
            by_m[dyadic_index(m)][m] += 1
    rows = []
    for i in idx:
        cover = [r for r in records if _covered(r, i)]
        if not cover:
            continue
        n_acc = sum(1 for r in cover for d in r["detections"] if d["kind"] == "acceptable" and d["dyadic"] == i)
        with_hit = sum(
            1 for r in cover if any(d["kind"] == "acceptable" and d["dyadic"] == i for d in r["detections"])
        )
        bal = sum(1 for r in cover if i in r.get("density", {}).get("balanced", ()))
        row = {
            "dyadic": i,
            "samples": len(cover),
            "acceptable_freq": with_hit / len(cover),
            "pairs": n_acc,
            "per_m_freq": n_acc / len(cover) / 2**i,
            "max_multiplicity": max(by_m[i].values(), default=0),
            "balanced_freq": bal / len(cover),
        }
        eps_keys = {d["epsilon"] for r in cover for d in r["detections"] if d["kind"] == "expected"}
        for e in sorted(eps_keys):
            hit = sum(1 for r in cover if any(d["epsilon"] == e and d["dyadic"] == i for d in r["detections"]))
            row[f"expected@{e}"] = hit / len(cover)
        rows.append(row)

    hist: dict = {}
    for key in sorted({k for r in records for k in r.get("density", {}) if k.startswith("proxy")}):
        counts = [0] * 10
        for r in records:
            v = r["density"].get(key)
            if v is not None:
                counts[min(int(unfrac(v) * 10), 9)] += 1
        hist[key] = counts

    table = SummaryTable(len(records), rows, None, (), {b["dyadic"]: b["max_multiplicity"] for b in rows}, hist)
    fit = [b for b in rows if b["per_m_freq"] > 0]
    if len(fit) < 2:
        table.notes.append("fewer than two nonempty bins: no slope")
        exc = InsufficientData("fewer than two nonempty bins for the regression")
        exc.table = table  # bins and histograms are still usable
        raise exc
    xs = [math.log(1.5 * 2 ** b["dyadic"]) for b in fit]
    ys = [math.log(b["per_m_freq"]) for b in fit]
    table.slope = least_squares_slope(xs, ys)
    table.slope_bins = tuple(b["dyadic"] for b in fit)
    return table


def verify_record(rec: dict) -> None:
    """Recompute the recorded defects of one record; raise on any mismatch."""
    T = parse_iet(f"{rec['lengths']};{rec['perm']}")
    cache = DefectCache(T)
    for item in rec.get("defects", ()):
        if frac(cache(item["m"])) != item["defect"]:
            raise FormatError(f"record {rec['id']}: defect at m={item['m']} does not re-verify")


# ------------------------------------------------------------ cylinder law


@dataclass(frozen=True)
class CylinderRow:
    perm: Permutation
    word: str
    count: int
    samples: int
    expected: Fraction  # probability under the normalised Lebesgue measure

    @property
    def sigma(self) -> float:
        p = float(self.expected)
        return math.sqrt(self.samples * p * (1 - p))

    @property
    def z(self) -> float:
        dev = self.count - self.samples * float(self.expected)
        return dev / self.sigma if self.sigma else (0.0 if dev == 0 else math.inf)


def cylinder_law(rc: RauzyClass, depth: int, samples: int, seed: int, bits: int = 128) -> list:
    """Empirical vs predicted frequencies of every induction word of length ``<= depth``.

    A uniform sample from the union of the ``r`` simplices of the class lies
    in the cylinder of ``(perm, word)`` with probability ``r^-1 prod |C_i|^-1``.
    """
    perms = rc.permutations
    counts: Counter = Counter()
    for i in range(samples):
        T = random_iet(random.Random(sample_seed(seed, i)), perms, bits)
        st = expand(T, StopRule(max_steps=depth))
        for k in range(1, min(st.steps, depth) + 1):
            counts[(T.perm, st.word[:k])] += 1
    rows = []
    for perm in perms:
        words = [""]
        for _ in range(depth):
            words = [w + c for w in words for c in "AB"]
            for w in words:
                M, _ = word_matrix(perm, w)
                p = cylinder_measure(M) / rc.r
                rows.append(CylinderRow(perm, w, counts[(perm, w)], samples, p))
    return rows
