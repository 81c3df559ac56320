"""Generated claim map: which operations and acceptance checks back each
mathematical statement the library reproduces.

Modules declare a top-level ``CLAIMS = {claim_id: (operation, ...)}``; the
generator reads them from source with :mod:`ast` (nothing is imported), so a
missing or broken module shows up as an unmapped claim.

    python -m ietlab.docsite [SOURCE_DIR] [OUT_FILE]
"""
from __future__ import annotations

import ast
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import UnmappedClaim

# claim id -> (statement in plain words, acceptance criteria)
IN_SCOPE = {
    "iet-definition": ("An IET translates d subintervals of [0,1) into the order given by the permutation.", (1,)),
    "irreducible-permutations": ("Irreducible permutations fix no proper initial block {1..k}.", (1,)),
    "keane-condition": ("Keane condition: no discontinuity orbit meets another discontinuity.", (1,)),
    "induction-matrix-product": ("Induction matrices multiply: M(T,n) = M(T,n-1) M(R^(n-1) T, 1), and lengths(T) is proportional to M(T,n) lengths(R^n T).", (1,)),
    "balanced-matrices": ("A matrix is nu-balanced when all column-sum ratios lie in (1/nu, nu).", (8,)),
    "dyadic-windows": ("Column norms are grouped into dyadic windows P_i = [2^i, 2^(i+1)).", (4, 5)),
    "acceptable-pairs": ("An acceptable pair is (M, C_max(M)) for a matrix whose word ends in the fixed positive word of its permutation.", (4, 5)),
    "acceptable-multiplicity": ("Each column arises from at most r acceptable pairs.", (4,)),
    "acceptable-windows-dense": ("Windows holding an acceptable rigidity time have positive lower density.", (5,)),
    "balance-probability": ("Balance recurs with a positive probability before the norm grows by a fixed factor.", (8,)),
    "cylinder-measure": ("The cylinder of M has measure c_R prod |C_i(M)|^-1.", (3,)),
    "same-norm-scarcity": ("The measure of IETs with an acceptable pair of a given norm m is O(1/m).", (4,)),
    "rigidity-defect": ("n is an eps-rigidity time when the integral of |T^n x - x| is below eps.", (2,)),
    "expected-rigidity-time": ("An acceptable step whose C_max interval is longer than 1 - eps/2 yields an expected eps-rigidity time.", (5, 6)),
    "rigidity-time-in-density-set": ("Almost every IET has eps-rigidity times inside any density-one set A.", (7,)),
    "rigidity-sequence-in-density-set": ("Almost every IET has a rigidity sequence contained in A.", (7, 12)),
    "rotation-avoidance": ("For a rotation there is a set of density 1 - eps containing none of its rigidity times.", (7,)),
    "spectral-moments": ("The spectral measure of f has moments <f, f o T^n>.", (9,)),
    "wiener-criterion": ("Cesaro averages of squared moments vanish iff the measure is continuous.", (9,)),
    "density-one-decorrelation": ("A continuous spectral measure has moments tending to zero along a density-one set.", (10,)),
    "rigid-versus-decorrelated": ("Rigidity of S along times where T decorrelates separates their spectral types.", (10,)),
    "product-unique-ergodicity": ("For uniquely ergodic T and almost every S the product T x S is uniquely ergodic.", (11,)),
    "product-projections": ("Invariant measures of T x S project to the invariant measures of the factors.", (11,)),
}

OUT_OF_SCOPE = (
    "Proofs of disjointness and of the spectral-type criterion (used as theory, not computed).",
    "Weak mixing of almost every IET (background theorem).",
    "Total ergodicity of almost every IET (background theorem).",
    "Genericity of the disjointness property in the topological sense.",
    "Measure-zero shared rigidity sequences across Rauzy classes (quantifies over all IETs).",
    "Induced maps of products as exchanges of finitely many rectangles.",
    "Unique ergodicity of products of more than two IETs.",
    "The existence-only constants of the density and balance statements.",
    "Open questions on extensions of the disjointness results.",
)

MODULES = ("core", "rauzy", "rigidity", "spectral", "product", "experiments")


@dataclass(frozen=True)
class ClaimRow:
    claim: str
    statement: str
    operations: tuple  # "module.operation"
    criteria: tuple


@dataclass(frozen=True)
class ClaimMap:
    rows: tuple
    out_of_scope: tuple

    def to_markdown(self) -> str:
        lines = [
            "# Claim map",
            "",
            "Generated by `python -m ietlab.docsite`; do not edit by hand.",
            "",
            "| claim | statement | operations | acceptance |",
            "|---|---|---|---|",
        ]
        for r in self.rows:
            ops = ", ".join(f"`{o}`" for o in r.operations)
            crit = ", ".join(str(c) for c in r.criteria)
            lines.append(f"| {r.claim} | {r.statement} | {ops} | {crit} |")
        lines += ["", "## Out of scope", ""]
        lines += [f"- {item}" for item in self.out_of_scope]
        lines += ["", worked_examples()]
        return "\n".join(lines) + "\n"


def _declared_claims(path: Path) -> dict:
    try:
        tree = ast.parse(path.read_text(), filename=str(path))
    except (OSError, SyntaxError):
        return {}
    found = {}
    for node in tree.body:  # the last assignment wins, as at import time
        if isinstance(node, ast.Assign) and any(
            isinstance(t, ast.Name) and t.id == "CLAIMS" for t in node.targets
        ):
            found = ast.literal_eval(node.value)
    return found


def generate_claim_map(source: str | Path | None = None) -> ClaimMap:
    """Collect ``CLAIMS`` from the modules under ``source``; raise
    :class:`UnmappedClaim` for any in-scope claim nothing implements."""
    root = Path(source) if source is not None else Path(__file__).parent
    ops: dict = {}
    for mod in MODULES:
        for claim, names in _declared_claims(root / f"{mod}.py").items():
            if claim not in IN_SCOPE:
                raise UnmappedClaim(f"{mod}.py declares unknown claim {claim!r}")
            ops.setdefault(claim, []).extend(f"{mod}.{n}" for n in names)
    missing = [c for c in IN_SCOPE if not ops.get(c)]
    if missing:
        raise UnmappedClaim("no implementing operation for: " + ", ".join(missing))
    rows = tuple(
        ClaimRow(c, text, tuple(ops[c]), crit) for c, (text, crit) in IN_SCOPE.items()
    )
    return ClaimMap(rows, OUT_OF_SCOPE)


def worked_examples() -> str:
    """The two-interval thread: induction on ``(l, 1 - l)`` is the subtractive
    continued fraction algorithm, and rotation rigidity times are convergent
    denominators."""
    from .core import Permutation, make_iet
    from .rauzy import StopRule, expand
    from .rigidity import rotation_defect
    from .spectral import continued_fraction, rotation_rigidity

    l = Fraction(10, 37)
    T = make_iet([l, 1 - l], Permutation.parse("2 1"))
    st = expand(T, StopRule(max_steps=64))
    runs, prev = [], None
    for c in st.word:
        if c == prev:
            runs[-1] += 1
        else:
            runs.append(1)
        prev = c
    cf = continued_fraction((1 - l) / l)
    alpha = Fraction(5, 8)
    times = rotation_rigidity(alpha, 6)
    out = [
        "## Worked examples with two intervals",
        "",
        f"Lengths ({l}, {1 - l}) with permutation (2 1).  The induction word is",
        f"`{st.word}` (it ties at step {st.tie_step}, since the lengths are rational).",
        f"Its run lengths {runs} are the partial quotients {list(cf.quotients)} of",
        f"(1-l)/l = {(1 - l) / l} (a leading zero quotient is skipped), the last one",
        "cut short by one step where the rational lengths tie.",
        "",
        f"The rotation by {alpha} has continued fraction {list(continued_fraction(alpha).quotients)}",
        f"and rigidity times {times}.  Exact defects 2{{n a}}(1 - {{n a}}):",
        "",
        "| n | defect |",
        "|---|---|",
    ]
    out += [f"| {n} | {rotation_defect(alpha, n)} |" for n in times]
    return "\n".join(out)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    source = argv[0] if argv else None
    target = Path(argv[1]) if len(argv) > 1 else Path("docs/claims.md")
    try:
        cmap = generate_claim_map(source)
    except UnmappedClaim as exc:
        sys.stderr.write(f"unmapped claim: {exc}\n")
        return 2
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(cmap.to_markdown())
    return 0


if __name__ == "__main__":
    sys.exit(main())
