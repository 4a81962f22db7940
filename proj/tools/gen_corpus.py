#!/usr/bin/env python3
"""Deterministically generates the bundled small-molecule corpus.

Writes data/pool_2k.smi: about 2000 drug-like SMILES (aromatic and saturated
ring systems with common substituents, two-ring architectures, and acyclic
fragments), each with a catalog id, plus a few comment lines and deliberately
malformed lines so ingestion's skip accounting has something to count.

Every molecule line is distinct by construction: substitution patterns are
enumerated over symmetry-reduced slot assignments, so no two lines describe
the same structure.  Run from the repository root:

    python3 tools/gen_corpus.py
"""

import itertools
import random
from pathlib import Path

# Substituents written for insertion after a ring atom, as in "c1ccc(R)cc1".
SUBSTITUENTS = [
    "C", "CC", "CCC", "C(C)C", "O", "OC", "OCC", "N", "NC", "N(C)C",
    "F", "Cl", "Br", "C(=O)O", "C(=O)OC", "C(=O)N", "C#N", "S", "SC",
    "C(F)(F)F", "CO", "CN", "CCO",
]

# Reduced set for ring-nitrogen slots (kept to C-attached groups).
N_SUBSTITUENTS = ["C", "CC", "CCC", "C(C)C", "CCO", "CC#N", "C(=O)C", "C(=O)OC"]

ALKYLS = ["C", "CC", "CCC", "CC(C)C", "CCCC"]


def mono_aromatic():
    out = []
    for r in SUBSTITUENTS:
        out.append(f"c1ccc({r})cc1")          # benzene
        out.append(f"n1c({r})cccc1")          # pyridine 2-
        out.append(f"n1cc({r})ccc1")          # pyridine 3-
        out.append(f"n1ccc({r})cc1")          # pyridine 4-
        out.append(f"o1c({r})ccc1")           # furan 2-
        out.append(f"o1cc({r})cc1")           # furan 3-
        out.append(f"s1c({r})ccc1")           # thiophene 2-
        out.append(f"s1cc({r})cc1")           # thiophene 3-
        out.append(f"[nH]1c({r})ccc1")        # pyrrole 2-
        out.append(f"[nH]1cc({r})cc1")        # pyrrole 3-
        out.append(f"c1ccc2cc({r})ccc2c1")    # naphthalene beta
        out.append(f"c1ccc2c({r})cccc2c1")    # naphthalene alpha
    for r in N_SUBSTITUENTS:
        out.append(f"n1({r})cccc1")           # N-substituted pyrrole
    return out


def di_benzene():
    out = []
    for r1, r2 in itertools.combinations_with_replacement(SUBSTITUENTS, 2):
        out.append(f"c1ccc({r1})c({r2})c1")   # ortho
        out.append(f"c1cc({r1})cc({r2})c1")   # meta
        out.append(f"c1cc({r1})ccc1{r2}")     # para
    return out


def tri_benzene():
    out = []
    # 1,3,5: all three slots equivalent -> sorted triples.
    for r1, r2, r3 in itertools.combinations_with_replacement(SUBSTITUENTS[:12], 3):
        out.append(f"c1c({r1})cc({r2})cc1{r3}")
    # 1,2,4: the three slots are pairwise inequivalent -> ordered triples
    # (restricted to a smaller set to keep the corpus balanced).
    for r1, r2, r3 in itertools.product(SUBSTITUENTS[:8], repeat=3):
        out.append(f"c1cc({r1})c({r2})cc1{r3}")
    return out


def saturated_rings():
    out = []
    for r in SUBSTITUENTS:
        out.append(f"C1CC1{r}")               # cyclopropane
        out.append(f"C1CCC1{r}")              # cyclobutane
        out.append(f"C1CCC({r})C1")           # cyclopentane
        out.append(f"C1CCC({r})CC1")          # cyclohexane
        out.append(f"O1CC({r})CC1")           # tetrahydrofuran 3-
        out.append(f"O1CCC({r})CC1")          # tetrahydropyran 4-
        out.append(f"N1CCC({r})CC1")          # piperidine 4-
        out.append(f"N1CCC({r})C1")           # pyrrolidine 3-
    for r in N_SUBSTITUENTS:
        out.append(f"N1({r})CCCCC1")          # N-substituted piperidine
        out.append(f"O1CCN({r})CC1")          # N-substituted morpholine
        out.append(f"N1({r})CCCC1")           # N-substituted pyrrolidine
    return out


def two_ring():
    firsts = [
        "c1ccc({})cc1",      # benzene
        "n1ccc({})cc1",      # pyridine 4-
        "s1cc({})cc1",       # thiophene 3-
        "C1CCC({})CC1",      # cyclohexane
        "N1({})CCCCC1",      # piperidine N-
    ]
    linkers = ["", "C", "CC", "O", "OC", "C(=O)", "C(=O)N", "N", "S"]
    seconds = [
        "c2ccccc2",          # phenyl
        "c2ccccn2",          # pyridin-2-yl
        "c2cccnc2",          # pyridin-3-yl
        "c2cccs2",           # thiophen-2-yl
        "c2ccco2",           # furan-2-yl
        "C2CCCCC2",          # cyclohexyl
        "N2CCCCC2",          # piperidin-1-yl
        "N2CCOCC2",          # morpholin-4-yl
    ]
    # Ring systems that appear on both sides create the same molecule twice
    # when the linker reads identically from either end; keep one orientation.
    both_sides_first = {"c1ccc({})cc1": 0, "C1CCC({})CC1": 1, "N1({})CCCCC1": 2}
    both_sides_second = {"c2ccccc2": 0, "C2CCCCC2": 1, "N2CCCCC2": 2}
    palindromic_linkers = {"", "C", "CC", "O", "C(=O)", "N", "S"}
    out = []
    for first, linker, second in itertools.product(firsts, linkers, seconds):
        if first.startswith("N1") and (linker.startswith(("O", "N", "S")) or
                                       (linker == "" and second.startswith("N"))):
            continue  # keep heteroatom-heteroatom pairs off the ring nitrogen
        if (first in both_sides_first and second in both_sides_second and
                linker in palindromic_linkers and
                both_sides_first[first] > both_sides_second[second]):
            continue  # the mirrored orientation is already generated
        out.append(first.format(linker + second))
    return out


def acyclic():
    out = []
    for a in ALKYLS:
        out.append(f"{a}O")                   # alcohols
        out.append(f"{a}N")                   # primary amines
        out.append(f"{a}C(=O)O")              # acids
        out.append(f"{a}C#N")                 # nitriles
    for a, b in itertools.product(ALKYLS, repeat=2):
        out.append(f"{a}C(=O)O{b}")           # esters (ordered: acyl vs O side)
        out.append(f"{a}C(=O)N{b}")           # amides
    for a, b in itertools.combinations_with_replacement(ALKYLS, 2):
        out.append(f"{a}O{b}")                # ethers
        out.append(f"{a}N{b}")                # secondary amines
        out.append(f"{a}S{b}")                # sulfides
        out.append(f"{a}C(=O){b}")            # ketones
    return out


MALFORMED = [
    "C1CC",            # unclosed ring
    "CC(C",            # unclosed branch
    "CC(C)(C)(C)C",    # five bonds on carbon
    "CC)C",            # stray branch close
    "Xy123",           # not a SMILES string
]


def main():
    groups = [mono_aromatic(), di_benzene(), tri_benzene(), saturated_rings(),
              two_ring(), acyclic()]
    seen = set()
    molecules = []
    for group in groups:
        for smi in group:
            if smi not in seen:
                seen.add(smi)
                molecules.append(smi)

    rng = random.Random(20260822)
    rng.shuffle(molecules)
    molecules = molecules[:2000]

    lines = [f"{smi}\tMB{i + 1:06d}" for i, smi in enumerate(molecules)]
    # A few skip-worthy lines, spread deterministically through the file.
    for offset, bad in enumerate(MALFORMED):
        lines.insert(97 + offset * 311, f"{bad}\tBAD{offset + 1:03d}")
    lines.insert(0, "# bundled desk-scale screening corpus (generated by tools/gen_corpus.py)")
    lines.insert(1, "# one molecule per line; text after whitespace is a catalog id")

    out_path = Path(__file__).resolve().parent.parent / "data" / "pool_2k.smi"
    out_path.write_text("\n".join(lines) + "\n")
    print(f"wrote {out_path}: {len(molecules)} molecule lines, "
          f"{len(MALFORMED)} malformed, 2 comments")


if __name__ == "__main__":
    main()
