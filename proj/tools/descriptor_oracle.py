#!/usr/bin/env python3
"""Brute-force reference values for the 18 topological descriptors.

Regenerates data/descriptor_golden.csv from 20 hand-specified molecular
graphs.  Everything is computed from first principles in plain Python:
element data typed in from public reference tables (standard atomic
weights; Cordero 2008 covalent radii), per-source BFS for distance
matrices and ring detection, explicit enumeration of bond pairs, and
tuple-based partition refinement for atom equivalence classes.  No code
is shared with the C++ library and nothing is parsed from SMILES here,
so the table is an implementation-independent check.

Each molecule below is written out by hand: every atom carries its
element, hand-counted hydrogen total, aromatic flag, and formal charge;
every bond carries twice its conventional order (single 2, aromatic 3,
double 4, triple 6).  The SMILES column is carried along only so that
consumers can re-parse the molecule and compare.

Usage: descriptor_oracle.py [output.csv]   (default: ../data/descriptor_golden.csv)
"""

import math
import os
import sys
from dataclasses import dataclass, field

# symbol -> (atomic mass, valence electrons, covalent radius in angstrom)
ELEMENTS = {
    "B": (10.811, 3, 0.84),
    "C": (12.011, 4, 0.76),
    "N": (14.007, 5, 0.71),
    "O": (15.999, 6, 0.66),
    "P": (30.974, 5, 1.07),
    "S": (32.066, 6, 1.05),
    "F": (18.998, 7, 0.57),
    "Cl": (35.453, 7, 1.02),
    "Br": (79.904, 7, 1.20),
    "I": (126.904, 7, 1.39),
    "H": (1.008, 1, 0.31),
}

DESCRIPTOR_ORDER = [
    "MolecularWeight", "HeavyAtomCount", "NumRings", "NumAromaticRings",
    "NumRotatableBonds", "NumHDonors", "NumHAcceptors", "NumHeteroatoms",
    "FractionCsp3", "NumValenceElectrons", "BalabanJ", "BertzCT",
    "HallKierAlpha", "Kappa1", "Kappa2", "Chi0", "Chi1", "fr_C_O",
]


@dataclass
class Atom:
    symbol: str
    n_h: int            # total hydrogens, counted by hand
    aromatic: bool = False
    charge: int = 0


@dataclass
class Mol:
    name: str
    smiles: str
    atoms: list
    bonds: list                      # (i, j, twice_order)
    adj: list = field(default_factory=list)  # per atom: [(neighbor, twice_order)]

    def __post_init__(self):
        self.adj = [[] for _ in self.atoms]
        for i, j, k in self.bonds:
            assert i != j and 0 <= i < len(self.atoms) and 0 <= j < len(self.atoms)
            self.adj[i].append((j, k))
            self.adj[j].append((i, k))

    def degree(self, i):
        return len(self.adj[i])


def bfs_distances(mol, start):
    dist = [-1] * len(mol.atoms)
    dist[start] = 0
    queue = [start]
    for u in queue:
        for v, _ in mol.adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def connected_without_bond(mol, skip):
    """True when the endpoints of bond `skip` stay connected without it."""
    a, b, _ = mol.bonds[skip]
    seen = {a}
    queue = [a]
    for u in queue:
        for idx, (i, j, _) in enumerate(mol.bonds):
            if idx == skip or (u != i and u != j):
                continue
            v = j if u == i else i
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return b in seen


def ring_bond_flags(mol):
    return [connected_without_bond(mol, idx) for idx in range(len(mol.bonds))]


def symmetry_classes(mol):
    """Iterated neighborhood refinement (1-WL with bond labels) to a fixed point.

    Initial invariant: (element, charge, hydrogens, aromatic, degree).  Each
    round appends the sorted multiset of (neighbor class, twice bond order).
    Returns one small integer per atom; equal integers = equivalent atoms.
    """
    def canonicalize(keys):
        mapping = {}
        for key in sorted(set(keys)):
            mapping[key] = len(mapping)
        return [mapping[key] for key in keys]

    color = canonicalize([
        (a.symbol, a.charge, a.n_h, a.aromatic, mol.degree(i))
        for i, a in enumerate(mol.atoms)
    ])
    n_classes = len(set(color))
    for _ in range(len(mol.atoms)):
        refined = canonicalize([
            (color[i], tuple(sorted((color[v], k) for v, k in mol.adj[i])))
            for i in range(len(mol.atoms))
        ])
        color = refined
        if len(set(color)) == n_classes:
            break
        n_classes = len(set(color))
    return color


def entropy_term(sizes):
    total = sum(sizes)
    if total == 0:
        return 0.0
    acc = 2.0 * total * math.log2(total)
    for c in sizes:
        acc -= c * math.log2(c)
    return acc


def molecular_weight(mol):
    h_mass = ELEMENTS["H"][0]
    return sum(ELEMENTS[a.symbol][0] + h_mass * a.n_h for a in mol.atoms)


def num_aromatic_rings(mol):
    edges = [(i, j) for i, j, k in mol.bonds if k == 3]
    touched = sorted({v for e in edges for v in e})
    components = 0
    seen = set()
    for start in touched:
        if start in seen:
            continue
        components += 1
        queue = [start]
        seen.add(start)
        for u in queue:
            for i, j in edges:
                if u != i and u != j:
                    continue
                v = j if u == i else i
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    return len(edges) - len(touched) + components


def num_rotatable_bonds(mol):
    in_ring = ring_bond_flags(mol)
    count = 0
    for idx, (i, j, k) in enumerate(mol.bonds):
        if k == 2 and not in_ring[idx] and mol.degree(i) >= 2 and mol.degree(j) >= 2:
            count += 1
    return count


def fraction_csp3(mol):
    carbons = [i for i, a in enumerate(mol.atoms) if a.symbol == "C"]
    if not carbons:
        return 0.0
    sp3 = sum(1 for i in carbons if all(k == 2 for _, k in mol.adj[i]))
    return sp3 / len(carbons)


def balaban_j(mol):
    m = len(mol.bonds)
    if m == 0:
        return None
    row_sum = [sum(bfs_distances(mol, i)) for i in range(len(mol.atoms))]
    acc = sum(1.0 / math.sqrt(row_sum[i] * row_sum[j]) for i, j, _ in mol.bonds)
    gamma = m - len(mol.atoms) + 1
    return m / (gamma + 1.0) * acc


def bertz_ct(mol):
    classes = symmetry_classes(mol)
    pair_counts = {}
    for u in range(len(mol.atoms)):
        arms = [(k, classes[v]) for v, k in mol.adj[u]]
        for e1 in range(len(arms)):
            for e2 in range(e1 + 1, len(arms)):
                key = (classes[u], tuple(sorted([arms[e1], arms[e2]])))
                pair_counts[key] = pair_counts.get(key, 0) + 1
    hetero_counts = {}
    for a in mol.atoms:
        if a.symbol != "C":
            hetero_counts[a.symbol] = hetero_counts.get(a.symbol, 0) + 1
    return entropy_term(list(pair_counts.values())) + entropy_term(list(hetero_counts.values()))


def hall_kier_alpha(mol):
    r_c = ELEMENTS["C"][2]
    return sum(ELEMENTS[a.symbol][2] / r_c - 1.0 for a in mol.atoms)


def kappa(mol, order):
    if not mol.bonds:
        return None
    if order == 1:
        p = float(len(mol.bonds))
    else:
        p = sum(mol.degree(i) * (mol.degree(i) - 1) / 2.0 for i in range(len(mol.atoms)))
    alpha = hall_kier_alpha(mol)
    a = len(mol.atoms) + alpha
    denom = (p + alpha) ** 2
    if denom < 1e-12:
        return None
    return a * (a - 1.0) ** 2 / denom


def chi0(mol):
    return sum(1.0 / math.sqrt(mol.degree(i))
               for i in range(len(mol.atoms)) if mol.degree(i) > 0)


def chi1(mol):
    if not mol.bonds:
        return None
    return sum(1.0 / math.sqrt(mol.degree(i) * mol.degree(j)) for i, j, _ in mol.bonds)


def fr_c_o(mol):
    return sum(1 for i, j, _ in mol.bonds
               if {mol.atoms[i].symbol, mol.atoms[j].symbol} == {"C", "O"})


def compute_all(mol):
    values = {
        "MolecularWeight": molecular_weight(mol),
        "HeavyAtomCount": float(len(mol.atoms)),
        "NumRings": float(len(mol.bonds) - len(mol.atoms) + 1),
        "NumAromaticRings": float(num_aromatic_rings(mol)),
        "NumRotatableBonds": float(num_rotatable_bonds(mol)),
        "NumHDonors": float(sum(1 for a in mol.atoms
                                if a.symbol in ("N", "O") and a.n_h >= 1)),
        "NumHAcceptors": float(sum(1 for a in mol.atoms if a.symbol in ("N", "O"))),
        "NumHeteroatoms": float(sum(1 for a in mol.atoms if a.symbol != "C")),
        "FractionCsp3": fraction_csp3(mol),
        "NumValenceElectrons": float(sum(ELEMENTS[a.symbol][1] + a.n_h
                                         for a in mol.atoms)),
        "BalabanJ": balaban_j(mol),
        "BertzCT": bertz_ct(mol),
        "HallKierAlpha": hall_kier_alpha(mol),
        "Kappa1": kappa(mol, 1),
        "Kappa2": kappa(mol, 2),
        "Chi0": chi0(mol),
        "Chi1": chi1(mol),
        "fr_C_O": float(fr_c_o(mol)),
    }
    return [values[name] for name in DESCRIPTOR_ORDER]


def A(symbol, n_h, aromatic=False, charge=0):
    return Atom(symbol, n_h, aromatic, charge)


MOLECULES = [
    Mol("methane", "C", [A("C", 4)], []),
    Mol("ethane", "CC", [A("C", 3), A("C", 3)], [(0, 1, 2)]),
    Mol("propane", "CCC",
        [A("C", 3), A("C", 2), A("C", 3)],
        [(0, 1, 2), (1, 2, 2)]),
    Mol("isobutane", "CC(C)C",
        [A("C", 3), A("C", 1), A("C", 3), A("C", 3)],
        [(0, 1, 2), (1, 2, 2), (1, 3, 2)]),
    Mol("cyclopropane", "C1CC1",
        [A("C", 2), A("C", 2), A("C", 2)],
        [(0, 1, 2), (1, 2, 2), (2, 0, 2)]),
    # two three-membered rings sharing one quaternary spiro atom
    Mol("spiropentane", "C1CC12CC2",
        [A("C", 2), A("C", 2), A("C", 0), A("C", 2), A("C", 2)],
        [(0, 1, 2), (1, 2, 2), (2, 0, 2), (2, 3, 2), (3, 4, 2), (4, 2, 2)]),
    Mol("ethanol", "CCO",
        [A("C", 3), A("C", 2), A("O", 1)],
        [(0, 1, 2), (1, 2, 2)]),
    Mol("acetic_acid", "CC(=O)O",
        [A("C", 3), A("C", 0), A("O", 0), A("O", 1)],
        [(0, 1, 2), (1, 2, 4), (1, 3, 2)]),
    Mol("acetate", "CC(=O)[O-]",
        [A("C", 3), A("C", 0), A("O", 0), A("O", 0, charge=-1)],
        [(0, 1, 2), (1, 2, 4), (1, 3, 2)]),
    Mol("ammonium", "[NH4+]", [A("N", 4, charge=1)], []),
    Mol("acetonitrile", "CC#N",
        [A("C", 3), A("C", 0), A("N", 0)],
        [(0, 1, 2), (1, 2, 6)]),
    Mol("fluoroform", "FC(F)F",
        [A("F", 0), A("C", 1), A("F", 0), A("F", 0)],
        [(0, 1, 2), (1, 2, 2), (1, 3, 2)]),
    Mol("dimethyl_sulfoxide", "CS(=O)C",
        [A("C", 3), A("S", 0), A("O", 0), A("C", 3)],
        [(0, 1, 2), (1, 2, 4), (1, 3, 2)]),
    Mol("benzene", "c1ccccc1",
        [A("C", 1, True)] * 6,
        [(0, 1, 3), (1, 2, 3), (2, 3, 3), (3, 4, 3), (4, 5, 3), (5, 0, 3)]),
    Mol("toluene", "Cc1ccccc1",
        [A("C", 3), A("C", 0, True), A("C", 1, True), A("C", 1, True),
         A("C", 1, True), A("C", 1, True), A("C", 1, True)],
        [(0, 1, 2), (1, 2, 3), (2, 3, 3), (3, 4, 3), (4, 5, 3), (5, 6, 3),
         (6, 1, 3)]),
    Mol("pyridine", "c1ccncc1",
        [A("C", 1, True), A("C", 1, True), A("C", 1, True), A("N", 0, True),
         A("C", 1, True), A("C", 1, True)],
        [(0, 1, 3), (1, 2, 3), (2, 3, 3), (3, 4, 3), (4, 5, 3), (5, 0, 3)]),
    Mol("pyrrole", "c1cc[nH]c1",
        [A("C", 1, True), A("C", 1, True), A("C", 1, True), A("N", 1, True),
         A("C", 1, True)],
        [(0, 1, 3), (1, 2, 3), (2, 3, 3), (3, 4, 3), (4, 0, 3)]),
    Mol("thiophene", "c1ccsc1",
        [A("C", 1, True), A("C", 1, True), A("C", 1, True), A("S", 0, True),
         A("C", 1, True)],
        [(0, 1, 3), (1, 2, 3), (2, 3, 3), (3, 4, 3), (4, 0, 3)]),
    # fused bicyclic: atoms 3 and 8 are the shared (fusion) carbons
    Mol("naphthalene", "c1ccc2ccccc2c1",
        [A("C", 1, True), A("C", 1, True), A("C", 1, True), A("C", 0, True),
         A("C", 1, True), A("C", 1, True), A("C", 1, True), A("C", 1, True),
         A("C", 0, True), A("C", 1, True)],
        [(0, 1, 3), (1, 2, 3), (2, 3, 3), (3, 4, 3), (4, 5, 3), (5, 6, 3),
         (6, 7, 3), (7, 8, 3), (8, 3, 3), (8, 9, 3), (9, 0, 3)]),
    # methyl ester (atoms 0-3) on an aromatic ring (4-9) ortho to a carboxyl
    # group (10-12)
    Mol("acetylsalicylic", "CC(=O)Oc1ccccc1C(=O)O",
        [A("C", 3), A("C", 0), A("O", 0), A("O", 0), A("C", 0, True),
         A("C", 1, True), A("C", 1, True), A("C", 1, True), A("C", 1, True),
         A("C", 0, True), A("C", 0), A("O", 0), A("O", 1)],
        [(0, 1, 2), (1, 2, 4), (1, 3, 2), (3, 4, 2), (4, 5, 3), (5, 6, 3),
         (6, 7, 3), (7, 8, 3), (8, 9, 3), (9, 4, 3), (9, 10, 2), (10, 11, 4),
         (10, 12, 2)]),
]


def main():
    default = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                           os.pardir, "data", "descriptor_golden.csv")
    out_path = sys.argv[1] if len(sys.argv) > 1 else default
    lines = ["molecule,smiles,descriptor,value"]
    for mol in MOLECULES:
        for name, value in zip(DESCRIPTOR_ORDER, compute_all(mol)):
            text = "Undefined" if value is None else "%.17g" % value
            lines.append(f"{mol.name},{mol.smiles},{name},{text}")
    with open(out_path, "w") as out:
        out.write("\n".join(lines) + "\n")
    print(f"wrote {len(MOLECULES)} molecules x {len(DESCRIPTOR_ORDER)} descriptors to {out_path}")


if __name__ == "__main__":
    main()
