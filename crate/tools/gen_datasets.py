#!/usr/bin/env python3
"""Regenerates the bundled SMILES datasets under data/.

Molecules are assembled from ring templates, linkers and terminal groups with
a seeded RNG, so the output is reproducible byte for byte. Run from the
repository root: python3 tools/gen_datasets.py
"""

import random
from pathlib import Path

# Well-known drugs written without stereo markers.
DRUGS = [
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "CN1CCCC1c1cccnc1",
    "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
    "COc1ccc2cc(ccc2c1)C(C)C(=O)O",
    "OC(=O)Cc1ccccc1Nc1c(Cl)cccc1Cl",
    "CN(C)CCCN1c2ccccc2CCc2ccccc21",
    "CNCCC(Oc1ccc(cc1)C(F)(F)F)c1ccccc1",
    "CC(C)NCC(O)COc1cccc2ccccc12",
    "Clc1ccc(cc1)C(c1ccccc1)n1ccnc1",
    "CN1CCN(CC1)C1=Nc2cc(Cl)ccc2Nc2ccccc21",
    "NC(=O)c1cccnc1",
    "CC1=C(C(=O)OC)C(c2ccccc2[N+](=O)[O-])C(C(=O)OC)=C(C)N1",
    "COc1ccc(CCN(C)CCCC(C#N)(C(C)C)c2ccc(OC)c(OC)c2)cc1OC",
    "CCOC(=O)C1=C(COCCN)NC(C)=C(C(=O)OC)C1c1ccccc1Cl",
    "O=C(O)c1ccccc1O",
    "CC(C)(C)NCC(O)c1ccc(O)c(CO)c1",
    "Cc1ccc(cc1)S(=O)(=O)NC(=O)NN1CCCCCC1",
    "CCCCc1nc(Cl)c(CO)n1Cc1ccc(cc1)c1ccccc1c1nn[nH]n1",
    "O=C1NC(=O)C(N1)(c1ccccc1)c1ccccc1",
    "CC(=O)OCC(=O)C1CCC2C3CCC4=CC(=O)CCC4(C)C3CCC12C",
    "OCC1OC(O)C(O)C(O)C1O",
    "NCCc1ccc(O)c(O)c1",
    "CN1C2CCC1CC(C2)OC(=O)C(CO)c1ccccc1",
    "COc1cc2c(cc1OC)C(=O)C(CC1CCN(Cc3ccccc3)CC1)C2",
    "Fc1ccc(cc1)C(=O)CCCN1CCC(O)(CC1)c1ccc(Cl)cc1",
    "CCN(CC)CC(=O)Nc1c(C)cccc1C",
    "O=C(CCCN1CCC(CC1)n1c(=O)[nH]c2ccccc21)c1ccc(F)cc1",
    "Nc1ccc(cc1)S(=O)(=O)Nc1ccccn1",
    "CC1(C)SC2C(NC(=O)Cc3ccccc3)C(=O)N2C1C(=O)O",
    "COc1ccc2[nH]cc(CCNC(C)=O)c2c1",
    "CCCC(CCC)C(=O)O",
    "c1ccc2c(c1)ccc1ccccc12",
    "OC(=O)CCCc1ccc(N(CCCl)CCCl)cc1",
    "CC(C)NCC(O)c1ccc(NS(C)(=O)=O)cc1",
    "Cc1onc(c1C(=O)NC1C2SC(C)(C)C(N2C1=O)C(=O)O)c1ccccc1",
    "CN1CCC23CCCCC2C1Cc1ccc(OC)cc13",
    "O=c1cc(oc2ccccc12)c1ccccc1",
]

# Ring atoms in order; substituents go on plain carbons.
RINGS = {
    "benzene": ["c", "c", "c", "c", "c", "c"],
    "pyridine": ["c", "c", "c", "c", "c", "n"],
    "pyrimidine": ["c", "c", "n", "c", "n", "c"],
    "cyclohexane": ["C", "C", "C", "C", "C", "C"],
    "piperidine": ["C", "C", "C", "C", "C", "N"],
    "piperazine": ["C", "C", "N", "C", "C", "N"],
    "morpholine": ["C", "C", "O", "C", "C", "N"],
    "oxane": ["C", "C", "C", "O", "C", "C"],
    "cyclopentane": ["C", "C", "C", "C", "C"],
    "pyrrolidine": ["C", "C", "C", "C", "N"],
    "oxolane": ["C", "C", "C", "C", "O"],
    "thiophene": ["c", "c", "c", "c", "s"],
    "furan": ["c", "c", "c", "c", "o"],
    "pyrrole": ["c", "c", "c", "c", "[nH]"],
    "imidazole": ["c", "c", "n", "c", "[nH]"],
    "thiazole": ["c", "c", "s", "c", "n"],
    "oxazole": ["c", "c", "o", "c", "n"],
    "cyclopropane": ["C", "C", "C"],
    "cyclobutane": ["C", "C", "C", "C"],
    "azepane": ["C", "C", "C", "C", "C", "C", "N"],
}
SIX = {"benzene", "pyridine", "pyrimidine", "cyclohexane", "piperidine", "piperazine", "morpholine", "oxane", "azepane"}
RING_WEIGHTS = {
    "benzene": 12, "pyridine": 4, "pyrimidine": 2, "cyclohexane": 3, "piperidine": 4, "piperazine": 3,
    "morpholine": 2, "oxane": 1, "cyclopentane": 2, "pyrrolidine": 2, "oxolane": 1, "thiophene": 2,
    "furan": 1, "pyrrole": 1, "imidazole": 2, "thiazole": 1, "oxazole": 1, "cyclopropane": 1,
    "cyclobutane": 1, "azepane": 1,
}
FUSED = [
    "c{a}ccc{b}ccccc{b}c{a}",
    "c{a}ccc{b}[nH]ccc{b}c{a}",
    "c{a}ccc{b}ncccc{b}c{a}",
    "c{a}ccc{b}[nH]cnc{b}c{a}",
    "C{a}CCc{b}ccccc{b}C{a}",
    "c{a}ccc{b}occc{b}c{a}",
]
LINKERS = ["", "", "C", "CC", "C(=O)N", "NC(=O)", "O", "N", "CCN", "OCC", "S(=O)(=O)N", "CC(=O)N", "C=C", "CCC", "CO", "CCOC"]
TERMINALS = [
    "F", "Cl", "Br", "C", "C", "CC", "OC", "C(=O)O", "N", "C#N", "O", "C(F)(F)F", "N(C)C",
    "C(=O)N", "CCO", "CCCC", "[N+](=O)[O-]", "C(C)C", "CC(C)C", "OCC", "C(=O)OC", "S(C)(=O)=O",
    "CCCN", "OCCCC",
]


def ring_smiles(rng, name, depth, subs):
    """SMILES for one ring with `subs` substituent strings on distinct carbons."""
    atoms = RINGS[name]
    digit = str(depth + 1)
    sites = [i for i, a in enumerate(atoms) if a in ("c", "C")]
    chosen = set(rng.sample(sites, min(len(subs), len(sites))))
    out, it = [], iter(subs)
    for i, a in enumerate(atoms):
        tok = a
        if i == 0 or i == len(atoms) - 1:
            tok += digit
        if i in chosen:
            tok += "(" + next(it) + ")"
        out.append(tok)
    return "".join(out)


def substituent(rng, depth, allow_six=True):
    if depth >= 2 or rng.random() < 0.55:
        return rng.choice(TERMINALS)
    return rng.choice(LINKERS) + ring_unit(rng, depth + 1, allow_six, rng.randint(0, 2))


def pick_ring(rng, allow_six):
    names = [r for r in RINGS if allow_six or r not in SIX]
    return rng.choices(names, weights=[RING_WEIGHTS[r] for r in names])[0]


def ring_unit(rng, depth, allow_six, n_subs):
    subs = [substituent(rng, depth, allow_six) for _ in range(n_subs)]
    if allow_six and depth < 2 and rng.random() < 0.12:
        a, b = str(2 * depth + 1), str(2 * depth + 2)
        core = rng.choice(FUSED).format(a=a, b=b)
        if subs:
            # Attach one substituent to the first atom, after its ring digit.
            core = core[: 1 + len(a)] + "(" + subs[0] + ")" + core[1 + len(a):]
        return core
    return ring_smiles(rng, pick_ring(rng, allow_six), 2 * depth, subs)


def molecule(rng, allow_six=True, max_len=90):
    while True:
        core = ring_unit(rng, 0, allow_six, rng.randint(1, 3))
        if rng.random() < 0.3:
            core = rng.choice(TERMINALS) + core
        if len(core) <= max_len:
            return core


def chain(rng):
    n = rng.randint(2, 7)
    body = "".join(rng.choice(["C", "C", "C", "N", "O"]) for _ in range(n))
    return "C" + body + rng.choice(["", "C(=O)O", "CN", "C(C)C", "C=O"])


def drug_like(rng, n):
    seen, out = set(), []
    for s in DRUGS:
        if s not in seen:
            seen.add(s)
            out.append(s)
    while len(out) < n:
        s = molecule(rng) if rng.random() < 0.93 else chain(rng)
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def probe_set(rng, n):
    """Half the molecules carry exactly one benzene ring and no other six-membered
    ring; the other half carry no six-membered ring at all."""
    pos, neg, seen = [], [], set()
    while len(pos) < n // 2:
        subs = [substituent(rng, 1, allow_six=False) for _ in range(rng.randint(1, 2))]
        s = ring_smiles(rng, "benzene", 0, subs)
        if s not in seen:
            seen.add(s)
            pos.append(s)
    while len(neg) < n // 2:
        s = molecule(rng, allow_six=False) if rng.random() < 0.8 else chain(rng)
        if s not in seen:
            seen.add(s)
            neg.append(s)
    rows = pos + neg
    rng.shuffle(rows)
    return rows


def classification_set(rng, n):
    """Label 1 iff the molecule contains an aromatic ring."""
    rows, seen = [], set()
    while len(rows) < n:
        want = len(rows) % 2
        s = molecule(rng, max_len=50) if rng.random() < 0.85 else chain(rng)
        aromatic = any(ch in "cnos" for ch in s.replace("Cl", ""))
        if aromatic == bool(want) and s not in seen:
            seen.add(s)
            rows.append(f"{s}\t{want}")
    return rows


def main():
    root = Path(__file__).resolve().parent.parent / "data"
    root.mkdir(exist_ok=True)
    header = "# generated by tools/gen_datasets.py\n"
    (root / "drug_like_1k.smi").write_text(header + "\n".join(drug_like(random.Random(1001), 1000)) + "\n")
    toy = [molecule(random.Random(64 + i), max_len=45) for i in range(64)]
    (root / "toy_64.smi").write_text(header + "\n".join(toy) + "\n")
    (root / "ring6_probe_200.smi").write_text(header + "\n".join(probe_set(random.Random(200), 200)) + "\n")
    (root / "toy_classification.smi").write_text(
        header + "\n".join(classification_set(random.Random(7), 80)) + "\n"
    )


if __name__ == "__main__":
    main()
