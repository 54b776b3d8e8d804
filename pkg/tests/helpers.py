"""Shared test utilities: a SMILES writer for arbitrary atom orders and a
random molecule generator. The writer exists so canonical-key tests can
produce many textual rewritings of the same molecule; it is deliberately not
part of the package surface.
"""

from __future__ import annotations

import numpy as np

from molmix.molparse import (AROMATIC, DOUBLE, SINGLE, TRIPLE, Atom, Bond,
                             MolGraph, parse_smiles)
from molmix import molparse


def _atom_token(a: Atom) -> str:
    symbol = a.element.lower() if a.aromatic else a.element
    if not a.explicit_h and a.formal_charge == 0:
        return symbol
    h = "" if a.implicit_h == 0 else ("H" if a.implicit_h == 1 else f"H{a.implicit_h}")
    c = a.formal_charge
    if c == 0:
        charge = ""
    elif c == 1:
        charge = "+"
    elif c == -1:
        charge = "-"
    else:
        charge = f"+{c}" if c > 0 else str(c)
    return f"[{symbol}{h}{charge}]"


def _bond_token(g: MolGraph, bond: Bond) -> str:
    if bond.order == DOUBLE:
        return "="
    if bond.order == TRIPLE:
        return "#"
    if bond.order == AROMATIC:
        return ":"
    # single between two aromatic atoms must be explicit, else it would
    # re-parse as aromatic
    if g.atoms[bond.a1].aromatic and g.atoms[bond.a2].aromatic:
        return "-"
    return ""


def write_smiles(g: MolGraph, rng: np.random.Generator | None = None) -> str:
    """Emit a SMILES string for the graph, with random DFS roots and
    neighbor order when an rng is given. Round-trips through parse_smiles."""
    n = g.num_atoms
    adj = g.adjacency()
    visited = [False] * n
    roots = list(range(n))
    if rng is not None:
        rng.shuffle(roots)
        for lst in adj:
            rng.shuffle(lst)

    tree_children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    back_edges: list[list[int]] = [[] for _ in range(n)]
    seen_bonds: set[int] = set()
    component_roots = []

    for root in roots:
        if visited[root]:
            continue
        component_roots.append(root)
        stack = [root]
        visited[root] = True
        while stack:
            v = stack.pop()
            for u, bidx in adj[v]:
                if bidx in seen_bonds:
                    continue
                if visited[u]:
                    seen_bonds.add(bidx)
                    back_edges[v].append(bidx)
                    back_edges[u].append(bidx)
                else:
                    seen_bonds.add(bidx)
                    visited[u] = True
                    tree_children[v].append((u, bidx))
                    stack.append(u)

    digit_open: dict[int, int] = {}
    used_digits: set[int] = set()

    def alloc_digit() -> int:
        d = 1
        while d in used_digits:
            d += 1
        used_digits.add(d)
        return d

    def fmt_digit(d: int) -> str:
        return str(d) if d < 10 else f"%{d:02d}"

    out: list[str] = []

    def emit(v: int) -> None:
        out.append(_atom_token(g.atoms[v]))
        for bidx in back_edges[v]:
            if bidx in digit_open:
                d = digit_open.pop(bidx)
                used_digits.discard(d)
                out.append(_bond_token(g, g.bonds[bidx]) + fmt_digit(d))
            else:
                d = alloc_digit()
                digit_open[bidx] = d
                out.append(fmt_digit(d))
        children = tree_children[v]
        for i, (u, bidx) in enumerate(children):
            last = i == len(children) - 1
            if not last:
                out.append("(")
            out.append(_bond_token(g, g.bonds[bidx]))
            emit(u)
            if not last:
                out.append(")")

    for i, root in enumerate(component_roots):
        if i:
            out.append(".")
        emit(root)
    return "".join(out)


def random_rewrite(smiles: str, rng: np.random.Generator) -> str:
    """A random textual rewriting of the molecule behind `smiles`."""
    return write_smiles(parse_smiles(smiles), rng)


_GEN_ELEMENTS = (("C", 4), ("C", 4), ("C", 4), ("N", 3), ("O", 2), ("S", 2))


def random_molecule_smiles(rng: np.random.Generator, max_atoms: int = 30,
                           min_atoms: int = 2, n_components: int = 1,
                           allow_multibond: bool = True) -> str:
    """Random valence-respecting molecule as a SMILES string.

    Components have at least two atoms each, so spectra keep the textbook
    zero-eigenvalue-per-component structure.
    """
    g = MolGraph()
    total = int(rng.integers(max(min_atoms, 2 * n_components), max_atoms + 1))
    sizes = []
    remaining = total
    for i in range(n_components):
        left = n_components - i - 1
        hi = remaining - 2 * left
        size = int(rng.integers(2, max(3, hi + 1))) if left else remaining
        size = max(2, min(size, remaining - 2 * left))
        sizes.append(size)
        remaining -= size

    capacity = []
    offset = 0
    for size in sizes:
        for i in range(size):
            el, cap = _GEN_ELEMENTS[rng.integers(len(_GEN_ELEMENTS))]
            g.atoms.append(Atom(element=el))
            capacity.append(cap)
        # spanning tree; capacities are all >= 2 so a free attachment point
        # always exists
        for i in range(1, size):
            choices = [j for j in range(i) if _free(g, offset + j, capacity)]
            j = int(choices[rng.integers(len(choices))])
            g.bonds.append(Bond(offset + j, offset + i, SINGLE))
        # extra ring edges
        for _ in range(int(rng.integers(0, max(1, size // 3) + 1))):
            pairs = [(a, b) for a in range(size) for b in range(a + 2, size)
                     if _free(g, offset + a, capacity)
                     and _free(g, offset + b, capacity)
                     and not _bonded(g, offset + a, offset + b)]
            if not pairs:
                break
            a, b = pairs[rng.integers(len(pairs))]
            g.bonds.append(Bond(offset + a, offset + b, SINGLE))
        offset += size

    if allow_multibond:
        for bond in g.bonds:
            if bond.order != SINGLE or rng.random() > 0.15:
                continue
            if (_slack(g, bond.a1, capacity) >= 1
                    and _slack(g, bond.a2, capacity) >= 1):
                bond.order = DOUBLE

    molparse._finalize(g)
    return write_smiles(g)


def _order_sum(g: MolGraph, idx: int) -> float:
    from molmix.molparse import BOND_VALENCE
    return sum(BOND_VALENCE[b.order] for b in g.bonds
               if b.a1 == idx or b.a2 == idx)


def _free(g: MolGraph, idx: int, capacity: list[int]) -> bool:
    return _order_sum(g, idx) < capacity[idx]


def _slack(g: MolGraph, idx: int, capacity: list[int]) -> float:
    return capacity[idx] - _order_sum(g, idx)


def _bonded(g: MolGraph, a: int, b: int) -> bool:
    return any({bond.a1, bond.a2} == {a, b} for bond in g.bonds)


# Ten structurally diverse molecules for canonical-key collapse tests.
DIVERSE_MOLECULES = [
    "CCO",
    "c1ccccc1",
    "C1CC1CC1CC1",
    "CC(C)C(=O)O",
    "c1ccc2ccccc2c1",
    "C[N+](=O)[O-]",
    "N#CCC#N",
    "OC1CCOC1",
    "CSC(=S)N",
    "Clc1ccc(Br)cc1I",
]
