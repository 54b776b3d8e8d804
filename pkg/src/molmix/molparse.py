"""SMILES parsing into molecular graphs.

Covers the practical subset needed for 2D property datasets: organic-subset
atoms, bracket atoms with charge and H-count, ring closures (including %nn),
branches, explicit bond symbols, aromatic lowercase notation and dot-separated
components. Stereo markers (/ \\ @) are accepted and discarded. Isotopes,
wildcards and reaction syntax are rejected.

Also provides ring membership (cycle/bridge analysis) and a permutation
invariant canonical key used to deduplicate and align molecules across
datasets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class SmilesError(ValueError):
    """Raised on any SMILES syntax or chemistry error; carries the position."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (position {position})"
        super().__init__(message)


# Bond orders and their contribution to the valence sum. Aromatic bonds
# contribute 1.5; the total is ceiled before the valence lookup.
SINGLE, DOUBLE, TRIPLE, AROMATIC = "single", "double", "triple", "aromatic"
BOND_ORDERS = (SINGLE, DOUBLE, TRIPLE, AROMATIC)
BOND_VALENCE = {SINGLE: 1.0, DOUBLE: 2.0, TRIPLE: 3.0, AROMATIC: 1.5}
_ORDER_CODE = {SINGLE: "1", DOUBLE: "2", TRIPLE: "3", AROMATIC: "a"}

# Default valences; multi-valent elements list all allowed states ascending.
VALENCES: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

SUPPORTED_ELEMENTS = tuple(VALENCES)
_AROMATIC_OK = {"B", "C", "N", "O", "P", "S"}
_TWO_LETTER = {"Cl", "Br"}
_BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC,
                 "/": SINGLE, "\\": SINGLE}


@dataclass
class Atom:
    element: str
    formal_charge: int = 0
    aromatic: bool = False
    implicit_h: int = 0
    degree: int = 0
    in_ring: bool = False
    # True for bracket atoms: H-count was given explicitly, no valence fill.
    explicit_h: bool = False


@dataclass
class Bond:
    a1: int
    a2: int
    order: str = SINGLE
    in_ring: bool = False

    def other(self, idx: int) -> int:
        return self.a2 if idx == self.a1 else self.a1


@dataclass
class MolGraph:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)
    num_components: int = 1
    canonical_key: str = ""

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def neighbors(self, idx: int) -> list[tuple[int, Bond]]:
        out = []
        for bond in self.bonds:
            if bond.a1 == idx or bond.a2 == idx:
                out.append((bond.other(idx), bond))
        return out

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-atom list of (neighbor index, bond index)."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for b, bond in enumerate(self.bonds):
            adj[bond.a1].append((bond.a2, b))
            adj[bond.a2].append((bond.a1, b))
        return adj


def _parse_bracket(text: str, start: int) -> tuple[Atom, int]:
    """Parse a bracket atom starting at `start` (the '['). Returns (atom, end)."""
    end = text.find("]", start)
    if end < 0:
        raise SmilesError("unclosed bracket atom", start)
    body = text[start + 1:end]
    i = 0
    if i < len(body) and body[i].isdigit():
        raise SmilesError("isotopes are not supported", start + 1)
    # Element symbol ([A-Z][a-z]? or a lowercase aromatic letter).
    aromatic = False
    element = None
    if i < len(body):
        if body[i].isupper():
            element = body[i]
            i += 1
            if i < len(body) and body[i].islower() and body[i] != "h":
                element += body[i]
                i += 1
        elif body[i].islower():
            element = body[i].upper()
            aromatic = True
            i += 1
    if element is None:
        raise SmilesError("missing element symbol in bracket atom", start + 1)
    if element not in VALENCES:
        raise SmilesError(f"unsupported element {element!r}", start + 1)
    if aromatic and element not in _AROMATIC_OK:
        raise SmilesError(f"element {element!r} cannot be aromatic", start + 1)
    # Chirality markers: accepted and discarded.
    while i < len(body) and body[i] == "@":
        i += 1
    # Explicit hydrogen count.
    hcount = 0
    if i < len(body) and body[i] == "H":
        i += 1
        digits = ""
        while i < len(body) and body[i].isdigit():
            digits += body[i]
            i += 1
        hcount = int(digits) if digits else 1
    # Formal charge: +, -, ++, --, +n, -n.
    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        symbol = body[i]
        i += 1
        if i < len(body) and body[i].isdigit():
            digits = ""
            while i < len(body) and body[i].isdigit():
                digits += body[i]
                i += 1
            charge = sign * int(digits)
        else:
            count = 1
            while i < len(body) and body[i] == symbol:
                count += 1
                i += 1
            charge = sign * count
    if i != len(body):
        raise SmilesError(f"unexpected {body[i]!r} in bracket atom", start + 1 + i)
    atom = Atom(element=element, formal_charge=charge, aromatic=aromatic,
                implicit_h=hcount, explicit_h=True)
    return atom, end + 1


def parse_smiles(text: str) -> MolGraph:
    """Parse a SMILES string into a :class:`MolGraph`.

    Implicit hydrogens are filled from the valence table for organic-subset
    atoms; bracket atoms carry exactly the H-count written. Ring flags come
    from bridge analysis and the canonical key is computed eagerly.

    Raises :class:`SmilesError` on syntax errors, unmatched ring closures,
    unsupported elements and valence overflow.
    """
    if not text or not text.strip():
        raise SmilesError("empty SMILES string")
    text = text.strip()

    g = MolGraph()
    prev: int | None = None
    pending: str | None = None      # explicit bond symbol awaiting its atom
    pending_pos = -1
    branch_stack: list[int | None] = []
    ring_open: dict[int, tuple[int, str | None, int]] = {}
    bond_pairs: set[tuple[int, int]] = set()

    def add_bond(a1: int, a2: int, order: str, pos: int) -> None:
        if a1 == a2:
            raise SmilesError("ring bond to the same atom", pos)
        pair = (min(a1, a2), max(a1, a2))
        if pair in bond_pairs:
            raise SmilesError("duplicate bond between atoms", pos)
        bond_pairs.add(pair)
        g.bonds.append(Bond(a1, a2, order))

    def attach(atom: Atom, pos: int) -> None:
        nonlocal prev, pending
        g.atoms.append(atom)
        idx = len(g.atoms) - 1
        if prev is not None:
            if pending is not None:
                order = pending
            elif atom.aromatic and g.atoms[prev].aromatic:
                order = AROMATIC
            else:
                order = SINGLE
            add_bond(prev, idx, order, pos)
        prev = idx
        pending = None

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]

        if ch == "(":
            if pending is not None:
                raise SmilesError("bond symbol before branch open", pending_pos)
            if prev is None:
                raise SmilesError("branch before any atom", i)
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if pending is not None:
                raise SmilesError("bond symbol before branch close", pending_pos)
            if not branch_stack:
                raise SmilesError("unmatched ')'", i)
            prev = branch_stack.pop()
            i += 1
        elif ch == ".":
            if pending is not None:
                raise SmilesError("bond symbol before '.'", pending_pos)
            if branch_stack:
                raise SmilesError("'.' inside branch", i)
            prev = None
            i += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise SmilesError("two consecutive bond symbols", i)
            if prev is None:
                raise SmilesError("bond symbol before any atom", i)
            pending = _BOND_SYMBOLS[ch]
            pending_pos = i
            i += 1
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesError("ring closure before any atom", i)
            if ch == "%":
                if i + 2 >= n or not text[i + 1:i + 3].isdigit():
                    raise SmilesError("'%' must be followed by two digits", i)
                num = int(text[i + 1:i + 3])
                i += 3
            else:
                num = int(ch)
                i += 1
            if num in ring_open:
                other, open_order, open_pos = ring_open.pop(num)
                order = pending if pending is not None else open_order
                if (pending is not None and open_order is not None
                        and pending != open_order):
                    raise SmilesError(
                        f"conflicting bond orders for ring closure {num}", i - 1)
                if order is None:
                    if g.atoms[prev].aromatic and g.atoms[other].aromatic:
                        order = AROMATIC
                    else:
                        order = SINGLE
                add_bond(prev, other, order, i - 1)
            else:
                ring_open[num] = (prev, pending, i - 1)
            pending = None
        elif ch == "[":
            atom, i_next = _parse_bracket(text, i)
            attach(atom, i)
            i = i_next
        elif ch.isupper():
            if text[i:i + 2] in _TWO_LETTER:
                element, width = text[i:i + 2], 2
            else:
                element, width = ch, 1
            if element not in VALENCES:
                raise SmilesError(f"unsupported element {element!r}", i)
            attach(Atom(element=element), i)
            i += width
        elif ch.islower():
            element = ch.upper()
            if element not in VALENCES or element not in _AROMATIC_OK:
                raise SmilesError(f"unsupported aromatic atom {ch!r}", i)
            attach(Atom(element=element, aromatic=True), i)
            i += 1
        else:
            raise SmilesError(f"unexpected character {ch!r}", i)

    if pending is not None:
        raise SmilesError("dangling bond symbol", pending_pos)
    if branch_stack:
        raise SmilesError("unclosed branch", n - 1)
    if ring_open:
        nums = ", ".join(str(k) for k in sorted(ring_open))
        raise SmilesError(f"unmatched ring closure(s): {nums}",
                          min(p for _, _, p in ring_open.values()))

    _finalize(g)
    return g


def _finalize(g: MolGraph) -> None:
    """Fill degrees, implicit hydrogens, ring flags, components and the key."""
    order_sum = [0.0] * g.num_atoms
    degree = [0] * g.num_atoms
    for bond in g.bonds:
        for idx in (bond.a1, bond.a2):
            order_sum[idx] += BOND_VALENCE[bond.order]
            degree[idx] += 1

    for idx, atom in enumerate(g.atoms):
        atom.degree = degree[idx]
        used = math.ceil(order_sum[idx] - 1e-9)
        if atom.explicit_h:
            continue    # bracket atoms keep the written H-count, no valence fill
        valences = VALENCES[atom.element]
        if atom.aromatic:
            # 1.5 per aromatic bond overcounts on fused systems (e.g. three
            # ring bonds ceil to 5); clamp to zero instead of erroring.
            atom.implicit_h = max(0, valences[0] - used)
            continue
        if used > valences[-1]:
            raise SmilesError(
                f"valence overflow on {atom.element} (bond order sum {used} > "
                f"maximum {valences[-1]})")
        target = next(v for v in valences if v >= used)
        atom.implicit_h = target - used

    ring_membership(g)
    g.num_components = _count_components(g)
    g.canonical_key = canonical_key(g)


def _count_components(g: MolGraph) -> int:
    n = g.num_atoms
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for bond in g.bonds:
        ra, rb = find(bond.a1), find(bond.a2)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n)})


def ring_membership(g: MolGraph) -> None:
    """Set per-bond and per-atom in_ring flags in place.

    A bond is in a ring iff it is not a bridge; an atom is in a ring iff it
    has an incident ring bond. Uses an iterative lowpoint DFS.
    """
    n = g.num_atoms
    adj = g.adjacency()
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    timer = 0

    for root in range(n):
        if disc[root] != -1:
            continue
        # stack entries: (node, incoming bond index, iterator position)
        stack = [(root, -1, 0)]
        disc[root] = low[root] = timer
        timer += 1
        while stack:
            node, in_bond, ptr = stack[-1]
            if ptr < len(adj[node]):
                stack[-1] = (node, in_bond, ptr + 1)
                nbr, bidx = adj[node][ptr]
                if bidx == in_bond:
                    continue
                if disc[nbr] == -1:
                    disc[nbr] = low[nbr] = timer
                    timer += 1
                    stack.append((nbr, bidx, 0))
                else:
                    low[node] = min(low[node], disc[nbr])
            else:
                stack.pop()
                if stack:
                    pnode = stack[-1][0]
                    low[pnode] = min(low[pnode], low[node])
                    if low[node] > disc[pnode]:
                        bridges.add(in_bond)

    for b, bond in enumerate(g.bonds):
        bond.in_ring = b not in bridges
    for atom in g.atoms:
        atom.in_ring = False
    for bond in g.bonds:
        if bond.in_ring:
            g.atoms[bond.a1].in_ring = True
            g.atoms[bond.a2].in_ring = True


def _dense_rank(keys: list) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def canonical_ranks(g: MolGraph) -> list[int]:
    """Total order over atoms, invariant under atom relabeling.

    Iterative neighborhood refinement seeded by (element, charge, degree,
    implicit H, aromatic); remaining ties are broken inside the lowest tied
    class by lowest current index, then refinement is rerun. For molecules
    whose refinement-stable classes are automorphism orbits (the practical
    case) the induced key is independent of input atom order.
    """
    n = g.num_atoms
    if n == 0:
        return []
    adj: list[list[tuple[str, int]]] = [[] for _ in range(n)]
    for bond in g.bonds:
        adj[bond.a1].append((_ORDER_CODE[bond.order], bond.a2))
        adj[bond.a2].append((_ORDER_CODE[bond.order], bond.a1))

    ranks = _dense_rank([
        (a.element, a.formal_charge, a.degree, a.implicit_h, a.aromatic)
        for a in g.atoms
    ])

    def refine(ranks: list[int]) -> list[int]:
        while True:
            keys = [
                (ranks[i], tuple(sorted((code, ranks[j]) for code, j in adj[i])))
                for i in range(n)
            ]
            new = _dense_rank(keys)
            if new == ranks:
                return new
            ranks = new

    ranks = refine(ranks)
    while max(ranks) < n - 1:
        tied_rank = min(r for r in ranks if ranks.count(r) > 1)
        chosen = ranks.index(tied_rank)
        ranks = _dense_rank([
            (ranks[i], 0 if i == chosen else 1) for i in range(n)
        ])
        ranks = refine(ranks)
    return ranks


def canonical_key(g: MolGraph) -> str:
    """Serialized form of the graph under canonical ranks.

    Identical for any atom permutation of the same molecule; distinct for
    graphs differing in element, charge, bond order or connectivity.
    """
    ranks = canonical_ranks(g)
    inverse = [0] * len(ranks)
    for idx, r in enumerate(ranks):
        inverse[r] = idx
    atom_tokens = []
    for idx in inverse:
        a = g.atoms[idx]
        flag = "a" if a.aromatic else ""
        atom_tokens.append(f"{a.element}{a.formal_charge:+d}h{a.implicit_h}{flag}")
    edge_tokens = sorted(
        "{}-{}:{}".format(min(ranks[b.a1], ranks[b.a2]),
                          max(ranks[b.a1], ranks[b.a2]),
                          _ORDER_CODE[b.order])
        for b in g.bonds
    )
    return ",".join(atom_tokens) + "|" + ";".join(edge_tokens)


def cycle_rank(g: MolGraph) -> int:
    """Number of independent cycles: bonds - atoms + components."""
    return g.num_bonds - g.num_atoms + g.num_components
