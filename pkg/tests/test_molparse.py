import numpy as np
import pytest

from molmix.molparse import (SmilesError, canonical_key, canonical_ranks,
                             cycle_rank, parse_smiles)

from helpers import DIVERSE_MOLECULES, random_molecule_smiles, write_smiles

# (smiles, atoms, bonds, ring bonds, components)
GOLDEN_CORPUS = [
    ("CCO", 3, 2, 0, 1),
    ("c1ccccc1", 6, 6, 6, 1),
    ("C1CC1", 3, 3, 3, 1),
    ("C1CC1.O", 4, 3, 3, 2),
    ("CC(C)C", 4, 3, 0, 1),
    ("C1CCCCC1", 6, 6, 6, 1),
    ("c1ccc2ccccc2c1", 10, 11, 11, 1),
    ("CC(=O)O", 4, 3, 0, 1),
    ("C[N+](=O)[O-]", 4, 3, 0, 1),
    ("N#Cc1ccccc1", 8, 8, 6, 1),
    ("C1CC1CC1CC1", 7, 8, 6, 1),
    ("OC1CCOC1", 6, 6, 5, 1),
    ("c1ccsc1", 5, 5, 5, 1),
    ("Clc1ccccc1", 7, 7, 6, 1),
    ("CCN(CC)CC", 7, 6, 0, 1),
    ("C#C", 2, 1, 0, 1),
    ("O=C=O", 3, 2, 0, 1),
    ("C1CCC2CCCCC2C1", 10, 11, 11, 1),
    ("CSC(=S)N", 5, 4, 0, 1),
    ("BrC(Br)Br", 4, 3, 0, 1),
]


@pytest.mark.parametrize("smiles,atoms,bonds,ring_bonds,components", GOLDEN_CORPUS)
def test_golden_corpus(smiles, atoms, bonds, ring_bonds, components):
    g = parse_smiles(smiles)
    assert g.num_atoms == atoms
    assert g.num_bonds == bonds
    assert sum(b.in_ring for b in g.bonds) == ring_bonds
    assert g.num_components == components


def test_ethanol_details():
    g = parse_smiles("CCO")
    assert [a.element for a in g.atoms] == ["C", "C", "O"]
    assert [a.implicit_h for a in g.atoms] == [3, 2, 1]
    assert all(b.order == "single" for b in g.bonds)


def test_benzene_details():
    g = parse_smiles("c1ccccc1")
    assert all(a.aromatic for a in g.atoms)
    assert all(b.order == "aromatic" for b in g.bonds)
    assert all(b.in_ring for b in g.bonds)
    assert all(a.in_ring for a in g.atoms)
    assert [a.implicit_h for a in g.atoms] == [1] * 6


def test_dot_components():
    g = parse_smiles("C1CC1.O")
    assert g.num_components == 2
    assert g.atoms[3].implicit_h == 2


def test_two_rings_one_linker():
    # 7 atoms, 8 bonds: two triangles joined through a CH2. Brute-force
    # bridge analysis: the two linker bonds are the only acyclic ones.
    g = parse_smiles("C1CC1CC1CC1")
    assert sum(b.in_ring for b in g.bonds) == 6
    assert sum(not b.in_ring for b in g.bonds) == 2
    assert cycle_rank(g) == 2


def test_ring_flags_match_bridge_oracle():
    # Oracle: a bond lies on a cycle iff removing it keeps its endpoints
    # connected.
    rng = np.random.default_rng(7)
    for _ in range(40):
        g = parse_smiles(random_molecule_smiles(rng, max_atoms=14))
        for skip, bond in enumerate(g.bonds):
            adj = [[] for _ in range(g.num_atoms)]
            for j, other in enumerate(g.bonds):
                if j == skip:
                    continue
                adj[other.a1].append(other.a2)
                adj[other.a2].append(other.a1)
            seen = {bond.a1}
            stack = [bond.a1]
            while stack:
                v = stack.pop()
                for u in adj[v]:
                    if u not in seen:
                        seen.add(u)
                        stack.append(u)
            assert bond.in_ring == (bond.a2 in seen)


def test_atom_ring_flag_follows_bonds():
    g = parse_smiles("C1CC1CC1CC1")
    for i, atom in enumerate(g.atoms):
        incident_ring = any(b.in_ring and i in (b.a1, b.a2) for b in g.bonds)
        assert atom.in_ring == incident_ring


def test_implicit_h_valence_identity():
    # implicit_h + ceil(bond order sum) == table valence for neutral
    # aliphatic organic-subset atoms
    from molmix.molparse import BOND_VALENCE, VALENCES
    import math
    rng = np.random.default_rng(11)
    for _ in range(30):
        g = parse_smiles(random_molecule_smiles(rng, max_atoms=16))
        for i, atom in enumerate(g.atoms):
            if atom.explicit_h or atom.aromatic:
                continue
            used = math.ceil(sum(BOND_VALENCE[b.order] for b in g.bonds
                                 if i in (b.a1, b.a2)) - 1e-9)
            assert (atom.implicit_h + used) in VALENCES[atom.element]


def test_degree_counts_incident_bonds():
    g = parse_smiles("CC(C)(C)C")
    assert [a.degree for a in g.atoms] == [1, 4, 1, 1, 1]


class TestCanonicalKey:
    def test_reversed_writing_same_key(self):
        assert parse_smiles("OCC").canonical_key == parse_smiles("CCO").canonical_key

    def test_different_molecule_different_key(self):
        assert parse_smiles("CCO").canonical_key != parse_smiles("CCN").canonical_key

    def test_bond_order_distinguishes(self):
        assert parse_smiles("CCC").canonical_key != parse_smiles("C=CC").canonical_key

    def test_charge_distinguishes(self):
        assert parse_smiles("[NH4+]").canonical_key != parse_smiles("N").canonical_key

    def test_rewritings_collapse(self):
        rng = np.random.default_rng(3)
        keys = set()
        for smiles in DIVERSE_MOLECULES:
            g = parse_smiles(smiles)
            base = g.canonical_key
            for _ in range(10):
                rewritten = write_smiles(g, rng)
                assert parse_smiles(rewritten).canonical_key == base, rewritten
            keys.add(base)
        assert len(keys) == len(DIVERSE_MOLECULES)

    def test_random_molecules_permutation_invariant(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            smiles = random_molecule_smiles(rng, max_atoms=18)
            g = parse_smiles(smiles)
            for _ in range(4):
                assert parse_smiles(write_smiles(g, rng)).canonical_key == g.canonical_key

    def test_ranks_are_total_order(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            g = parse_smiles(random_molecule_smiles(rng, max_atoms=12))
            ranks = canonical_ranks(g)
            assert sorted(ranks) == list(range(g.num_atoms))


class TestErrors:
    def test_empty(self):
        with pytest.raises(SmilesError):
            parse_smiles("")

    def test_unmatched_ring(self):
        with pytest.raises(SmilesError, match="ring closure"):
            parse_smiles("C1CC")

    def test_unsupported_element(self):
        with pytest.raises(SmilesError, match="unsupported element"):
            parse_smiles("C[Si](C)C")

    def test_valence_overflow(self):
        with pytest.raises(SmilesError, match="valence overflow"):
            parse_smiles("C(C)(C)(C)(C)C")

    def test_isotope_rejected(self):
        with pytest.raises(SmilesError, match="isotope"):
            parse_smiles("[13C]")

    def test_position_reported(self):
        with pytest.raises(SmilesError) as err:
            parse_smiles("CC)C")
        assert err.value.position == 2

    def test_dangling_bond(self):
        with pytest.raises(SmilesError, match="dangling"):
            parse_smiles("CC=")

    def test_unclosed_branch(self):
        with pytest.raises(SmilesError, match="branch"):
            parse_smiles("C(CC")

    def test_duplicate_bond(self):
        with pytest.raises(SmilesError, match="duplicate"):
            parse_smiles("C12CC12")

    def test_self_ring(self):
        with pytest.raises(SmilesError):
            parse_smiles("C11")

    def test_wildcard_rejected(self):
        with pytest.raises(SmilesError):
            parse_smiles("C*C")


def test_stereo_markers_discarded():
    g = parse_smiles("F/C=C/F")
    assert g.num_atoms == 4
    assert g.num_bonds == 3
    assert g.bonds[1].order == "double"
    g2 = parse_smiles("C[C@H](N)O")
    assert g2.num_atoms == 4
    assert g2.atoms[1].implicit_h == 1


def test_percent_ring_closure():
    g = parse_smiles("C%12CCCCC%12")
    assert g.num_bonds == 6
    assert all(b.in_ring for b in g.bonds)


def test_multibond_ring_closure_order():
    g = parse_smiles("C=1CCCCC=1")
    orders = sorted(b.order for b in g.bonds)
    assert orders.count("double") == 1


def test_cycle_rank_matches_flags():
    rng = np.random.default_rng(21)
    for _ in range(20):
        g = parse_smiles(random_molecule_smiles(rng, max_atoms=16))
        assert cycle_rank(g) == g.num_bonds - g.num_atoms + g.num_components
        if cycle_rank(g) == 0:
            assert not any(b.in_ring for b in g.bonds)
