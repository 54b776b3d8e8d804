"""Numeric featurization of molecular graphs and label normalization.

Node and edge feature layouts are fixed by a :class:`FeatureConfig`; the same
config always produces the same matrix widths. Descriptors cover the cheap 2D
properties computable from the graph alone (no conformers, no external
parameter tables).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .molparse import (BOND_ORDERS, SINGLE, SUPPORTED_ELEMENTS, MolGraph,
                       cycle_rank)

ATOMIC_MASS = {
    "H": 1.008, "B": 10.811, "C": 12.011, "N": 14.007, "O": 15.999,
    "F": 18.998, "P": 30.974, "S": 32.065, "Cl": 35.453, "Br": 79.904,
    "I": 126.904,
}

ATOM_FEATURES = ("element", "degree", "charge", "implicit_h", "aromatic",
                 "in_ring")
BOND_FEATURES = ("order", "in_ring")

_DEGREE_MAX = 6       # one-hot 0..6, clamped
_IMPLICIT_H_MAX = 4   # one-hot 0..4, clamped
_CHARGE_SCALE = 0.5   # formal charge enters as charge * scale


@dataclass(frozen=True)
class FeatureConfig:
    atom_features: tuple[str, ...] = ATOM_FEATURES
    bond_features: tuple[str, ...] = BOND_FEATURES
    elements: tuple[str, ...] = SUPPORTED_ELEMENTS

    def __post_init__(self):
        for name in self.atom_features:
            if name not in ATOM_FEATURES:
                raise ValueError(f"unknown atom feature {name!r}")
        for name in self.bond_features:
            if name not in BOND_FEATURES:
                raise ValueError(f"unknown bond feature {name!r}")

    @property
    def node_dim(self) -> int:
        widths = {
            "element": len(self.elements) + 1,   # + "other" bucket
            "degree": _DEGREE_MAX + 1,
            "charge": 1,
            "implicit_h": _IMPLICIT_H_MAX + 1,
            "aromatic": 1,
            "in_ring": 1,
        }
        return sum(widths[f] for f in self.atom_features)

    @property
    def edge_dim(self) -> int:
        widths = {"order": len(BOND_ORDERS), "in_ring": 1}
        return sum(widths[f] for f in self.bond_features)

    def version_tag(self) -> str:
        import hashlib
        import json
        blob = json.dumps({
            "atom": self.atom_features, "bond": self.bond_features,
            "elements": self.elements,
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class FeaturizedGraph:
    node_features: np.ndarray      # [num_atoms, node_dim]
    edge_features: np.ndarray      # [2 * num_bonds, edge_dim]
    edge_index: np.ndarray         # [2 * num_bonds, 2] directed (src, dst)
    descriptors: dict[str, float] = field(default_factory=dict)

    @property
    def num_atoms(self) -> int:
        return self.node_features.shape[0]

    @property
    def num_directed_edges(self) -> int:
        return self.edge_index.shape[0]


def featurize(g: MolGraph, config: FeatureConfig | None = None) -> FeaturizedGraph:
    """Build node/edge feature matrices for a parsed molecule.

    Every directed edge appears with its reverse; both carry the same bond
    features. Output is deterministic for a fixed config.
    """
    if config is None:
        config = FeatureConfig()
    n = g.num_atoms
    element_index = {el: i for i, el in enumerate(config.elements)}

    rows = np.zeros((n, config.node_dim), dtype=np.float64)
    for i, atom in enumerate(g.atoms):
        col = 0
        for name in config.atom_features:
            if name == "element":
                width = len(config.elements) + 1
                rows[i, col + element_index.get(atom.element, width - 1)] = 1.0
                col += width
            elif name == "degree":
                rows[i, col + min(atom.degree, _DEGREE_MAX)] = 1.0
                col += _DEGREE_MAX + 1
            elif name == "charge":
                rows[i, col] = atom.formal_charge * _CHARGE_SCALE
                col += 1
            elif name == "implicit_h":
                rows[i, col + min(atom.implicit_h, _IMPLICIT_H_MAX)] = 1.0
                col += _IMPLICIT_H_MAX + 1
            elif name == "aromatic":
                rows[i, col] = 1.0 if atom.aromatic else 0.0
                col += 1
            elif name == "in_ring":
                rows[i, col] = 1.0 if atom.in_ring else 0.0
                col += 1

    order_index = {o: i for i, o in enumerate(BOND_ORDERS)}
    edge_index = np.zeros((2 * g.num_bonds, 2), dtype=np.int64)
    edge_rows = np.zeros((2 * g.num_bonds, config.edge_dim), dtype=np.float64)
    for b, bond in enumerate(g.bonds):
        feats = np.zeros(config.edge_dim, dtype=np.float64)
        col = 0
        for name in config.bond_features:
            if name == "order":
                feats[col + order_index[bond.order]] = 1.0
                col += len(BOND_ORDERS)
            elif name == "in_ring":
                feats[col] = 1.0 if bond.in_ring else 0.0
                col += 1
        edge_index[2 * b] = (bond.a1, bond.a2)
        edge_index[2 * b + 1] = (bond.a2, bond.a1)
        edge_rows[2 * b] = feats
        edge_rows[2 * b + 1] = feats

    return FeaturizedGraph(node_features=rows, edge_features=edge_rows,
                           edge_index=edge_index, descriptors=descriptors(g))


def descriptors(g: MolGraph) -> dict[str, float]:
    """Cheap 2D chemical descriptors.

    MW counts implicit hydrogens; rotatable bonds are non-ring single bonds
    whose both ends have heavy-atom degree >= 2; Lipinski HBD counts N-H and
    O-H hydrogens, HBA counts N and O atoms.
    """
    mass_terms = []
    hba = 0
    hbd = 0
    hetero = 0
    sp3_carbons = 0
    carbons = 0
    for atom in g.atoms:
        mass_terms.append(ATOMIC_MASS[atom.element]
                          + atom.implicit_h * ATOMIC_MASS["H"])
        if atom.element in ("N", "O"):
            hba += 1
            hbd += atom.implicit_h
        if atom.element not in ("C", "H"):
            hetero += 1
        if atom.element == "C":
            carbons += 1
    # Second pass for sp3 carbons and rotatable bonds (needs incident bonds).
    incident: list[list[str]] = [[] for _ in g.atoms]
    for bond in g.bonds:
        incident[bond.a1].append(bond.order)
        incident[bond.a2].append(bond.order)
    for i, atom in enumerate(g.atoms):
        if atom.element != "C":
            continue
        all_single = all(o == SINGLE for o in incident[i])
        if (not atom.aromatic and all_single
                and atom.degree + atom.implicit_h == 4):
            sp3_carbons += 1

    rotatable = 0
    for bond in g.bonds:
        if bond.order != SINGLE or bond.in_ring:
            continue
        if g.atoms[bond.a1].degree >= 2 and g.atoms[bond.a2].degree >= 2:
            rotatable += 1

    # summation in sorted order keeps MW bitwise permutation-invariant
    mw = float(np.sum(np.sort(np.asarray(mass_terms)))) if mass_terms else 0.0

    return {
        "mw": mw,
        "n_heavy_atoms": float(g.num_atoms),
        "n_hetero_atoms": float(hetero),
        "n_rings": float(cycle_rank(g)),
        "n_rotatable_bonds": float(rotatable),
        "n_lipinski_hba": float(hba),
        "n_lipinski_hbd": float(hbd),
        "fsp3": sp3_carbons / carbons if carbons else 0.0,
    }


NORM_KINDS = ("none", "minmax", "zscore")


@dataclass
class LabelNorm:
    kind: str
    params: tuple[float, float] = (0.0, 1.0)   # (min, max) or (mean, std)


@dataclass
class NormStats:
    """Per-label normalization parameters, fitted on training rows only."""

    labels: dict[str, LabelNorm] = field(default_factory=dict)

    def to_records(self) -> list[dict]:
        return [
            {"name": name, "kind": ln.kind, "params": list(ln.params)}
            for name, ln in self.labels.items()
        ]

    @classmethod
    def from_records(cls, records: list[dict]) -> "NormStats":
        stats = cls()
        for rec in records:
            stats.labels[rec["name"]] = LabelNorm(rec["kind"],
                                                  tuple(rec["params"]))
        return stats


def fit_norm(values_by_label: dict[str, np.ndarray],
             kinds: dict[str, str] | str) -> NormStats:
    """Fit normalization statistics per label.

    `values_by_label` must contain training-split values only; NaNs are
    excluded from the statistics. A label with no present values gets kind
    "none" with a warning. Z-score uses the population standard deviation.
    """
    stats = NormStats()
    for name, values in values_by_label.items():
        kind = kinds if isinstance(kinds, str) else kinds.get(name, "none")
        if kind not in NORM_KINDS:
            raise ValueError(f"unknown normalization kind {kind!r}")
        present = np.asarray(values, dtype=np.float64)
        present = present[np.isfinite(present)]
        if present.size == 0 and kind != "none":
            warnings.warn(f"label {name!r} has no present values; "
                          "normalization forced to 'none'")
            kind = "none"
        if kind == "none":
            stats.labels[name] = LabelNorm("none")
        elif kind == "minmax":
            lo, hi = float(present.min()), float(present.max())
            if hi <= lo:
                raise ValueError(f"label {name!r}: min equals max under min-max")
            stats.labels[name] = LabelNorm("minmax", (lo, hi))
        elif kind == "zscore":
            mean = float(present.mean())
            std = float(present.std())    # population convention
            if std <= 0.0:
                raise ValueError(f"label {name!r}: zero variance under z-score")
            stats.labels[name] = LabelNorm("zscore", (mean, std))
    return stats


def apply_norm(values: np.ndarray, norm: LabelNorm) -> np.ndarray:
    """Normalize values; NaNs pass through unchanged."""
    values = np.asarray(values, dtype=np.float64)
    if norm.kind == "none":
        return values.copy()
    a, b = norm.params
    if norm.kind == "minmax":
        return (values - a) / (b - a)
    if norm.kind == "zscore":
        return (values - a) / b
    raise ValueError(f"unknown normalization kind {norm.kind!r}")


def invert_norm(values: np.ndarray, norm: LabelNorm) -> np.ndarray:
    """Inverse of :func:`apply_norm`; NaNs pass through unchanged."""
    values = np.asarray(values, dtype=np.float64)
    if norm.kind == "none":
        return values.copy()
    a, b = norm.params
    if norm.kind == "minmax":
        return values * (b - a) + a
    if norm.kind == "zscore":
        return values * b + a
    raise ValueError(f"unknown normalization kind {norm.kind!r}")
