"""Node-level positional encodings: Laplacian eigenpairs and random-walk
return probabilities, with an on-disk cache for the computed spectra.

The Laplacian is the symmetric normalized variant I - D^(-1/2) A D^(-1/2);
rows of atoms with no bonds reduce to identity rows, so a lone atom carries
eigenvalue 1 rather than 0 (it has no spectral structure to encode).
Eigenvector signs are fixed deterministically: each column is flipped so its
largest-magnitude entry (lowest index on ties) is positive. Within a
numerically degenerate eigenvalue cluster the solver order is kept as is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .diskcache import BlobStore, pack_arrays, unpack_arrays
from .molparse import MolGraph


@dataclass
class LapPE:
    eigvals: np.ndarray    # [k], ascending, zero-padded if num_atoms < k
    eigvecs: np.ndarray    # [num_atoms, k], orthonormal columns (unpadded part)
    k: int


@dataclass
class RWSE:
    probs: np.ndarray      # [num_atoms, len(steps)], entries in [0, 1]
    steps: tuple[int, ...]


@dataclass(frozen=True)
class PEConfig:
    lap_k: int = 8
    rwse_steps: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)

    def version_tag(self) -> str:
        import hashlib
        blob = json.dumps({"lap_k": self.lap_k, "steps": self.rwse_steps})
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    @property
    def lap_width(self) -> int:
        # eigvec entry + broadcast eigvals per node
        return 2 * self.lap_k

    @property
    def rwse_width(self) -> int:
        return len(self.rwse_steps)


def normalized_laplacian(num_nodes: int, edges) -> np.ndarray:
    """Dense symmetric normalized Laplacian of a simple undirected graph."""
    A = np.zeros((num_nodes, num_nodes), dtype=np.float64)
    for u, v in edges:
        A[u, v] = 1.0
        A[v, u] = 1.0
    deg = A.sum(axis=1)
    dinv = np.zeros(num_nodes)
    nz = deg > 0
    dinv[nz] = 1.0 / np.sqrt(deg[nz])
    L = np.eye(num_nodes) - (dinv[:, None] * A) * dinv[None, :]
    return L


def eigen_pe(num_nodes: int, edges, k: int,
             tie_order=None) -> LapPE:
    """k smallest eigenpairs of the normalized Laplacian, sign-fixed.

    The sign anchor is the largest-magnitude entry; entries within a small
    relative tolerance of the maximum count as tied and the one ranked first
    by `tie_order` (raw index when omitted) wins. Passing a permutation
    invariant ordering keeps the choice stable across atom relabelings of
    structurally symmetric graphs.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if tie_order is None:
        tie_order = np.arange(num_nodes)
    else:
        tie_order = np.asarray(tie_order)
    L = normalized_laplacian(num_nodes, edges)
    vals, vecs = np.linalg.eigh(L)
    take = min(k, num_nodes)
    vals = vals[:take]
    vecs = vecs[:, :take]
    for col in range(take):
        mags = np.abs(vecs[:, col])
        peak = mags.max()
        if peak == 0.0:
            continue
        tied = np.flatnonzero(mags >= peak * (1.0 - 1e-9))
        pivot = int(tied[np.argmin(tie_order[tied])])
        if vecs[pivot, col] < 0:
            vecs[:, col] = -vecs[:, col]
    if take < k:
        vals = np.concatenate([vals, np.zeros(k - take)])
        vecs = np.concatenate([vecs, np.zeros((num_nodes, k - take))], axis=1)
    return LapPE(eigvals=vals, eigvecs=vecs, k=k)


def laplacian_pe(g: MolGraph, k: int) -> LapPE:
    if g.num_atoms < 1:
        raise ValueError("graph has no atoms")
    from .molparse import canonical_ranks
    return eigen_pe(g.num_atoms, ((b.a1, b.a2) for b in g.bonds), k,
                    tie_order=canonical_ranks(g))


def return_probabilities(num_nodes: int, edges, steps) -> np.ndarray:
    """Diagonal of T^k for each requested k, T = D^(-1) A.

    Atoms with no bonds have all-zero transition rows, so their return
    probability is 0 for every k >= 1. Powers are built incrementally and
    shared across the requested steps.
    """
    steps = tuple(int(s) for s in steps)
    if not steps:
        raise ValueError("steps must be non-empty")
    if any(s < 1 for s in steps):
        raise ValueError("every step must be >= 1")
    A = np.zeros((num_nodes, num_nodes), dtype=np.float64)
    for u, v in edges:
        A[u, v] = 1.0
        A[v, u] = 1.0
    deg = A.sum(axis=1)
    T = np.zeros_like(A)
    nz = deg > 0
    T[nz] = A[nz] / deg[nz, None]

    out = np.zeros((num_nodes, len(steps)), dtype=np.float64)
    power = np.eye(num_nodes)
    by_step = {s: i for i, s in enumerate(steps)}
    for k in range(1, max(steps) + 1):
        power = power @ T
        if k in by_step:
            out[:, by_step[k]] = np.diag(power)
    return out


def rwse(g: MolGraph, steps) -> RWSE:
    probs = return_probabilities(g.num_atoms,
                                 ((b.a1, b.a2) for b in g.bonds), steps)
    return RWSE(probs=probs, steps=tuple(int(s) for s in steps))


class PECache:
    """One versioned binary file per (molecule key, PE config) pair.

    Writes are atomic; a corrupted file reads as a miss and is recounted in
    `store.corrupt`. Bumping the config changes the key, so stale entries
    simply stop being hit.
    """

    def __init__(self, root, config: PEConfig):
        self.config = config
        self.store = BlobStore(root, version=1, sharded=False)

    def _key(self, canonical_key: str) -> str:
        return f"{canonical_key}\n{self.config.version_tag()}"

    def get(self, canonical_key: str) -> tuple[LapPE, RWSE] | None:
        payload = self.store.get(self._key(canonical_key))
        if payload is None:
            return None
        arrays = unpack_arrays(payload)
        lap = LapPE(eigvals=arrays["lap_eigvals"], eigvecs=arrays["lap_eigvecs"],
                    k=self.config.lap_k)
        rw = RWSE(probs=arrays["rwse_probs"], steps=self.config.rwse_steps)
        return lap, rw

    def put(self, canonical_key: str, lap: LapPE, rw: RWSE) -> None:
        payload = pack_arrays({
            "lap_eigvals": lap.eigvals,
            "lap_eigvecs": lap.eigvecs,
            "rwse_probs": rw.probs,
        })
        self.store.put(self._key(canonical_key), payload)


def compute_pes(g: MolGraph, config: PEConfig,
                cache: PECache | None = None) -> tuple[LapPE, RWSE]:
    """Compute (or fetch) both PEs for a molecule. Cache hits reproduce the
    computed arrays bitwise."""
    if cache is not None:
        hit = cache.get(g.canonical_key)
        if hit is not None:
            return hit
    lap = laplacian_pe(g, config.lap_k)
    rw = rwse(g, config.rwse_steps)
    if cache is not None:
        cache.put(g.canonical_key, lap, rw)
    return lap, rw
