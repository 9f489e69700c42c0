"""Joint space-time grouping of (person, interval) entities.

Every entity gets its own dictionary.  Pairwise dissimilarities use the
two-subject relative measure, turn into a locally scaled Gaussian affinity,
and self-tuning spectral clustering picks the number of groups by how well
a rotation of the leading eigenvectors aligns with a cluster-indicator
structure.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateMeasureError
from .features import PatchSet, derived_seed
from .sparse_model import Dictionary, SolverConfig, learn_dictionary
from .temporal import RStarCache

__all__ = [
    "Entity",
    "ClusterResult",
    "make_entities",
    "learn_unit",
    "pairwise_dissimilarity",
    "to_affinity",
    "self_tuning_cluster",
    "rotation_cost",
    "cluster_entities",
]


@dataclass
class Entity:
    person_id: int
    interval: int
    patchset: PatchSet
    dictionary: Dictionary

    @property
    def key(self) -> tuple:
        return (self.person_id, self.interval)


@dataclass
class ClusterResult:
    C: int
    labels: np.ndarray
    W: np.ndarray
    E: Optional[np.ndarray] = None
    entities: list = field(default_factory=list)
    costs: dict = field(default_factory=dict)
    eigenvalues: Optional[np.ndarray] = None
    excluded: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "C": int(self.C),
            "entities": [
                {"person": int(p), "interval": int(t), "label": int(lab)}
                for (p, t), lab in zip(self.entities, self.labels)
            ],
            "costs": {str(c): float(v) for c, v in sorted(self.costs.items())},
            "excluded": [list(map(int, e)) for e in self.excluded],
            "warnings": list(self.warnings),
        }


def learn_unit(ps: PatchSet, k: int, cfg: SolverConfig, master: int) -> Dictionary:
    """Dictionary of one (person, interval) patch set, seeded from its key."""
    seed = derived_seed(master, ps.person_id, ps.interval)
    d, _, _ = learn_dictionary(ps, k, replace(cfg, seed=seed))
    d.person_id, d.interval = ps.person_id, ps.interval
    return d


def make_entities(patchsets, k: int = 32, cfg: Optional[SolverConfig] = None,
                  seed: Optional[int] = None, map_fn=map) -> list:
    """Learn one dictionary per (person, interval) patch set.

    ``patchsets`` maps ``(person_id, interval)`` to a PatchSet.  Each problem
    gets a seed derived from the master seed and its key, so results do not
    depend on evaluation order; ``map_fn`` may therefore run them in parallel.
    """
    cfg = cfg or SolverConfig()
    master = cfg.seed if seed is None else seed
    keys = sorted(patchsets)
    for (pid, t) in keys:
        ps = patchsets[(pid, t)]
        if (ps.person_id, ps.interval) != (pid, t):
            ps = PatchSet(ps.data, pid, t)
            patchsets = {**patchsets, (pid, t): ps}
    dicts = list(map_fn(lambda key: learn_unit(patchsets[key], k, cfg, master), keys))
    return [Entity(pid, t, patchsets[(pid, t)], d) for (pid, t), d in zip(keys, dicts)]


def pairwise_dissimilarity(entities: Sequence[Entity], cfg: Optional[SolverConfig] = None,
                           cache: Optional[RStarCache] = None):
    """Symmetric matrix of two-subject relative measures between entities.

    Returns ``(E, kept, excluded)``: entities whose own representation error
    is zero cannot enter the relative measure and are dropped from ``E``.
    Costs one self-solve per entity plus two cross-solves per pair.
    """
    R = cache if cache is not None else RStarCache(cfg)
    R.prefetch([(e.patchset, e.dictionary) for e in entities])
    own = {}
    kept, excluded = [], []
    for e in entities:
        own[e.key] = R(e.patchset, e.dictionary)
        (kept if own[e.key] > 0 else excluded).append(e)
    R.prefetch([(a.patchset, b.dictionary) for a in kept for b in kept if a is not b])
    n = len(kept)
    E = np.zeros((n, n))
    for a, b in itertools.combinations(range(n), 2):
        ea, eb = kept[a], kept[b]
        ra = abs(R(ea.patchset, eb.dictionary) - own[ea.key]) / own[ea.key]
        rb = abs(R(eb.patchset, ea.dictionary) - own[eb.key]) / own[eb.key]
        E[a, b] = E[b, a] = max(ra, rb)
    return E, kept, excluded


def to_affinity(E, K: int = 7):
    """Locally scaled Gaussian affinity ``exp(-E_ab^2 / (s_a s_b))``.

    ``s_a`` is the distance from ``a`` to its K-th nearest neighbour (K is
    clamped to ``n - 1``).  Returns ``(W, warnings)``.
    """
    E = np.asarray(E, dtype=np.float64)
    if not np.allclose(E, E.T, rtol=0, atol=0) or np.any(E < 0):
        raise ValueError("dissimilarities must be symmetric and nonnegative")
    n = E.shape[0]
    notes = []
    if n == 1:
        return np.ones((1, 1)), notes
    K = max(1, min(K, n - 1))
    off = E + np.diag(np.full(n, np.inf))
    sigma = np.sort(off, axis=1)[:, K - 1]
    if np.any(sigma <= 0):
        positive = E[E > 0]
        floor = positive.min() if positive.size else 1.0
        bad = np.flatnonzero(sigma <= 0)
        notes.append(f"zero local scale for entities {bad.tolist()}; using {floor:.6g}")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
        sigma[bad] = floor
    W = np.exp(-(E**2) / np.outer(sigma, sigma))
    np.fill_diagonal(W, 1.0)
    return W, notes


def _givens_pairs(C):
    return [(i, j) for i in range(C - 1) for j in range(i + 1, C)]


def _rotation(theta, C, pairs):
    R = np.eye(C)
    for t, (i, j) in zip(theta, pairs):
        c, s = np.cos(t), np.sin(t)
        G = np.eye(C)
        G[i, i] = G[j, j] = c
        G[i, j], G[j, i] = -s, s
        R = R @ G
    return R


def _rotation_grads(theta, C, pairs):
    mats = []
    for t, (i, j) in zip(theta, pairs):
        c, s = np.cos(t), np.sin(t)
        G = np.eye(C)
        G[i, i] = G[j, j] = c
        G[i, j], G[j, i] = -s, s
        dG = np.zeros((C, C))
        dG[i, i] = dG[j, j] = -s
        dG[i, j], dG[j, i] = -c, c
        mats.append((G, dG))
    grads = []
    for k in range(len(mats)):
        R = np.eye(C)
        for idx, (G, dG) in enumerate(mats):
            R = R @ (dG if idx == k else G)
        grads.append(R)
    return grads


def _alignment(theta, X, pairs):
    n, C = X.shape
    Z = X @ _rotation(theta, C, pairs)
    Z2 = Z * Z
    # rows the eigenvectors do not reach carry no indicator information;
    # they count as worst case (C) and drop out of the gradient
    norms = Z2.sum(axis=1)
    live = norms > 1e-12 * C / n
    rows = np.flatnonzero(live)
    m = np.argmax(Z2[rows], axis=1)
    M2 = Z2[rows, m]
    J = float(np.sum(Z2[rows] / M2[:, None])) + C * (n - rows.size)
    grad = np.zeros(len(pairs))
    for k, dR in enumerate(_rotation_grads(theta, C, pairs)):
        A = X[rows] @ dR
        Zr = Z[rows]
        dM2 = 2.0 * Zr[np.arange(rows.size), m] * A[np.arange(rows.size), m]
        grad[k] = np.sum(2.0 * Zr * A / M2[:, None] - Z2[rows] * (dM2 / M2**2)[:, None])
    return J, grad


def rotation_cost(X) -> tuple:
    """Best alignment of the rows of ``X`` (n x C) with the coordinate axes.

    Minimizes ``J = sum_ij Z_ij^2 / max_j Z_ij^2`` over rotations
    ``Z = X R`` parametrized by Givens angles.  Returns ``(cost, Z)`` with
    ``cost = (J / n - 1) / C`` in [0, 1 - 1/C]; 0 means every row lies on an
    axis.
    """
    n, C = X.shape
    if C == 1:
        return 0.0, X.copy()
    pairs = _givens_pairs(C)
    res = minimize(_alignment, np.zeros(len(pairs)), args=(X, pairs), jac=True,
                   method="BFGS", options={"gtol": 1e-10, "maxiter": 500})
    Z = X @ _rotation(res.x, C, pairs)
    J, _ = _alignment(res.x, X, pairs)
    return (J / n - 1.0) / C, Z


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _compact(labels):
    order = {}
    for lab in labels:
        order.setdefault(int(lab), len(order) + 1)
    return np.array([order[int(lab)] for lab in labels])


def self_tuning_cluster(W, C_max: int = 10, slack: float = 0.01,
                        min_eigenvalue: float = 0.5) -> ClusterResult:
    """Spectral clustering that picks its own number of groups.

    The diagonal of ``W`` is ignored.  For each candidate ``C`` the leading
    ``C`` eigenvectors of ``D^-1/2 W D^-1/2`` are rotated toward an
    indicator structure (incrementally: the previous best rotation plus the
    next eigenvector, and also from scratch).  The chosen ``C`` is the
    largest whose alignment cost is within ``slack`` of the best.

    Candidates with ``C >= 2`` are only considered while the ``C``-th
    eigenvalue is at least ``min_eigenvalue``; a single group is returned
    when none qualifies.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or not np.allclose(W, W.T, rtol=0, atol=1e-12):
        raise ValueError("affinity must be a symmetric square matrix")
    n = W.shape[0]
    A = W.copy()
    np.fill_diagonal(A, 0.0)
    deg = A.sum(axis=1)
    deg[deg <= 0] = 1e-300
    inv = 1.0 / np.sqrt(deg)
    L = inv[:, None] * A * inv[None, :]
    evals, evecs = np.linalg.eigh((L + L.T) / 2)
    order = np.argsort(-evals, kind="stable")
    evals, evecs = evals[order], _fix_signs(evecs[:, order])

    C_max = max(1, min(C_max, n))
    costs = {1: 0.0}
    rotated = {1: evecs[:, :1]}
    for C in range(2, C_max + 1):
        if evals[C - 1] < min_eigenvalue:
            break
        inc_cost, inc_Z = rotation_cost(np.column_stack([rotated[C - 1], evecs[:, C - 1]]))
        raw_cost, raw_Z = rotation_cost(evecs[:, :C])
        if raw_cost < inc_cost:
            inc_cost, inc_Z = raw_cost, raw_Z
        costs[C], rotated[C] = inc_cost, inc_Z

    multi = {c: v for c, v in costs.items() if c >= 2}
    if multi:
        best = min(multi.values())
        chosen = max(c for c, v in multi.items() if v <= best + slack)
    else:
        chosen = 1
    labels = _compact(np.argmax(rotated[chosen] ** 2, axis=1))
    return ClusterResult(int(labels.max()), labels, W, costs=costs, eigenvalues=evals)


def cluster_entities(entities: Sequence[Entity], cfg: Optional[SolverConfig] = None,
                     K: int = 7, C_max: int = 10, slack: float = 0.01,
                     min_eigenvalue: float = 0.5,
                     cache: Optional[RStarCache] = None) -> ClusterResult:
    """Dissimilarity, affinity and self-tuning clustering in one call."""
    E, kept, excluded = pairwise_dissimilarity(entities, cfg, cache)
    notes = [f"entity {e.key}: zero own representation error; excluded" for e in excluded]
    if len(kept) < 2:
        raise DegenerateMeasureError("fewer than two entities left to cluster")
    W, wnotes = to_affinity(E, K)
    res = self_tuning_cluster(W, C_max, slack, min_eigenvalue)
    res.E = E
    res.entities = [e.key for e in kept]
    res.excluded = [e.key for e in excluded]
    res.warnings = notes + wnotes
    return res
