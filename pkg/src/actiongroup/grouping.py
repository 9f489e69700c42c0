"""Per-interval action grouping by leave-one-out coding.

Each person's patches are coded against the concatenated dictionaries of
everybody else.  The share of l1 energy landing on person i's block says
how much of j's motion i's atoms explain; the reciprocal minimum of the two
shares is the similarity.  Thresholding the similarity graph at
``r / (P - 1)`` and taking connected components gives the groups.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components as _cc

from .errors import ConfigurationError, DimensionMismatchError, UseSpecialCaseError
from .sparse_model import SolverConfig, SparseCodes, sparse_code

__all__ = [
    "GroupingConfig",
    "AffinityMatrix",
    "GroupingResult",
    "spatial_threshold",
    "temporal_threshold",
    "pair_threshold",
    "loo_code",
    "similarity_matrix",
    "binarize",
    "connected_components",
    "group_persons",
]


@dataclass(frozen=True)
class GroupingConfig:
    r: float = 0.9
    low_confidence_ratio: float = 1.5

    def __post_init__(self):
        if not 0 <= self.r <= 1:
            raise ConfigurationError("relaxation constant r must lie in [0, 1]")
        if self.low_confidence_ratio < 1:
            raise ConfigurationError("low_confidence_ratio must be >= 1")


def spatial_threshold(r: float, n_persons: int) -> float:
    """Edge threshold for grouping ``n_persons`` simultaneous persons."""
    return r / (n_persons - 1)


def temporal_threshold(r: float, n_persons: int) -> float:
    """Change threshold on the normalized change vector."""
    return r / n_persons


def pair_threshold(r: float) -> float:
    """Threshold of the two-subject measures."""
    return r / 2


@dataclass
class AffinityMatrix:
    values: np.ndarray
    person_ids: list
    warnings: list = field(default_factory=list)

    @property
    def P(self) -> int:
        return len(self.person_ids)


@dataclass
class GroupingResult:
    partition: list
    tau: Optional[float] = None
    S: Optional[AffinityMatrix] = None
    adjacency: Optional[np.ndarray] = None
    warnings: list = field(default_factory=list)


def _by_person(items) -> dict:
    if isinstance(items, Mapping):
        return dict(items)
    out = {}
    for pos, item in enumerate(items):
        pid = getattr(item, "person_id", None)
        out[pid if pid is not None else pos + 1] = item
    return out


def loo_code(j, patchsets, dicts, cfg: Optional[SolverConfig] = None) -> SparseCodes:
    """Code person ``j``'s patches over everybody else's dictionaries.

    ``patchsets`` and ``dicts`` are sequences (person ids taken from the
    items, else one-based positions) or mappings keyed by person id.  The
    concatenation follows their order with ``j`` left out, and
    ``block_index`` records which rows belong to whom.
    """
    ps = _by_person(patchsets)
    ds = _by_person(dicts)
    if len(ds) < 3:
        raise UseSpecialCaseError("leave-one-out grouping needs P >= 3; use the pair measures")
    X = ps[j]
    others = [pid for pid in ds if pid != j]
    blocks, start = [], 0
    atoms = []
    for pid in others:
        D = np.asarray(getattr(ds[pid], "atoms", ds[pid]))
        if D.shape[0] != np.asarray(getattr(X, "data", X)).shape[0]:
            raise DimensionMismatchError(f"dictionary of person {pid} has the wrong row count")
        atoms.append(D)
        blocks.append((pid, start, start + D.shape[1]))
        start += D.shape[1]
    codes = sparse_code(X, np.hstack(atoms), cfg)
    codes.block_index = blocks
    return codes


def similarity_matrix(loo_codes: Mapping) -> AffinityMatrix:
    """Reciprocal action-similarity matrix from every person's blocked codes.

    A person whose codes carry no energy at all gets similarity 0 to
    everybody (with a warning) instead of a division by zero.
    """
    ids = list(loo_codes)
    P = len(ids)
    share = np.zeros((P, P))
    notes = []
    for a, pid in enumerate(ids):
        total = loo_codes[pid].energy
        if total <= 0:
            msg = f"person {pid}: leave-one-out codes are all zero; isolated"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
            share[a, :] = np.nan
            continue
        for b, qid in enumerate(ids):
            if qid != pid:
                share[a, b] = loo_codes[pid].block_energy(qid) / total
    S = np.minimum(share, share.T)
    S[np.isnan(S)] = 0.0
    np.fill_diagonal(S, 1.0)
    return AffinityMatrix(S, ids, notes)


def binarize(S: AffinityMatrix, n_present: Optional[int] = None,
             cfg: Optional[GroupingConfig] = None) -> np.ndarray:
    """Keep the edges with ``s_ij >= r / (P_present - 1)``; the diagonal stays."""
    cfg = cfg or GroupingConfig()
    P = n_present if n_present is not None else S.P
    if P < 3:
        raise UseSpecialCaseError("threshold r/(P-1) needs P >= 3")
    tau = spatial_threshold(cfg.r, P)
    adj = S.values >= tau
    np.fill_diagonal(adj, True)
    return adj


def connected_components(adjacency, person_ids: Optional[Sequence] = None) -> GroupingResult:
    """Groups as graph components, ordered by their smallest member."""
    adj = np.asarray(adjacency, dtype=bool)
    if not np.array_equal(adj, adj.T):
        raise ValueError("adjacency must be symmetric")
    ids = list(person_ids) if person_ids is not None else list(range(1, len(adj) + 1))
    _, labels = _cc(adj.astype(np.int8), directed=False)
    groups = {}
    for pid, lab in zip(ids, labels):
        groups.setdefault(lab, []).append(pid)
    partition = sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])
    return GroupingResult(partition, adjacency=adj)


def group_persons(patchsets, dicts, solver_cfg: Optional[SolverConfig] = None,
                  cfg: Optional[GroupingConfig] = None) -> GroupingResult:
    """Full per-interval grouping for three or more present persons."""
    cfg = cfg or GroupingConfig()
    ps = _by_person(patchsets)
    ds = _by_person(dicts)
    codes = {pid: loo_code(pid, ps, ds, solver_cfg) for pid in ds}
    S = similarity_matrix(codes)
    adj = binarize(S, len(ds), cfg)
    res = connected_components(adj, S.person_ids)
    res.tau = spatial_threshold(cfg.r, len(ds))
    res.S = S
    res.warnings = list(S.warnings)
    return res
