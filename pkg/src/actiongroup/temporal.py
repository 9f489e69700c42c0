"""Who changed action: cross-interval representation-error energies.

All measures here are built from the minimized coding objective R*(X, D)
of some patch set under some dictionary.  Values are cached per
(patch set, dictionary) pair so the different measures share solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import AlignmentError, DegenerateMeasureError, UseSpecialCaseError
from .grouping import GroupingConfig, _by_person, pair_threshold, temporal_threshold
from .sparse_model import SolverConfig, representation_error

__all__ = [
    "RStarCache",
    "ChangeVector",
    "PairMeasure",
    "change_vector",
    "change_profile",
    "pair_measure_space",
    "pair_measure_time",
]


def _key(obj):
    pid = getattr(obj, "person_id", None)
    interval = getattr(obj, "interval", None)
    if pid is None or interval is None:
        return ("id", id(obj))
    return (pid, interval)


class RStarCache:
    """Memoized R*(X, D).

    Keys are the ``(person_id, interval)`` tags of the patch set and the
    dictionary; inputs missing either tag are keyed by object identity.
    ``solves`` counts the coding problems actually run.  ``map_fn`` (for
    instance a thread pool's ``map``) evaluates :meth:`prefetch` batches.
    """

    def __init__(self, cfg: Optional[SolverConfig] = None, map_fn=map):
        self.cfg = cfg or SolverConfig()
        self.map_fn = map_fn
        self._values = {}
        self._keep = []
        self.solves = 0

    def _store(self, key, X, D, value):
        self._keep.append((X, D))  # pins ids used as keys
        self._values[key] = value
        self.solves += 1

    def __call__(self, X, D) -> float:
        key = (_key(X), _key(D))
        if key not in self._values:
            self._store(key, X, D, representation_error(X, D, self.cfg))
        return self._values[key]

    def prefetch(self, pairs) -> None:
        """Solve the missing (X, D) pairs through ``map_fn`` in one batch.

        Values and the solve count are the same as calling the cache on
        each pair in turn; only the evaluation may run in parallel.
        """
        todo = {}
        for X, D in pairs:
            key = (_key(X), _key(D))
            if key not in self._values and key not in todo:
                todo[key] = (X, D)
        items = list(todo.items())
        values = self.map_fn(lambda item: representation_error(*item[1], self.cfg), items)
        for (key, (X, D)), value in zip(items, values):
            self._store(key, X, D, value)

    def __len__(self):
        return len(self._values)


@dataclass
class ChangeVector:
    pair: tuple
    person_ids: list
    raw: np.ndarray
    C: float
    normalized: np.ndarray
    mu: float
    changed: list
    low_confidence: bool

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "persons": list(self.person_ids),
            "raw": [float(v) for v in self.raw],
            "normalized": [float(v) for v in self.normalized],
            "mu": float(self.mu),
            "changed": list(self.changed),
            "low_confidence": bool(self.low_confidence),
        }


@dataclass
class PairMeasure:
    subjects: tuple
    value: float
    mu: float
    terms: tuple = field(default=(), repr=False)

    @property
    def different(self) -> bool:
        return self.value > self.mu

    def to_json(self) -> dict:
        return {"subjects": list(self.subjects), "value": float(self.value),
                "mu": float(self.mu), "different": bool(self.different)}


def _cache(cache, cfg):
    return cache if cache is not None else RStarCache(cfg)


def _energy(R, X_prev, X_cur, D_prev, D_cur) -> float:
    return abs(R(X_prev, D_cur) + R(X_cur, D_prev) - R(X_prev, D_prev) - R(X_cur, D_cur))


def change_vector(patchsets_prev, patchsets_cur, dicts_prev, dicts_cur,
                  cfg: Optional[SolverConfig] = None,
                  group_cfg: Optional[GroupingConfig] = None,
                  cache: Optional[RStarCache] = None, pair=(0, 1)) -> ChangeVector:
    """Per-person change energies between two consecutive intervals.

    Each person's energy compares coding the two intervals' patches with
    the other interval's dictionary against coding them with their own.
    Normalized by the sum over persons, an entry above ``r / P`` flags a
    change.  A max/min ratio of the normalized entries below
    ``low_confidence_ratio`` marks the verdict as low confidence: everybody
    (or nobody) changing looks the same after normalization.
    """
    group_cfg = group_cfg or GroupingConfig()
    R = _cache(cache, cfg)
    xp, xc = _by_person(patchsets_prev), _by_person(patchsets_cur)
    dp, dc = _by_person(dicts_prev), _by_person(dicts_cur)
    ids = list(dp)
    if not (set(ids) == set(dc) == set(xp) == set(xc)):
        raise AlignmentError("the two intervals do not cover the same persons")
    if len(ids) < 3:
        raise UseSpecialCaseError("the change vector needs P >= 3; use pair_measure_time")
    raw = np.array([_energy(R, xp[j], xc[j], dp[j], dc[j]) for j in ids])
    C = float(raw.sum())
    mu = temporal_threshold(group_cfg.r, len(ids))
    if C > 0:
        normalized = raw / C
        changed = [j for j, v in zip(ids, normalized) if v > mu]
        lo = normalized.min()
        low = lo > 0 and normalized.max() / lo < group_cfg.low_confidence_ratio
    else:
        normalized = np.zeros_like(raw)
        changed = []
        low = False
    return ChangeVector(tuple(pair), ids, raw, C, normalized, mu, changed, bool(low))


def change_profile(j, patchsets: Sequence, dicts: Sequence,
                   cfg: Optional[SolverConfig] = None,
                   cache: Optional[RStarCache] = None) -> list:
    """Unnormalized change energies of one person over consecutive intervals.

    ``patchsets[t]`` and ``dicts[t]`` belong to person ``j`` at interval
    ``t`` (either may be ``None`` when the person is absent).  The result
    has one entry per adjacent pair, ``None`` where a gap prevents it.
    """
    if len(patchsets) != len(dicts):
        raise AlignmentError("need one dictionary per patch set")
    R = _cache(cache, cfg)
    out = []
    for t in range(1, len(patchsets)):
        parts = (patchsets[t - 1], patchsets[t], dicts[t - 1], dicts[t])
        if any(p is None for p in parts):
            out.append(None)
        else:
            out.append(_energy(R, *parts))
    return out


def _relative(R, X, D_other, D_own, who) -> float:
    own = R(X, D_own)
    if own == 0:
        raise DegenerateMeasureError(f"{who}: zero representation error with its own dictionary")
    return abs(R(X, D_other) - own) / abs(own)


def pair_measure_space(i, j, patchsets, dicts, cfg: Optional[SolverConfig] = None,
                       group_cfg: Optional[GroupingConfig] = None,
                       cache: Optional[RStarCache] = None) -> PairMeasure:
    """Same-interval dissimilarity of two subjects.

    The larger of the two relative increases in representation error when
    a subject is coded with the other's dictionary.  Above ``r / 2`` the
    subjects are doing different actions.
    """
    group_cfg = group_cfg or GroupingConfig()
    R = _cache(cache, cfg)
    xs, ds = _by_person(patchsets), _by_person(dicts)
    a = _relative(R, xs[i], ds[j], ds[i], f"subject {i}")
    b = _relative(R, xs[j], ds[i], ds[j], f"subject {j}")
    return PairMeasure((i, j), max(a, b), pair_threshold(group_cfg.r), (a, b))


def pair_measure_time(i, patchsets_prev, patchsets_cur, dicts_prev, dicts_cur,
                      cfg: Optional[SolverConfig] = None,
                      group_cfg: Optional[GroupingConfig] = None,
                      cache: Optional[RStarCache] = None) -> PairMeasure:
    """Change of one subject between consecutive intervals, in the same
    relative form as :func:`pair_measure_space`."""
    group_cfg = group_cfg or GroupingConfig()
    R = _cache(cache, cfg)
    xp, xc = _by_person(patchsets_prev)[i], _by_person(patchsets_cur)[i]
    dp, dc = _by_person(dicts_prev)[i], _by_person(dicts_cur)[i]
    a = _relative(R, xp, dc, dp, f"subject {i} at t-1")
    b = _relative(R, xc, dp, dc, f"subject {i} at t")
    return PairMeasure((i,), max(a, b), pair_threshold(group_cfg.r), (a, b))
