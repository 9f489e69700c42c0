"""Synthetic ground truth: actions as unions of nonnegative subspaces.

Each action owns a nonnegative basis of ``d`` unit atoms.  A patch of a
person performing that action is a sparse nonnegative combination of the
atoms plus Gaussian noise, rectified at zero.  The module also carries the
exhaustive nonnegative-lasso oracle used to check the coding solver.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, SeparationInfeasibleError
from .features import PatchSet

__all__ = ["Scenario", "SyntheticData", "generate", "oracle_nn_lasso", "load_scenario"]


@dataclass
class Scenario:
    """Ground-truth description of a synthetic scene.

    ``actions[p][t]`` is the action id of person ``p`` in interval ``t``;
    id 0 marks the person as absent there (no patches are generated).
    """

    actions: list
    m: int = 100
    d: int = 5
    sparsity: int = 3
    sigma: float = 0.02
    n_patches: int = 400
    separation: float = 0.5
    atom_density: float = 0.3
    seed: int = 0

    def __post_init__(self):
        self.actions = [list(map(int, row)) for row in self.actions]
        if not self.actions or not self.actions[0]:
            raise ConfigurationError("scenario needs at least one person and one interval")
        if any(a < 0 for row in self.actions for a in row):
            raise ConfigurationError("action ids must be >= 0 (0 = absent)")
        if len({len(row) for row in self.actions}) != 1:
            raise ConfigurationError("every person needs one action per interval")
        if self.sigma < 0 or self.d < 1 or self.sparsity < 1:
            raise ConfigurationError("need sigma >= 0, d >= 1 and sparsity >= 1")
        if self.n_patches < 1 or self.m < 1:
            raise ConfigurationError("need m >= 1 and n_patches >= 1")
        if not 0 < self.atom_density <= 1:
            raise ConfigurationError("atom_density must lie in (0, 1]")

    @property
    def n_persons(self) -> int:
        return len(self.actions)

    @property
    def n_intervals(self) -> int:
        return len(self.actions[0])

    @property
    def action_ids(self) -> list:
        return sorted({a for row in self.actions for a in row if a != 0})

    def to_json(self) -> dict:
        return asdict(self)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return Scenario(**json.load(fh))


@dataclass
class SyntheticData:
    patchsets: dict  # (person_id, interval) -> PatchSet, person ids one-based
    labels: dict  # (person_id, interval) -> action id
    bases: dict  # action id -> (m, d) basis
    scenario: Scenario = field(repr=False)


def _draw_atom(m, density, rng):
    support = max(1, int(round(density * m)))
    atom = np.zeros(m)
    atom[rng.choice(m, size=support, replace=False)] = rng.random(support) + 0.1
    return atom / np.linalg.norm(atom)


def _draw_bases(scn: Scenario, rng):
    for _ in range(1000):
        bases = {
            a: np.column_stack([_draw_atom(scn.m, scn.atom_density, rng) for _ in range(scn.d)])
            for a in scn.action_ids
        }
        worst = 0.0
        for a, b in itertools.combinations(scn.action_ids, 2):
            worst = max(worst, float(np.max(bases[a].T @ bases[b])))
        if worst <= scn.separation:
            return bases
    raise SeparationInfeasibleError(
        f"no bases with cross-action cosine <= {scn.separation} after 1000 draws"
    )


def _draw_patches(basis, n, s, sigma, rng):
    m, d = basis.shape
    s = min(s, d)
    codes = np.zeros((d, n))
    for j in range(n):
        codes[rng.choice(d, size=s, replace=False), j] = rng.uniform(0.5, 1.5, size=s)
    X = basis @ codes
    if sigma > 0:
        X = X + sigma * rng.standard_normal((m, n))
    return np.maximum(X, 0.0)


def generate(scenario: Scenario) -> SyntheticData:
    """Draw patch sets for every (person, interval) of the scenario.

    Bases come from a master stream; each (person, interval) then gets its
    own child stream, so the output is reproducible per seed and does not
    depend on generation order.
    """
    root = np.random.SeedSequence(scenario.seed)
    basis_seq, patch_seq = root.spawn(2)
    bases = _draw_bases(scenario, np.random.default_rng(basis_seq))
    streams = patch_seq.spawn(scenario.n_persons * scenario.n_intervals)
    patchsets, labels = {}, {}
    for p, row in enumerate(scenario.actions):
        for t, action in enumerate(row):
            if action == 0:
                continue
            rng = np.random.default_rng(streams[p * scenario.n_intervals + t])
            X = _draw_patches(bases[action], scenario.n_patches, scenario.sparsity, scenario.sigma, rng)
            patchsets[(p + 1, t)] = PatchSet(X, person_id=p + 1, interval=t)
            labels[(p + 1, t)] = action
    return SyntheticData(patchsets, labels, bases, scenario)


def oracle_nn_lasso(x, D, lam: float, tol: float = 1e-9) -> np.ndarray:
    """Exact minimizer of 0.5*||x - Da||^2 + lam*sum(a) over a >= 0.

    Every support is enumerated; on each one the stationarity system
    ``D_S' D_S a_S = D_S' x - lam`` is solved and the candidate kept only if
    it is positive on the support and satisfies the full KKT conditions.
    The feasible candidate of least objective is returned.  Exponential in
    the number of atoms, hence limited to ``k <= 12``.
    """
    D = np.asarray(getattr(D, "atoms", D), dtype=np.float64)
    x = np.asarray(x, dtype=np.float64).ravel()
    k = D.shape[1]
    if k > 12:
        raise ConfigurationError(f"oracle enumerates 2^k supports; k={k} exceeds 12")
    G = D.T @ D
    q = D.T @ x - lam
    scale = max(1.0, float(np.abs(q).max(initial=0.0)), float(np.abs(G).max(initial=0.0)))
    best, best_val = np.zeros(k), None
    for size in range(k + 1):
        for support in itertools.combinations(range(k), size):
            a = np.zeros(k)
            if size:
                S = list(support)
                a[S] = np.linalg.lstsq(G[np.ix_(S, S)], q[S], rcond=None)[0]
                if np.any(a[S] <= 0):
                    continue
            g = G @ a - q
            on = a > 0
            if np.any(np.abs(g[on]) > tol * scale) or np.any(g[~on] < -tol * scale):
                continue
            r = x - D @ a
            val = 0.5 * float(r @ r) + lam * float(a.sum())
            if best_val is None or val < best_val:
                best, best_val = a, val
    return best
