"""Small utilities shared by the test modules."""

import numpy as np

from actiongroup.sparse_model import SolverConfig
from actiongroup.spatiotemporal import learn_unit
from actiongroup.synth import Scenario, generate


def scenario_units(actions, seed=0, k=32, **kw):
    """Synthetic patch sets plus one dictionary per (person, interval)."""
    data = generate(Scenario(actions=actions, seed=seed, **kw))
    cfg = SolverConfig(seed=seed)
    dicts = {key: learn_unit(ps, k, cfg, seed) for key, ps in sorted(data.patchsets.items())}
    return data, dicts


def interval(data, dicts, t):
    """Per-person mappings of patch sets and dictionaries at interval ``t``."""
    ps = {p: x for (p, tt), x in sorted(data.patchsets.items()) if tt == t}
    ds = {p: d for (p, tt), d in sorted(dicts.items()) if tt == t}
    return ps, ds


def partition_of(labels):
    """Canonical partition (sorted tuple of sorted index tuples)."""
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    return tuple(sorted(tuple(g) for g in groups.values()))


def block_affinity(sizes, rng, within=(0.8, 1.0), across=(0.0, 0.05)):
    n = sum(sizes)
    lab = np.repeat(np.arange(len(sizes)), sizes)
    W = rng.uniform(*across, (n, n))
    same = lab[:, None] == lab[None, :]
    W[same] = rng.uniform(*within, same.sum())
    W = (W + W.T) / 2
    np.fill_diagonal(W, 1.0)
    return W, lab
