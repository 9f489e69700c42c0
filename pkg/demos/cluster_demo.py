"""Space-time clustering of (person, interval) entities.

Three persons over four intervals, two actions.  Every entity gets its own
dictionary; pairwise relative representation errors become a locally
scaled affinity, and self-tuning spectral clustering picks the number of
clusters itself.

Run:  python demos/cluster_demo.py
"""

import numpy as np

from actiongroup.sparse_model import SolverConfig
from actiongroup.spatiotemporal import cluster_entities, make_entities
from actiongroup.synth import Scenario, generate

SEED = 11

actions = [
    [1, 1, 2, 2],
    [1, 2, 2, 1],
    [2, 2, 1, 1],
]
data = generate(Scenario(actions=actions, n_patches=200, seed=SEED))
solver = SolverConfig(seed=SEED)

entities = make_entities(data.patchsets, k=16, cfg=solver)
res = cluster_entities(entities, solver, K=5)

print(f"number of clusters chosen: {res.C}")
print("rotation cost per candidate C:", {c: round(v, 4) for c, v in res.costs.items()})
grid = np.zeros((len(actions), len(actions[0])), dtype=int)
for (pid, t), lab in zip(res.entities, res.labels):
    grid[pid - 1, t] = lab
print("labels (rows = persons, columns = intervals):")
print(grid)
print("true actions:")
print(np.array(actions))
