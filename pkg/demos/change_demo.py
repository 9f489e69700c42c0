"""Temporal change detection: who switched action between two intervals?

Four persons over two intervals; only person 3 switches from action 1 to
action 2.  The change energy of a person compares coding both intervals
with the other interval's dictionary against coding them with their own;
normalized over persons, entries above r / P are flagged.

Run:  python demos/change_demo.py
"""

from actiongroup.sparse_model import SolverConfig
from actiongroup.spatiotemporal import learn_unit
from actiongroup.synth import Scenario, generate
from actiongroup.temporal import change_vector

SEED = 3
K_ATOMS = 16

scn = Scenario(actions=[[1, 1], [1, 1], [1, 2], [2, 2]], n_patches=200, seed=SEED)
data = generate(scn)
solver = SolverConfig(seed=SEED)


def interval(t):
    ps = [data.patchsets[(p, t)] for p in range(1, 5)]
    return ps, [learn_unit(x, K_ATOMS, solver, SEED) for x in ps]


ps0, d0 = interval(0)
ps1, d1 = interval(1)
cv = change_vector(ps0, ps1, d0, d1, solver)

for pid, raw, norm in zip(cv.person_ids, cv.raw, cv.normalized):
    flag = "changed" if pid in cv.changed else ""
    print(f"person {pid}: energy {raw:10.3f}  normalized {norm:.3f}  {flag}")
print(f"threshold mu = {cv.mu:.3f}, low confidence: {cv.low_confidence}")
