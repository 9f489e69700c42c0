"""Spatial grouping of five synthetic persons performing two actions.

Persons 1-3 perform action 1, persons 4-5 perform action 2.  Each person
gets a nonnegative dictionary; a person is then coded with everyone else's
dictionaries at once, and the share of its code that falls on each other
person's atoms is the similarity.  Thresholding gives the groups.

Run:  python demos/group_demo.py
"""

import numpy as np

from actiongroup.grouping import group_persons
from actiongroup.sparse_model import SolverConfig
from actiongroup.spatiotemporal import learn_unit
from actiongroup.synth import Scenario, generate

SEED = 7
K_ATOMS = 16

scn = Scenario(actions=[[1], [1], [1], [2], [2]], n_patches=200, seed=SEED)
data = generate(scn)
solver = SolverConfig(seed=SEED)

patchsets = [data.patchsets[(p, 0)] for p in range(1, 6)]
dicts = [learn_unit(ps, K_ATOMS, solver, SEED) for ps in patchsets]

res = group_persons(patchsets, dicts, solver)

np.set_printoptions(precision=2, suppress=True)
print("similarity S between persons (1 = same action):")
print(res.S.values)
print(f"threshold tau = {res.tau:.3f}")
print("groups:", res.partition)
print("truth :", [[1, 2, 3], [4, 5]])
