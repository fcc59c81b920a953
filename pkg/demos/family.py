"""
Embedding a small family ontology in the plane
==============================================

Twelve terminological axioms and four assertions about Alex, Bob, Marie
and Alice, trained in two dimensions so the result can be looked at.
"""
import sys

import numpy as np

from boxel import ModelConfig, TrainConfig, VolumeConfig, check_soundness, normalize, train
from boxel.evaluation import accuracy_strict, hard_intersection_empty
from boxel.kb import Atomic
from boxel.synthetic import FAMILY_KB, FAMILY_SUBSUMPTIONS, family_kb
from boxel.viz import render_svg

print(FAMILY_KB)

# the KB is already in normal form, so no fresh concepts appear
nkb = normalize(family_kb())
print(len(nkb.axioms), "normalized axioms,", nkb.fresh_count, "fresh names")

# a low softplus temperature lets the disjointness term of Female and Male reach zero
cfg = ModelConfig(dim=2, seed=0, volume=VolumeConfig(epsilon=0.1, temperature=0.1))
model, report = train(nkb, cfg, TrainConfig(epochs=2000, learning_rate=5e-3))
print(f"trained {report.final_epoch} epochs in {report.wall_time:.1f}s")
print("last epoch:", report.history[-1])

# read the boxes back as an interpretation and check every axiom
sound = check_soundness(model, nkb, tol=0.01)
print(sound)
print("strict accuracy on the named subsumptions:",
      accuracy_strict(model, FAMILY_SUBSUMPTIONS, tol=0.01))
print("Female and Male disjoint:", hard_intersection_empty(model, "Female", "Male"))

for name in ("Person", "Parent", "Male", "Female", "Father", "Mother"):
    b = model.materialize_box(Atomic(name))
    print(f"{name:7s} {np.round(b.lower, 3)} .. {np.round(b.upper, 3)}")

# the picture: one box per concept, one dot per person
out = sys.argv[1] if len(sys.argv) > 1 else "family.svg"
with open(out, "w") as fh:
    fh.write(render_svg(model))
print("wrote", out)
