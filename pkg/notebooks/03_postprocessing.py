# coding: utf-8

# # From probabilities to masks
#
# A probability map becomes a mask in two steps: threshold, then drop connected components of 18 voxels or fewer. The threshold itself can be picked on a grid by mean Dice.

# In[1]:

import numpy as np

from softseg import FACE6, PostprocSpec, Volume3D, filter_small_components, optimal_threshold
from softseg.postproc import postprocess, threshold_scores


# Two straight runs of voxels: 18 long and 19 long. Only the second survives.

# In[2]:

g = np.zeros((3, 3, 24))
g[0, 0, :18] = 0.9
g[2, 2, :19] = 0.6
prob = Volume3D.from_grid(g)
mask = postprocess(prob, PostprocSpec(threshold=0.5, min_component_size=19))
print("kept voxels:", mask.count())


# Connectivity matters: two voxels touching only at a corner are one component under 26-connectivity but two under 6.

# In[3]:

g = np.zeros((3, 3, 3), dtype=bool)
g[0, 0, 0] = g[1, 1, 1] = True
m = Volume3D.from_grid(g)
print(filter_small_components(m, 2, FACE6).count(), filter_small_components(m, 2, 26).count())


# ## Threshold calibration
#
# Noisy scores around a known truth. The scores are mean Dice per threshold; ties go to the smaller threshold.

# In[4]:

rng = np.random.default_rng(3)
cases = []
for _ in range(3):
    truth = rng.random(400) < 0.3
    p = np.clip(0.45 * truth + rng.normal(0.3, 0.15, 400), 0, 1)
    cases.append((Volume3D.mask(truth, (400, 1, 1)), Volume3D.real(p, (400, 1, 1))))

for t, s in zip([0.3, 0.4, 0.5, 0.6, 0.7], threshold_scores(cases, [0.3, 0.4, 0.5, 0.6, 0.7])):
    print(f"t={t:.2f}  mean dice={s:.3f}")
print("best on the default grid:", optimal_threshold(cases))
