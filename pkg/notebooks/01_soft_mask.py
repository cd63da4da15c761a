# coding: utf-8

# # Building a soft mask
#
# A rater's binary lesion mask is confident in the lesion core and much less so at its rim. Here we grow a thin shell around the mask, keep only shell voxels that look lesion-bright on FLAIR, and give them a partial label γ.

# In[1]:

import numpy as np

from softseg import SoftMaskSpec, SynthParams, build_soft_mask, generate_case


# A synthetic 32³ case: three bright blobs on a noisy background, with two rater masks.

# In[2]:

case = generate_case(1000)
truth, flair = case.truth_r1, case.intensity
print("lesion voxels (rater 1):", truth.count())
print("lesion voxels (rater 2):", case.truth_r2.count())


# The gate is the 10th nearest-rank percentile of FLAIR inside the lesion. Only shell voxels at or above it can be softened.

# In[3]:

sm = build_soft_mask(truth, flair, SoftMaskSpec(target_percent=120, gamma=0.3))
print("gate threshold:", round(sm.threshold, 2))
print("dilated voxels:", sm.dilated.count(), "of budget", truth.count() * 120 // 100 - truth.count())
print("values present:", sorted(set(np.unique(sm.volume.data))))


# How does the size of the soft region grow with the target percentage?

# In[4]:

for pct in (100, 110, 120, 130, 140):
    d = build_soft_mask(truth, flair, SoftMaskSpec(pct, 0.3)).dilated.count()
    print(f"{pct}%: {d:4d} soft voxels")


# A middle slice through the first lesion, with `#` for the core, `+` for soft voxels and `.` elsewhere.

# In[5]:

z = int(np.argmax(truth.grid.sum(axis=(1, 2))))
core = truth.grid[z].astype(bool)
soft = sm.dilated.grid[z].astype(bool)
for row_core, row_soft in zip(core, soft):
    print("".join("#" if c else "+" if s else "." for c, s in zip(row_core, row_soft)))
