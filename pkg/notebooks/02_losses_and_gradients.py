# coding: utf-8

# # Dice loss on soft targets
#
# The loss is the negated soft Dice between a target S (binary or soft) and a probability map P. We check a few values by hand and then compare the analytic gradient with finite differences.

# In[1]:

import numpy as np

from softseg import Volume3D, dice_loss, dice_loss_gradient, soft_dice_loss


# Four voxels, two of them lesion. A prediction that hedges on the middle pair loses 0.75.

# In[2]:

t = Volume3D.mask([1, 1, 0, 0], (4, 1, 1))
p = Volume3D.real([1.0, 0.5, 0.5, 0.0], (4, 1, 1))
print(dice_loss(t, p).value)   # -0.75
print(dice_loss(t, t).value)   # -1.0


# Softening a neighbor with γ = 0.3 rewards predictions that bleed into it a little.

# In[3]:

t = Volume3D.mask([1, 0, 0], (3, 1, 1))
d = Volume3D.mask([0, 1, 0], (3, 1, 1))
p = Volume3D.real([1.0, 1.0, 0.0], (3, 1, 1))
print("binary target:", dice_loss(t, p).value)
print("soft target:  ", soft_dice_loss(t, d, 0.3, p).value)


# ## Gradient check
#
# dL/dP_j = -(S_j·D - 0.5·N) / D², where N = ΣSP and D = 0.5ΣP + 0.5ΣS. Central differences should agree to many digits.

# In[4]:

rng = np.random.default_rng(0)
s = rng.random(64)
q = rng.random(64)
dims = (64, 1, 1)
analytic = dice_loss_gradient(Volume3D.real(s, dims), Volume3D.real(q, dims)).data

h = 1e-6
numeric = np.empty_like(q)
for j in range(q.size):
    up, dn = q.copy(), q.copy()
    up[j] += h
    dn[j] -= h
    lu = dice_loss(Volume3D.real(s, dims), Volume3D.real(up, dims)).value
    ld = dice_loss(Volume3D.real(s, dims), Volume3D.real(dn, dims)).value
    numeric[j] = (lu - ld) / (up[j] - dn[j])
print("max abs difference:", np.abs(analytic - numeric).max())
