# coding: utf-8

# # Does a soft target buy recall?
#
# Train the same per-voxel logistic model twice, once on the plain rater mask and once on the soft mask (120%, γ = 0.3), then score both against rater 1. The claim under test is only directional: recall should not drop, and Dice should stay within a point.
#
# The acceptance suite runs this on 20 cases of 32³. Here we use fewer, smaller cases so the script finishes in seconds.

# In[1]:

from softseg import PostprocSpec, SoftMaskSpec, SynthParams, TrainConfig, evaluate, generate_case, train


# In[2]:

params = SynthParams(dims=(24, 24, 24))
generated = [generate_case(seed, params) for seed in range(1000, 1006)]
cases = [(c.intensity, c.truth_r1) for c in generated]


# In[3]:

results = {}
for mode in ("binary", "soft"):
    model, history = train(cases, TrainConfig(mode, SoftMaskSpec(120, 0.3), iterations=300))
    ev = evaluate(model, cases)
    results[mode] = ev
    print(f"{mode:6s} loss {history[0]:+.4f} -> {history[-1]:+.4f}   threshold {ev.threshold:.2f}")


# In[4]:

for mode, ev in results.items():
    m = ev.mean
    print(f"{mode:6s} dice {100 * m.dice:5.1f}  precision {100 * m.precision:5.1f}  recall {100 * m.recall:5.1f}")


# ## The rater gap
#
# Rater 2 is an eroded copy of rater 1, so a model trained on rater 1 scores lower against rater 2, even with the same threshold.

# In[5]:

model, _ = train(cases, TrainConfig(iterations=300))
r1 = evaluate(model, cases)
r2 = evaluate(model, [(c.intensity, c.truth_r2) for c in generated], PostprocSpec(r1.threshold))
print(f"dice vs rater 1: {r1.mean.dice:.3f}   vs rater 2: {r2.mean.dice:.3f}")
