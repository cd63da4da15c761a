import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import mask_from_list, real_from_list
from softseg.dicelosses import (
    confusion_counts,
    dice_loss,
    dice_loss_from_counts,
    dice_loss_gradient,
    seqsum,
    soft_dice_loss,
    soft_target,
)
from softseg.volcore import Dims3, ProbabilityMap, REAL64, Volume3D

D4 = (4, 1, 1)


def test_confusion_counts_fixture():
    c = confusion_counts(mask_from_list([1, 1, 0, 0], D4), mask_from_list([1, 0, 1, 0], D4))
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)
    assert c.total == 4


def test_confusion_counts_identity_and_empty(rng):
    t = Volume3D.mask(rng.random(64) < 0.3, (4, 4, 4))
    c = confusion_counts(t, t)
    assert c.fp == c.fn == 0
    empty = Volume3D.mask(np.zeros(64, dtype=bool), (4, 4, 4))
    c = confusion_counts(t, empty)
    assert c.tp == c.fp == 0 and c.fn == t.count()


def test_confusion_counts_dims_mismatch():
    with pytest.raises(ValueError, match="dims mismatch"):
        confusion_counts(mask_from_list([1, 0], (2, 1, 1)), mask_from_list([1, 0], (1, 2, 1)))


def test_dice_loss_fixture():
    lv = dice_loss(mask_from_list([1, 1, 0, 0], D4), real_from_list([1, 0.5, 0.5, 0], D4))
    assert lv.numerator == 1.5
    assert lv.denominator == 2.0
    assert lv.value == -0.75


def test_dice_loss_perfect_and_empty(rng):
    t = Volume3D.mask(rng.random(27) < 0.5, (3, 3, 3))
    assert dice_loss(t, t.as_real()).value == -1.0
    z = Volume3D.mask(np.zeros(27, dtype=bool), (3, 3, 3))
    assert dice_loss(z, z.as_real()).value == -1.0


def test_dice_loss_rejects_bad_pred():
    with pytest.raises(ValueError):
        dice_loss(mask_from_list([1, 0], (2, 1, 1)), real_from_list([1.5, 0], (2, 1, 1)))


def test_soft_dice_fixture():
    T = mask_from_list([1, 0, 0], (3, 1, 1))
    D = mask_from_list([0, 1, 0], (3, 1, 1))
    P = real_from_list([1, 1, 0], (3, 1, 1))
    lv = soft_dice_loss(T, D, 0.3, P)
    assert lv.value == pytest.approx(-1.3 / 1.65, rel=1e-15)
    assert lv.value == pytest.approx(-0.787878787878, abs=1e-12)


def test_soft_dice_reductions(rng):
    dims = Dims3(4, 4, 4)
    t = rng.random(64) < 0.2
    d = (rng.random(64) < 0.2) & ~t
    T, D = Volume3D.mask(t, dims), Volume3D.mask(d, dims)
    P = Volume3D.real(rng.random(64), dims)
    plain = dice_loss(T, P)
    assert soft_dice_loss(T, D, 0.0, P) == plain
    empty = Volume3D.mask(np.zeros(64, dtype=bool), dims)
    assert soft_dice_loss(T, empty, 0.7, P) == plain


def test_soft_dice_requires_disjoint():
    T = mask_from_list([1, 1, 0], (3, 1, 1))
    D = mask_from_list([0, 1, 1], (3, 1, 1))
    with pytest.raises(ValueError, match="T and D must be disjoint"):
        soft_dice_loss(T, D, 0.3, real_from_list([0, 0, 0], (3, 1, 1)))


def test_soft_target_values():
    T = mask_from_list([1, 0, 0], (3, 1, 1))
    D = mask_from_list([0, 1, 0], (3, 1, 1))
    assert soft_target(T, D, 0.3).data.tolist() == [1.0, 0.3, 0.0]
    with pytest.raises(ValueError):
        soft_target(T, D, 1.0)


def test_counts_form_equals_mask_form(rng):
    for _ in range(300):
        dims = Dims3(*(int(v) for v in rng.integers(1, 7, size=3)))
        t = Volume3D.mask(rng.random(dims.size) < rng.random(), dims)
        p = Volume3D.mask(rng.random(dims.size) < rng.random(), dims)
        a = dice_loss_from_counts(confusion_counts(t, p))
        b = dice_loss(t, p).value
        assert abs(a - b) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=40),
)
def test_loss_in_range(pairs):
    s = np.array([a for a, _ in pairs])
    p = np.array([b for _, b in pairs])
    dims = Dims3(len(pairs), 1, 1)
    v = dice_loss(Volume3D.real(s, dims), ProbabilityMap(dims, REAL64, p)).value
    assert -1.0 <= v <= 0.0


def test_sequential_sum_order():
    x = np.array([1e16, 1.0, -1e16, 1.0])
    # left to right: (1e16 + 1) rounds to 1e16, so only the last 1 survives
    assert seqsum(x) == 1.0
    assert seqsum(np.array([])) == 0.0


def test_pairwise_summation_option():
    T = mask_from_list([1, 1, 0, 0], D4)
    P = real_from_list([1, 0.5, 0.5, 0], D4)
    assert dice_loss(T, P, summation="pairwise").value == -0.75
    with pytest.raises(ValueError):
        dice_loss(T, P, summation="kahan")


def test_dice_loss_is_deterministic(rng):
    dims = Dims3(8, 8, 8)
    s = Volume3D.real(rng.random(dims.size), dims)
    p = Volume3D.real(rng.random(dims.size), dims)
    assert dice_loss(s, p).value == dice_loss(s, p).value


# -- gradient -------------------------------------------------------------------


def test_gradient_single_voxel():
    g = dice_loss_gradient(real_from_list([1.0], (1, 1, 1)), real_from_list([1.0], (1, 1, 1)))
    assert g.data.tolist() == [-0.5]
    fd = oracles.central_difference([1.0], [1.0])
    assert fd[0] == pytest.approx(-0.5, rel=1e-9)


def test_gradient_zero_truth():
    g = dice_loss_gradient(real_from_list([0.0], (1, 1, 1)), real_from_list([0.5], (1, 1, 1)))
    assert g.data.tolist() == [0.0]
    assert oracles.central_difference([0.0], [0.5])[0] == 0.0


def test_gradient_undefined_when_empty():
    z = real_from_list([0.0, 0.0], (2, 1, 1))
    with pytest.raises(ValueError, match="gradient undefined"):
        dice_loss_gradient(z, z)


def test_gradient_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(25):
        n = int(rng.integers(1, 65))
        s = rng.random(n) if rng.random() < 0.5 else (rng.random(n) < 0.3).astype(float)
        p = rng.random(n)
        dims = Dims3(n, 1, 1)
        g = dice_loss_gradient(Volume3D.real(s, dims), Volume3D.real(p, dims)).data
        worst = max(worst, oracles.relative_error(g, oracles.central_difference(s, p)).max())
    assert worst < 1e-6
