import numpy as np
import pytest

import oracles
from conftest import real_from_list
from softseg.morph3d import FACE6, FULL26, connected_components
from softseg.postproc import (
    DEFAULT_GRID,
    PostprocSpec,
    binarize,
    filter_small_components,
    optimal_threshold,
    postprocess,
    threshold_scores,
)
from softseg.volcore import Dims3, ProbabilityMap, REAL64, Volume3D


def two_blobs(small=18, large=19):
    """Two separated straight runs of voxels of the given sizes."""
    g = np.zeros((3, 3, 24), dtype=bool)
    g[0, 0, :small] = True
    g[2, 2, :large] = True
    return Volume3D.from_grid(g)


def test_default_grid():
    assert len(DEFAULT_GRID) == 19
    assert DEFAULT_GRID[0] == 0.05 and DEFAULT_GRID[2] == 0.15 and DEFAULT_GRID[-1] == 0.95


def test_binarize_examples():
    p = real_from_list([0.2, 0.5, 0.8], (3, 1, 1))
    assert binarize(p, 0.5).data.tolist() == [0, 1, 1]
    assert binarize(p, 0.0).count() == 3
    q = real_from_list([0.2, 1.0, 0.999], (3, 1, 1))
    assert binarize(q, 1.0).data.tolist() == [0, 1, 0]
    with pytest.raises(ValueError):
        binarize(p, 1.5)


def test_binarize_monotone(rng):
    p = Volume3D.real(rng.random(200), (200, 1, 1))
    for t1, t2 in zip(DEFAULT_GRID, DEFAULT_GRID[1:]):
        hi = binarize(p, t2).data.astype(bool)
        lo = binarize(p, t1).data.astype(bool)
        assert np.all(lo[hi])


def test_filter_keeps_19_drops_18():
    m = two_blobs()
    out = filter_small_components(m, 19, FACE6)
    assert out.count() == 19
    sizes = connected_components(out, FACE6).sizes[1:].tolist()
    assert sizes == [19]
    assert oracles.flood_fill_labels(m.grid, 6).count(1) == 18


def test_filter_identity_and_empty(rng):
    m = Volume3D.mask(rng.random(125) < 0.3, (5, 5, 5))
    assert filter_small_components(m, 1, FACE6) == m
    empty = Volume3D.mask(np.zeros(125, dtype=bool), (5, 5, 5))
    assert filter_small_components(empty, 19, FULL26) == empty


def test_filter_subset_and_idempotent(rng):
    for _ in range(30):
        m = Volume3D.mask(rng.random(512) < 0.25, (8, 8, 8))
        k = int(rng.integers(1, 10))
        once = filter_small_components(m, k, FULL26)
        assert np.all(m.data[once.data.astype(bool)] == 1)
        assert filter_small_components(once, k, FULL26) == once


def test_filter_depends_on_connectivity():
    g = np.zeros((3, 3, 3), dtype=bool)
    g[0, 0, 0] = g[1, 1, 1] = True
    m = Volume3D.from_grid(g)
    assert filter_small_components(m, 2, FACE6).count() == 0
    assert filter_small_components(m, 2, FULL26).count() == 2


def test_postprocess_defaults():
    spec = PostprocSpec()
    assert spec.threshold == 0.5 and spec.min_component_size == 19
    g = np.zeros((3, 3, 24))
    g[0, 0, :18] = 0.9
    g[2, 2, :19] = 0.7
    g[1, 1, :] = 0.3
    out = postprocess(ProbabilityMap.from_volume(Volume3D.from_grid(g, REAL64)), spec)
    assert out.count() == 19


def _case(prob_on, prob_off, truth):
    t = Volume3D.mask(truth, (len(truth), 1, 1))
    p = Volume3D.real(np.where(truth, prob_on, prob_off), (len(truth), 1, 1))
    return t, p


def test_optimal_threshold_separable_case():
    truth = np.array([1, 1, 0, 0, 0, 1, 0], dtype=bool)
    case = _case(0.9, 0.1, truth)
    assert optimal_threshold([case]) == 0.15
    grid = list(DEFAULT_GRID)
    scores = oracles.dice_mean_over_grid([(truth, case[1].data)], grid)
    assert scores[grid.index(0.15)] == 1.0 and scores[grid.index(0.1)] < 1.0


def test_optimal_threshold_binary_prob():
    truth = np.array([0, 1, 1, 0], dtype=bool)
    assert optimal_threshold([_case(1.0, 0.0, truth)]) == 0.05


def test_optimal_threshold_tie_goes_low():
    truth = np.array([1, 0], dtype=bool)
    case = _case(0.9, 0.1, truth)
    assert optimal_threshold([case], [0.7, 0.3, 0.5]) == 0.3


def test_optimal_threshold_errors():
    case = _case(0.9, 0.1, np.array([1, 0], dtype=bool))
    with pytest.raises(ValueError):
        optimal_threshold([], DEFAULT_GRID)
    with pytest.raises(ValueError):
        optimal_threshold([case], [])


def test_optimal_threshold_matches_exhaustive_oracle(rng):
    for _ in range(20):
        cases, plain = [], []
        for _ in range(int(rng.integers(1, 4))):
            n = int(rng.integers(5, 60))
            truth = rng.random(n) < 0.4
            prob = np.clip(truth * rng.random() + rng.normal(0.3, 0.25, n), 0, 1)
            dims = Dims3(n, 1, 1)
            cases.append((Volume3D.mask(truth, dims), Volume3D.real(prob, dims)))
            plain.append((truth, prob))
        grid = list(DEFAULT_GRID)
        scores = oracles.dice_mean_over_grid(plain, grid)
        best = max(scores)
        expected = min(t for t, s in zip(grid, scores) if s == best)
        assert threshold_scores(cases, grid) == scores
        assert optimal_threshold(cases, grid) == expected


def test_spec_validation():
    with pytest.raises(ValueError):
        PostprocSpec(threshold=1.5)
    with pytest.raises(ValueError):
        PostprocSpec(min_component_size=0)
    assert PostprocSpec(conn=26).conn is FULL26
