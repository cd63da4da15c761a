import numpy as np
import pytest

import oracles
from softseg.morph3d import FACE6, FULL26, Connectivity, connected_components, dilate, erode
from softseg.volcore import Volume3D


def point(n, xyz):
    g = np.zeros((n, n, n), dtype=bool)
    x, y, z = xyz
    g[z, y, x] = True
    return Volume3D.from_grid(g)


def random_mask(rng, max_side=8, density=None):
    shape = tuple(int(v) for v in rng.integers(1, max_side + 1, size=3))
    density = rng.random() if density is None else density
    return rng.random(shape) < density


def test_connectivity_neighborhoods():
    assert len(FACE6.offsets) == 6
    assert len(FULL26.offsets) == 26
    assert Connectivity.parse("26") is FULL26
    assert Connectivity.parse(6) is FACE6
    assert Connectivity.parse("face6") is FACE6


@pytest.mark.parametrize("conn, expected", [(FACE6, 7), (FULL26, 27)])
def test_dilate_single_voxel(conn, expected):
    out = dilate(point(5, (2, 2, 2)), conn, 1)
    assert out.count() == expected
    ref = oracles.dilate(point(5, (2, 2, 2)).grid, conn.value, 1)
    assert np.array_equal(out.grid.astype(bool), ref)


@pytest.mark.parametrize("conn", [FACE6, FULL26])
def test_dilate_empty(conn):
    empty = Volume3D.from_grid(np.zeros((4, 4, 4), dtype=bool))
    assert dilate(empty, conn, 3) == empty


def test_dilate_clips_at_bounds():
    out = dilate(point(3, (0, 0, 0)), FACE6, 1)
    assert out.count() == 4


def test_dilate_does_not_mutate_input():
    m = point(5, (2, 2, 2))
    before = m.data.copy()
    dilate(m, FULL26, 2)
    assert np.array_equal(m.data, before)


def test_dilate_rejects_zero_iterations():
    with pytest.raises(ValueError):
        dilate(point(3, (1, 1, 1)), FACE6, 0)


def test_erode_cube_keeps_center():
    full = Volume3D.from_grid(np.ones((3, 3, 3), dtype=bool))
    out = erode(full, FACE6, 1)
    assert out.count() == 1
    assert out[1, 1, 1] == 1


def test_erode_single_voxel_vanishes():
    assert erode(point(5, (2, 2, 2)), FACE6, 1).count() == 0


@pytest.mark.parametrize("conn", [FACE6, FULL26])
def test_morphology_matches_oracle(rng, conn):
    for _ in range(100):
        g = random_mask(rng)
        k = int(rng.integers(1, 4))
        vol = Volume3D.from_grid(g)
        assert np.array_equal(dilate(vol, conn, k).grid.astype(bool), oracles.dilate(g, conn.value, k))
        assert np.array_equal(erode(vol, conn, k).grid.astype(bool), oracles.erode(g, conn.value, k))


@pytest.mark.parametrize("conn", [FACE6, FULL26])
def test_erode_of_dilate_contains_original(rng, conn):
    for _ in range(50):
        g = np.zeros((8, 8, 8), dtype=bool)
        g[1:-1, 1:-1, 1:-1] = rng.random((6, 6, 6)) < 0.3
        m = Volume3D.from_grid(g)
        closed = erode(dilate(m, conn, 1), conn, 1).grid.astype(bool)
        assert np.all(closed[g])


@pytest.mark.parametrize("conn", [FACE6, FULL26])
def test_dilate_extensive_monotone_additive(rng, conn):
    for _ in range(30):
        g1 = random_mask(rng, 8, 0.1)
        g2 = g1 | (rng.random(g1.shape) < 0.1)
        m1, m2 = Volume3D.from_grid(g1), Volume3D.from_grid(g2)
        d1 = dilate(m1, conn, 1).grid.astype(bool)
        d2 = dilate(m2, conn, 1).grid.astype(bool)
        assert np.all(d1[g1])
        assert np.all(d2[d1])
        a, b = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        assert dilate(m1, conn, a + b) == dilate(dilate(m1, conn, a), conn, b)


def test_dilate_fixed_point_is_all_ones():
    full = Volume3D.from_grid(np.ones((3, 4, 2), dtype=bool))
    assert dilate(full, FULL26, 1) == full


def test_components_opposite_corners():
    g = np.zeros((4, 4, 4), dtype=bool)
    g[0, 0, 0] = g[3, 3, 3] = True
    cc = connected_components(Volume3D.from_grid(g), FULL26)
    assert cc.count == 2
    assert cc.sizes[1:].tolist() == [1, 1]
    assert cc.labels[0] == 1 and cc.labels[63] == 2


def test_components_empty():
    cc = connected_components(Volume3D.from_grid(np.zeros((3, 3, 3), dtype=bool)), FACE6)
    assert cc.count == 0
    assert not cc.labels.any()


def test_components_diagonal_pair():
    g = np.zeros((3, 3, 3), dtype=bool)
    g[0, 0, 0] = g[1, 1, 1] = True
    m = Volume3D.from_grid(g)
    assert connected_components(m, FACE6).count == 2
    assert connected_components(m, FULL26).count == 1


def test_component_ids_follow_first_encounter():
    # the component containing flat index 0 must be id 1 even if scanned late by z
    g = np.zeros((2, 2, 5), dtype=bool)
    g[1, 1, 0] = True  # flat 15
    g[0, 0, 4] = True  # flat 4
    g[1, 0, 4] = True  # flat 14, joins flat 4 under FACE6
    cc = connected_components(Volume3D.from_grid(g), FACE6)
    assert cc.labels[4] == 1 and cc.labels[14] == 1 and cc.labels[15] == 2
    assert cc.sizes.tolist() == [17, 2, 1]


@pytest.mark.parametrize("conn", [FACE6, FULL26])
def test_components_match_flood_fill(rng, conn):
    for _ in range(100):
        g = random_mask(rng, 10)
        cc = connected_components(Volume3D.from_grid(g), conn)
        ref = oracles.flood_fill_labels(g, conn.value)
        assert cc.labels.tolist() == ref
        assert int(cc.sizes[1:].sum()) == int(g.sum())
        assert np.all((cc.labels > 0) == g.reshape(-1))


def test_components_deterministic(rng):
    g = random_mask(rng, 12, 0.4)
    a = connected_components(Volume3D.from_grid(g), FULL26)
    b = connected_components(Volume3D.from_grid(g.copy()), FULL26)
    assert a.labels.tobytes() == b.labels.tobytes()
