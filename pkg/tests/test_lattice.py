import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import push_stream
from qclbm.errors import ConfigurationError, GeometryError
from qclbm.lattice import (
    BOUNCE_BACK,
    PERIODIC,
    StreamingPermutation,
    build_grid,
    build_index_map,
    build_scheme,
    build_streaming_permutation,
    make_lattice,
)


def test_d1q3_scheme():
    s = build_scheme("D1Q3")
    np.testing.assert_allclose(s.w, [2 / 3, 1 / 6, 1 / 6], rtol=0, atol=1e-16)
    assert s.e[:, 0].tolist() == [0, 1, -1]


def test_d2q9_scheme_ordering():
    s = build_scheme("D2Q9")
    np.testing.assert_allclose(s.w, [4 / 9] + [1 / 9] * 4 + [1 / 36] * 4, rtol=0, atol=1e-16)
    assert s.e[1].tolist() == [1, 0]
    assert s.e[3].tolist() == [-1, 0]


@pytest.mark.parametrize("name", ["D1Q3", "D2Q9"])
def test_opposite_is_involution(name):
    s = build_scheme(name)
    assert np.array_equal(s.opp[s.opp], np.arange(s.Q))
    assert np.array_equal(s.e[s.opp], -s.e)


@pytest.mark.parametrize("name", ["D1Q3", "D2Q9"])
def test_weight_moments(name):
    s = build_scheme(name)
    e = s.e.astype(float)
    assert abs(s.w.sum() - 1) <= 1e-15
    assert np.all(s.w > 0)
    np.testing.assert_allclose(s.w @ e, 0, atol=1e-15)
    second = np.einsum("i,ia,ib->ab", s.w, e, e)
    np.testing.assert_allclose(second, np.eye(s.dim) / 3, atol=1e-15)
    third = np.einsum("i,ia,ib,ic->abc", s.w, e, e, e)
    np.testing.assert_allclose(third, 0, atol=1e-15)


def test_unknown_scheme():
    with pytest.raises(ConfigurationError):
        build_scheme("D3Q19")


def test_obstacle_channel_grid(obstacle_channel):
    assert obstacle_channel.grid.n_fluid == 49
    assert obstacle_channel.N == 441


def test_two_node_line(line2):
    assert line2.grid.n_fluid == 2
    assert line2.N == 6


@pytest.mark.parametrize(
    "dims, solids",
    [((1, 1), [(0, 0)]), ((3,), [(3,)]), ((4, 2), [(1, 2)]), ((0, 3), [])],
)
def test_invalid_grids(dims, solids):
    with pytest.raises(GeometryError):
        build_grid(dims, solids, PERIODIC)


def test_bad_wall_rule():
    with pytest.raises(GeometryError):
        build_grid((3,), [], "sticky")


def test_index_round_trip(obstacle_channel):
    index = obstacle_channel.index
    seen = set()
    for n, coord in enumerate(index.coords):
        for i in range(index.Q):
            k = index.forward(coord, i)
            assert index.inverse(k) == (tuple(coord), i)
            seen.add(k)
    assert seen == set(range(index.N))


def test_index_is_node_major(obstacle_channel):
    index = obstacle_channel.index
    assert index.forward((0, 0), 0) == 0
    assert index.forward((0, 0), 8) == 8
    assert index.forward((0, 1), 0) == 9
    with pytest.raises(KeyError):
        index.forward((2, 2), 0)  # the obstacle carries no variables


def test_wall_pair_bounce_back(wall_pair):
    idx = wall_pair.index
    src = wall_pair.stream.src
    assert src[idx.forward((1,), 2)] == idx.forward((1,), 1)
    assert wall_pair.stream.bounced[idx.forward((1,), 2)]


def test_periodic_two_node_line(line2):
    # tagged impulse moved by the push-form oracle
    idx = line2.index
    k1 = idx.forward((1,), 1)
    impulse = np.zeros(line2.N)
    impulse[k1] = 1.0
    pushed = push_stream(impulse, line2)
    assert pushed[idx.forward((0,), 1)] == 1.0
    assert line2.stream.src[idx.forward((0,), 1)] == k1


GEOMETRIES = [
    ("D1Q3", (3,), [(2,)], PERIODIC),
    ("D1Q3", (2,), [], BOUNCE_BACK),
    ("D1Q3", (5,), [(1,), (3,)], PERIODIC),
    ("D2Q9", (5, 3), [(2, 1)], (PERIODIC, BOUNCE_BACK)),
    ("D2Q9", (10, 5), [(2, 2)], (PERIODIC, BOUNCE_BACK)),
    ("D2Q9", (4, 4), [(0, 0), (3, 3)], PERIODIC),
    ("D2Q9", (3, 4), [], BOUNCE_BACK),
]


@pytest.mark.parametrize("geometry", GEOMETRIES)
def test_gather_matches_push_oracle(geometry, rng):
    lat = make_lattice(*geometry)
    for _ in range(50):
        f = rng.uniform(0, 1, lat.N)
        np.testing.assert_array_equal(lat.stream.apply(f), push_stream(f, lat))


@pytest.mark.parametrize("geometry", GEOMETRIES)
def test_permutation_properties(geometry):
    lat = make_lattice(*geometry)
    src = lat.stream.src
    assert np.array_equal(np.sort(src), np.arange(lat.N))
    Q, opp = lat.Q, lat.scheme.opp
    for k in np.flatnonzero(lat.stream.bounced):
        node, i = divmod(k, Q)
        assert divmod(int(src[k]), Q) == (node, opp[i])


@settings(max_examples=40, deadline=None)
@given(
    nx=st.integers(1, 5),
    ny=st.integers(1, 4),
    walls=st.tuples(st.sampled_from([PERIODIC, BOUNCE_BACK]), st.sampled_from([PERIODIC, BOUNCE_BACK])),
    data=st.data(),
)
def test_random_geometry_streaming(nx, ny, walls, data):
    cells = [(x, y) for x in range(nx) for y in range(ny)]
    solids = data.draw(st.lists(st.sampled_from(cells), unique=True, max_size=len(cells) - 1))
    lat = make_lattice("D2Q9", (nx, ny), solids, walls)
    f = np.arange(lat.N, dtype=float) + 1.0
    streamed = lat.stream.apply(f)
    assert streamed.sum() == f.sum()
    np.testing.assert_array_equal(streamed, push_stream(f, lat))


def test_streaming_rejects_mismatched_dimension():
    grid = build_grid((3, 3), [], PERIODIC)
    with pytest.raises(GeometryError):
        build_index_map(grid, build_scheme("D1Q3"))


def test_permutation_matrix(channel):
    P = channel.stream.matrix()
    f = np.arange(channel.N, dtype=float)
    np.testing.assert_array_equal(P @ f, channel.stream.apply(f))
    assert isinstance(channel.stream, StreamingPermutation)
    assert build_streaming_permutation(channel.grid, channel.scheme, channel.index).src.tolist() == channel.stream.src.tolist()
