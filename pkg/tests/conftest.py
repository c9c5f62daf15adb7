import numpy as np
import pytest

from qclbm.lattice import BOUNCE_BACK, PERIODIC, make_lattice

_ACCEPTANCE = {}


def push_stream(f, lattice):
    """Push-form streaming written from the node grid, independent of ``src``."""
    scheme, grid, index = lattice.scheme, lattice.grid, lattice.index
    Q = scheme.Q
    fn = np.asarray(f).reshape(-1, Q)
    out = np.zeros_like(fn)
    for n, x in enumerate(index.coords):
        for i in range(Q):
            dest = list(x + scheme.e[i])
            blocked = False
            for axis, d in enumerate(grid.dims):
                if 0 <= dest[axis] < d:
                    continue
                if grid.wall_rules[axis] == PERIODIC:
                    dest[axis] %= d
                else:
                    blocked = True
            if blocked or grid.solid[tuple(dest)]:
                out[n, scheme.opp[i]] += fn[n, i]
            else:
                out[index.node(dest), i] += fn[n, i]
    return out.reshape(-1)


def random_state(lattice, rng, spread=0.1, rho_bar=1.0):
    base = np.tile(lattice.scheme.w * rho_bar, lattice.n_fluid)
    return base * (1.0 + spread * rng.uniform(-1, 1, lattice.N))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def wall_pair():
    # two fluid nodes x0, x1 with a solid node to the right of x1
    return make_lattice("D1Q3", (3,), [(2,)], PERIODIC)


@pytest.fixture
def line2():
    return make_lattice("D1Q3", (2,), [], PERIODIC)


@pytest.fixture
def line3():
    return make_lattice("D1Q3", (3,), [], PERIODIC)


@pytest.fixture
def channel():
    return make_lattice("D2Q9", (5, 3), [(2, 1)], (PERIODIC, BOUNCE_BACK))


@pytest.fixture
def obstacle_channel():
    return make_lattice("D2Q9", (10, 5), [(2, 2)], (PERIODIC, BOUNCE_BACK))


@pytest.fixture
def acceptance_record():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
