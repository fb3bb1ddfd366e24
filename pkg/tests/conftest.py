import numpy as np
import pytest

from lagmhd.model import Grid, InitialFamily, Params, sample_initial_state


@pytest.fixture
def params():
    return Params(lam=1.0, mu=1.0, nu=1.0, gamma=5.0 / 3.0)


@pytest.fixture
def active_family():
    """Gaussian vacuum data with every field switched on."""
    return InitialFamily(kind="gaussian_vacuum", u_amp=0.5, w_amp=(0.3, 0.2), h_amp=(1.0, 0.5))


@pytest.fixture
def active_state(active_family):
    return sample_initial_state(active_family, Grid(8.0, 257))


def rest_state(grid, rho0=None):
    from lagmhd.model import State

    n = grid.n_nodes
    rho0 = np.exp(-grid.y**2) if rho0 is None else rho0
    return State(t=0.0, J=np.ones(n), u=np.zeros(n), w=np.zeros((n, 2)), h=np.zeros((n, 2)),
                 P=np.zeros(n), rho0=rho0, grid=grid)


def random_bumps(rng, y, count, half_width, amp=1.0, shape=()):
    """Sum of Gaussian bumps centred well inside the domain (decays at both ends)."""
    out = np.zeros(y.shape + shape)
    for _ in range(count):
        c = rng.uniform(-0.4, 0.4) * half_width
        s = rng.uniform(0.3, 1.5)
        a = rng.normal(scale=amp, size=shape) if shape else rng.normal(scale=amp)
        out = out + np.multiply.outer(np.exp(-((y - c) / s) ** 2), a)
    return out


def random_admissible_state(rng, n=64, half_width=10.0):
    """Smooth admissible state: J > 0, P >= 0, h = 0 at the ends, rho0 >= 0 with
    random vacuum patches (but positive somewhere)."""
    from lagmhd.model import State

    grid = Grid(half_width, n)
    y = grid.y
    kind = rng.integers(3)
    rho0 = np.abs(random_bumps(rng, y, 2, half_width)) + 1e-3
    if kind == 1:
        rho0 = np.where(np.abs(y) < rng.uniform(1, 4), rho0, 0.0)
    elif kind == 2:
        rho0 = rho0 * (y / half_width) ** 2
    J = np.exp(random_bumps(rng, y, 2, half_width, amp=0.3))
    u = random_bumps(rng, y, 2, half_width, amp=0.5)
    w = random_bumps(rng, y, 2, half_width, amp=0.5, shape=(2,))
    h = random_bumps(rng, y, 2, half_width, amp=1.0, shape=(2,))
    h[[0, -1]] = 0.0
    P = random_bumps(rng, y, 2, half_width) ** 2
    P[[0, -1]] = 0.0
    return State(t=0.0, J=J, u=u, w=w, h=h, P=P, rho0=rho0, grid=grid)


ACCEPTANCE_LINES: list[str] = []


def verdict(criterion: str, ok: bool, detail: str) -> bool:
    """Record and print one acceptance line; returns ``ok`` for the assert."""
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
