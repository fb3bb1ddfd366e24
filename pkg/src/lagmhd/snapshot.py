"""Binary snapshot files.

Layout (little-endian throughout)::

    magic     8 bytes   b"LMHDSNAP"
    version   uint32    1
    N         uint64    node count
    L         float64   half width
    t         float64   time
    lam, mu, nu, gamma  float64 x 4
    J, u, w1, w2, h1, h2, P, rho0   float64 x N each
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .model import Grid, Params, State

MAGIC = b"LMHDSNAP"
VERSION = 1
HEADER = struct.Struct("<8sIQdd4d")
FIELD_ORDER = ("J", "u", "w1", "w2", "h1", "h2", "P", "rho0")


class SnapshotError(ValueError):
    """Raised on files that do not follow the snapshot schema."""


def encode(state: State, params: Params) -> bytes:
    grid = state.grid
    head = HEADER.pack(MAGIC, VERSION, grid.n_nodes, grid.half_width, state.t,
                       params.lam, params.mu, params.nu, params.gamma)
    body = np.stack([state.J, state.u, state.w[:, 0], state.w[:, 1], state.h[:, 0],
                     state.h[:, 1], state.P, state.rho0])
    return head + body.astype("<f8").tobytes()


def decode(data: bytes) -> tuple[State, Params]:
    if len(data) < HEADER.size:
        raise SnapshotError("file shorter than the snapshot header")
    magic, version, n, half_width, t, lam, mu, nu, gamma = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    expected = HEADER.size + 8 * len(FIELD_ORDER) * n
    if len(data) != expected:
        raise SnapshotError(f"payload is {len(data)} bytes, expected {expected} for N = {n}")
    arr = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(len(FIELD_ORDER), n)
    arr = arr.astype(np.float64)
    try:
        grid = Grid(half_width, n)
        params = Params(lam=lam, mu=mu, nu=nu, gamma=gamma)
    except ValueError as exc:
        raise SnapshotError(f"invalid header: {exc}") from exc
    f = dict(zip(FIELD_ORDER, arr))
    state = State(t=t, J=f["J"], u=f["u"], w=np.column_stack([f["w1"], f["w2"]]),
                  h=np.column_stack([f["h1"], f["h2"]]), P=f["P"], rho0=f["rho0"], grid=grid)
    return state, params


def write_snapshot(path, state: State, params: Params):
    Path(path).write_bytes(encode(state, params))


def read_snapshot(path) -> tuple[State, Params]:
    return decode(Path(path).read_bytes())
