"""Uniform grids on [0, L]^2 and field serialization.

Scalar unknowns (c, mu, phi) live on the (N+1) x (N+1) vertices, indexed [i, j] with
x = i h, y = j h, so the boundary rows carry the Dirichlet data exactly. The Stokes
unknowns use the staggered layout: u on x-faces (N+1, N), v on y-faces (N, N+1),
p at cell centres (N, N).

Binary field block (little endian)::

    b"ILFB"          4 bytes magic
    uint32           format version (1)
    uint32           ndim
    uint32 * ndim    shape
    float64 * prod   values, row-major (C order)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

MAGIC = b"ILFB"
VERSION = 1


@dataclass(frozen=True)
class Grid:
    N: int
    L: float = 1.0

    def __post_init__(self):
        if self.N < 4:
            raise ValueError("grid needs at least 4 cells per direction")
        if self.L <= 0:
            raise ValueError("domain length must be positive")

    @property
    def h(self) -> float:
        return self.L / self.N

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N + 1)

    @cached_property
    def centres(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.h

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.nodes, self.nodes, indexing="ij")

    @cached_property
    def points(self) -> np.ndarray:
        X, Y = self.mesh
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights on the vertices (sum = L^2)."""
        w1 = np.full(self.N + 1, self.h)
        w1[[0, -1]] *= 0.5
        return np.outer(w1, w1)

    def boundary_distance(self) -> np.ndarray:
        """Signed distance to the boundary, negative inside."""
        X, Y = self.mesh
        return -np.minimum(np.minimum(X, self.L - X), np.minimum(Y, self.L - Y))

    def interior(self, a: np.ndarray) -> np.ndarray:
        return a[1:-1, 1:-1]


def write_csv(path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("CSV export expects a 2-D field")
    I, J = np.meshgrid(np.arange(values.shape[0]), np.arange(values.shape[1]), indexing="ij")
    with open(path, "w") as fh:
        fh.write("i,j,value\n")
        for i, j, v in zip(I.ravel(), J.ravel(), values.ravel()):
            fh.write(f"{i},{j},{v!r}\n")


def read_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    i = data[:, 0].astype(int)
    j = data[:, 1].astype(int)
    out = np.full((i.max() + 1, j.max() + 1), np.nan)
    out[i, j] = data[:, 2]
    return out


def write_block(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    header = MAGIC + struct.pack("<II", VERSION, values.ndim)
    header += struct.pack(f"<{values.ndim}I", *values.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes(order="C"))


def read_block(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a field block")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported block version {version}")
    shape = struct.unpack_from(f"<{ndim}I", raw, 12)
    offset = 12 + 4 * ndim
    return np.frombuffer(raw, dtype="<f8", offset=offset).reshape(shape).copy()
