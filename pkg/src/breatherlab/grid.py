"""Uniform grids on the box (-L/2, L/2)^d and the operator -Laplacian + V.

Conventions used throughout the package:

* the box side length ``L`` is an odd positive integer, so that the unit
  cubes centered at integer lattice points tile the box exactly;
* mesh spacing is ``h = 1/m`` with ``m`` mesh points per unit length;
* Dirichlet problems live on the vertex grid (interior nodes only,
  ``x = -L/2 + i*h``), Neumann and periodic problems on the cell-centered
  grid (``x = -L/2 + (i + 1/2)*h``).  With these choices the classical
  second-order stencil has exactly known spectra, which the tests exploit;
* nodes are enumerated lexicographically along the axes (C order);
* integrals are h^d-weighted Riemann sums over nodal values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

BOUNDARY_CONDITIONS = ("dirichlet", "neumann", "periodic")


class GridError(ValueError):
    """Invalid grid parameters or mismatched grid/data sizes."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on (-L/2, L/2)^d.

    d   spatial dimension, 1 to 3
    L   box side length, odd positive integer
    m   mesh points per unit length (h = 1/m)
    bc  one of "dirichlet", "neumann", "periodic"
    """

    d: int
    L: int
    m: int
    bc: str

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.L < 1 or self.L % 2 == 0:
            raise GridError(
                f"box side must be a positive odd integer (unit-cube tiling), got L={self.L}"
            )
        if self.m < 2:
            raise GridError(f"mesh density must be >= 2, got m={self.m}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise GridError(f"unknown boundary condition {self.bc!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def n_per_axis(self) -> int:
        n = self.m * self.L
        return n - 1 if self.bc == "dirichlet" else n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.d

    @property
    def n_nodes(self) -> int:
        return self.n_per_axis**self.d

    @property
    def weight(self) -> float:
        """Quadrature weight h^d of a single node."""
        return self.h**self.d

    def axis_coordinates(self) -> np.ndarray:
        """Node coordinates along one axis (all axes are identical)."""
        i = np.arange(self.n_per_axis)
        if self.bc == "dirichlet":
            return -self.L / 2.0 + (i + 1) * self.h
        return -self.L / 2.0 + (i + 0.5) * self.h

    def node_coordinates(self) -> np.ndarray:
        """All node coordinates as an (n_nodes, d) array, lexicographic order."""
        ax = self.axis_coordinates()
        grids = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


def build_grid(d: int, L: int, m: int, bc: str = "dirichlet") -> Grid:
    """Validate parameters and build a grid (see Grid for conventions)."""
    return Grid(d=d, L=L, m=m, bc=bc)


class PotentialField:
    """Nodal values of a bounded potential on a grid, with cached sup norm."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise GridError("potential field contains non-finite values")
        self.values = values
        self.sup_norm = float(np.max(np.abs(values))) if values.size else 0.0

    @classmethod
    def zeros(cls, grid: Grid) -> "PotentialField":
        return cls(np.zeros(grid.n_nodes))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "PotentialField":
        return cls(np.full(grid.n_nodes, float(c)))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SparseOperator:
    """Symmetric sparse matrix for -Laplacian + V on a grid.

    The stored matrix is exactly symmetric (pattern and values); assembly
    only ever adds symmetric terms.
    """

    matrix: sp.csr_matrix
    grid: Grid
    potential_sup: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _laplacian_1d(n: int, h: float, bc: str) -> sp.csr_matrix:
    """Second-order central-difference -d^2/dx^2 on n nodes."""
    inv_h2 = 1.0 / h**2
    main = np.full(n, 2.0 * inv_h2)
    if bc == "neumann":
        # mirror ghost nodes: boundary rows lose one neighbour
        main[0] = inv_h2
        main[-1] = inv_h2
    off = np.full(n - 1, -inv_h2)
    A = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if bc == "periodic":
        A[0, n - 1] += -inv_h2
        A[n - 1, 0] += -inv_h2
    return sp.csr_matrix(A)


def _laplacian(grid: Grid) -> sp.csr_matrix:
    n = grid.n_per_axis
    lap1 = _laplacian_1d(n, grid.h, grid.bc)
    if grid.d == 1:
        return lap1
    eye = sp.identity(n, format="csr")
    total = None
    for axis in range(grid.d):
        factors = [lap1 if a == axis else eye for a in range(grid.d)]
        term = factors[0]
        for f in factors[1:]:
            term = sp.kron(term, f, format="csr")
        total = term if total is None else total + term
    return sp.csr_matrix(total)


def assemble_hamiltonian(grid: Grid, V: PotentialField) -> SparseOperator:
    """Assemble -Laplacian + diag(V) under the grid's boundary condition."""
    if len(V) != grid.n_nodes:
        raise GridError(
            f"potential field has {len(V)} values, grid has {grid.n_nodes} nodes"
        )
    H = _laplacian(grid) + sp.diags(V.values, format="csr")
    H = sp.csr_matrix(H)
    H.sort_indices()
    return SparseOperator(matrix=H, grid=grid, potential_sup=V.sup_norm)


def apply_operator(A: SparseOperator, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != A.n:
        raise GridError(f"vector length {v.shape[0]} does not match operator size {A.n}")
    return A.matrix @ v


def mass_on_set(grid: Grid, psi: np.ndarray, mask: np.ndarray) -> float:
    """h^d-weighted mass of |psi|^2 restricted to the masked nodes."""
    psi = np.asarray(psi)
    mask = np.asarray(mask, dtype=bool)
    if psi.shape[0] != grid.n_nodes or mask.shape[0] != grid.n_nodes:
        raise GridError("psi/mask length does not match the grid")
    return grid.weight * float(np.sum(np.abs(psi[mask]) ** 2))


def dirichlet_mode_1d(grid: Grid, k: int) -> tuple[float, np.ndarray]:
    """Analytic eigenpair k (1-based) of the 1D Dirichlet V=0 stencil.

    The tridiagonal (2,-1)/h^2 matrix on n = mL - 1 interior nodes has
    eigenvalues (4/h^2) sin^2(k*pi*h / (2L)) with sine eigenvectors.
    """
    if grid.d != 1 or grid.bc != "dirichlet":
        raise GridError("analytic sine modes require a 1D Dirichlet grid")
    n = grid.n_per_axis
    if not 1 <= k <= n:
        raise GridError(f"mode index must be in [1, {n}]")
    h = grid.h
    lam = (4.0 / h**2) * np.sin(k * np.pi * h / (2.0 * grid.L)) ** 2
    i = np.arange(1, n + 1)
    vec = np.sin(i * k * np.pi / (n + 1))
    return float(lam), vec
