"""Grid-sampled functions on the observation domain.

A Grid is a regular lattice over a bounded box. DensityField holds p0, q*
and point densities ζ; ScoreField holds F̄ or F with per-node Monte-Carlo
standard errors; CovariationProfile holds the cell-shape matrices M.
Fields serialize to CSV with header ``x1,...,xd,value,stderr``, row-major
over the lattice.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator

from shared.errors import DegenerateDensityError, GridMismatchError

PROBABILITY_DENSITY = 'probability_density'
POINT_DENSITY = 'point_density'
DEFAULT_NODES = 101
PSD_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class Grid:
    """Regular lattice; ``axes[i]`` holds the strictly increasing nodes of axis i."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if not axes:
            raise ValueError('grid needs at least one axis')
        for a in axes:
            if a.ndim != 1 or a.size < 2 or np.any(np.diff(a) <= 0):
                raise ValueError('grid axes must be strictly increasing with at least 2 nodes')
        object.__setattr__(self, 'axes', axes)

    @classmethod
    def regular(cls, lower, upper, nodes=DEFAULT_NODES):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        nodes = np.broadcast_to(np.atleast_1d(nodes), lower.shape)
        return cls(tuple(np.linspace(lo, hi, int(n)) for lo, hi, n in zip(lower, upper, nodes)))

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def lower(self) -> np.ndarray:
        return np.array([a[0] for a in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a[-1] for a in self.axes])

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def steps(self) -> np.ndarray:
        """Mean node spacing per axis."""
        return np.array([(a[-1] - a[0]) / (a.size - 1) for a in self.axes])

    def points(self) -> np.ndarray:
        """All nodes as a (size, d) array in row-major lattice order."""
        mesh = np.meshgrid(*self.axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def same_as(self, other) -> bool:
        return (self.shape == other.shape
                and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes)))

    def refined(self, factor: int = 2):
        """Same box with ``factor`` times as many intervals per axis."""
        return Grid.regular(self.lower, self.upper, [factor * (n - 1) + 1 for n in self.shape])


def integrate(grid: Grid, values) -> float:
    """Trapezoidal integral of node values over the grid box."""
    out = np.asarray(values, dtype=float).reshape(grid.shape)
    for axis in reversed(grid.axes):
        out = trapezoid(out, axis, axis=-1)
    return float(out)


def require_same_grid(*fields_):
    first = fields_[0].grid
    for f in fields_[1:]:
        if not first.same_as(f.grid):
            raise GridMismatchError(f'grid {f.grid.shape} does not match {first.shape}')
    return first


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: Grid
    values: np.ndarray
    kind: str = PROBABILITY_DENSITY

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError('density values must be finite and nonnegative')
        object.__setattr__(self, 'values', values)

    def integral(self) -> float:
        return integrate(self.grid, self.values)

    def normalized(self):
        mass = self.integral()
        if not mass > 0:
            raise DegenerateDensityError('density has zero mass on its grid')
        return DensityField(self.grid, self.values / mass, self.kind)

    def interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(self.grid.axes, self.values, method='linear',
                                       bounds_error=False, fill_value=0.0)

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.grid.dimension)
        return np.maximum(self.interpolator()(points), 0.0)


@dataclass(frozen=True, eq=False)
class ScoreField:
    """F̄ or F on a grid.

    ``moments`` optionally carries the per-node second-moment matrices
    L̄(y) = E0[ℓℓᵀ | Y0=y], shape grid.shape + (d, d).
    """

    grid: Grid
    values: np.ndarray
    stderr: np.ndarray = None
    moments: np.ndarray = None
    depth: int = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError('score values must be finite and nonnegative')
        object.__setattr__(self, 'values', values)
        stderr = np.zeros(self.grid.shape) if self.stderr is None else self.stderr
        object.__setattr__(self, 'stderr', np.asarray(stderr, dtype=float).reshape(self.grid.shape))
        if self.moments is not None:
            d = self.grid.dimension
            object.__setattr__(self, 'moments',
                               np.asarray(self.moments, dtype=float).reshape(self.grid.shape + (d, d)))

    def scaled(self, factor: float):
        moments = None if self.moments is None else self.moments * factor
        return ScoreField(self.grid, self.values * factor, self.stderr * abs(factor), moments, self.depth)


@dataclass(frozen=True, eq=False)
class CovariationProfile:
    """Cell-shape matrices M: ν·I, a constant matrix, or one matrix per grid node."""

    matrices: np.ndarray
    grid: Grid = None
    nu: float = None

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=float)
        if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
            raise ValueError('covariation matrices must be square')
        if not np.allclose(m, np.swapaxes(m, -1, -2), atol=1e-10):
            raise ValueError('covariation matrices must be symmetric')
        m = 0.5 * (m + np.swapaxes(m, -1, -2))
        if np.min(np.linalg.eigvalsh(m)) < -PSD_TOLERANCE:
            raise ValueError('covariation matrices must be positive semidefinite')
        if self.grid is not None and m.shape[:-2] != self.grid.shape:
            raise GridMismatchError('per-node covariation does not match its grid')
        object.__setattr__(self, 'matrices', m)

    @classmethod
    def isotropic(cls, nu: float, d: int):
        return cls(nu * np.eye(d), nu=float(nu))

    @classmethod
    def constant(cls, matrix):
        return cls(np.atleast_2d(np.asarray(matrix, dtype=float)))

    @classmethod
    def per_node(cls, grid: Grid, matrices):
        return cls(matrices, grid=grid)

    @property
    def dimension(self) -> int:
        return self.matrices.shape[-1]

    @property
    def is_isotropic(self) -> bool:
        return self.nu is not None


# Normalized second moments of the interval/square and of the regular hexagon.
NU_CUBIC = 1.0 / 12.0
NU_HEXAGONAL = 5.0 / (36.0 * np.sqrt(3.0))


def write_comments(f, comments):
    """Write ``# ...`` provenance rows ahead of a CSV header."""
    for line in comments:
        f.write(f'# {line}\n')


def data_rows(f) -> list:
    """CSV rows of an open file, skipping ``#`` comment rows."""
    return list(csv.reader(line for line in f if not line.startswith('#')))


def write_field_csv(path, grid: Grid, values, stderr=None, comments=()):
    """Write a field as ``x1,...,xd,value,stderr`` rows, row-major over the lattice."""
    values = np.asarray(values, dtype=float).ravel()
    stderr = np.zeros_like(values) if stderr is None else np.asarray(stderr, dtype=float).ravel()
    header = [f'x{i + 1}' for i in range(grid.dimension)] + ['value', 'stderr']
    with open(path, 'w', encoding='utf-8', newline='') as f:
        write_comments(f, comments)
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for point, v, s in zip(grid.points(), values, stderr):
            writer.writerow([repr(float(x)) for x in point] + [repr(float(v)), repr(float(s))])


def write_columns_csv(path, grid: Grid, columns: dict, comments=()):
    """Write several fields on one grid as ``x1,...,xd,<name>,...`` rows."""
    names = list(columns)
    stacked = np.stack([np.asarray(columns[n], dtype=float).ravel() for n in names], axis=1)
    if stacked.shape[0] != grid.size:
        raise ValueError(f'columns hold {stacked.shape[0]} nodes, grid has {grid.size}')
    with open(path, 'w', encoding='utf-8', newline='') as f:
        write_comments(f, comments)
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow([f'x{i + 1}' for i in range(grid.dimension)] + names)
        for point, row in zip(grid.points(), stacked):
            writer.writerow([repr(float(x)) for x in point] + [repr(float(v)) for v in row])


def read_field_csv(path):
    """Read a field CSV back into (grid, values, stderr)."""
    with open(path, encoding='utf-8') as f:
        rows = data_rows(f)
    header, body = rows[0], np.array(rows[1:], dtype=float)
    d = len(header) - 2
    grid = Grid(tuple(np.unique(body[:, i]) for i in range(d)))
    return grid, body[:, d].reshape(grid.shape), body[:, d + 1].reshape(grid.shape)


def field_from_function(grid: Grid, fn, kind=PROBABILITY_DENSITY) -> DensityField:
    """Evaluate a vectorized function of (size, d) points on every node."""
    return DensityField(grid, np.asarray(fn(grid.points()), dtype=float), kind)

