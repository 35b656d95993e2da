"""Codebooks, quantizers and the quantizer design pipelines.

A VoronoiQuantizer maps a point to its nearest codepoint (lowest index on
ties). A CompanderQuantizer is the scalar quantizer built from a point
density by inverting its primitive. Design pipelines train LBG codebooks on
H0 samples (MSE-optimal), on samples of p0·F̄ (detection-optimal) or on
samples of p0·Λ'² (Gupta-Hero).
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.spatial.distance import cdist, pdist
from scipy.stats import qmc

from shared import highrate
from shared.errors import DegenerateDensityError, DomainError, InsufficientSamplesError
from shared.fields import CovariationProfile, DensityField, Grid, data_rows, write_comments
from shared.processes import Hypothesis, domain_box, sample_path
from shared.workers import chunk_slices, substream

logger = logging.getLogger(__name__)

DISTINCT_TOLERANCE = 1e-12
ASSIGN_CHUNK = 8192
LBG_TOLERANCE = 1e-6
LBG_MAX_ITER = 200
SPLIT_PERTURBATION = 1e-6
DEFAULT_TRAINING_SAMPLES = 20000
REJECTION_SLACK = 1.05
LOW_ACCEPTANCE = 0.01

UNIFORM = 'uniform'
TRAINED = 'trained'


@dataclass(frozen=True, eq=False)
class Codebook:
    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        lower = np.asarray(self.lower, dtype=float).reshape(points.shape[1])
        upper = np.asarray(self.upper, dtype=float).reshape(points.shape[1])
        if np.any(lower >= upper):
            raise ValueError('codebook domain box must have lower < upper on every axis')
        if np.any(points < lower - DISTINCT_TOLERANCE) or np.any(points > upper + DISTINCT_TOLERANCE):
            raise ValueError('codepoints must lie inside the domain box')
        if points.shape[0] > 1 and pdist(points).min() <= DISTINCT_TOLERANCE:
            raise ValueError('codepoints must be pairwise distinct')
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))


def _check_domain(points, lower, upper):
    if np.any(points < lower) or np.any(points > upper):
        raise DomainError('point outside the quantizer domain box')


@dataclass(frozen=True, eq=False)
class VoronoiQuantizer:
    """Nearest-codepoint quantizer; ``history`` is the LBG distortion sequence."""

    codebook: Codebook
    kind: str = TRAINED
    label: str = ''
    history: tuple = field(default=())
    tie_rule: str = 'lowest-index'

    @property
    def size(self) -> int:
        return self.codebook.size

    @property
    def dimension(self) -> int:
        return self.codebook.dimension

    @property
    def lower(self) -> np.ndarray:
        return self.codebook.lower

    @property
    def upper(self) -> np.ndarray:
        return self.codebook.upper

    @property
    def points(self) -> np.ndarray:
        return self.codebook.points

    def assign(self, points, clip: bool = False) -> np.ndarray:
        points = np.reshape(np.asarray(points, dtype=float), (-1, self.dimension))
        if clip:
            points = np.clip(points, self.lower, self.upper)
        else:
            _check_domain(points, self.lower, self.upper)
        return _nearest(points, self.points)

    def scalar_bounds(self):
        """Cell intervals (lo, hi) by codepoint index; outermost cells reach ±∞."""
        if self.dimension != 1:
            raise ValueError('scalar cell bounds need a one-dimensional quantizer')
        order = np.argsort(self.points[:, 0], kind='stable')
        sorted_points = self.points[order, 0]
        edges = np.concatenate([[-np.inf], 0.5 * (sorted_points[1:] + sorted_points[:-1]), [np.inf]])
        lo = np.empty(self.size)
        hi = np.empty(self.size)
        lo[order] = edges[:-1]
        hi[order] = edges[1:]
        return lo, hi


@dataclass(frozen=True, eq=False)
class CompanderQuantizer:
    breakpoints: np.ndarray
    levels: np.ndarray
    label: str = 'compander'

    kind = 'compander'

    def __post_init__(self):
        breakpoints = np.asarray(self.breakpoints, dtype=float)
        levels = np.asarray(self.levels, dtype=float)
        if breakpoints.ndim != 1 or breakpoints.size < 2 or np.any(np.diff(breakpoints) <= 0):
            raise ValueError('breakpoints must be strictly increasing')
        if levels.shape != (breakpoints.size - 1,):
            raise ValueError('a compander needs one level per cell')
        if np.any(levels < breakpoints[:-1]) or np.any(levels > breakpoints[1:]):
            raise ValueError('each level must lie inside its cell')
        object.__setattr__(self, 'breakpoints', breakpoints)
        object.__setattr__(self, 'levels', levels)

    @property
    def size(self) -> int:
        return self.levels.size

    @property
    def dimension(self) -> int:
        return 1

    @property
    def lower(self) -> np.ndarray:
        return self.breakpoints[:1]

    @property
    def upper(self) -> np.ndarray:
        return self.breakpoints[-1:]

    @property
    def points(self) -> np.ndarray:
        return self.levels[:, None]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def assign(self, points, clip: bool = False) -> np.ndarray:
        y = np.reshape(np.asarray(points, dtype=float), (-1, 1))[:, 0]
        if clip:
            y = np.clip(y, self.breakpoints[0], self.breakpoints[-1])
        else:
            _check_domain(y, self.breakpoints[0], self.breakpoints[-1])
        idx = np.searchsorted(self.breakpoints, y, side='right') - 1
        return np.clip(idx, 0, self.size - 1)

    def scalar_bounds(self):
        lo = self.breakpoints[:-1].copy()
        hi = self.breakpoints[1:].copy()
        lo[0], hi[-1] = -np.inf, np.inf
        return lo, hi


# ── Assignment ───────────────────────────────────────────────────────

def _nearest(points, codepoints) -> np.ndarray:
    # argmin returns the first minimum: lowest index wins ties.
    out = np.empty(points.shape[0], dtype=int)
    for part in chunk_slices(points.shape[0], ASSIGN_CHUNK):
        out[part] = np.argmin(cdist(points[part], codepoints, 'sqeuclidean'), axis=1)
    return out


def nearest_cell(q, y) -> int:
    """Index of the cell containing the single point ``y``."""
    return int(q.assign(np.reshape(y, (1, -1)))[0])


def quantize(q, points, clip: bool = False) -> np.ndarray:
    """Cell indices of an (m, d) array; ``clip`` first projects points into the box."""
    return q.assign(points, clip=clip)


# ── Constructors ─────────────────────────────────────────────────────

def uniform_quantizer(lower, upper, per_axis, label: str = 'uniform') -> VoronoiQuantizer:
    """Product grid of cell centers; N = prod(per_axis)."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    per_axis = np.broadcast_to(np.atleast_1d(per_axis), lower.shape).astype(int)
    axes = [lo + (np.arange(m) + 0.5) * (hi - lo) / m for lo, hi, m in zip(lower, upper, per_axis)]
    mesh = np.meshgrid(*axes, indexing='ij')
    points = np.stack([m.ravel() for m in mesh], axis=1)
    return VoronoiQuantizer(Codebook(points, lower, upper), kind=UNIFORM, label=label)


def lbg_train(samples, N: int, seed=0, tol: float = LBG_TOLERANCE, max_iter: int = LBG_MAX_ITER,
              lower=None, upper=None, label: str = 'lbg') -> VoronoiQuantizer:
    """Train an N-point codebook with Lloyd iterations.

    Args:
        samples: (m, d) training set, m >= 10·N.
        N: Codebook size.
        seed: Seed for the initial distinct-sample subset and split directions.
        tol: Stop once the relative distortion improvement falls below this.
        max_iter: Iteration cap.
        lower, upper: Domain box; defaults to the sample bounding box.

    Returns:
        VoronoiQuantizer whose ``history`` holds the distortion of every iteration.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    m, d = samples.shape
    if N < 1 or m < 10 * N:
        raise InsufficientSamplesError(f'LBG with N={N} needs at least {10 * N} samples, got {m}')
    distinct = np.unique(samples, axis=0)
    if distinct.shape[0] < N:
        raise InsufficientSamplesError(f'only {distinct.shape[0]} distinct samples for N={N}')

    rng = substream(seed, 0)
    codebook = distinct[np.sort(rng.choice(distinct.shape[0], N, replace=False))]
    assignment = None
    history = []
    for iteration in range(max_iter):
        new_assignment = _nearest(samples, codebook)
        errors = np.sum((samples - codebook[new_assignment]) ** 2, axis=1)
        distortion = float(errors.mean())
        history.append(distortion)
        unchanged = assignment is not None and np.array_equal(new_assignment, assignment)
        assignment = new_assignment
        if unchanged:
            break
        codebook = _centroids(samples, assignment, codebook, errors, rng)
        if distortion == 0.0:
            break
        if len(history) > 1 and (history[-2] - distortion) <= tol * history[-2]:
            break
    logger.debug('LBG N=%d stopped after %d iterations, distortion %.6g', N, len(history), history[-1])

    lower = samples.min(axis=0) if lower is None else lower
    upper = samples.max(axis=0) if upper is None else upper
    return VoronoiQuantizer(Codebook(codebook, lower, upper), kind=TRAINED, label=label,
                            history=tuple(history))


def _centroids(samples, assignment, codebook, errors, rng) -> np.ndarray:
    N, d = codebook.shape
    counts = np.bincount(assignment, minlength=N)
    sums = np.zeros((N, d))
    np.add.at(sums, assignment, samples)
    out = codebook.copy()
    occupied = counts > 0
    out[occupied] = sums[occupied] / counts[occupied, None]
    cell_distortion = np.bincount(assignment, weights=errors, minlength=N)
    for empty in np.flatnonzero(~occupied):
        # Split the highest-distortion cell into two nearby codepoints.
        donor = int(np.argmax(np.where(counts > 1, cell_distortion, -1.0)))
        radius = np.sqrt(errors[assignment == donor].max())
        direction = rng.standard_normal(d)
        step = SPLIT_PERTURBATION * max(radius, DISTINCT_TOLERANCE) * direction / np.linalg.norm(direction)
        out[empty] = out[donor] - step
        out[donor] = out[donor] + step
        cell_distortion[donor] = 0.0
    return out


def compander_from_density(zeta: DensityField, N: int, label: str = 'compander') -> CompanderQuantizer:
    """Scalar quantizer whose cells hold equal ζ-mass."""
    if zeta.grid.dimension != 1:
        raise ValueError('companders are scalar')
    if N < 1:
        raise ValueError('N must be positive')
    x = zeta.grid.axes[0]
    phi = cumulative_trapezoid(zeta.values, x, initial=0.0)
    if not phi[-1] > 0 or np.any(np.diff(phi) <= 0):
        raise DegenerateDensityError('compressor is not strictly increasing')
    phi /= phi[-1]
    breakpoints = np.interp(np.linspace(0.0, 1.0, N + 1), phi, x)
    breakpoints[0], breakpoints[-1] = x[0], x[-1]
    levels = 0.5 * (breakpoints[1:] + breakpoints[:-1])
    return CompanderQuantizer(breakpoints, levels, label)


# ── Sampling and cell analysis ───────────────────────────────────────

@dataclass(frozen=True, eq=False)
class RejectionSample:
    samples: np.ndarray
    acceptance_rate: float


def rejection_sample(target: DensityField, n: int, seed=0) -> RejectionSample:
    """Draw n points from a gridded density by uniform proposals on its box."""
    if n < 1:
        raise ValueError('n must be positive')
    if not target.integral() > 0:
        raise DegenerateDensityError('rejection sampling target has zero mass')
    grid = target.grid
    interpolate = target.interpolator()
    bound = REJECTION_SLACK * float(target.values.max())
    rng = substream(seed, 1)
    accepted = []
    have = 0
    proposed = 0
    batch = max(1024, 2 * n)
    while have < n:
        points = rng.uniform(grid.lower, grid.upper, (batch, grid.dimension))
        keep = rng.random(batch) * bound < interpolate(points)
        accepted.append(points[keep])
        have += int(keep.sum())
        proposed += batch
    rate = have / proposed
    if rate < LOW_ACCEPTANCE:
        logger.warning('rejection sampler acceptance rate is %.4f', rate)
    return RejectionSample(np.concatenate(accepted)[:n], rate)


@dataclass(frozen=True, eq=False)
class CellStats:
    """Per-cell volume, centroid, covariation M_j, diameter bound and ζ_j = 1/(N·V_j)."""

    volumes: np.ndarray
    centroids: np.ndarray
    covariations: np.ndarray
    diameters: np.ndarray
    zeta: np.ndarray
    hits: np.ndarray

    @property
    def empty(self) -> np.ndarray:
        return self.hits == 0


def sobol_points(lower, upper, count: int, rng) -> np.ndarray:
    """Scrambled Sobol points in a box; ``count`` is rounded up to a power of two."""
    lower = np.atleast_1d(lower)
    upper = np.atleast_1d(upper)
    engine = qmc.Sobol(lower.size, scramble=True, seed=rng)
    unit = engine.random_base2(int(np.ceil(np.log2(max(count, 2)))))
    return qmc.scale(unit, lower, upper)


def cell_stats(q, mc_points: int, seed=0) -> CellStats:
    """Monte-Carlo cell geometry from uniform quasi-random points on the domain."""
    if mc_points < 10_000 * q.size:
        raise ValueError(f'cell_stats needs at least {10_000 * q.size} points for N={q.size}')
    points = sobol_points(q.lower, q.upper, mc_points, substream(seed, 2))
    total = points.shape[0]
    labels = q.assign(points, clip=True)
    N, d = q.size, q.dimension
    box_volume = float(np.prod(q.upper - q.lower))
    hits = np.bincount(labels, minlength=N)
    volumes = box_volume * hits / total
    centroids = np.full((N, d), np.nan)
    covariations = np.zeros((N, d, d))
    diameters = np.zeros(N)
    for j in np.flatnonzero(hits):
        inside = points[labels == j]
        centroids[j] = inside.mean(axis=0)
        offsets = inside - q.points[j]
        second = offsets.T @ offsets / inside.shape[0]
        covariations[j] = 0.5 * (second + second.T) * volumes[j] ** (-2.0 / d)
        diameters[j] = float(np.linalg.norm(inside.max(axis=0) - inside.min(axis=0)))
    if np.any(hits == 0):
        logger.warning('%d of %d cells received no Monte-Carlo points', int(np.sum(hits == 0)), N)
    with np.errstate(divide='ignore'):
        zeta = 1.0 / (N * volumes)
    return CellStats(volumes, centroids, covariations, diameters, zeta, hits)


# ── Design pipelines ─────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class DetectionDesign:
    """Proposed quantizer with the fields that produced it."""

    quantizer: VoronoiQuantizer
    p0: DensityField
    fbar: object
    qstar: DensityField
    acceptance_rate: float


def design_grid(model, nodes: int = 101, box=None) -> Grid:
    lower, upper = domain_box(model) if box is None else box
    return Grid.regular(lower, upper, nodes)


def design_mse_quantizer(model, N: int, n_train: int = DEFAULT_TRAINING_SAMPLES, seed=0,
                         box=None, label: str = 'mse') -> VoronoiQuantizer:
    """LBG on samples of the H0 marginal."""
    lower, upper = domain_box(model) if box is None else box
    path = sample_path(model, Hypothesis.H0, n_train, seed=[seed, 101])
    samples = np.clip(path.samples, lower, upper)
    return lbg_train(samples, N, seed=seed, lower=lower, upper=upper, label=label)


def detection_design(model, N: int, k: int = 3, n_mc: int = 1000,
                     n_train: int = DEFAULT_TRAINING_SAMPLES, seed=0, grid_nodes: int = 101,
                     box=None, method: str = 'monte_carlo', threads=None,
                     label: str = 'proposed') -> DetectionDesign:
    """F̄ → q* = p0·F̄ → rejection sampling → LBG."""
    grid = design_grid(model, grid_nodes, box)
    logger.info('estimating F̄ on %s nodes (k=%d, n_mc=%d, method=%s)', grid.size, k, n_mc, method)
    fbar = highrate.estimate_Fbar(model, grid, k, n_mc, seed, method=method, threads=threads)
    p0 = highrate.marginal_density_field(model, Hypothesis.H0, grid)
    qstar = highrate.target_density_qstar(p0, fbar)
    drawn = rejection_sample(qstar, n_train, seed)
    logger.info('q* rejection sampling acceptance %.3f', drawn.acceptance_rate)
    quantizer = lbg_train(drawn.samples, N, seed=seed, lower=grid.lower, upper=grid.upper, label=label)
    return DetectionDesign(quantizer, p0, fbar, qstar, drawn.acceptance_rate)


def design_detection_quantizer(model, N: int, k: int = 3, n_mc: int = 1000,
                               n_train: int = DEFAULT_TRAINING_SAMPLES, seed=0, **kwargs) -> VoronoiQuantizer:
    return detection_design(model, N, k, n_mc, n_train, seed, **kwargs).quantizer


def design_gupta_hero_quantizer(model, N: int, n_train: int = DEFAULT_TRAINING_SAMPLES, seed=0,
                                grid_nodes: int = 101, box=None, label: str = 'gupta_hero') -> VoronoiQuantizer:
    """LBG on samples of p0·Λ'², Λ the log-ratio of the single-sample marginals."""
    grid = design_grid(model, grid_nodes, box)
    p0 = highrate.marginal_density_field(model, Hypothesis.H0, grid)
    p1 = highrate.marginal_density_field(model, Hypothesis.H1, grid)
    score = highrate.gupta_hero_F(p0, p1, CovariationProfile.isotropic(1.0, grid.dimension))
    target = highrate.target_density_qstar(p0, score)
    drawn = rejection_sample(target, n_train, seed)
    return lbg_train(drawn.samples, N, seed=seed, lower=grid.lower, upper=grid.upper, label=label)


# ── Serialization ────────────────────────────────────────────────────

def write_codebook(path, q, comments=()):
    """CSV ``index,x1,...,xd``, one row per codepoint, after optional ``#`` comment rows."""
    header = ['index'] + [f'x{i + 1}' for i in range(q.dimension)]
    with open(path, 'w', encoding='utf-8', newline='') as f:
        write_comments(f, comments)
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for j, point in enumerate(q.points):
            writer.writerow([j] + [repr(float(x)) for x in point])


def load_codebook(path, lower, upper, label: str = '') -> VoronoiQuantizer:
    """Read a codebook CSV back into a Voronoi quantizer over the given box."""
    with open(path, encoding='utf-8') as f:
        rows = data_rows(f)
    body = np.array(rows[1:], dtype=float)
    order = np.argsort(body[:, 0], kind='stable')
    return VoronoiQuantizer(Codebook(body[order, 1:], lower, upper), kind=TRAINED, label=label)
