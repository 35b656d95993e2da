"""Log-densities, log-likelihood ratios and error-exponent estimators.

Raw paths use the exact densities of each model family: sums of marginals
for i.i.d. models, a scaled forward recursion for hidden chains and a Kalman
filter for Gauss-linear models. Quantized paths observe only cell indices:
exact cell masses for i.i.d. models, a forward recursion on the cell
likelihood table for hidden chains, and a discretized-state filter for
Gauss-linear models (a product state grid when d > 1).

Log-probabilities below exp(-745) are floored at that bound and the path
records that it was floored.
"""

import logging
import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.linalg import toeplitz
from scipy.special import logsumexp
from scipy.stats import norm

from shared.errors import DomainError, UnsupportedModelError
from shared.fields import Grid
from shared.processes import (AR1, HYPOTHESES, FiniteStateHmm, GaussLinearModel, Hypothesis, IidModel,
                              ObservationWindow, autocovariance, check_in_domain,
                              log_emissions, marginal_variance, sample_path, state_space)
from shared.quantizers import UNIFORM, sobol_points
from shared.workers import chunk_slices, ordered_map, substream

logger = logging.getLogger(__name__)

LOG_FLOOR = -745.0
BATCHES = 20
MIN_ERGODIC_LENGTH = 1000
DEFAULT_BURN_IN = 0
DEFICIT_WARNING = 0.01
DEFAULT_MC_PER_CELL = 1 << 14
STATE_GRID_POINTS = 41
STATE_GRID_SDS = 5.0
FILTER_CHUNK = 128
GAUSS_MC_PER_CELL = 2048
PREFLIGHT_TOLERANCE = 1e-2

ERGODIC_AVERAGE = 'ergodic_average'
EXACT_DISCRETE = 'exact_discrete'


@dataclass(frozen=True, eq=False)
class LogLikelihoodPath:
    """L_k for every prefix k = 1..n."""

    values: np.ndarray
    floored: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0 or not np.all(np.isfinite(values)):
            raise ValueError('an LLR path is a nonempty finite vector')
        object.__setattr__(self, 'values', values)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def increments(self) -> np.ndarray:
        return np.diff(self.values, prepend=0.0)


@dataclass(frozen=True, eq=False)
class CellLikelihoodTable:
    """log P[Y ∈ C_j | X = x] by (state, cell), plus integration diagnostics."""

    log_probs: np.ndarray
    errors: np.ndarray
    deficits: np.ndarray

    def __post_init__(self):
        if np.any(self.log_probs > 0):
            raise ValueError('cell log-probabilities must be <= 0')

    @property
    def num_cells(self) -> int:
        return self.log_probs.shape[1]


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    standard_error: float
    n: int
    depth: int
    method: str


def _floor(log_values):
    log_values = np.asarray(log_values, dtype=float)
    floored = bool(np.any(log_values < LOG_FLOOR))
    return np.maximum(log_values, LOG_FLOOR), floored


# ── Raw densities ────────────────────────────────────────────────────

def forward_prefix(log_initial, log_transition, log_emit) -> np.ndarray:
    """Prefix log-likelihoods of a finite-state chain by scaled forward recursion.

    Args:
        log_initial: (S,) log initial law.
        log_transition: (S, S) log transition matrix.
        log_emit: (..., n, S) log emission densities or masses.

    Returns:
        (..., n) array of log p(y_{1:k}).
    """
    log_emit = np.asarray(log_emit, dtype=float)
    n = log_emit.shape[-2]
    out = np.empty(log_emit.shape[:-1])
    alpha = np.broadcast_to(log_initial, log_emit.shape[:-2] + log_initial.shape)
    total = np.zeros(log_emit.shape[:-2])
    for t in range(n):
        joint = alpha + log_emit[..., t, :]
        step = logsumexp(joint, axis=-1)
        total = total + step
        out[..., t] = total
        filtered = joint - step[..., None]
        alpha = logsumexp(filtered[..., :, None] + log_transition, axis=-2)
    return out


def _log(values):
    with np.errstate(divide='ignore'):
        return np.log(values)


def _kalman_prefix(ss, series) -> np.ndarray:
    """Prefix log-likelihoods of (B, n) scalar series under one state-space model."""
    transition, noise, emit, obs_var, cov = ss
    batch, n = series.shape
    state = np.zeros((batch, transition.shape[0]))
    total = np.zeros(batch)
    out = np.empty((batch, n))
    for t in range(n):
        innovation_var = float(emit @ cov @ emit) + obs_var
        innovation = series[:, t] - state @ emit
        total = total - 0.5 * (np.log(2 * np.pi * innovation_var) + innovation ** 2 / innovation_var)
        out[:, t] = total
        gain = cov @ emit / innovation_var
        state = (state + innovation[:, None] * gain[None, :]) @ transition.T
        cov = transition @ (cov - np.outer(gain, emit @ cov)) @ transition.T + noise
    return out


def _gauss_prefix(model: GaussLinearModel, hyp: Hypothesis, samples) -> np.ndarray:
    series = samples.T
    ss = state_space(model, hyp)
    if ss is None:
        v = marginal_variance(model, hyp)
        per = np.cumsum(-0.5 * (np.log(2 * np.pi * v) + series ** 2 / v), axis=1)
    else:
        per = _kalman_prefix(ss, series)
    return per.sum(axis=0)


def _prefix_log_density(model, hyp: Hypothesis, samples):
    if isinstance(model, IidModel):
        values, floored = _floor(model.logpdf[hyp](samples))
        return np.cumsum(values), floored
    if isinstance(model, FiniteStateHmm):
        prefix = forward_prefix(_log(model.initial_dist), _log(model.transitions[hyp]),
                                log_emissions(model, samples))
        return prefix, False
    return _gauss_prefix(model, hyp, samples), False


def joint_log_density(model, hyp: Hypothesis, window: ObservationWindow) -> float:
    """log p_i(y_{1:n}) for the window."""
    check_in_domain(model, window.samples)
    prefix, _ = _prefix_log_density(model, Hypothesis(hyp), window.samples)
    return float(prefix[-1])


def llr_path(model, window: ObservationWindow) -> LogLikelihoodPath:
    """L_k = log p1(y_{1:k}) − log p0(y_{1:k}) for every prefix."""
    check_in_domain(model, window.samples)
    p0, floored0 = _prefix_log_density(model, Hypothesis.H0, window.samples)
    p1, floored1 = _prefix_log_density(model, Hypothesis.H1, window.samples)
    return LogLikelihoodPath(p1 - p0, floored0 or floored1)


def _batch_means(increments, n, depth, method) -> ExponentEstimate:
    means = np.array([-b.mean() for b in np.array_split(increments, BATCHES)])
    value = float(-increments.sum() / n)
    stderr = float(means.std(ddof=1) / np.sqrt(BATCHES))
    return ExponentEstimate(value, stderr, n, depth, method)


def estimate_exponent_raw(model, n: int, seed=0, burn_in: int = DEFAULT_BURN_IN) -> ExponentEstimate:
    """K̂ = −L_n/n on one H0 path; standard error from 20 batch means."""
    if n < MIN_ERGODIC_LENGTH:
        raise ValueError(f'ergodic estimates need n >= {MIN_ERGODIC_LENGTH}')
    window = sample_path(model, Hypothesis.H0, n, burn_in, seed)
    path = llr_path(model, window)
    return _batch_means(path.increments(), n, n, ERGODIC_AVERAGE)


def exact_raw_exponent(model: IidModel) -> float:
    """KL(p0‖p1) of an i.i.d. model: closed form when known, else quadrature (d=1)."""
    if not isinstance(model, IidModel):
        raise UnsupportedModelError('exact raw exponents are available for i.i.d. models only')
    if model.kl_divergence is not None:
        return float(model.kl_divergence)
    if model.dimension != 1:
        raise UnsupportedModelError('quadrature KL needs a scalar model')
    lo, hi = (-np.inf, np.inf) if model.lower is None else (model.lower[0], model.upper[0])

    def integrand(y):
        l0 = model.logpdf[0](np.array([y]))[0]
        l1 = max(model.logpdf[1](np.array([y]))[0], LOG_FLOOR)
        return np.exp(l0) * (l0 - l1) if np.isfinite(l0) else 0.0

    return float(quad(integrand, lo, hi, limit=200)[0])


# ── Cell integration ─────────────────────────────────────────────────

def _integrate_cells(quantizer, log_density, mc_per_cell, seed, threads=None):
    """∫_{C_j} exp(f_i(y)) dy for every cell j, by Sobol points in each cell's bounding box.

    ``log_density`` maps (m, d) points to an (m, F) array, one column per
    function; the result arrays have shape (F, N).
    """
    lower, upper = quantizer.lower, quantizer.upper
    d = quantizer.dimension
    N = quantizer.size
    pilot = sobol_points(lower, upper, max(64 * N, 4096), substream(seed, 4))
    labels = quantizer.assign(pilot, clip=True)
    spacing = (np.prod(upper - lower) / pilot.shape[0]) ** (1.0 / d)

    def one_cell(j):
        members = pilot[labels == j]
        if members.shape[0] == 0:
            center = quantizer.points[j]
            lo, hi = center - 2 * spacing, center + 2 * spacing
        else:
            lo, hi = members.min(axis=0) - 2 * spacing, members.max(axis=0) + 2 * spacing
        lo, hi = np.maximum(lo, lower), np.minimum(hi, upper)
        pts = sobol_points(lo, hi, mc_per_cell, substream(seed, 5, j))
        inside = quantizer.assign(pts, clip=True) == j
        volume = float(np.prod(hi - lo))
        values = np.where(inside[:, None], np.exp(log_density(pts)), 0.0)
        return np.stack([volume * values.mean(axis=0),
                         volume * values.std(axis=0) / np.sqrt(values.shape[0])], axis=-1)

    cells = np.stack(ordered_map(one_cell, range(N), threads), axis=1)
    return cells[..., 0], cells[..., 1]


def _normalized_table(masses, errors) -> CellLikelihoodTable:
    totals = masses.sum(axis=1)
    deficits = 1.0 - totals
    worst = float(np.max(np.abs(deficits)))
    if worst > DEFICIT_WARNING:
        logger.warning('cell integration deficit %.4f exceeds %.2f', worst, DEFICIT_WARNING)
    probs = masses / totals[:, None]
    log_probs, _ = _floor(_log(probs))
    return CellLikelihoodTable(np.minimum(log_probs, 0.0), errors, deficits)


def cell_likelihoods(model: FiniteStateHmm, quantizer, mc_per_cell: int = DEFAULT_MC_PER_CELL,
                     seed=0, threads=None) -> CellLikelihoodTable:
    """P[Y ∈ C_j | X = x] for every state and cell, rows renormalized to 1."""
    if not isinstance(model, FiniteStateHmm):
        raise UnsupportedModelError('cell likelihood tables are built for hidden chains')
    if not (np.allclose(quantizer.lower, model.lower) and np.allclose(quantizer.upper, model.upper)):
        raise DomainError('quantizer domain must equal the model domain')
    masses, errors = _integrate_cells(quantizer, lambda pts: log_emissions(model, pts), mc_per_cell, seed, threads)
    return _normalized_table(masses, errors)


def iid_cell_masses(model: IidModel, quantizer, mc_per_cell: int = DEFAULT_MC_PER_CELL, seed=0):
    """(2, N) cell probabilities under each hypothesis.

    Scalar models integrate each interval by adaptive quadrature with the
    outermost cells reaching ±∞; vector models use quasi-Monte-Carlo over
    the quantizer box and renormalize.
    """
    if model.dimension == 1:
        lo, hi = quantizer.scalar_bounds()
        if model.lower is not None:
            lo, hi = np.maximum(lo, model.lower[0]), np.minimum(hi, model.upper[0])
        masses = np.zeros((2, quantizer.size))
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', IntegrationWarning)
            for hyp in HYPOTHESES:
                pdf = lambda y, h=hyp: float(np.exp(model.logpdf[h](np.array([y]))[0]))
                for j in range(quantizer.size):
                    if hi[j] > lo[j]:
                        masses[hyp, j] = quad(pdf, lo[j], hi[j], epsabs=0.0, epsrel=1e-12, limit=200)[0]
        return masses
    masses, _ = _integrate_cells(quantizer, lambda pts: np.stack([model.logpdf[h](pts) for h in HYPOTHESES], axis=1),
                                 mc_per_cell, seed)
    return masses / masses.sum(axis=1, keepdims=True)


def _axis_bounds(quantizer):
    """Per-axis cell intervals (lo, hi) of a scalar or product-grid quantizer; outer cells reach ±∞."""
    if quantizer.dimension == 1:
        return [quantizer.scalar_bounds()]
    if getattr(quantizer, 'kind', None) != UNIFORM:
        raise ValueError('per-axis cell bounds need a product-grid quantizer')
    bounds = []
    for axis in range(quantizer.dimension):
        coords = quantizer.points[:, axis]
        centers = np.unique(coords)
        edges = np.concatenate([[-np.inf], 0.5 * (centers[1:] + centers[:-1]), [np.inf]])
        index = np.searchsorted(centers, coords)
        bounds.append((edges[index], edges[index + 1]))
    return bounds


def gaussian_cell_probabilities(quantizer, centers, sd: float, mc_per_cell: int = GAUSS_MC_PER_CELL,
                                seed=0, threads=None) -> np.ndarray:
    """P[Y ∈ C_j] for Y ~ N(c, sd²·I), one row per center c.

    Scalar and product-grid quantizers use exact normal CDF products with the
    outer cells reaching ±∞; other vector quantizers integrate over the
    quantizer box by quasi-Monte-Carlo and renormalize each row.
    """
    centers = np.reshape(np.asarray(centers, dtype=float), (-1, quantizer.dimension))
    if quantizer.dimension == 1 or getattr(quantizer, 'kind', None) == UNIFORM:
        probs = np.ones((centers.shape[0], quantizer.size))
        for axis, (lo, hi) in enumerate(_axis_bounds(quantizer)):
            offset = centers[:, axis:axis + 1]
            probs = probs * (norm.cdf((hi[None, :] - offset) / sd) - norm.cdf((lo[None, :] - offset) / sd))
        return probs

    def log_density(pts):
        return norm.logpdf(pts[:, None, :], centers[None, :, :], sd).sum(axis=2)

    masses, _ = _integrate_cells(quantizer, log_density, mc_per_cell, seed, threads)
    return masses / masses.sum(axis=1, keepdims=True)


# ── Quantized likelihoods ────────────────────────────────────────────

class QuantizedLikelihood:
    """Prefix LLRs of cell-index sequences for one model and quantizer.

    Tables are built once; ``prefix`` then evaluates (B, n) batches of cell
    indices. Gauss-linear models go through the discretized-state filter
    unless ``approximate`` is False.
    """

    def __init__(self, model, quantizer, mc_per_cell: int = DEFAULT_MC_PER_CELL, seed=0,
                 approximate: bool = True, threads=None):
        self.model = model
        self.quantizer = quantizer
        self.floored = False
        if isinstance(model, IidModel):
            masses = iid_cell_masses(model, quantizer, mc_per_cell, seed)
            self._evaluators = [self._masses_evaluator(_log(m)) for m in masses]
        elif isinstance(model, FiniteStateHmm):
            table = cell_likelihoods(model, quantizer, mc_per_cell, seed, threads)
            self.table = table
            log_pi = _log(model.initial_dist)
            self._evaluators = [self._chain_evaluator(log_pi, _log(model.transitions[h]), table.log_probs)
                                for h in HYPOTHESES]
        elif isinstance(model, GaussLinearModel):
            if not approximate:
                raise UnsupportedModelError('exact quantized likelihoods are unavailable for Gauss-linear models')
            if model.dimension != 1 and model.kind != AR1:
                raise UnsupportedModelError('the moving-average filter handles scalar models only')
            self._evaluators = [self._gauss_evaluator(h, seed, threads) for h in HYPOTHESES]
        else:
            raise UnsupportedModelError(f'no quantized likelihood for {type(model).__name__}')

    def _masses_evaluator(self, log_masses):
        log_masses, floored = _floor(log_masses)
        self.floored = self.floored or floored
        return lambda cells: np.cumsum(log_masses[cells], axis=-1)

    def _chain_evaluator(self, log_initial, log_transition, log_table):
        log_table, floored = _floor(log_table)
        self.floored = self.floored or floored
        return lambda cells: forward_prefix(log_initial, log_transition, np.moveaxis(log_table[:, cells], 0, -1))

    def _gauss_evaluator(self, hyp, seed, threads):
        model = self.model
        d = model.dimension
        s = model.component_variance
        if state_space(model, hyp) is None:
            sd = np.sqrt(marginal_variance(model, hyp))
            return self._masses_evaluator(_log(gaussian_cell_probabilities(self.quantizer, np.zeros(d), sd,
                                                                           seed=seed, threads=threads)[0]))
        noise_sd = np.sqrt(s) * model.sigma
        grid = np.linspace(-STATE_GRID_SDS, STATE_GRID_SDS, STATE_GRID_POINTS) * np.sqrt(s)
        weights = np.exp(-grid ** 2 / (2 * s))
        weights /= weights.sum()
        if model.kind == AR1:
            a = model.ar_coefficient
            trans = np.exp(-(grid[None, :] - a * grid[:, None]) ** 2 / (2 * s * (1 - a ** 2)))
            trans /= trans.sum(axis=1, keepdims=True)
            states = Grid((grid,) * d).points()
            emit = gaussian_cell_probabilities(self.quantizer, states, noise_sd, seed=seed, threads=threads)
            if d == 1:
                return self._chain_evaluator(_log(weights), _log(trans), _log(emit))
            emission = emit.T.reshape((self.quantizer.size,) + (grid.size,) * d)
            return _ProductStateFilter(trans, weights, emission).prefix
        lo, hi = self.quantizer.scalar_bounds()
        return _MovingAverageFilter(model.ma_taps, grid, weights, lo, hi, noise_sd).prefix

    def prefix(self, cells) -> np.ndarray:
        cells = np.asarray(cells, dtype=int)
        if cells.min() < 0 or cells.max() >= self.quantizer.size:
            raise ValueError('cell index out of range')
        return self._evaluators[1](cells) - self._evaluators[0](cells)

    def path(self, cells) -> LogLikelihoodPath:
        return LogLikelihoodPath(self.prefix(np.asarray(cells)[None, :])[0], self.floored)


class _MovingAverageFilter:
    """Forward filter over the last L innovations on a per-axis grid.

    The belief tensor has one axis per past innovation u_{k-1}..u_{k-L}; the
    emission tensor of cell c holds w(u_k)·P[Y_k ∈ C_c | u_k..u_{k-L}].
    """

    def __init__(self, taps, grid, weights, lo, hi, noise_sd):
        memory = taps.size - 1
        self.memory = memory
        self.weights = weights
        mean = np.zeros((grid.size,) * (memory + 1))
        for lag, tap in enumerate(taps):
            shape = [1] * (memory + 1)
            shape[lag] = grid.size
            mean = mean + tap * grid.reshape(shape)
        emit = norm.cdf((hi.reshape((-1,) + (1,) * (memory + 1)) - mean) / noise_sd) \
            - norm.cdf((lo.reshape((-1,) + (1,) * (memory + 1)) - mean) / noise_sd)
        self.emission = emit * weights.reshape((1, -1) + (1,) * memory)
        letters = 'ijklmnopqr'[:memory + 1]
        self.subscripts = f'z{letters[1:]},z{letters}->z{letters[:-1]}'

    def _initial(self, batch):
        belief = np.ones(batch)
        for _ in range(self.memory):
            belief = belief[..., None] * self.weights
        return belief

    def _run(self, cells):
        batch, n = cells.shape
        belief = self._initial(batch)
        total = np.zeros(batch)
        out = np.empty((batch, n))
        axes = tuple(range(1, self.memory + 1))
        for t in range(n):
            joint = np.einsum(self.subscripts, belief, self.emission[cells[:, t]])
            step = joint.sum(axis=axes) if axes else joint
            step = np.maximum(step, np.exp(LOG_FLOOR))
            total = total + np.log(step)
            out[:, t] = total
            belief = joint / step.reshape((-1,) + (1,) * self.memory) if axes else np.ones(batch)
        return out

    def prefix(self, cells):
        cells = np.atleast_2d(cells)
        return np.concatenate([self._run(cells[part]) for part in chunk_slices(cells.shape[0], FILTER_CHUNK)])


class _ProductStateFilter:
    """Forward filter for a d-dimensional AR(1) state with independent components.

    The belief has one grid axis per component and the transition kernel acts
    on each axis separately; ``emission[c]`` holds P[Y ∈ C_c | state] on the
    product grid.
    """

    def __init__(self, transition, weights, emission):
        self.transition = transition
        self.dimension = emission.ndim - 1
        self.emission = emission
        initial = weights
        for _ in range(self.dimension - 1):
            initial = np.multiply.outer(initial, weights)
        self.initial = initial

    def _propagate(self, belief):
        for axis in range(1, self.dimension + 1):
            belief = np.moveaxis(np.moveaxis(belief, axis, -1) @ self.transition, -1, axis)
        return belief

    def _run(self, cells):
        batch, n = cells.shape
        belief = np.broadcast_to(self.initial, (batch,) + self.initial.shape)
        axes = tuple(range(1, self.dimension + 1))
        total = np.zeros(batch)
        out = np.empty((batch, n))
        for t in range(n):
            joint = belief * self.emission[cells[:, t]]
            step = np.maximum(joint.sum(axis=axes), np.exp(LOG_FLOOR))
            total = total + np.log(step)
            out[:, t] = total
            belief = self._propagate(joint / step.reshape((-1,) + (1,) * self.dimension))
        return out

    def prefix(self, cells):
        cells = np.atleast_2d(cells)
        return np.concatenate([self._run(cells[part]) for part in chunk_slices(cells.shape[0], FILTER_CHUNK)])


def quantized_llr_path(model, quantizer, cell_indices, approximate: bool = True,
                       mc_per_cell: int = DEFAULT_MC_PER_CELL, seed=0) -> LogLikelihoodPath:
    """LLR of a discrete observation sequence of cell indices."""
    engine = QuantizedLikelihood(model, quantizer, mc_per_cell, seed, approximate)
    return engine.path(cell_indices)


def _rectangle_log_prob(cov, lower, upper) -> float:
    """log P[Y ∈ box] for a centered Gaussian pair (or single), by 1-D quadrature."""
    sd1 = np.sqrt(cov[0, 0])
    if cov.shape[0] == 1:
        return float(np.log(max(norm.cdf(upper[0] / sd1) - norm.cdf(lower[0] / sd1), 1e-300)))
    slope = cov[0, 1] / cov[0, 0]
    sd2 = np.sqrt(cov[1, 1] - slope * cov[0, 1])

    def integrand(y):
        inner = norm.cdf((upper[1] - slope * y) / sd2) - norm.cdf((lower[1] - slope * y) / sd2)
        return norm.pdf(y / sd1) / sd1 * inner

    with warnings.catch_warnings():
        warnings.simplefilter('ignore', IntegrationWarning)
        mass = quad(integrand, lower[0], upper[0], epsabs=0.0, epsrel=1e-10, limit=200)[0]
    return float(np.log(max(mass, 1e-300)))


def check_discretized_filter(model: GaussLinearModel, quantizer, n: int = 2,
                             tolerance: float = PREFLIGHT_TOLERANCE, min_probability: float = 1e-8,
                             engine=None) -> float:
    """Largest LLR gap between the discretized filter and exact rectangle probabilities.

    Every cell word of length ``n`` (1 or 2) whose exact probability under
    both hypotheses is at least ``min_probability`` is compared.
    """
    if not isinstance(model, GaussLinearModel) or model.dimension != 1:
        raise UnsupportedModelError('the preflight check applies to scalar Gauss-linear models')
    if n not in (1, 2):
        raise ValueError('preflight words have length 1 or 2')
    engine = engine or QuantizedLikelihood(model, quantizer)
    lo, hi = quantizer.scalar_bounds()
    words = np.array(list(product(range(quantizer.size), repeat=n)))
    covs = [toeplitz(autocovariance(model, h, n - 1)) for h in HYPOTHESES]
    exact = np.array([[_rectangle_log_prob(c, lo[w], hi[w]) for c in covs] for w in words])
    keep = np.all(exact >= np.log(min_probability), axis=1)
    filtered = engine.prefix(words[keep])[:, -1]
    gap = float(np.max(np.abs(filtered - (exact[keep, 1] - exact[keep, 0])))) if keep.any() else 0.0
    if gap > tolerance:
        logger.warning('discretized filter deviates by %.3g from exact rectangle probabilities', gap)
    else:
        logger.debug('discretized filter preflight gap %.3g', gap)
    return gap


def estimate_exponent_quantized(model, quantizer, n: int = None, seed=0, method: str = ERGODIC_AVERAGE,
                                burn_in: int = DEFAULT_BURN_IN, engine=None) -> ExponentEstimate:
    """K̂_N from one quantized H0 path, or the exact discrete KL for scalar i.i.d. models."""
    if method == EXACT_DISCRETE:
        if not isinstance(model, IidModel) or model.dimension != 1:
            raise UnsupportedModelError('exact discrete exponents need a scalar i.i.d. model')
        masses = iid_cell_masses(model, quantizer)
        p0, p1 = masses
        log1, _ = _floor(_log(p1))
        terms = np.where(p0 > 0, p0 * (_log(np.where(p0 > 0, p0, 1.0)) - log1), 0.0)
        return ExponentEstimate(float(terms.sum()), 0.0, 0, 0, EXACT_DISCRETE)
    if method != ERGODIC_AVERAGE:
        raise ValueError(f'unknown exponent method: {method}')
    if n is None or n < MIN_ERGODIC_LENGTH:
        raise ValueError(f'ergodic estimates need n >= {MIN_ERGODIC_LENGTH}')
    engine = engine or QuantizedLikelihood(model, quantizer, seed=seed)
    window = sample_path(model, Hypothesis.H0, n, burn_in, seed)
    cells = quantizer.assign(window.samples, clip=True)
    path = engine.path(cells)
    return _batch_means(path.increments(), n, n, ERGODIC_AVERAGE)

