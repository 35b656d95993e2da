"""Two-hypothesis stationary process models.

Three model families cover the detection scenarios:

- IidModel: i.i.d. observations with evaluable marginals under H0 and H1.
- FiniteStateHmm: a finite hidden chain observed through a Gaussian kernel
  truncated to the box [-M, M]^d (QPSK vs. OQPSK is the built-in instance).
- GaussLinearModel: Gaussian signal plus white noise, the signal being an
  AR(1) process or a moving average of white innovations under H1 and white
  under H0. Real components of a d-dimensional observation are independent
  copies of the same scalar process.

Models are immutable; every operation is a pure function of its arguments and
seed.
"""

import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import signal
from scipy.linalg import cho_factor, cho_solve, toeplitz
from scipy.special import logsumexp, softmax
from scipy.stats import truncnorm

from shared.errors import DomainError, MixingError
from shared.workers import substream

logger = logging.getLogger(__name__)

LEGENDRE_NODES = 64
ROW_SUM_TOLERANCE = 1e-12
STATIONARITY_TOLERANCE = 1e-10
POWER_ITERATION_TOLERANCE = 1e-12
DEFAULT_TRUNCATION_SDS = 8.0

AR1 = 'ar1'
MA = 'ma'


class Hypothesis(IntEnum):
    H0 = 0
    H1 = 1


HYPOTHESES = (Hypothesis.H0, Hypothesis.H1)


@dataclass(frozen=True, eq=False)
class ObservationWindow:
    """Consecutive samples y_{first_index}, ..., y_{first_index + n - 1}."""

    first_index: int
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError('a window holds a nonempty (n, d) array of samples')
        if not np.all(np.isfinite(samples)):
            raise ValueError('window samples must be finite')
        object.__setattr__(self, 'samples', samples)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    @property
    def last_index(self) -> int:
        return self.first_index + self.n - 1

    def centered(self, k: int) -> bool:
        return self.first_index == -k and self.n == 2 * k + 1


# ── Model types ──────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class IidModel:
    """I.i.d. observations; each callable pair is indexed by hypothesis.

    ``logpdf[i](points)`` maps (m, d) points to (m,) log-densities,
    ``grad_logpdf[i]`` to (m, d) gradients and ``sampler[i](rng, n)`` draws
    an (n, d) array.
    """

    dimension: int
    logpdf: tuple
    grad_logpdf: tuple
    sampler: tuple
    lower: np.ndarray = None
    upper: np.ndarray = None
    kl_divergence: float = None
    params: dict = None
    label: str = 'iid'


@dataclass(frozen=True, eq=False)
class FiniteStateHmm:
    """Finite hidden chain with a box-truncated isotropic Gaussian kernel.

    ``transitions[i]`` is the row-stochastic matrix under hypothesis i.
    ``centers[x]`` is T(x). The initial law defaults to the stationary law
    of the H1 chain and must be stationary under both chains.
    """

    transitions: np.ndarray
    centers: np.ndarray
    sigma: float
    half_width: float
    initial_dist: np.ndarray = None
    label: str = 'hmm'

    def __post_init__(self):
        transitions = np.asarray(self.transitions, dtype=float)
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if transitions.ndim != 3 or transitions.shape[0] != 2:
            raise ValueError('transitions must stack one matrix per hypothesis')
        num_states = centers.shape[0]
        if transitions.shape[1:] != (num_states, num_states):
            raise ValueError('transition matrices must be num_states x num_states')
        if np.any(transitions < 0) or np.any(np.abs(transitions.sum(axis=2) - 1) > ROW_SUM_TOLERANCE):
            raise ValueError('transition rows must be probability vectors')
        if not self.sigma > 0:
            raise ValueError('noise sigma must be positive')
        if not self.half_width > 0:
            raise ValueError('truncation half-width M must be positive')

        initial = self.initial_dist
        if initial is None:
            initial = stationary_distribution(transitions[1])
        initial = np.asarray(initial, dtype=float)
        if abs(initial.sum() - 1) > ROW_SUM_TOLERANCE or np.any(initial < 0):
            raise ValueError('initial_dist must be a probability vector')
        for matrix in transitions:
            if np.max(np.abs(initial @ matrix - initial)) > STATIONARITY_TOLERANCE:
                raise ValueError('initial_dist must be stationary for both transition matrices')

        object.__setattr__(self, 'transitions', transitions)
        object.__setattr__(self, 'centers', centers)
        object.__setattr__(self, 'initial_dist', initial)
        object.__setattr__(self, 'log_normalizers', self._log_normalizers())

    def _log_normalizers(self) -> np.ndarray:
        # C_M(σ) in product form: one 1-D Gauss-Legendre integral per axis.
        nodes, weights = np.polynomial.legendre.leggauss(LEGENDRE_NODES)
        t = self.half_width * nodes
        dens = np.exp(-(t[None, None, :] - self.centers[:, :, None]) ** 2 / (2 * self.sigma ** 2))
        per_axis = self.half_width * dens @ weights
        return np.log(per_axis).sum(axis=1)

    @property
    def num_states(self) -> int:
        return self.centers.shape[0]

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.dimension, -self.half_width)

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.dimension, self.half_width)

    @property
    def params(self) -> dict:
        return {
            'num_states': self.num_states,
            'sigma': self.sigma,
            'M': self.half_width,
            'centers': self.centers.tolist(),
            'transitions': self.transitions.tolist(),
        }


@dataclass(frozen=True, eq=False)
class GaussLinearModel:
    """Gaussian signal in white Gaussian noise.

    H0: Y_k = X_k + W_k with X white (AR1 kind) or Y_k = W_k (MA kind).
    H1: X_k = a X_{k-1} + sqrt(1-a²) U_k, or X_k = Σ_l h_l U_{k-l}.
    ``component_variance`` scales signal and noise of every real
    component; 1/2 is the circular complex convention CN(0, 1).
    """

    kind: str
    sigma: float
    dimension: int = 1
    ar_coefficient: float = None
    ma_taps: np.ndarray = None
    component_variance: float = 1.0
    truncation: float = None
    label: str = 'gauss'

    def __post_init__(self):
        if self.kind not in (AR1, MA):
            raise ValueError(f'unknown Gauss-linear kind: {self.kind}')
        if not self.sigma > 0:
            raise ValueError('noise sigma must be positive')
        if self.kind == AR1:
            if self.ar_coefficient is None or not abs(self.ar_coefficient) < 1:
                raise ValueError('AR(1) coefficient must satisfy |a| < 1')
        else:
            taps = np.atleast_1d(np.asarray(self.ma_taps, dtype=float))
            if taps.size == 0 or not np.all(np.isfinite(taps)):
                raise ValueError('MA taps must be a nonempty finite vector')
            object.__setattr__(self, 'ma_taps', taps)
        if not self.component_variance > 0:
            raise ValueError('component variance must be positive')

    @property
    def memory(self) -> int:
        return 0 if self.kind == AR1 else self.ma_taps.size - 1

    @property
    def params(self) -> dict:
        out = {'kind': self.kind, 'sigma': self.sigma, 'dimension': self.dimension,
               'component_variance': self.component_variance}
        if self.kind == AR1:
            out['a'] = self.ar_coefficient
        else:
            out['h'] = self.ma_taps.tolist()
        return out


# ── Built-in instances ───────────────────────────────────────────────

QPSK_CENTERS = np.array([[-1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
OQPSK_TRANSITIONS = np.array([
    [1, 1, 0, 1],
    [1, 1, 1, 0],
    [0, 1, 1, 1],
    [1, 0, 1, 1],
]) / 3.0


def qpsk_oqpsk(half_width: float = 3.0, sigma: float = 0.6) -> FiniteStateHmm:
    """QPSK (i.i.d. uniform symbols) against OQPSK (no diagonal jumps)."""
    uniform = np.full((4, 4), 0.25)
    return FiniteStateHmm(np.stack([uniform, OQPSK_TRANSITIONS]), QPSK_CENTERS, sigma,
                          half_width, np.full(4, 0.25), label='qpsk_oqpsk')


def ar_detection(a: float = 0.8, sigma: float = 1.0, dimension: int = 2,
                 circular: bool = True, truncation: float = None) -> GaussLinearModel:
    """White versus AR(1) Gaussian signal in noise."""
    variance = 0.5 if circular and dimension == 2 else 1.0
    return GaussLinearModel(AR1, sigma, dimension, ar_coefficient=a,
                            component_variance=variance, truncation=truncation, label='ar_detect')


def ma_detection(taps=(1.06677, -0.59281, 0.09565), sigma: float = 1.5,
                 truncation: float = None) -> GaussLinearModel:
    """Noise only versus a moving-average source in noise (scalar)."""
    return GaussLinearModel(MA, sigma, 1, ma_taps=np.asarray(taps, dtype=float),
                            truncation=truncation, label='ma_detect')


def gaussian_iid(mean0=0.0, var0: float = 1.0, mean1=1.0, var1: float = 1.0) -> IidModel:
    """I.i.d. isotropic Gaussians N(mean_i, var_i I)."""
    means = [np.atleast_1d(np.asarray(m, dtype=float)) for m in (mean0, mean1)]
    variances = (float(var0), float(var1))
    d = means[0].size
    if means[1].size != d or min(variances) <= 0:
        raise ValueError('means must share a dimension and variances must be positive')

    def logpdf_for(mu, v):
        return lambda y: -0.5 * (d * np.log(2 * np.pi * v)
                                 + np.sum((np.reshape(y, (-1, d)) - mu) ** 2, axis=1) / v)

    def grad_for(mu, v):
        return lambda y: -(np.reshape(y, (-1, d)) - mu) / v

    def sampler_for(mu, v):
        return lambda rng, n: mu + np.sqrt(v) * rng.standard_normal((n, d))

    kl = 0.5 * d * (variances[0] / variances[1] - 1 + np.log(variances[1] / variances[0])) \
        + 0.5 * np.sum((means[1] - means[0]) ** 2) / variances[1]
    return IidModel(
        dimension=d,
        logpdf=tuple(logpdf_for(m, v) for m, v in zip(means, variances)),
        grad_logpdf=tuple(grad_for(m, v) for m, v in zip(means, variances)),
        sampler=tuple(sampler_for(m, v) for m, v in zip(means, variances)),
        kl_divergence=float(kl),
        params={'family': 'gaussian', 'means': [m.tolist() for m in means],
                'variances': list(variances)},
        label='iid_gaussian',
    )


def uniform_iid(interval0=(0.0, 1.0), interval1=(1.0, 2.0)) -> IidModel:
    """Scalar i.i.d. uniforms; disjoint intervals give perfectly separable hypotheses."""
    intervals = [tuple(map(float, interval0)), tuple(map(float, interval1))]

    def logpdf_for(lo, hi):
        def logpdf(y):
            y = np.reshape(y, (-1, 1))[:, 0]
            inside = (y >= lo) & (y <= hi)
            return np.where(inside, -np.log(hi - lo), -np.inf)
        return logpdf

    def sampler_for(lo, hi):
        return lambda rng, n: rng.uniform(lo, hi, (n, 1))

    zero_grad = lambda y: np.zeros((np.reshape(y, (-1, 1)).shape[0], 1))
    lower = min(lo for lo, _ in intervals)
    upper = max(hi for _, hi in intervals)
    return IidModel(
        dimension=1,
        logpdf=tuple(logpdf_for(*iv) for iv in intervals),
        grad_logpdf=(zero_grad, zero_grad),
        sampler=tuple(sampler_for(*iv) for iv in intervals),
        lower=np.array([lower]),
        upper=np.array([upper]),
        params={'family': 'uniform', 'intervals': intervals},
        label='iid_uniform',
    )


# ── Structural helpers ───────────────────────────────────────────────

def stationary_distribution(matrix) -> np.ndarray:
    """Stationary law by power iteration on the lazy chain (P + I)/2."""
    matrix = np.asarray(matrix, dtype=float)
    lazy = 0.5 * (matrix + np.eye(matrix.shape[0]))
    pi = np.full(matrix.shape[0], 1.0 / matrix.shape[0])
    for _ in range(1_000_000):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < POWER_ITERATION_TOLERANCE:
            return nxt
        pi = nxt
    logger.warning('power iteration did not reach %g', POWER_ITERATION_TOLERANCE)
    return pi


def is_bounded(model) -> bool:
    return getattr(model, 'lower', None) is not None and not isinstance(model, GaussLinearModel)


def marginal_variance(model: GaussLinearModel, hyp: Hypothesis) -> float:
    return float(autocovariance(model, hyp, 0)[0])


def domain_box(model, half_width: float = None):
    """Bounded domain of the model, or its truncation box when unbounded.

    The truncation box defaults to ±8 marginal standard deviations (the
    larger of the two hypotheses) per axis.
    """
    if is_bounded(model):
        return np.asarray(model.lower, dtype=float), np.asarray(model.upper, dtype=float)
    if half_width is None:
        half_width = getattr(model, 'truncation', None)
    if half_width is None:
        if isinstance(model, GaussLinearModel):
            sd = max(np.sqrt(marginal_variance(model, h)) for h in HYPOTHESES)
            half_width = DEFAULT_TRUNCATION_SDS * sd
        else:
            sd = max(np.sqrt(v) for v in model.params.get('variances', [1.0]))
            means = np.abs(np.asarray(model.params.get('means', [[0.0]]))).max()
            half_width = means + DEFAULT_TRUNCATION_SDS * sd
    return np.full(model.dimension, -float(half_width)), np.full(model.dimension, float(half_width))


def check_in_domain(model, points):
    """Raise DomainError when a point leaves a bounded model domain."""
    if not is_bounded(model):
        return
    points = np.reshape(points, (-1, model.dimension))
    if np.any(points < model.lower) or np.any(points > model.upper):
        raise DomainError('observation outside the model domain box')


def autocovariance(model: GaussLinearModel, hyp: Hypothesis, max_lag: int) -> np.ndarray:
    """Autocovariance r(0..max_lag) of one real component."""
    s = model.component_variance
    r = np.zeros(max_lag + 1)
    if model.kind == AR1:
        r[0] = s * (1 + model.sigma ** 2)
        if hyp == Hypothesis.H1:
            r[1:] = s * model.ar_coefficient ** np.arange(1, max_lag + 1)
    else:
        r[0] = s * model.sigma ** 2
        if hyp == Hypothesis.H1:
            h = model.ma_taps
            for lag in range(min(max_lag, h.size - 1) + 1):
                r[lag] += s * np.dot(h[:h.size - lag], h[lag:])
    return r


def is_white(model, hyp: Hypothesis) -> bool:
    if isinstance(model, IidModel):
        return True
    if isinstance(model, GaussLinearModel):
        return hyp == Hypothesis.H0
    return bool(np.allclose(model.transitions[hyp], model.initial_dist[None, :]))


def state_space(model: GaussLinearModel, hyp: Hypothesis):
    """(F, Q, H, R, P0) of one component under H1; None when the component is white."""
    if hyp == Hypothesis.H0:
        return None
    s = model.component_variance
    if model.kind == AR1:
        a = model.ar_coefficient
        return (np.array([[a]]), np.array([[s * (1 - a ** 2)]]), np.array([1.0]),
                s * model.sigma ** 2, np.array([[s]]))
    dim = model.ma_taps.size
    transition = np.eye(dim, k=-1)
    noise = np.zeros((dim, dim))
    noise[0, 0] = s
    return transition, noise, model.ma_taps.copy(), s * model.sigma ** 2, s * np.eye(dim)


def log_emissions(model: FiniteStateHmm, points) -> np.ndarray:
    """log g(x, y) for every point and state, shape (m, num_states); -inf off the box."""
    points = np.reshape(np.asarray(points, dtype=float), (-1, model.dimension))
    sq = np.sum((points[:, None, :] - model.centers[None, :, :]) ** 2, axis=2)
    out = -sq / (2 * model.sigma ** 2) - model.log_normalizers[None, :]
    inside = np.all((points >= -model.half_width) & (points <= model.half_width), axis=1)
    out[~inside] = -np.inf
    return out


# ── Operations ───────────────────────────────────────────────────────

def observation_kernel(model: FiniteStateHmm, state: int, y) -> float:
    """g(x, y): the truncated Gaussian kernel density of y given state x."""
    if not 0 <= int(state) < model.num_states:
        raise ValueError(f'state {state} out of range for {model.num_states} states')
    y = np.asarray(y, dtype=float)
    values = np.exp(log_emissions(model, y)[:, int(state)])
    return float(values[0]) if y.ndim == 1 else values


def marginal_logpdf(model, hyp: Hypothesis, y):
    """Log of the single-sample marginal density under ``hyp``."""
    hyp = Hypothesis(hyp)
    y = np.asarray(y, dtype=float)
    points = np.reshape(y, (-1, model.dimension))
    check_in_domain(model, points)
    if isinstance(model, IidModel):
        out = model.logpdf[hyp](points)
    elif isinstance(model, FiniteStateHmm):
        with np.errstate(divide='ignore'):
            log_pi = np.log(model.initial_dist)
        out = logsumexp(log_emissions(model, points) + log_pi[None, :], axis=1)
    else:
        v = marginal_variance(model, hyp)
        out = -0.5 * np.sum(np.log(2 * np.pi * v) + points ** 2 / v, axis=1)
    return float(out[0]) if y.ndim <= 1 and points.shape[0] == 1 else out


def sample_path(model, hyp: Hypothesis, n: int, burn_in: int = 0, seed=0) -> ObservationWindow:
    """Simulate n consecutive observations after discarding ``burn_in`` samples."""
    if n < 1:
        raise ValueError('path length n must be at least 1')
    if burn_in < 0:
        raise ValueError('burn_in must be nonnegative')
    rng = substream(seed, 7, int(Hypothesis(hyp)))
    samples = draw_samples(model, Hypothesis(hyp), n + burn_in, rng)
    return ObservationWindow(1, samples[burn_in:])


def draw_samples(model, hyp: Hypothesis, total: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary path of ``total`` observations drawn from ``rng``, shape (total, d)."""
    if isinstance(model, IidModel):
        return np.asarray(model.sampler[hyp](rng, total), dtype=float).reshape(total, model.dimension)
    if isinstance(model, FiniteStateHmm):
        states = _draw_states(model.transitions[hyp], model.initial_dist, total, rng)
        centers = model.centers[states]
        lo = (-model.half_width - centers) / model.sigma
        hi = (model.half_width - centers) / model.sigma
        return np.reshape(truncnorm.rvs(lo, hi, loc=centers, scale=model.sigma, random_state=rng),
                          (total, model.dimension))
    return _draw_gauss_linear(model, hyp, total, rng)


def _draw_states(matrix, initial, total, rng) -> np.ndarray:
    cumulative = np.cumsum(matrix, axis=1)
    last = matrix.shape[0] - 1
    uniforms = rng.random(total)
    states = np.empty(total, dtype=int)
    states[0] = min(int(np.searchsorted(np.cumsum(initial), uniforms[0], side='right')), last)
    for k in range(1, total):
        states[k] = min(int(np.searchsorted(cumulative[states[k - 1]], uniforms[k], side='right')), last)
    return states


def _draw_gauss_linear(model: GaussLinearModel, hyp: Hypothesis, total: int, rng) -> np.ndarray:
    s = model.component_variance
    d = model.dimension
    noise = np.sqrt(s) * model.sigma * rng.standard_normal((total, d))
    if model.kind == AR1:
        if hyp == Hypothesis.H0:
            return np.sqrt(s) * rng.standard_normal((total, d)) + noise
        a = model.ar_coefficient
        drive = np.sqrt(s * (1 - a ** 2)) * rng.standard_normal((total, d))
        drive[0] = np.sqrt(s) * rng.standard_normal(d)
        return signal.lfilter([1.0], [1.0, -a], drive, axis=0) + noise
    if hyp == Hypothesis.H0:
        return noise
    memory = model.memory
    innovations = np.sqrt(s) * rng.standard_normal((total + memory, d))
    return signal.lfilter(model.ma_taps, [1.0], innovations, axis=0)[memory:] + noise


def validate_mixing(model: FiniteStateHmm):
    """Smallest m with every m-step transition probability positive under both hypotheses."""
    limit = model.num_states ** 2
    powers = [np.eye(model.num_states), np.eye(model.num_states)]
    for m in range(1, limit + 1):
        powers = [p @ q for p, q in zip(powers, model.transitions)]
        stacked = np.stack(powers)
        if np.all(stacked > 0):
            return MixingReport(m, float(stacked.min()), float(stacked.max()))
    raise MixingError(f'no power m <= {limit} of the transition matrices is strictly positive')


@dataclass(frozen=True)
class MixingReport:
    m: int
    sigma_minus: float
    sigma_plus: float


# ── Gradient of the log-likelihood ratio ─────────────────────────────

def grad_log_ratio(model, window: ObservationWindow, k: int) -> np.ndarray:
    """∇_{y0} log(p0/p1)(y_{-k:k}) for a window centered at index 0."""
    if k < 0 or not window.centered(k):
        raise ValueError(f'window must span indices {-k}..{k}')
    check_in_domain(model, window.samples)
    grads = score_gradients(model, window.samples[None, :, :], window.samples[k][None, :])
    return grads[0, 0]


def score_gradients(model, sides, nodes) -> np.ndarray:
    """Gradients with each node substituted at the window center.

    Args:
        model: Any process model.
        sides: (R, 2k+1, d) windows; the center slot is ignored.
        nodes: (m, d) values for y0.

    Returns:
        (R, m, d) array of ∇_{y0} log(p0/p1).
    """
    sides = np.asarray(sides, dtype=float)
    nodes = np.reshape(np.asarray(nodes, dtype=float), (-1, model.dimension))
    replications, width, _ = sides.shape
    k = (width - 1) // 2
    if isinstance(model, IidModel):
        grad = model.grad_logpdf[0](nodes) - model.grad_logpdf[1](nodes)
        return np.broadcast_to(grad[None, :, :], (replications,) + grad.shape).copy()
    if isinstance(model, GaussLinearModel):
        u = gauss_score_coefficients(model, k)
        side_term = np.einsum('j,rjd->rd', np.delete(u, k), np.delete(sides, k, axis=1))
        return u[k] * nodes[None, :, :] + side_term[:, None, :]
    return _hmm_score_gradients(model, sides, nodes, k)


def gauss_score_coefficients(model: GaussLinearModel, k: int) -> np.ndarray:
    """Row u of Σ1⁻¹ − Σ0⁻¹ at the center, so that the gradient is u · y_{-k:k} per component."""
    rows = []
    center = np.zeros(2 * k + 1)
    center[k] = 1.0
    for hyp in HYPOTHESES:
        cov = toeplitz(autocovariance(model, hyp, 2 * k))
        rows.append(cho_solve(cho_factor(cov), center))
    return rows[1] - rows[0]


def _hmm_score_gradients(model: FiniteStateHmm, sides, nodes, k) -> np.ndarray:
    node_log_g = log_emissions(model, nodes)
    expected = []
    for hyp in HYPOTHESES:
        weights = _side_log_messages(model, hyp, sides, k)
        log_post = weights[:, None, :] + node_log_g[None, :, :]
        expected.append(softmax(log_post, axis=2) @ model.centers)
    return (expected[0] - expected[1]) / model.sigma ** 2


def _side_log_messages(model: FiniteStateHmm, hyp: Hypothesis, sides, k) -> np.ndarray:
    """log of (predictive law of X0 given the past) × (likelihood of the future given X0)."""
    with np.errstate(divide='ignore'):
        log_q = np.log(model.transitions[hyp])
        log_pi = np.log(model.initial_dist)
    replications = sides.shape[0]
    alpha = np.broadcast_to(log_pi, (replications, model.num_states))
    for j in range(k):
        emit = log_emissions(model, sides[:, j, :])
        alpha = alpha + emit
        alpha = alpha - logsumexp(alpha, axis=1, keepdims=True)
        alpha = logsumexp(alpha[:, :, None] + log_q[None, :, :], axis=1)
    beta = np.zeros((replications, model.num_states))
    for j in range(2 * k, k, -1):
        emit = log_emissions(model, sides[:, j, :])
        beta = logsumexp(log_q[None, :, :] + (emit + beta)[:, None, :], axis=2)
        beta = beta - np.max(beta, axis=1, keepdims=True)
    return alpha + beta
