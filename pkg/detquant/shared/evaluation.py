"""Detector-level comparisons of quantizers.

roc_curve runs Monte-Carlo trials of the quantized LLR test under both
hypotheses; exponent_loss_table tabulates the loss constant D_e of several
quantizers for one model; convergence_diagnostic checks N²(K − K_N) against
D_e for scalar i.i.d. models.
"""

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import gaussian_filter

from shared import highrate
from shared.errors import UnsupportedModelError
from shared.fields import (NU_CUBIC, NU_HEXAGONAL, POINT_DENSITY, CovariationProfile, DensityField, Grid,
                           write_comments)
from shared.likelihood import (EXACT_DISCRETE, PREFLIGHT_TOLERANCE, QuantizedLikelihood,
                               check_discretized_filter, estimate_exponent_quantized, exact_raw_exponent)
from shared.processes import GaussLinearModel, Hypothesis, IidModel, domain_box, draw_samples
from shared.quantizers import UNIFORM, CompanderQuantizer, cell_stats, uniform_quantizer
from shared.workers import chunk_slices, ordered_map, substream

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 50000
DEFAULT_PATH_LENGTH = 80
TRIAL_CHUNK = 500
DEFAULT_BANDWIDTH = 0.0
CODEPOINT_BANDWIDTH = 2.0
SENSITIVITY_BANDWIDTHS = (1.0, 2.0)
CELL_MC_PER_CELL = 10_000

PROFILES = {
    'isotropic': NU_CUBIC,
    'hexagonal': NU_HEXAGONAL,
}
EMPIRICAL = 'empirical'


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Empirical (false alarm, miss) trade-off sorted by false alarm."""

    pfa: np.ndarray
    pmiss: np.ndarray
    n_samples: int
    n: int
    label: str = ''

    def __post_init__(self):
        pfa = np.asarray(self.pfa, dtype=float)
        pmiss = np.asarray(self.pmiss, dtype=float)
        if pfa.shape != pmiss.shape or pfa.size < 2:
            raise ValueError('a ROC curve needs at least two matching points')
        if np.any((pfa < 0) | (pfa > 1) | (pmiss < 0) | (pmiss > 1)):
            raise ValueError('ROC probabilities must lie in [0, 1]')
        if np.any(np.diff(pfa) < 0) or np.any(np.diff(pmiss) > 0):
            raise ValueError('ROC points must trade miss against false alarm monotonically')
        object.__setattr__(self, 'pfa', pfa)
        object.__setattr__(self, 'pmiss', pmiss)


def curve_from_llrs(llr0, llr1, n: int, label: str = '') -> RocCurve:
    """Empirical ROC sweeping the threshold over every pooled LLR value.

    The test decides H1 when L > τ, so pfa = P0(L > τ) and pmiss = P1(L <= τ).
    """
    llr0 = np.sort(np.asarray(llr0, dtype=float))
    llr1 = np.sort(np.asarray(llr1, dtype=float))
    thresholds = np.concatenate([[-np.inf], np.unique(np.concatenate([llr0, llr1]))])
    pfa = 1.0 - np.searchsorted(llr0, thresholds, side='right') / llr0.size
    pmiss = np.searchsorted(llr1, thresholds, side='right') / llr1.size
    return RocCurve(pfa[::-1], pmiss[::-1], int(llr0.size), n, label)


def roc_curve(model, quantizer, n: int = DEFAULT_PATH_LENGTH, trials: int = DEFAULT_TRIALS, seed=0,
              threads=None, engine=None, preflight: bool = True) -> RocCurve:
    """Quantized-LLR ROC from ``trials`` paths of length n under each hypothesis."""
    if n < 1 or trials < 1:
        raise ValueError('need n >= 1 and trials >= 1')
    engine = engine or QuantizedLikelihood(model, quantizer, seed=seed, threads=threads)
    if preflight and isinstance(model, GaussLinearModel) and model.dimension == 1:
        gap = check_discretized_filter(model, quantizer, engine=engine)
        if gap > PREFLIGHT_TOLERANCE:
            raise UnsupportedModelError(f'discretized-state filter preflight failed (gap {gap:.3g})')

    def run(item):
        hyp, part = item
        cells = np.empty((part.stop - part.start, n), dtype=int)
        for row, trial in enumerate(range(part.start, part.stop)):
            path = draw_samples(model, hyp, n, substream(seed, 6, int(hyp), trial))
            cells[row] = quantizer.assign(path, clip=True)
        return engine.prefix(cells)[:, -1]

    items = [(hyp, part) for hyp in (Hypothesis.H0, Hypothesis.H1) for part in chunk_slices(trials, TRIAL_CHUNK)]
    results = ordered_map(run, items, threads)
    half = len(items) // 2
    llr0 = np.concatenate(results[:half])
    llr1 = np.concatenate(results[half:])
    label = getattr(quantizer, 'label', '')
    logger.info('ROC %s: n=%d, trials=%d', label, n, trials)
    return curve_from_llrs(llr0, llr1, n, label)


def miss_at(curve: RocCurve, alpha: float) -> float:
    """Miss probability at false-alarm level ``alpha`` by linear interpolation."""
    levels, first = np.unique(curve.pfa, return_index=True)
    best = np.minimum.reduceat(curve.pmiss, first)
    return float(np.interp(alpha, levels, best))


def miss_standard_error(curve: RocCurve, alpha: float) -> float:
    p = miss_at(curve, alpha)
    return float(np.sqrt(p * (1 - p) / curve.n_samples))


def auc(curve: RocCurve) -> float:
    """Area under (false alarm, detection = 1 − miss)."""
    return float(trapezoid(1.0 - curve.pmiss, curve.pfa))


def write_roc_csv(path, curve: RocCurve, comments=()):
    """CSV `pfa,pmiss`, one row per curve point, after optional ``#`` comment rows."""
    with open(path, 'w', encoding='utf-8', newline='') as f:
        write_comments(f, comments)
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['pfa', 'pmiss'])
        for a, b in zip(curve.pfa, curve.pmiss):
            writer.writerow([repr(float(a)), repr(float(b))])


# ── Exponent-loss tables ─────────────────────────────────────────────

@dataclass
class QuantizerEntry:
    label: str
    N: int
    De: float
    bandwidth_sensitivity: dict = field(default_factory=dict)
    kn: float = None
    auc: float = None


@dataclass
class ComparisonReport:
    model: dict
    seeds: dict
    settings: dict
    holder_bound: float
    entries: list = field(default_factory=list)

    def entry(self, label: str) -> QuantizerEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    def to_dict(self) -> dict:
        return asdict(self)


def analytic_point_density(quantizer, grid: Grid) -> DensityField:
    """ζ_N of a uniform or compander quantizer evaluated on grid nodes."""
    if isinstance(quantizer, CompanderQuantizer):
        cells = quantizer.assign(grid.points(), clip=True)
        values = 1.0 / (quantizer.size * quantizer.widths[cells])
    elif getattr(quantizer, 'kind', None) == UNIFORM:
        values = np.full(grid.size, 1.0 / float(np.prod(quantizer.upper - quantizer.lower)))
    else:
        raise ValueError('only uniform and compander quantizers have an analytic point density')
    return DensityField(grid, values, POINT_DENSITY)


def empirical_point_density(quantizer, grid: Grid, stats, bandwidth: float = DEFAULT_BANDWIDTH) -> DensityField:
    """Piecewise-constant cell density ζ_N = 1/(N·V_j) on the grid nodes.

    A positive ``bandwidth`` (in grid steps) Gaussian-smooths the painted field;
    0 keeps the cell-volume definition.
    """
    zeta_cells = stats.zeta.copy()
    finite = np.isfinite(zeta_cells)
    if not finite.all():
        zeta_cells[~finite] = zeta_cells[finite].max()
    painted = zeta_cells[quantizer.assign(grid.points(), clip=True)].reshape(grid.shape)
    smoothed = gaussian_filter(painted, sigma=bandwidth, mode='nearest') if bandwidth > 0 else painted
    return DensityField(grid, smoothed, POINT_DENSITY).normalized()


def _profile_for(profile, quantizer, grid, stats):
    if profile == EMPIRICAL:
        cells = quantizer.assign(grid.points(), clip=True)
        return CovariationProfile.per_node(grid, stats.covariations[cells].reshape(grid.shape + (grid.dimension,) * 2))
    nu = PROFILES[profile] if isinstance(profile, str) else float(profile)
    return CovariationProfile.isotropic(nu, grid.dimension)


def exponent_loss_table(model, quantizers, grid_nodes: int = 101, k: int = 3, n_mc: int = 1000, seed=0,
                        box=None, profile='isotropic', fbar=None, fbar_method: str = highrate.MONTE_CARLO,
                        bandwidth: float = DEFAULT_BANDWIDTH, mc_per_cell: int = CELL_MC_PER_CELL,
                        threads=None) -> ComparisonReport:
    """D_e of each quantizer on a common grid.

    Args:
        model: Process model.
        quantizers: Quantizers with distinct labels.
        grid_nodes: Nodes per axis of the evaluation grid.
        k, n_mc, fbar_method: F̄ settings, ignored when ``fbar`` is given.
        box: (lower, upper) evaluation box; the model domain by default.
        profile: 'isotropic' (ν=1/12), 'hexagonal', a number ν, or 'empirical'
            for per-cell covariation measured by cell_stats.
        bandwidth: ζ smoothing for trained quantizers, in grid steps; 0 uses
            the cell-volume density 1/(N·V_j).
        mc_per_cell: Points per cell for cell_stats.

    Returns:
        ComparisonReport with one entry per quantizer.
    """
    lower, upper = domain_box(model) if box is None else box
    grid = Grid.regular(lower, upper, grid_nodes) if fbar is None else fbar.grid
    if fbar is None:
        fbar = highrate.estimate_Fbar(model, grid, k, n_mc, seed, method=fbar_method, threads=threads)
    p0 = highrate.marginal_density_field(model, Hypothesis.H0, grid)
    isotropic = highrate.compute_F(fbar, CovariationProfile.isotropic(NU_CUBIC, grid.dimension))
    report = ComparisonReport(
        model={'label': model.label, **model.params},
        seeds={'seed': seed},
        settings={'grid_nodes': grid_nodes, 'k': fbar.depth, 'n_mc': n_mc, 'fbar_method': fbar_method,
                  'profile': profile, 'bandwidth': bandwidth, 'lower': list(map(float, lower)),
                  'upper': list(map(float, upper))},
        holder_bound=highrate.holder_lower_bound(p0, isotropic),
    )
    for q in quantizers:
        analytic = isinstance(q, CompanderQuantizer) or getattr(q, 'kind', None) == UNIFORM
        stats = None
        if not analytic or profile == EMPIRICAL:
            stats = cell_stats(q, mc_per_cell * q.size, seed)
        F = highrate.compute_F(fbar, _profile_for(profile, q, grid, stats))
        sensitivity = {}
        if analytic:
            zeta = analytic_point_density(q, grid)
        else:
            zeta = empirical_point_density(q, grid, stats, bandwidth)
            for alt in SENSITIVITY_BANDWIDTHS:
                alt_zeta = empirical_point_density(q, grid, stats, alt)
                sensitivity[str(alt)] = highrate.compute_De(p0, F, alt_zeta)
        de = highrate.compute_De(p0, F, zeta)
        logger.info('D_e[%s] = %.4f', q.label, de)
        report.entries.append(QuantizerEntry(q.label, q.size, de, sensitivity))
    return report


# ── Convergence diagnostic ───────────────────────────────────────────

@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    gap: float
    normalized_gap: float
    De: float


def convergence_diagnostic(model: IidModel, sizes=(16, 32, 64, 128), lower: float = -8.0, upper: float = 8.0,
                           grid_nodes: int = 1601) -> list:
    """N²(K − K_N) for uniform N-cell quantizers on [lower, upper] against D_e at uniform ζ."""
    if not isinstance(model, IidModel) or model.dimension != 1:
        raise UnsupportedModelError('the convergence diagnostic needs a scalar i.i.d. model')
    K = exact_raw_exponent(model)
    grid = Grid.regular([lower], [upper], grid_nodes)
    p0 = highrate.marginal_density_field(model, Hypothesis.H0, grid)
    fbar = highrate.estimate_Fbar(model, grid, 0, 1, method=highrate.EXACT)
    F = highrate.compute_F(fbar, CovariationProfile.isotropic(NU_CUBIC, 1))
    rows = []
    for N in sizes:
        q = uniform_quantizer([lower], [upper], [N])
        KN = estimate_exponent_quantized(model, q, method=EXACT_DISCRETE).value
        de = highrate.compute_De(p0, F, analytic_point_density(q, grid))
        gap = K - KN
        rows.append(ConvergenceRow(N, gap, N ** 2 * gap, de))
        logger.debug('N=%d: K-K_N=%.3e, N²(K-K_N)=%.4f, D_e=%.4f', N, gap, N ** 2 * gap, de)
    return rows


# ── Codebook comparison ──────────────────────────────────────────────

def symmetric_kl_codepoint_densities(first, second, grid: Grid, bandwidth: float = CODEPOINT_BANDWIDTH) -> float:
    """Symmetric KL between Gaussian-smoothed codepoint histograms of two quantizers on a grid."""
    densities = []
    for q in (first, second):
        cells = [np.concatenate([[a[0] - 0.5 * s], 0.5 * (a[1:] + a[:-1]), [a[-1] + 0.5 * s]])
                 for a, s in zip(grid.axes, grid.steps)]
        counts, _ = np.histogramdd(q.points, bins=cells)
        smoothed = gaussian_filter(counts.astype(float), sigma=bandwidth, mode='constant')
        smoothed = np.maximum(smoothed, 1e-12 * smoothed.max())
        densities.append(smoothed / smoothed.sum())
    p, r = densities
    return float(np.sum((p - r) * np.log(p / r)))
