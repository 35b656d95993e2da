"""High-rate asymptotics of the quantized error exponent.

Everything here works on gridded fields (see shared.fields): the score field
F̄, its cell-shape weighted version F = trace(M·L̄), the loss constant D_e,
the optimal and Bennett point densities, the LBG target q* and the
Gupta-Hero score for i.i.d. marginals.
"""

import logging

import numpy as np

from shared.errors import DegenerateDensityError, UnsupportedModelError
from shared.fields import (POINT_DENSITY, PROBABILITY_DENSITY, CovariationProfile, DensityField,
                           ScoreField, integrate, require_same_grid)
from shared.processes import (GaussLinearModel, Hypothesis, IidModel, autocovariance, draw_samples,
                              gauss_score_coefficients, is_white, marginal_logpdf, score_gradients)
from shared.workers import chunk_slices, ordered_map, substream

logger = logging.getLogger(__name__)

MONTE_CARLO = 'monte_carlo'
EXACT = 'exact'
NODE_CHUNK = 512


def marginal_density_field(model, hyp: Hypothesis, grid) -> DensityField:
    """Single-sample marginal density of ``hyp`` evaluated on every node."""
    values = np.exp(marginal_logpdf(model, hyp, grid.points()))
    return DensityField(grid, values, PROBABILITY_DENSITY)


# ── Score fields ─────────────────────────────────────────────────────

def estimate_Fbar(model, grid, k: int = 3, n_mc: int = 1000, seed=0,
                  method: str = MONTE_CARLO, threads=None) -> ScoreField:
    """F̄_k(y) = E0[‖∇_{y0} log(p0/p1)(Y_{-k:k})‖² | Y0 = y] on every grid node.

    The Monte-Carlo method draws ``n_mc`` side windows under H0 and reuses
    them at every node. ``method='exact'`` evaluates the expectation in
    closed form for i.i.d. models and for Gauss-linear models with white H0.
    The returned field carries the second-moment matrices L̄ in ``moments``.
    """
    if k < 0 or n_mc < 1:
        raise ValueError('need k >= 0 and n_mc >= 1')
    if grid.dimension != model.dimension:
        raise ValueError('grid dimension does not match the model')
    if method == EXACT:
        return _exact_Fbar(model, grid, k)
    if method != MONTE_CARLO:
        raise ValueError(f'unknown F̄ method: {method}')

    width = 2 * k + 1
    sides = np.stack([draw_samples(model, Hypothesis.H0, width, substream(seed, 3, r))
                      for r in range(n_mc)])
    nodes = grid.points()

    def node_chunk(part):
        grads = score_gradients(model, sides, nodes[part])
        squared = np.sum(grads ** 2, axis=2)
        mean = squared.mean(axis=0)
        stderr = squared.std(axis=0, ddof=1) / np.sqrt(n_mc) if n_mc > 1 else np.zeros_like(mean)
        moments = np.einsum('rmi,rmj->mij', grads, grads) / n_mc
        return mean, stderr, moments

    parts = ordered_map(node_chunk, chunk_slices(grid.size, NODE_CHUNK), threads)
    values = np.concatenate([p[0] for p in parts])
    stderr = np.concatenate([p[1] for p in parts])
    moments = np.concatenate([p[2] for p in parts])
    logger.debug('F̄ estimated: max %.4g, median stderr %.3g', values.max(), np.median(stderr))
    return ScoreField(grid, values, stderr, moments, depth=k)


def _exact_Fbar(model, grid, k) -> ScoreField:
    nodes = grid.points()
    d = grid.dimension
    if isinstance(model, IidModel):
        grads = score_gradients(model, np.zeros((1, 2 * k + 1, d)), nodes)[0]
        moments = np.einsum('mi,mj->mij', grads, grads)
    elif isinstance(model, GaussLinearModel) and is_white(model, Hypothesis.H0):
        u = gauss_score_coefficients(model, k)
        side_variance = autocovariance(model, Hypothesis.H0, 0)[0] * (np.sum(u ** 2) - u[k] ** 2)
        moments = u[k] ** 2 * np.einsum('mi,mj->mij', nodes, nodes) + side_variance * np.eye(d)[None]
    else:
        raise UnsupportedModelError('closed-form F̄ needs an i.i.d. model or a white H0 Gauss model')
    values = np.trace(moments, axis1=1, axis2=2)
    return ScoreField(grid, values, np.zeros(grid.size), moments, depth=k)


def compute_F(fbar: ScoreField, profile: CovariationProfile) -> ScoreField:
    """F(y) = trace(M(y)·L̄(y)); ν·F̄ when M = ν·I."""
    if profile.dimension != fbar.grid.dimension:
        raise ValueError('covariation profile dimension does not match the field')
    if profile.is_isotropic:
        return fbar.scaled(profile.nu)
    if fbar.moments is None:
        raise ValueError('a non-isotropic profile needs the second-moment matrices of F̄')
    if profile.grid is not None:
        require_same_grid(fbar, profile)
        matrices = profile.matrices
    else:
        matrices = np.broadcast_to(profile.matrices, fbar.moments.shape)
    values = np.einsum('...ij,...ji->...', matrices, fbar.moments)
    # Roundoff can push a trace of PSD products a hair below zero.
    values = np.maximum(values, 0.0)
    largest = np.linalg.eigvalsh(matrices)[..., -1]
    return ScoreField(fbar.grid, values, fbar.stderr * largest, None, fbar.depth)


def gupta_hero_F(p0: DensityField, p1: DensityField, profile: CovariationProfile) -> ScoreField:
    """F(y) = ∇Λᵀ M ∇Λ with Λ = log(p0/p1), gradients by finite differences on the grid."""
    grid = require_same_grid(p0, p1)
    tiny = np.finfo(float).tiny
    log_ratio = np.log(np.maximum(p0.values, tiny)) - np.log(np.maximum(p1.values, tiny))
    if grid.dimension == 1:
        grads = [np.gradient(log_ratio, grid.axes[0])]
    else:
        grads = list(np.gradient(log_ratio, *grid.axes))
    grad = np.stack(grads, axis=-1)
    if profile.grid is not None:
        require_same_grid(p0, profile)
        matrices = profile.matrices
    else:
        matrices = np.broadcast_to(profile.matrices, grid.shape + profile.matrices.shape[-2:])
    values = np.einsum('...i,...ij,...j->...', grad, matrices, grad)
    return ScoreField(grid, np.maximum(values, 0.0), depth=0)


# ── Loss constant and point densities ────────────────────────────────

def degenerate_nodes(p0: DensityField, F: ScoreField, zeta: DensityField) -> np.ndarray:
    """Flat indices of nodes where ζ = 0 while p0·F > 0."""
    product = p0.values * F.values
    return np.flatnonzero((zeta.values <= 0) & (product > 0))


def compute_De(p0: DensityField, F: ScoreField, zeta: DensityField, d: int = None) -> float:
    """D_e = ½ ∫ p0 F / ζ^{2/d}; +∞ when ζ vanishes where p0·F does not."""
    grid = require_same_grid(p0, F, zeta)
    d = grid.dimension if d is None else d
    bad = degenerate_nodes(p0, F, zeta)
    if bad.size:
        logger.warning('ζ vanishes on %d nodes where p0·F > 0 (first %s)', bad.size, bad[:5].tolist())
        return float('inf')
    product = p0.values * F.values
    with np.errstate(divide='ignore', invalid='ignore'):
        integrand = np.where(product > 0, product / zeta.values ** (2.0 / d), 0.0)
    return 0.5 * integrate(grid, integrand)


def _power_density(product, grid, exponent, kind) -> DensityField:
    if not np.any(product > 0):
        raise DegenerateDensityError('p0·F vanishes on the whole grid')
    return DensityField(grid, np.maximum(product, 0.0) ** exponent, kind).normalized()


def optimal_density_vector(p0: DensityField, F: ScoreField, d: int = None) -> DensityField:
    """ζ ∝ (p0·F)^{d/(d+2)}."""
    grid = require_same_grid(p0, F)
    d = grid.dimension if d is None else d
    return _power_density(p0.values * F.values, grid, d / (d + 2.0), POINT_DENSITY)


def optimal_density_scalar(p0: DensityField, F: ScoreField) -> DensityField:
    """ζ ∝ (p0·F)^{1/3}."""
    if p0.grid.dimension != 1:
        raise ValueError('the scalar optimal density needs a one-dimensional grid')
    return optimal_density_vector(p0, F, 1)


def holder_lower_bound(p0: DensityField, F: ScoreField, d: int = None) -> float:
    """½ (∫ (p0·F)^{d/(d+2)})^{(d+2)/d}, the smallest D_e over normalized ζ."""
    grid = require_same_grid(p0, F)
    d = grid.dimension if d is None else d
    mass = integrate(grid, np.maximum(p0.values * F.values, 0.0) ** (d / (d + 2.0)))
    return 0.5 * mass ** ((d + 2.0) / d)


def bennett_mse_density(p0: DensityField, d: int = None) -> DensityField:
    """ζ_MSE ∝ p0^{d/(d+2)}."""
    d = p0.grid.dimension if d is None else d
    return _power_density(p0.values, p0.grid, d / (d + 2.0), POINT_DENSITY)


def target_density_qstar(p0: DensityField, fbar: ScoreField) -> DensityField:
    """q* ∝ p0·F̄, whose Bennett density is the detection-optimal point density."""
    grid = require_same_grid(p0, fbar)
    return _power_density(p0.values * fbar.values, grid, 1.0, PROBABILITY_DENSITY)


def ellipsoid_alignment(phi, lbar):
    """Rotation U minimizing trace(UΦUᵀ·L̄) and the attained Σ φ_i λ_{d-i+1}.

    Args:
        phi: Ascending cell-shape eigenvalues φ_1 <= ... <= φ_d.
        lbar: Symmetric PSD second-moment matrix.

    Returns:
        (U, value) with U's i-th column the eigenvector of the i-th largest
        eigenvalue of ``lbar``.
    """
    phi = np.asarray(phi, dtype=float)
    lbar = np.asarray(lbar, dtype=float)
    if lbar.shape != (phi.size, phi.size):
        raise ValueError('phi and lbar dimensions differ')
    if not np.allclose(lbar, lbar.T, atol=1e-10):
        raise ValueError('lbar must be symmetric')
    if np.any(np.diff(phi) < 0):
        raise ValueError('phi must be sorted ascending')
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (lbar + lbar.T))
    if np.all(phi == phi[0]):
        return np.eye(phi.size), float(phi[0] * np.trace(lbar))
    value = float(np.dot(phi, eigenvalues[::-1]))
    return eigenvectors[:, ::-1], value
