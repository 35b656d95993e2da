"""Noise vs. moving-average source: ROC curves of four scalar quantizers."""

import logging

import numpy as np

from shared.errors import UnsupportedModelError
from shared.evaluation import (CELL_MC_PER_CELL, auc, empirical_point_density, miss_at, miss_standard_error,
                               roc_curve)
from shared.highrate import marginal_density_field
from shared.likelihood import PREFLIGHT_TOLERANCE, QuantizedLikelihood, check_discretized_filter
from shared.processes import Hypothesis, ma_detection
from shared.quantizers import (cell_stats, design_gupta_hero_quantizer, design_mse_quantizer, detection_design,
                               uniform_quantizer)
from shared.workers import substream

logger = logging.getLogger(__name__)

FALSE_ALARM_LEVELS = (0.1, 0.2, 0.3)

# Substream role of the random channel draws.
CHANNEL_KEY = 8


def channel_taps(seed, realization: int, n_taps: int) -> np.ndarray:
    """i.i.d. N(0, 1) taps of one random channel realization."""
    return substream(seed, CHANNEL_KEY, realization).standard_normal(n_taps)


def _design(ctx, model, box):
    cfg = ctx.config
    N = cfg['design.N']
    quantizers = []
    with ctx.stage('design_uniform'):
        quantizers.append(uniform_quantizer(box[0], box[1], [N]))
    with ctx.stage('design_mse'):
        quantizers.append(design_mse_quantizer(model, N, cfg['design.n_train'], ctx.seed, box=box))
    with ctx.stage('design_gupta_hero'):
        quantizers.append(design_gupta_hero_quantizer(model, N, cfg['design.n_train'], ctx.seed,
                                                      cfg['eval.grid_nodes'], box=box))
    with ctx.stage('design_proposed'):
        design = detection_design(model, N, cfg['design.k'], cfg['design.n_mc'], cfg['design.n_train'],
                                  ctx.seed, cfg['eval.grid_nodes'], box=box, method=cfg['design.method'],
                                  threads=ctx.threads)
        quantizers.append(design.quantizer)
    return quantizers, design


def _evaluate(ctx, model, box, suffix: str = '', strict: bool = True) -> dict:
    """Design, emit and test every quantizer for one channel; returns per-label entries.

    With ``strict`` off a failed filter preflight skips that ROC instead of
    failing the run.
    """
    cfg = ctx.config
    quantizers, design = _design(ctx, model, box)
    grid = design.fbar.grid

    results = {}
    densities = {'p0': marginal_density_field(model, Hypothesis.H0, grid).values}
    for q in quantizers:
        ctx.write_codebook(q, suffix)
        with ctx.stage(f'point_density_{q.label}'):
            stats = cell_stats(q, CELL_MC_PER_CELL * q.size, ctx.seed)
            densities[f'zeta_{q.label}'] = empirical_point_density(q, grid, stats).values
        entry = {'N': q.size}
        if cfg['eval.trials'] > 0:
            with ctx.stage(f'roc_{q.label}'):
                engine = QuantizedLikelihood(model, q, seed=ctx.seed, threads=ctx.threads)
                entry['preflight_gap'] = check_discretized_filter(model, q, engine=engine)
                if entry['preflight_gap'] > PREFLIGHT_TOLERANCE:
                    if strict:
                        raise UnsupportedModelError(f"discretized-state filter preflight gap {entry['preflight_gap']:.3g}")
                    logger.warning('skipping ROC of %s%s: preflight gap %.3g', q.label, suffix, entry['preflight_gap'])
                    entry['skipped'] = True
                    results[q.label] = entry
                    continue
                curve = roc_curve(model, q, cfg['eval.n'], cfg['eval.trials'], ctx.seed,
                                  threads=ctx.threads, engine=engine, preflight=False)
            ctx.write_roc(curve, suffix)
            entry['auc'] = auc(curve)
            entry['miss'] = {str(a): miss_at(curve, a) for a in FALSE_ALARM_LEVELS}
            entry['miss_stderr'] = {str(a): miss_standard_error(curve, a) for a in FALSE_ALARM_LEVELS}
        results[q.label] = entry
    ctx.write_columns(f'point_density{suffix}', grid, densities)
    ctx.write_field(f'fbar{suffix}', grid, design.fbar.values, design.fbar.stderr)
    return results


def _mean_stderr(values) -> dict:
    values = np.asarray(values, dtype=float)
    stderr = values.std(ddof=1) / np.sqrt(values.size) if values.size > 1 else 0.0
    return {'mean': float(values.mean()), 'stderr': float(stderr)}


def summarize_realizations(per_realization: list) -> dict:
    """Mean and standard error of AUC and miss rates across channel realizations."""
    summary = {}
    for label in per_realization[0]:
        entries = [r[label] for r in per_realization if 'auc' in r[label]]
        if not entries:
            continue
        summary[label] = {
            'realizations': len(entries),
            'auc': _mean_stderr([e['auc'] for e in entries]),
            'miss': {a: _mean_stderr([e['miss'][a] for e in entries]) for a in entries[0]['miss']},
        }
    return summary


def execute(ctx) -> dict:
    """Design the quantizers, then run the quantized-LLR test for each."""
    cfg = ctx.config
    half = cfg['eval.box']
    box = ([-half], [half])
    realizations = cfg.get('channel.realizations', 0)

    if realizations == 0:
        with ctx.stage('model'):
            model = ma_detection(cfg['model.h'], cfg['model.sigma'], truncation=half)
        results = _evaluate(ctx, model, box)
        summary = ', '.join(f"{label} auc={r['auc']:.4f}" for label, r in results.items() if 'auc' in r)
        return {
            'status': 'success',
            'message': f'Evaluated {len(results)} quantizers' + (f' ({summary})' if summary else ''),
            'quantizers': results,
        }

    n_taps = len(cfg['model.h'])
    per_realization, taps = [], []
    for r in range(realizations):
        h = channel_taps(ctx.seed, r, n_taps)
        logger.info('channel realization %d taps %s', r, np.array2string(h, precision=4))
        with ctx.stage(f'model_r{r}'):
            model = ma_detection(h, cfg['model.sigma'], truncation=half)
        per_realization.append(_evaluate(ctx, model, box, suffix=f'_r{r}', strict=False))
        taps.append(h.tolist())
    summary = summarize_realizations(per_realization)
    text = ', '.join(f"{label} auc={s['auc']['mean']:.4f}±{s['auc']['stderr']:.4f}" for label, s in summary.items())
    return {
        'status': 'success',
        'message': f'Evaluated {realizations} channel realizations' + (f' ({text})' if text else ''),
        'realizations': per_realization,
        'taps': taps,
        'summary': summary,
    }
