"""User-defined model through the design and evaluation pipeline."""

import numpy as np

from shared.evaluation import auc, exponent_loss_table, roc_curve
from shared.processes import (FiniteStateHmm, ar_detection, domain_box, gaussian_iid,
                              ma_detection, validate_mixing)
from shared.quantizers import design_mse_quantizer, detection_design, uniform_quantizer


def build_model(cfg):
    """Model for ``model.kind`` from the config keys."""
    kind = cfg['model.kind']
    truncation = cfg.get('eval.box')
    if kind == 'ar1':
        return ar_detection(cfg['model.a'], cfg.get('model.sigma', 1.0), cfg.get('model.dimension', 1),
                            cfg.get('model.circular', False), truncation=truncation)
    if kind == 'ma':
        return ma_detection(cfg['model.h'], cfg.get('model.sigma', 1.0), truncation=truncation)
    if kind == 'hmm':
        transitions = np.stack([np.asarray(cfg['model.transitions0'], dtype=float),
                                np.asarray(cfg['model.transitions1'], dtype=float)])
        return FiniteStateHmm(transitions, cfg['model.centers'], cfg['model.sigma'], cfg['model.M'],
                              label='custom_hmm')
    return gaussian_iid(cfg.get('model.mean0', 0.0), cfg.get('model.var0', 1.0),
                        cfg.get('model.mean1', 1.0), cfg.get('model.var1', 1.0))


def execute(ctx) -> dict:
    """Design MSE-optimal and proposed codebooks, tabulate D_e and optionally run ROC trials."""
    cfg = ctx.config
    N = cfg['design.N']
    with ctx.stage('model'):
        model = build_model(cfg)
        mixing = validate_mixing(model) if isinstance(model, FiniteStateHmm) else None
        box = domain_box(model, cfg.get('eval.box'))

    quantizers = []
    side = int(round(N ** (1.0 / model.dimension)))
    if side ** model.dimension == N:
        with ctx.stage('design_uniform'):
            quantizers.append(uniform_quantizer(box[0], box[1], [side] * model.dimension))
    with ctx.stage('design_mse'):
        quantizers.append(design_mse_quantizer(model, N, cfg['design.n_train'], ctx.seed, box=box))
    with ctx.stage('design_proposed'):
        design = detection_design(model, N, cfg['design.k'], cfg['design.n_mc'], cfg['design.n_train'],
                                  ctx.seed, cfg['eval.grid_nodes'], box=box, method=cfg['design.method'],
                                  threads=ctx.threads)
        quantizers.append(design.quantizer)
    with ctx.stage('exponent_loss_table'):
        report = exponent_loss_table(model, quantizers, cfg['eval.grid_nodes'], seed=ctx.seed, box=box,
                                     profile=cfg['eval.profile'], fbar=design.fbar,
                                     bandwidth=cfg['eval.bandwidth'], threads=ctx.threads)

    for q in quantizers:
        ctx.write_codebook(q)
        if cfg['eval.trials'] > 0:
            with ctx.stage(f'roc_{q.label}'):
                curve = roc_curve(model, q, cfg['eval.n'], cfg['eval.trials'], ctx.seed, threads=ctx.threads)
            ctx.write_roc(curve)
            report.entry(q.label).auc = auc(curve)
    ctx.write_field('fbar', design.fbar.grid, design.fbar.values, design.fbar.stderr)

    result = {
        'status': 'success',
        'message': 'D_e ' + ', '.join(f'{e.label}={e.De:.4f}' for e in report.entries),
        'table': report.to_dict(),
    }
    if mixing is not None:
        result['mixing'] = {'m': mixing.m, 'sigma_minus': mixing.sigma_minus, 'sigma_plus': mixing.sigma_plus}
    return result
