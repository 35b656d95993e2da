"""White vs. AR(1) Gaussian signal: D_e of uniform, MSE-optimal and proposed codebooks."""

import numpy as np

from shared.errors import ConfigError
from shared.evaluation import auc, exponent_loss_table, roc_curve
from shared.processes import ar_detection
from shared.quantizers import design_mse_quantizer, detection_design, uniform_quantizer


def per_axis_cells(N: int, d: int) -> int:
    side = int(round(N ** (1.0 / d)))
    if side ** d != N:
        raise ConfigError([f'design.N: {N} is not a perfect {d}-th power, no uniform grid quantizer'])
    return side


def execute(ctx) -> dict:
    """Design the three codebooks and tabulate their loss constants."""
    cfg = ctx.config
    N, d = cfg['design.N'], cfg['model.dimension']
    half = cfg['eval.box']
    box = (np.full(d, -half), np.full(d, half))
    side = per_axis_cells(N, d)

    with ctx.stage('model'):
        model = ar_detection(cfg['model.a'], cfg['model.sigma'], d, cfg['model.circular'], truncation=half)
    with ctx.stage('design_uniform'):
        uniform = uniform_quantizer(box[0], box[1], [side] * d)
    with ctx.stage('design_mse'):
        mse = design_mse_quantizer(model, N, cfg['design.n_train'], ctx.seed, box=box, label='mse')
    with ctx.stage('design_proposed'):
        design = detection_design(model, N, cfg['design.k'], cfg['design.n_mc'], cfg['design.n_train'],
                                  ctx.seed, cfg['eval.grid_nodes'], box=box, method=cfg['design.method'],
                                  threads=ctx.threads, label='proposed')
    with ctx.stage('exponent_loss_table'):
        report = exponent_loss_table(model, [uniform, mse, design.quantizer], cfg['eval.grid_nodes'],
                                     seed=ctx.seed, box=box, profile=cfg['eval.profile'], fbar=design.fbar,
                                     bandwidth=cfg['eval.bandwidth'], threads=ctx.threads)

    for q in (uniform, mse, design.quantizer):
        if cfg['eval.trials'] > 0:
            with ctx.stage(f'roc_{q.label}'):
                curve = roc_curve(model, q, cfg['eval.n'], cfg['eval.trials'], ctx.seed, threads=ctx.threads)
            ctx.write_roc(curve)
            report.entry(q.label).auc = auc(curve)

    with ctx.stage('emit'):
        for q in (uniform, mse, design.quantizer):
            ctx.write_codebook(q)
        ctx.write_field('fbar', design.fbar.grid, design.fbar.values, design.fbar.stderr)

    values = {e.label: e.De for e in report.entries}
    ordered = values['proposed'] <= values['mse'] <= values['uniform']
    return {
        'status': 'success',
        'message': 'D_e ' + ', '.join(f'{k}={v:.4f}' for k, v in values.items()),
        'table': report.to_dict(),
        'ordering_holds': ordered,
    }
