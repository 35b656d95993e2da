"""QPSK vs. OQPSK: MSE-optimal and proposed codebooks with the fields behind them."""

from shared.evaluation import symmetric_kl_codepoint_densities
from shared.processes import qpsk_oqpsk, validate_mixing
from shared.quantizers import design_mse_quantizer, detection_design


def execute(ctx) -> dict:
    """Design both codebooks and emit codebook and field CSVs."""
    cfg = ctx.config
    N = cfg['design.N']
    with ctx.stage('model'):
        model = qpsk_oqpsk(cfg['model.M'], cfg['model.sigma'])
        mixing = validate_mixing(model)

    with ctx.stage('design_mse'):
        mse = design_mse_quantizer(model, N, cfg['design.n_train'], ctx.seed, label='mse')
    with ctx.stage('design_proposed'):
        design = detection_design(model, N, cfg['design.k'], cfg['design.n_mc'], cfg['design.n_train'],
                                  ctx.seed, cfg['eval.grid_nodes'], method=cfg['design.method'],
                                  threads=ctx.threads, label='proposed')

    with ctx.stage('emit'):
        grid = design.fbar.grid
        ctx.write_codebook(mse)
        ctx.write_codebook(design.quantizer)
        ctx.write_field('p0', grid, design.p0.values)
        ctx.write_field('fbar', grid, design.fbar.values, design.fbar.stderr)
        ctx.write_field('qstar', grid, design.qstar.values)
        divergence = symmetric_kl_codepoint_densities(design.quantizer, mse, grid, cfg['eval.bandwidth'])

    return {
        'status': 'success',
        'message': f'Designed two {N}-cell codebooks (symmetric KL {divergence:.4f})',
        'mixing': {'m': mixing.m, 'sigma_minus': mixing.sigma_minus, 'sigma_plus': mixing.sigma_plus},
        'qstar_acceptance_rate': design.acceptance_rate,
        'symmetric_kl': divergence,
        'lbg_iterations': {'mse': len(mse.history), 'proposed': len(design.quantizer.history)},
    }
