import logging
from pathlib import Path

import numpy as np
from celery import shared_task

from . import config as link_config
from .exceptions import LinkError
from .experiments import run_papr_experiment, run_wander_experiment
from .link import run_campaign
from .models import Campaign, save_report
from .numerics import dft_matrix
from .precoder import build_mask, cache_path, get_precoder, op_count
from .reports import write_papr_report, write_wander_report

logger = logging.getLogger(__name__)


def precoder_summary(pre, path=None):
    """Rank, residuals and fast-path costs of a synthesized precoder."""
    ops = op_count(pre)
    realness = float(np.max(np.abs((dft_matrix(pre.n) @ pre.w).imag)))
    return {
        'n': pre.n,
        'm_active': pre.mask.m_active,
        'z_null': pre.mask.z_null,
        'rank': pre.rank_r,
        'realness': realness,
        **pre.residuals(),
        'encode_macs': ops.encode_macs,
        'storage_reals': ops.storage_reals,
        'cache_path': str(path) if path is not None else None,
    }


@shared_task
def synthesize_precoder(n, n_middle=0, n_edge=0):
    try:
        mask = build_mask(int(n), int(n_middle), int(n_edge))
        cache_dir = link_config.precoder_cache_dir()
        pre = get_precoder(mask, cache_dir)
        return precoder_summary(pre, cache_path(mask, cache_dir) if cache_dir else None)
    except LinkError as e:
        return {'error': str(e), 'exit_code': e.exit_code}


@shared_task
def run_ber_campaign(campaign_id):
    try:
        campaign = Campaign.objects.get(campaign_id=campaign_id)
    except Campaign.DoesNotExist:
        return {'error': f"campaign {campaign_id} not found"}

    campaign.status = 'running'
    campaign.save(update_fields=['status'])
    try:
        overrides = {k: v for k, v in campaign.config.items() if k not in ('path', 'full')}
        cfg = link_config.build_link_config(**overrides)
        report = run_campaign(cfg, link_config.precoder_cache_dir())
        count = save_report(campaign, report)
    except LinkError as e:
        logger.error("Campaign %s failed: %s", campaign_id, e)
        campaign.mark_failed(str(e))
        return {'campaign_id': campaign_id, 'status': 'failed', 'error': str(e)}
    except Exception as e:
        logger.exception("Campaign %s crashed", campaign_id)
        campaign.mark_failed(f"{type(e).__name__}: {e}")
        raise

    campaign.mark_done()
    logger.info("Campaign %s finished with %d point(s)", campaign_id, count)
    return {'campaign_id': campaign_id, 'status': 'done', 'points': count}


@shared_task
def run_papr_experiment_task(overrides, out_dir, n_blocks=10_000):
    try:
        cfg = link_config.build_link_config(**overrides)
        result = run_papr_experiment(cfg, n_blocks=n_blocks, cache_dir=link_config.precoder_cache_dir())
        paths = write_papr_report(result, Path(out_dir), cfg.to_dict())
        return {name: str(path) for name, path in paths.items()}
    except LinkError as e:
        return {'error': str(e), 'exit_code': e.exit_code}


@shared_task
def run_wander_experiment_task(overrides, out_dir):
    try:
        cfg = link_config.build_link_config(**overrides)
        result = run_wander_experiment(cfg, cache_dir=link_config.precoder_cache_dir())
        paths = write_wander_report(result, Path(out_dir), cfg.to_dict())
        return {name: str(path) for name, path in paths.items()}
    except LinkError as e:
        return {'error': str(e), 'exit_code': e.exit_code}
