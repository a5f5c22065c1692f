"""
Figure experiments built on the link library: PAPR CCDF per scheme,
baseline-wander resilience of UCP-OFDM against baseband PAM, and the
clip-probability sweep used to pick transmit gains.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .channel import WanderConfig, apply_wander, noise_sigma
from .exceptions import ConfigurationError
from .frontend import ccdf, papr, papr_at, receive, scale_and_bias, shape
from .link import Equalizer, prepare_schemes, run_campaign
from .precoder import get_precoder
from .waveforms import BB, SCHEMES, UCP, make_scheme

logger = logging.getLogger(__name__)

PAPR_GRID = np.round(np.arange(0.0, 20.0 + 1e-9, 0.05), 2)
CLIP_GRID = tuple(float(p) for p in np.geomspace(1e-4, 1e-1, 13))
WANDER_SCHEMES = (BB, UCP)


def _schemes(cfg, cache_dir):
    precoder = get_precoder(cfg.mask, cache_dir) if UCP in cfg.schemes else None
    return [make_scheme(name, cfg.mask, cfg.cp, cfg.qam_order(name), precoder) for name in cfg.schemes]


def _rng(cfg, name, stream):
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, SCHEMES.index(name), stream]))


@dataclass(frozen=True, eq=False)
class PaprExperiment:
    frame: pd.DataFrame
    levels: dict
    skipped: dict
    probability: float

    def summary(self):
        return {
            'schema': 'papr/v1',
            'probability': self.probability,
            'papr_db': self.levels,
            'skipped_windows': self.skipped,
        }


def scheme_papr(scheme, shaping, n_blocks, rng, front_end, chunk=500):
    """
    Per-block PAPR of the shaped, scaled and biased drive signal, taken
    before the dynamic-range rails. Blocks are shaped in chunks; the first
    and last window of every chunk sit on a filter transient and are
    dropped.
    """
    if chunk < 3:
        raise ConfigurationError("PAPR chunks need at least 3 blocks")
    window = scheme.block_len * shaping.oversampling
    offset = shaping.group_delay_syms * shaping.oversampling
    values, skipped = [], 0
    collected = 0
    while collected < n_blocks:
        bits = rng.integers(0, 2, size=(chunk, scheme.bits_per_block), dtype=np.uint8)
        samples = scheme.modulate(scheme.map_bits(bits))
        shaped = shape(samples.ravel(), shaping)
        drive = scale_and_bias(shaped, front_end, scheme.polarity, clip=False)
        result = papr(drive[:offset + chunk * window], window, offset)
        inner = result.values[1:-1]
        values.append(inner)
        skipped += result.skipped
        collected += inner.size
    return np.concatenate(values)[:n_blocks], skipped


def run_papr_experiment(cfg, n_blocks=10_000, probability=1e-3, grid=PAPR_GRID, cache_dir=None):
    """CCDF of the per-block PAPR for each scheme in cfg.schemes."""
    frames, levels, skipped = [], {}, {}
    for rt in prepare_schemes(cfg, cache_dir):
        scheme = rt.scheme
        values, dropped = scheme_papr(scheme, cfg.shaping, n_blocks, _rng(cfg, scheme.name, 0), rt.front_end)
        levels[scheme.name] = papr_at(values, probability)
        skipped[scheme.name] = dropped
        frames.append(pd.DataFrame({
            'scheme': scheme.name,
            'qam': scheme.qam.order,
            'papr_db': grid,
            'ccdf': ccdf(values, grid),
        }))
        logger.info("%s PAPR at CCDF %.0e: %.2f dB", scheme.name, probability, levels[scheme.name])
    return PaprExperiment(
        frame=pd.concat(frames, ignore_index=True),
        levels=levels,
        skipped=skipped,
        probability=probability,
    )


@dataclass(frozen=True, eq=False)
class WanderExperiment:
    waveforms: pd.DataFrame
    constellation: pd.DataFrame
    evm_db: dict
    symbol_errors: dict
    noise_db: float
    wander: WanderConfig

    def summary(self):
        return {
            'schema': 'wander/v1',
            'noise_db': self.noise_db,
            'wander': {'rms': self.wander.rms, 'period_syms': self.wander.period_syms, 'phase': self.wander.phase},
            'evm_db': self.evm_db,
            'symbol_errors': self.symbol_errors,
        }


def _flat_equalizer(scheme):
    mask = getattr(scheme, 'mask', None)
    return Equalizer.identity(scheme.n, None if mask is None else mask.active_bins)


def run_wander_experiment(cfg, wander=WanderConfig(), n_blocks=200, noise_db=-40.0, cache_dir=None):
    """
    BB and UCP-OFDM blocks through shaping, additive sinusoidal wander and
    white noise, demodulated with a flat channel assumption.
    """
    cfg = replace(cfg, schemes=WANDER_SCHEMES)
    shaping = cfg.shaping
    sigma = noise_sigma(noise_db)
    waveforms, constellations, evm, errors = [], [], {}, {}

    for scheme in _schemes(cfg, cache_dir):
        rng = _rng(cfg, scheme.name, 1)
        bits = rng.integers(0, 2, size=(n_blocks, scheme.bits_per_block), dtype=np.uint8)
        symbols = scheme.map_bits(bits)
        stream = scheme.modulate(symbols).ravel()

        shaped = apply_wander(shape(stream, shaping), wander, scheme.block_len * shaping.oversampling)
        noisy = shaped + sigma * rng.standard_normal(shaped.size)
        received = receive(noisy, shaping, stream.size)

        estimates = scheme.demodulate(received.reshape(n_blocks, scheme.block_len), _flat_equalizer(scheme))
        decided = scheme.demap(estimates).reshape(n_blocks, -1, scheme.qam.bits_per_symbol)
        sent = bits.reshape(n_blocks, -1, scheme.qam.bits_per_symbol)

        evm[scheme.name] = float(10.0 * np.log10(np.sum(np.abs(estimates - symbols) ** 2) / np.sum(np.abs(symbols) ** 2)))
        errors[scheme.name] = int(np.count_nonzero(np.any(decided != sent, axis=-1)))
        logger.info("%s under wander: EVM %.1f dB, %d symbol error(s)", scheme.name, evm[scheme.name], errors[scheme.name])

        waveforms.append(pd.DataFrame({
            'scheme': scheme.name,
            'sample': np.arange(stream.size),
            'transmitted': stream,
            'received': received,
        }))
        constellations.append(pd.DataFrame({
            'scheme': scheme.name,
            'tx_re': symbols.real.ravel(),
            'tx_im': symbols.imag.ravel(),
            'rx_re': estimates.real.ravel(),
            'rx_im': estimates.imag.ravel(),
        }))

    return WanderExperiment(
        waveforms=pd.concat(waveforms, ignore_index=True),
        constellation=pd.concat(constellations, ignore_index=True),
        evm_db=evm,
        symbol_errors=errors,
        noise_db=noise_db,
        wander=wander,
    )


@dataclass(frozen=True, eq=False)
class ClipSweep:
    frame: pd.DataFrame
    optimum: dict
    noise_db: float

    def summary(self):
        return {'schema': 'clip_sweep/v1', 'noise_db': self.noise_db, 'optimum': self.optimum}


def run_clip_sweep(cfg, grid=CLIP_GRID, noise_db=-30.0, cache_dir=None):
    """
    BER at a single noise level for every clip probability in `grid`, per
    scheme. The optimum is the first grid point reaching the lowest BER.
    """
    grid = [float(p) for p in grid]
    if not grid:
        raise ConfigurationError("the clip-probability grid is empty")
    bad = [p for p in grid if not 0.0 < p < 0.5]
    if bad:
        raise ConfigurationError(f"clip probabilities must be in (0, 0.5), got {bad}")

    rows = []
    for name in cfg.schemes:
        for prob in grid:
            point_cfg = replace(
                cfg, schemes=(name,), noise_db=(noise_db,),
                clip_probs={**cfg.clip_probs, name: prob},
            )
            point = run_campaign(point_cfg, cache_dir).points[0]
            rows.append({
                'scheme': name,
                'clip_prob': prob,
                'ber': point.ber,
                'bits': point.bits,
                'achieved_clip_prob': point.clip_prob,
            })
            logger.debug("%s at clip probability %.3g: BER %.3g", name, prob, point.ber)

    frame = pd.DataFrame(rows, columns=['scheme', 'clip_prob', 'ber', 'bits', 'achieved_clip_prob'])
    optimum = {
        name: float(group.loc[group['ber'].idxmin(), 'clip_prob'])
        for name, group in frame.groupby('scheme', sort=False)
    }
    for name, prob in optimum.items():
        logger.info("%s: lowest BER at clip probability %.3g", name, prob)
    return ClipSweep(frame=frame, optimum=optimum, noise_db=noise_db)
