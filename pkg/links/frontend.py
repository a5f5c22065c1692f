"""
Analog front end: polyphase RRC shaping and matched filtering, DC bias,
dynamic-range clipping and PAPR statistics.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy import optimize, signal

from .exceptions import CalibrationError, ConfigurationError, SizeError
from .waveforms import BIPOLAR, UNIPOLAR

logger = logging.getLogger(__name__)

MIN_CALIBRATION_SAMPLES = 10_000


@dataclass(frozen=True)
class ShapingConfig:
    oversampling: int = 8
    rolloff: float = 0.25
    group_delay_syms: int = 8

    def __post_init__(self):
        if self.oversampling < 1 or self.group_delay_syms < 1:
            raise ConfigurationError("oversampling and group delay must be at least 1")
        if not 0.0 < self.rolloff <= 1.0:
            raise ConfigurationError(f"roll-off must be in (0, 1], got {self.rolloff}")

    @property
    def span(self):
        return 2 * self.group_delay_syms * self.oversampling + 1

    @property
    def cascade_delay(self):
        """TX + RX filter delay in low-rate samples."""
        return 2 * self.group_delay_syms


@dataclass(frozen=True)
class FrontEndConfig:
    range_lo: float = 0.0
    range_hi: float = 1.0
    bias: float = 0.5
    gain: float | None = None
    target_clip_prob: float = 2.2e-2

    def __post_init__(self):
        if not self.range_lo < self.bias < self.range_hi:
            raise ConfigurationError(f"bias {self.bias} must lie inside ({self.range_lo}, {self.range_hi})")
        if not 0.0 < self.target_clip_prob < 0.5:
            raise ConfigurationError(f"target clip probability must be in (0, 0.5), got {self.target_clip_prob}")
        if self.gain is not None and self.gain < 0:
            raise ConfigurationError("gain must be non-negative")


def _rrc_value(t, beta):
    """RRC impulse response at t symbol periods (unnormalized)."""
    if np.isclose(t, 0.0):
        return 1.0 - beta + 4.0 * beta / np.pi
    if np.isclose(abs(t), 1.0 / (4.0 * beta)):
        return (beta / np.sqrt(2.0)) * (
            (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
            + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
        )
    numerator = np.sin(np.pi * t * (1.0 - beta)) + 4.0 * beta * t * np.cos(np.pi * t * (1.0 + beta))
    denominator = np.pi * t * (1.0 - (4.0 * beta * t) ** 2)
    return numerator / denominator


@lru_cache(maxsize=16)
def _taps(cfg):
    center = cfg.group_delay_syms * cfg.oversampling
    t = (np.arange(cfg.span) - center) / cfg.oversampling
    taps = np.array([_rrc_value(ti, cfg.rolloff) for ti in t])
    taps /= np.linalg.norm(taps)
    taps.setflags(write=False)
    return taps


def rrc_taps(cfg=ShapingConfig()):
    """Unit-energy, even-symmetric RRC taps of length 2 * group_delay * oversampling + 1."""
    return _taps(cfg).copy()


def _check_stream(stream, cfg):
    stream = np.asarray(stream, dtype=float).ravel()
    minimum = 2 * cfg.group_delay_syms + 1
    if stream.size < minimum:
        raise SizeError(f"stream of {stream.size} samples is shorter than the {minimum}-symbol filter span")
    return stream


def shape(stream, cfg=ShapingConfig()):
    """Upsample by the oversampling ratio and filter (polyphase)."""
    stream = _check_stream(stream, cfg)
    return signal.upfirdn(_taps(cfg), stream, up=cfg.oversampling)


def matched_filter(stream, cfg=ShapingConfig()):
    return signal.upfirdn(_taps(cfg), np.asarray(stream, dtype=float))


def downsample(filtered, cfg, n_symbols):
    """Symbol k of the original stream sits at high-rate index (k + cascade_delay) * oversampling."""
    start = cfg.cascade_delay * cfg.oversampling
    picked = np.asarray(filtered)[start::cfg.oversampling][:n_symbols]
    if picked.size < n_symbols:
        raise SizeError(f"filtered stream holds {picked.size} symbols, expected {n_symbols}")
    return picked


def receive(stream, cfg, n_symbols):
    """Matched filter and downsample in one polyphase pass."""
    out = signal.upfirdn(_taps(cfg), np.asarray(stream, dtype=float), up=1, down=cfg.oversampling)
    picked = out[cfg.cascade_delay:cfg.cascade_delay + n_symbols]
    if picked.size < n_symbols:
        raise SizeError(f"filtered stream holds {picked.size} symbols, expected {n_symbols}")
    return picked


# --- bias and clipping ---

def _clipped(stream, gain, fe, polarity):
    if polarity == BIPOLAR:
        drive = fe.bias + gain * stream
        return (drive > fe.range_hi) | (drive < fe.range_lo)
    if polarity == UNIPOLAR:
        return fe.range_lo + gain * stream > fe.range_hi
    raise ConfigurationError(f"unknown polarity {polarity!r}")


def clip_probability(stream, gain, fe, polarity):
    return float(np.mean(_clipped(np.asarray(stream, dtype=float), gain, fe, polarity)))


def calibrate_gain(stream, fe, polarity, max_doublings=60):
    """
    Gain whose empirical clip probability on `stream` matches
    fe.target_clip_prob, found by bisection. Unipolar streams are only
    counted against the upper rail.
    """
    stream = np.asarray(stream, dtype=float).ravel()
    if stream.size < MIN_CALIBRATION_SAMPLES:
        raise CalibrationError(f"calibration needs at least {MIN_CALIBRATION_SAMPLES} samples, got {stream.size}")
    if np.ptp(stream) == 0.0:
        logger.warning("Calibration stream has zero variance; using unit gain")
        return 1.0

    target = fe.target_clip_prob

    def excess(gain):
        return clip_probability(stream, gain, fe, polarity) - target

    hi = (fe.range_hi - fe.range_lo) / (np.max(np.abs(stream)) or 1.0)
    for _ in range(max_doublings):
        if excess(hi) > 0:
            break
        hi *= 2.0
    else:
        ceiling = clip_probability(stream, hi, fe, polarity)
        raise CalibrationError(
            f"clip probability {target:g} is unreachable for {polarity} stream (at most {ceiling:.3g})"
        )

    gain = optimize.bisect(excess, 0.0, hi, xtol=1e-12 * hi, maxiter=200)
    logger.info(
        "Calibrated %s gain %.4g: clip probability %.3g (target %.3g)",
        polarity, gain, clip_probability(stream, gain, fe, polarity), target,
    )
    return float(gain)


def scale_and_bias(stream, fe, polarity, clip=True):
    """
    Optical drive signal within [range_lo, range_hi]. Bipolar streams are
    biased at fe.bias; unipolar streams start at range_lo. The gain is
    calibrated from the stream when fe.gain is None. With clip=False the
    drive is returned before the rails are applied.
    """
    stream = np.asarray(stream, dtype=float)
    gain = fe.gain if fe.gain is not None else calibrate_gain(stream, fe, polarity)
    offset = fe.bias if polarity == BIPOLAR else fe.range_lo
    drive = offset + gain * stream
    return np.clip(drive, fe.range_lo, fe.range_hi) if clip else drive


# --- PAPR ---

@dataclass(frozen=True, eq=False)
class PaprResult:
    values: NDArray
    skipped: int = 0


def papr(stream, window, offset=0):
    """Per-window PAPR in dB over consecutive windows starting at `offset`."""
    stream = np.asarray(stream)
    if window < 1 or stream.size - offset < window:
        raise SizeError(f"stream of {stream.size} samples holds no window of {window} after offset {offset}")

    count = (stream.size - offset) // window
    power = np.abs(stream[offset:offset + count * window].reshape(count, window)) ** 2
    mean = power.mean(axis=1)
    live = mean > 0
    skipped = int(count - np.count_nonzero(live))
    if skipped:
        logger.warning("Skipped %d zero-power PAPR window(s) of %d", skipped, count)
    values = 10.0 * np.log10(power[live].max(axis=1) / mean[live])
    return PaprResult(values=values, skipped=skipped)


def ccdf(values, grid):
    """P(PAPR > gamma) for each gamma in grid."""
    values = np.asarray(values, dtype=float).ravel()
    grid = np.asarray(grid, dtype=float).ravel()
    if values.size == 0:
        return np.zeros_like(grid)
    return (values[None, :] > grid[:, None]).mean(axis=1)


def papr_at(values, probability):
    """PAPR level exceeded with the given probability."""
    return float(np.quantile(np.asarray(values, dtype=float), 1.0 - probability))
