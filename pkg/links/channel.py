"""
Optical wireless channel models: AWGN, indoor Lambertian multipath with
first-order wall reflections, and sinusoidal baseline wander.

Room coordinates are centered: x in [-L/2, L/2], y in [-W/2, W/2], z from
the floor. The transmitter faces down, the receiver faces up.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0

AWGN = 'awgn'
DLOS = 'dlos'
NDLOS = 'ndlos'
CHANNEL_KINDS = (AWGN, DLOS, NDLOS)

NOMINAL_RX = {AWGN: (0.0, 0.0), DLOS: (0.0, 0.0), NDLOS: (1.5, 1.5)}
# floor level keeps lit walls inside the DLOS field of view; desk level puts
# the NDLOS transmitter outside it
NOMINAL_RX_HEIGHT = {AWGN: 0.0, DLOS: 0.0, NDLOS: 0.85}


@dataclass(frozen=True)
class RoomGeometry:
    room: tuple = (5.0, 5.0, 3.0)
    tx_height: float = 1.8
    tx_xy: tuple = (0.0, 0.0)
    rx_xy: tuple = (0.0, 0.0)
    rx_height: float = 0.0
    half_power_angle: float = 30.0
    fov_half: float = 60.0
    detector_area: float = 7.8e-7
    concentrator_index: float = 1.46
    filter_gain_db: float = 1.0
    concentrator_gain_db: float = 1.0
    wall_reflectivity: float = 0.7
    tx_power: float = 20.0
    patch_size: float = 0.1
    symbol_rate: float = 625e6

    def __post_init__(self):
        length, width, height = self.room
        for name, (x, y) in (('tx', self.tx_xy), ('rx', self.rx_xy)):
            if abs(x) > length / 2 or abs(y) > width / 2:
                raise ConfigurationError(f"{name} position ({x}, {y}) is outside the {length} x {width} m room")
        if not 0.0 <= self.rx_height < self.tx_height <= height:
            raise ConfigurationError("heights must satisfy 0 <= rx_height < tx_height <= room height")
        for name in ('half_power_angle', 'fov_half'):
            if not 0.0 < getattr(self, name) < 90.0:
                raise ConfigurationError(f"{name} must be in (0, 90) degrees")
        if not 0.0 <= self.wall_reflectivity <= 1.0:
            raise ConfigurationError("wall reflectivity must be in [0, 1]")
        if self.patch_size <= 0:
            raise ConfigurationError("patch size must be positive")

    @property
    def lambertian_order(self):
        return -np.log(2.0) / np.log(np.cos(np.radians(self.half_power_angle)))

    @property
    def concentrator_gain(self):
        """n^2 / sin^2(FOV) times the listed concentrator gain."""
        ideal = self.concentrator_index ** 2 / np.sin(np.radians(self.fov_half)) ** 2
        return ideal * 10.0 ** (self.concentrator_gain_db / 10.0)

    @property
    def filter_gain(self):
        return 10.0 ** (self.filter_gain_db / 10.0)

    @property
    def tx_position(self):
        return np.array([*self.tx_xy, self.tx_height], dtype=float)

    @property
    def rx_position(self):
        return np.array([*self.rx_xy, self.rx_height], dtype=float)

    def _receiver_factor(self, cos_psi):
        inside = cos_psi >= np.cos(np.radians(self.fov_half))
        return np.where(inside & (cos_psi > 0), self.filter_gain * self.concentrator_gain * cos_psi, 0.0)


def table_geometry(kind, **overrides):
    """Office geometry with the nominal receiver position for `kind`."""
    if kind not in CHANNEL_KINDS:
        raise ConfigurationError(f"unknown channel kind {kind!r}")
    return RoomGeometry(**{'rx_xy': NOMINAL_RX[kind], 'rx_height': NOMINAL_RX_HEIGHT[kind], **overrides})


@dataclass(frozen=True, eq=False)
class WallPatches:
    points: NDArray
    normals: NDArray
    area: float


def wall_patches(geom, patch_size=None):
    """Square patches tiling the four walls; normals point into the room."""
    size = patch_size or geom.patch_size
    length, width, height = geom.room
    z = np.arange(size / 2, height, size)
    points, normals = [], []
    for axis, half, other in ((0, length / 2, width), (1, width / 2, length)):
        along = np.arange(-other / 2 + size / 2, other / 2, size)
        a, zz = np.meshgrid(along, z, indexing='ij')
        a, zz = a.ravel(), zz.ravel()
        for sign in (-1.0, 1.0):
            p = np.empty((a.size, 3))
            p[:, axis] = sign * half
            p[:, 1 - axis] = a
            p[:, 2] = zz
            n = np.zeros((a.size, 3))
            n[:, axis] = -sign
            points.append(p)
            normals.append(n)
    return WallPatches(points=np.vstack(points), normals=np.vstack(normals), area=size * size)


def direct_gain(geom):
    """(gain, delay) of the line-of-sight path."""
    tx, rx = geom.tx_position, geom.rx_position
    d = float(np.linalg.norm(rx - tx))
    cos_phi = (tx[2] - rx[2]) / d
    m = geom.lambertian_order
    gain = (m + 1) * geom.detector_area / (2 * np.pi * d ** 2) * cos_phi ** m * geom._receiver_factor(cos_phi)
    return float(gain), d / SPEED_OF_LIGHT


def reflection_gains(geom, patches):
    """(gains, delays) of first-order reflections off each patch."""
    tx, rx = geom.tx_position, geom.rx_position
    to_tx = tx - patches.points
    to_rx = rx - patches.points
    d1 = np.linalg.norm(to_tx, axis=1)
    d2 = np.linalg.norm(to_rx, axis=1)

    cos_phi = to_tx[:, 2] / d1
    cos_alpha = np.einsum('ij,ij->i', to_tx, patches.normals) / d1
    cos_beta = np.einsum('ij,ij->i', to_rx, patches.normals) / d2
    cos_psi = -to_rx[:, 2] / d2

    m = geom.lambertian_order
    lit = (cos_phi > 0) & (cos_alpha > 0) & (cos_beta > 0)
    gains = np.where(
        lit,
        (m + 1) * geom.detector_area * geom.wall_reflectivity * patches.area
        / (2 * np.pi ** 2 * d1 ** 2 * d2 ** 2)
        * np.clip(cos_phi, 0, None) ** m * cos_alpha * cos_beta,
        0.0,
    ) * geom._receiver_factor(cos_psi)
    return gains, (d1 + d2) / SPEED_OF_LIGHT


def lambertian_gain(geom, path='direct'):
    """DC gain of the direct path, or of a WallPatches set (summed)."""
    if isinstance(path, str) and path == 'direct':
        return direct_gain(geom)[0]
    if isinstance(path, WallPatches):
        return float(reflection_gains(geom, path)[0].sum())
    raise ConfigurationError(f"unknown path {path!r}")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    taps: NDArray
    kind: str = AWGN
    noise_sigma: float = 0.0
    direct: float = 0.0
    reflected: float = 0.0
    rx_xy: tuple = field(default=(0.0, 0.0))

    def __post_init__(self):
        if not np.all(np.isfinite(self.taps)):
            raise ConfigurationError("channel taps must be finite")

    @property
    def dc_gain(self):
        return float(np.sum(self.taps))

    @property
    def delay_spread_taps(self):
        return int(np.max(np.flatnonzero(self.taps))) if np.any(self.taps) else 0

    def normalized(self):
        """Taps scaled to unit DC gain; the received level is absorbed into the noise axis."""
        gain = self.dc_gain
        if gain <= 0:
            raise ConfigurationError(f"{self.kind} channel at {self.rx_xy} collects no power")
        return replace(self, taps=self.taps / gain)

    def with_noise(self, noise_db):
        return replace(self, noise_sigma=noise_sigma(noise_db))


def noise_sigma(noise_db):
    """P_N = 20 log10(sigma)."""
    return float(10.0 ** (noise_db / 20.0))


def realize_channel(geom, kind, rng=None, max_taps=17, jitter=0.05):
    """
    Symbol-rate impulse response for `kind`. The receiver is jittered
    uniformly by +/- `jitter` metres per axis when an rng is given.
    """
    if kind not in CHANNEL_KINDS:
        raise ConfigurationError(f"unknown channel kind {kind!r}; expected one of {', '.join(CHANNEL_KINDS)}")
    if kind == AWGN:
        return ChannelRealization(taps=np.ones(1), kind=AWGN, direct=1.0)

    if rng is not None and jitter > 0:
        length, width, _ = geom.room
        xy = np.asarray(geom.rx_xy) + rng.uniform(-jitter, jitter, size=2)
        xy = np.clip(xy, [-length / 2, -width / 2], [length / 2, width / 2])
        geom = replace(geom, rx_xy=(float(xy[0]), float(xy[1])))

    direct, direct_delay = direct_gain(geom)
    gains, delays = reflection_gains(geom, wall_patches(geom))
    seen = gains > 0

    arrivals = delays[seen]
    if direct > 0:
        arrivals = np.append(arrivals, direct_delay)
    if arrivals.size == 0:
        raise ConfigurationError(f"receiver at {geom.rx_xy} sees neither the transmitter nor a lit wall")
    first = arrivals.min()

    ts = 1.0 / geom.symbol_rate
    index = np.rint((delays[seen] - first) / ts).astype(int)
    direct_index = int(np.rint((direct_delay - first) / ts)) if direct > 0 else 0
    size = max(int(index.max()) + 1 if index.size else 1, direct_index + 1)
    taps = np.bincount(index, weights=gains[seen], minlength=size).astype(float)
    taps[direct_index] += direct

    if taps.size > max_taps:
        spread = (taps.size - 1) * ts * 1e9
        raise ConfigurationError(
            f"{kind} delay spread of {spread:.1f} ns needs {taps.size} taps, the cyclic prefix covers {max_taps}"
        )

    reflected = float(gains[seen].sum())
    logger.debug("Realized %s channel at %s: %d taps, direct %.3e, reflected %.3e", kind, geom.rx_xy, taps.size, direct, reflected)
    return ChannelRealization(taps=taps, kind=kind, direct=direct, reflected=reflected, rx_xy=geom.rx_xy)


def _upsampled_taps(taps, oversampling):
    taps = np.asarray(taps, dtype=float)
    if oversampling == 1:
        return taps
    out = np.zeros((taps.size - 1) * oversampling + 1)
    out[::oversampling] = taps
    return out


def apply_channel(stream, ch, rng=None, oversampling=1):
    """Full linear convolution with the taps plus white Gaussian noise of std sigma."""
    stream = np.asarray(stream, dtype=float)
    out = np.convolve(stream, _upsampled_taps(ch.taps, oversampling))
    if ch.noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng()
        out = out + rng.normal(0.0, ch.noise_sigma, size=out.size)
    return out


@dataclass(frozen=True)
class WanderConfig:
    rms: float | None = None
    period_syms: float = 45.0
    phase: float = 0.0

    def __post_init__(self):
        if self.rms is not None and self.rms < 0:
            raise ConfigurationError("wander RMS must be non-negative")
        if self.period_syms <= 0:
            raise ConfigurationError("wander period must be positive")


def apply_wander(stream, w, symbol_span):
    """
    Adds sqrt(2) * rms * sin(2 pi t / period + phase), with the period
    measured in symbols of `symbol_span` samples. rms defaults to the
    stream standard deviation.
    """
    stream = np.asarray(stream, dtype=float)
    rms = float(np.std(stream)) if w.rms is None else w.rms
    if rms == 0.0:
        return stream.copy()
    t = np.arange(stream.size)
    period = w.period_syms * symbol_span
    return stream + np.sqrt(2.0) * rms * np.sin(2 * np.pi * t / period + w.phase)
