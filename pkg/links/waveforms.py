"""
Modulation schemes as block mappers: UCP-OFDM, DCO-OFDM, ACO-OFDM, U-OFDM
and baseband PAM with FDE, plus QAM, subcarrier mapping, CP and preamble.

Every modulate/demodulate function accepts one block or a stack of blocks
(leading axes) and works along the last axis.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np
from numpy.typing import NDArray

from .exceptions import ConfigurationError, SizeError
from .numerics import FORWARD, INVERSE, fft_unitary, natural_bin
from .precoder import build_mask, decode_fast, encode_fast

logger = logging.getLogger(__name__)

BIPOLAR = 'bipolar'
UNIPOLAR = 'unipolar'

UCP = 'ucp'
DCO = 'dco'
ACO = 'aco'
U_OFDM = 'u_ofdm'
BB = 'bb'
SCHEMES = (UCP, DCO, ACO, U_OFDM, BB)

# 16-QAM for the full-rate schemes, 256-QAM for the half-rate ones.
DEFAULT_QAM = {UCP: 16, DCO: 16, BB: 16, ACO: 256, U_OFDM: 256}


# --- QAM ---

class QamMap:
    """
    Square Gray-coded QAM with unit average energy.

    A symbol's bits are split in half: the first half (MSB first) selects the
    in-phase level, the second half the quadrature level. Level index i sits
    at amplitude (L - 1) - 2i and carries the Gray code i ^ (i >> 1), so
    4-QAM bits 00 map to (+1 + 1j) / sqrt(2).
    """
    ORDERS = (4, 16, 64, 256)

    def __init__(self, order):
        if order not in self.ORDERS:
            raise ConfigurationError(f"QAM order must be one of {self.ORDERS}, got {order}")
        self.order = order
        self.bits_per_symbol = int(np.log2(order))
        self.bits_per_axis = self.bits_per_symbol // 2
        self.levels = 1 << self.bits_per_axis
        self.scale = np.sqrt(2.0 * (self.levels ** 2 - 1) / 3.0)

        index = np.arange(self.levels)
        gray = index ^ (index >> 1)
        # amplitude of each axis value (bit pattern read as an integer)
        self.axis_amplitude = np.empty(self.levels)
        self.axis_amplitude[gray] = (self.levels - 1) - 2 * index
        self.gray = gray

        values = np.arange(order)
        i_part = self.axis_amplitude[values >> self.bits_per_axis]
        q_part = self.axis_amplitude[values & (self.levels - 1)]
        self.points = (i_part + 1j * q_part) / self.scale

    def __repr__(self):
        return f"QamMap({self.order})"

    def _axis_values(self, amplitude):
        index = np.clip(np.rint(((self.levels - 1) - amplitude * self.scale) / 2.0), 0, self.levels - 1).astype(int)
        return self.gray[index]

    def map(self, bits):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape[-1] % self.bits_per_symbol:
            raise SizeError(f"{bits.shape[-1]} bits is not a multiple of {self.bits_per_symbol} for {self.order}-QAM")
        grouped = bits.reshape(*bits.shape[:-1], -1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return self.points[grouped @ weights]

    def demap(self, points):
        points = np.asarray(points)
        values = (self._axis_values(points.real) << self.bits_per_axis) | self._axis_values(points.imag)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        bits = (values[..., None] >> shifts) & 1
        return bits.reshape(*points.shape[:-1], -1).astype(np.uint8)


@lru_cache(maxsize=None)
def get_qam(order):
    return QamMap(order)


def qam_map(bits, qmap):
    return qmap.map(bits)


def qam_demap(points, qmap):
    return qmap.demap(points)


# --- blocks ---

@dataclass(frozen=True, eq=False)
class SymbolBlock:
    scheme: str
    x: NDArray
    bits: NDArray | None = None


@dataclass(frozen=True, eq=False)
class SampleBlock:
    samples: NDArray
    block_len: int
    rate: str = 'symbol'

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise SizeError("sample block contains non-finite values")


def _symbols(x):
    return np.asarray(x.x if isinstance(x, SymbolBlock) else x)


def _samples(y):
    return np.asarray(y.samples if isinstance(y, SampleBlock) else y, dtype=float)


def _gains(eq, n):
    if eq is None:
        return np.ones(n, dtype=complex)
    d = np.asarray(getattr(eq, 'd', eq), dtype=complex)
    if d.shape[-1] != n:
        raise SizeError(f"equalizer has {d.shape[-1]} bins, expected {n}")
    return d


class SubcarrierMap:
    """
    The selection matrix B. Real parts of x fill the first M/2 active bins
    (ascending centered index), imaginary parts the remaining M/2.
    """

    def __init__(self, mask):
        if mask.m_active % 2:
            raise ConfigurationError(f"{mask} has an odd number of active bins; B needs M even")
        self.mask = mask
        self.bins = mask.active_bins
        self.half = mask.m_active // 2

    @property
    def b(self):
        b = np.zeros((self.mask.n_total, self.mask.m_active))
        b[self.bins, np.arange(self.mask.m_active)] = 1.0
        return b

    def place(self, x):
        x = np.asarray(x)
        if x.shape[-1] != self.half:
            raise ConfigurationError(f"expected {self.half} symbols per block for {self.mask}, got {x.shape[-1]}")
        v = np.zeros((*x.shape[:-1], self.mask.n_total))
        v[..., self.bins[:self.half]] = x.real
        v[..., self.bins[self.half:]] = x.imag
        return v

    def extract(self, v):
        v = np.asarray(v)
        return v[..., self.bins[:self.half]] + 1j * v[..., self.bins[self.half:]]


# --- cyclic prefix ---

def add_cp(x, cp_len):
    x = np.asarray(x)
    n = x.shape[-1]
    if cp_len < 0 or cp_len >= n:
        raise ConfigurationError(f"CP length {cp_len} must be in [0, {n})")
    if cp_len == 0:
        return x.copy()
    return np.concatenate([x[..., n - cp_len:], x], axis=-1)


def remove_cp(y, cp_len):
    y = np.asarray(y)
    n = y.shape[-1] - cp_len
    if cp_len < 0 or cp_len >= n:
        raise ConfigurationError(f"CP length {cp_len} must be in [0, {max(n, 0)})")
    return y[..., cp_len:].copy()


# --- UCP-OFDM ---

def ucp_modulate(pre, x, cp_len, counter=None):
    """s = T P B [Re x; Im x] with P applied through its low-rank factors."""
    x = _symbols(x)
    v = SubcarrierMap(pre.mask).place(x)
    s = encode_fast(pre, v, counter)
    n = pre.n
    return SampleBlock(samples=add_cp(s, cp_len), block_len=n + cp_len)


def ucp_demodulate(pre, y, eq=None, cp_len=0, counter=None):
    """R -> F^H -> D -> F -> P^T -> B^T."""
    y = _samples(y)
    n = pre.n
    if y.shape[-1] != n + cp_len:
        raise SizeError(f"expected block length {n + cp_len}, got {y.shape[-1]}")
    spectrum = fft_unitary(remove_cp(y, cp_len), FORWARD) * _gains(eq, n)
    z = fft_unitary(spectrum, INVERSE).real
    v = decode_fast(pre, z, counter)
    return SymbolBlock(scheme=UCP, x=SubcarrierMap(pre.mask).extract(v))


def decode_dense(pre, y, eq=None, cp_len=0):
    """Reference receiver: W^H applied to the equalized spectrum."""
    y = _samples(y)
    spectrum = fft_unitary(remove_cp(y, cp_len), FORWARD) * _gains(eq, pre.n)
    v = (spectrum @ pre.w.conj()).real
    return SubcarrierMap(pre.mask).extract(v)


# --- Hermitian-symmetric OFDM ---

def _hermitian_frame(x, bins, n):
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != bins.size:
        raise SizeError(f"expected {bins.size} symbols per block, got {x.shape[-1]}")
    spectrum = np.zeros((*x.shape[:-1], n), dtype=complex)
    spectrum[..., bins] = x
    spectrum[..., (-bins) % n] = np.conj(x)
    return fft_unitary(spectrum, INVERSE).real


def _check_block(y, block_len):
    if y.shape[-1] != block_len:
        raise SizeError(f"expected block length {block_len}, got {y.shape[-1]}")


def dco_modulate(x, mask, cp_len):
    """Bipolar Hermitian OFDM on the positive active bins of `mask` (bias is applied by the front end)."""
    s = _hermitian_frame(_symbols(x), mask.positive_active_bins, mask.n_total)
    return SampleBlock(samples=add_cp(s, cp_len), block_len=mask.n_total + cp_len)


def dco_demodulate(y, mask, eq=None, cp_len=0):
    y = _samples(y)
    n = mask.n_total
    _check_block(y, n + cp_len)
    spectrum = fft_unitary(remove_cp(y, cp_len), FORWARD) * _gains(eq, n)
    return SymbolBlock(scheme=DCO, x=spectrum[..., mask.positive_active_bins])


def aco_bins(n):
    """Odd positive bins 1, 3, ..., N/2 - 1."""
    return np.arange(1, n // 2, 2)


def aco_bipolar(x, n):
    return _hermitian_frame(_symbols(x), aco_bins(n), n)


def aco_modulate(x, n, cp_len):
    s = np.maximum(aco_bipolar(x, n), 0.0)
    return SampleBlock(samples=add_cp(s, cp_len), block_len=n + cp_len)


def aco_demodulate(y, n, eq=None, cp_len=0):
    """Odd-bin symbols arrive at half amplitude after zero clipping; scaled back by 2."""
    y = _samples(y)
    _check_block(y, n + cp_len)
    spectrum = fft_unitary(remove_cp(y, cp_len), FORWARD) * _gains(eq, n)
    return SymbolBlock(scheme=ACO, x=2.0 * spectrum[..., aco_bins(n)])


def aco_clipping_ratio(samples, n, cp_len=0):
    """Energy on even bins over energy on odd bins (clipping noise vs data)."""
    spectrum = fft_unitary(remove_cp(_samples(samples), cp_len), FORWARD)
    power = np.abs(spectrum) ** 2
    odd = power[..., 1::2].sum()
    return float(power[..., 0::2].sum() / odd) if odd > 0 else 0.0


def u_ofdm_modulate(x, mask, cp_len):
    """Positive half and negated negative half, each with its own CP."""
    s = _hermitian_frame(_symbols(x), mask.positive_active_bins, mask.n_total)
    halves = [add_cp(np.maximum(s, 0.0), cp_len), add_cp(np.maximum(-s, 0.0), cp_len)]
    return SampleBlock(samples=np.concatenate(halves, axis=-1), block_len=2 * (mask.n_total + cp_len))


def u_ofdm_spectrum(y, n, cp_len):
    """Bipolar frame spectrum rebuilt as FFT(positive half) - FFT(negative half)."""
    y = _samples(y)
    _check_block(y, 2 * (n + cp_len))
    half = n + cp_len
    pos = fft_unitary(remove_cp(y[..., :half], cp_len), FORWARD)
    neg = fft_unitary(remove_cp(y[..., half:], cp_len), FORWARD)
    return pos - neg


def u_ofdm_demodulate(y, mask, eq=None, cp_len=0):
    n = mask.n_total
    spectrum = u_ofdm_spectrum(y, n, cp_len) * _gains(eq, n)
    return SymbolBlock(scheme=U_OFDM, x=spectrum[..., mask.positive_active_bins])


# --- baseband PAM with FDE ---

def bb_modulate(levels, n, cp_len):
    levels = np.asarray(levels, dtype=float)
    if levels.shape[-1] != n:
        raise SizeError(f"expected {n} PAM levels per block, got {levels.shape[-1]}")
    return SampleBlock(samples=add_cp(levels, cp_len), block_len=n + cp_len)


def bb_demodulate(y, n, eq=None, cp_len=0):
    y = _samples(y)
    _check_block(y, n + cp_len)
    spectrum = fft_unitary(remove_cp(y, cp_len), FORWARD) * _gains(eq, n)
    return fft_unitary(spectrum, INVERSE).real


# --- Zadoff-Chu preamble ---

def zadoff_chu(length, root=1):
    if length < 1:
        raise ConfigurationError("Zadoff-Chu length must be positive")
    if not 0 < root < max(length, 2) or gcd(root, length) != 1:
        raise ConfigurationError(f"Zadoff-Chu root {root} is not coprime with length {length}")
    n = np.arange(length)
    if length % 2:
        return np.exp(-1j * np.pi * root * n * (n + 1) / length)
    return np.exp(-1j * np.pi * root * n * n / length)


@dataclass(frozen=True, eq=False)
class Preamble:
    training: NDArray
    samples: NDArray


def zadoff_chu_preamble(mask, root=1, cp_len=0, full_band=False):
    """
    ZC values on the positive active bins (ascending), mirrored conjugate
    on the negative ones, zero on null bins. With full_band every bin is
    trained, DC and -N/2 carrying real unit values.
    """
    n = mask.n_total
    if full_band:
        bins = np.arange(1, n // 2)
    else:
        bins = mask.positive_active_bins
    training = np.zeros(n, dtype=complex)
    zc = zadoff_chu(bins.size, root)
    training[bins] = zc
    training[(-bins) % n] = np.conj(zc)
    if full_band:
        training[0] = 1.0
        training[n // 2] = 1.0
    else:
        # active bins without a positive partner (the middle bin of a custom mask)
        lone = natural_bin(np.array([k for k in mask.active_set if k == 0], dtype=int), n)
        training[lone] = 1.0
    samples = fft_unitary(training, INVERSE)
    return Preamble(training=training, samples=add_cp(samples.real, cp_len))


# --- scheme registry ---

class Scheme:
    """A modulation scheme bound to its block geometry and constellation."""
    name = None
    polarity = BIPOLAR

    def __init__(self, n, cp_len, qam_order):
        self.n = n
        self.cp_len = cp_len
        self.qam = get_qam(qam_order)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, cp={self.cp_len}, qam={self.qam.order})"

    @property
    def block_len(self):
        return self.n + self.cp_len

    @property
    def symbols_per_block(self):
        raise NotImplementedError

    @property
    def bits_per_block(self):
        return self.symbols_per_block * self.qam.bits_per_symbol

    @property
    def bits_per_sample(self):
        return self.bits_per_block / self.block_len

    def map_bits(self, bits):
        return self.qam.map(bits)

    def demap(self, symbols):
        return self.qam.demap(symbols)

    def modulate(self, symbols, counter=None):
        raise NotImplementedError

    def demodulate(self, samples, eq=None, counter=None):
        raise NotImplementedError

    def preamble(self, root=1):
        """(effective training spectrum, transmitted preamble samples)."""
        raise NotImplementedError

    def received_spectrum(self, samples):
        return fft_unitary(remove_cp(_samples(samples), self.cp_len), FORWARD)


class UcpScheme(Scheme):
    name = UCP

    def __init__(self, precoder, cp_len, qam_order=DEFAULT_QAM[UCP]):
        super().__init__(precoder.n, cp_len, qam_order)
        self.precoder = precoder
        self.mask = precoder.mask

    @property
    def symbols_per_block(self):
        return self.mask.m_active // 2

    def modulate(self, symbols, counter=None):
        return ucp_modulate(self.precoder, symbols, self.cp_len, counter).samples

    def demodulate(self, samples, eq=None, counter=None):
        return ucp_demodulate(self.precoder, samples, eq, self.cp_len, counter).x

    def preamble(self, root=1):
        pre = zadoff_chu_preamble(self.mask, root, self.cp_len)
        return pre.training, pre.samples


class DcoScheme(Scheme):
    name = DCO

    def __init__(self, mask, cp_len, qam_order=DEFAULT_QAM[DCO]):
        super().__init__(mask.n_total, cp_len, qam_order)
        self.mask = mask

    @property
    def symbols_per_block(self):
        return self.mask.positive_active_bins.size

    def modulate(self, symbols, counter=None):
        return dco_modulate(symbols, self.mask, self.cp_len).samples

    def demodulate(self, samples, eq=None, counter=None):
        return dco_demodulate(samples, self.mask, eq, self.cp_len).x

    def preamble(self, root=1):
        pre = zadoff_chu_preamble(self.mask, root, self.cp_len)
        return pre.training, pre.samples


class AcoScheme(Scheme):
    name = ACO
    polarity = UNIPOLAR

    def __init__(self, n, cp_len, qam_order=DEFAULT_QAM[ACO]):
        super().__init__(n, cp_len, qam_order)

    @property
    def symbols_per_block(self):
        return self.n // 4

    def modulate(self, symbols, counter=None):
        return aco_modulate(symbols, self.n, self.cp_len).samples

    def demodulate(self, samples, eq=None, counter=None):
        return aco_demodulate(samples, self.n, eq, self.cp_len).x

    def preamble(self, root=1):
        bins = aco_bins(self.n)
        zc = zadoff_chu(bins.size, root)
        samples = aco_modulate(zc, self.n, self.cp_len).samples
        # zero clipping halves the odd-bin amplitude
        training = np.zeros(self.n, dtype=complex)
        training[bins] = 0.5 * zc
        training[(-bins) % self.n] = 0.5 * np.conj(zc)
        return training, samples


class UOfdmScheme(Scheme):
    name = U_OFDM
    polarity = UNIPOLAR

    def __init__(self, mask, cp_len, qam_order=DEFAULT_QAM[U_OFDM]):
        super().__init__(mask.n_total, cp_len, qam_order)
        self.mask = mask

    @property
    def block_len(self):
        return 2 * (self.n + self.cp_len)

    @property
    def symbols_per_block(self):
        return self.mask.positive_active_bins.size

    def modulate(self, symbols, counter=None):
        return u_ofdm_modulate(symbols, self.mask, self.cp_len).samples

    def demodulate(self, samples, eq=None, counter=None):
        return u_ofdm_demodulate(samples, self.mask, eq, self.cp_len).x

    def preamble(self, root=1):
        bins = self.mask.positive_active_bins
        zc = zadoff_chu(bins.size, root)
        samples = u_ofdm_modulate(zc, self.mask, self.cp_len).samples
        training = zadoff_chu_preamble(self.mask, root).training
        return training, samples

    def received_spectrum(self, samples):
        return u_ofdm_spectrum(samples, self.n, self.cp_len)


class BbScheme(Scheme):
    """Split-QAM PAM blocks; N real levels carry N/2 QAM symbols."""
    name = BB

    def __init__(self, n, cp_len, qam_order=DEFAULT_QAM[BB]):
        super().__init__(n, cp_len, qam_order)

    @property
    def symbols_per_block(self):
        return self.n // 2

    def modulate(self, symbols, counter=None):
        symbols = np.asarray(symbols)
        levels = np.concatenate([symbols.real, symbols.imag], axis=-1)
        return bb_modulate(levels, self.n, self.cp_len).samples

    def demodulate(self, samples, eq=None, counter=None):
        levels = bb_demodulate(samples, self.n, eq, self.cp_len)
        half = self.n // 2
        return levels[..., :half] + 1j * levels[..., half:]

    def preamble(self, root=1):
        pre = zadoff_chu_preamble(build_mask(self.n), root, self.cp_len, full_band=True)
        return pre.training, pre.samples


def make_scheme(name, mask, cp_len, qam_order=None, precoder=None):
    """
    Build a scheme on `mask`. DCO and U-OFDM use the same null bins as
    UCP-OFDM; ACO and BB only need N.
    """
    order = qam_order or DEFAULT_QAM.get(name)
    n = mask.n_total
    if name == UCP:
        if precoder is None:
            raise ConfigurationError("UCP-OFDM needs a synthesized precoder")
        if precoder.mask != mask:
            raise ConfigurationError(f"precoder mask {precoder.mask} does not match {mask}")
        return UcpScheme(precoder, cp_len, order)
    if name == DCO:
        return DcoScheme(mask, cp_len, order)
    if name == ACO:
        return AcoScheme(n, cp_len, order)
    if name == U_OFDM:
        return UOfdmScheme(mask, cp_len, order)
    if name == BB:
        return BbScheme(n, cp_len, order)
    raise ConfigurationError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
