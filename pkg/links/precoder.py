"""
Spectral masks, the unitary checkerboard precoder and its low-rank fast path.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .exceptions import ConfigurationError, SizeError, SymmetryError, SynthesisError
from .numerics import (
    RANK_TOL,
    UNITARY_TOL,
    centered_index,
    centered_order,
    dft_matrix,
    is_power_of_two,
    natural_bin,
    project_unitary,
    svd,
    unitarity_residual,
)

logger = logging.getLogger(__name__)

ZERO_SNAP = 1e-9
REALNESS_TOL = 1e-10
RANK_CUTOFF = 1e-10
SIGN_TIE = 1e-8

CACHE_MAGIC = b'UCPW'
CACHE_VERSION = 1
CACHE_HEADER = np.dtype([
    ('magic', 'S4'),
    ('version', '<u2'),
    ('reserved', '<u2'),
    ('n', '<u4'),
    ('r', '<u4'),
])


@dataclass(frozen=True, eq=False)
class SpectralMask:
    """
    Active/null subcarrier pattern.

    `m` is stored in natural bin order; `active_set` holds centered indices
    in ascending order. n_middle / n_edge are None for masks that do not
    follow the middle/edge layout.
    """
    n_total: int
    active_set: tuple
    m: NDArray
    n_middle: int | None = None
    n_edge: int | None = None

    @property
    def m_active(self):
        return len(self.active_set)

    @property
    def z_null(self):
        return self.n_total - self.m_active

    @property
    def active_bins(self):
        """Natural positions of the active bins, ascending centered order."""
        return natural_bin(np.array(self.active_set, dtype=int), self.n_total)

    @property
    def null_bins(self):
        return np.flatnonzero(~self.m)

    @property
    def positive_active_bins(self):
        k = np.array([k for k in self.active_set if k > 0], dtype=int)
        return natural_bin(k, self.n_total)

    def bits(self):
        return np.packbits(self.m.astype(np.uint8), bitorder='little')

    def digest(self):
        h = hashlib.sha1()
        h.update(int(self.n_total).to_bytes(4, 'little'))
        h.update(self.bits().tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        return isinstance(other, SpectralMask) and self.n_total == other.n_total and np.array_equal(self.m, other.m)

    def __hash__(self):
        return hash(self.digest())

    def __str__(self):
        return f"SpectralMask(N={self.n_total}, M={self.m_active}, Z={self.z_null})"


def _structured_null_set(n_total, n_middle, n_edge):
    half = n_total // 2
    nulls = set(range(-n_middle, n_middle + 1))
    nulls.update(range(-half, -half + n_edge + 1))
    nulls.update(range(half - n_edge, half))
    return nulls


def _check_size(n_total):
    if not is_power_of_two(n_total) or n_total < 4:
        raise ConfigurationError(f"N must be a power of two >= 4, got {n_total}")


def build_mask(n_total, n_middle=0, n_edge=0):
    _check_size(n_total)
    if n_middle < 0 or n_edge < 0:
        raise ConfigurationError("n_middle and n_edge must be non-negative")

    m_active = n_total - 2 * (n_middle + n_edge + 1)
    if m_active < 2:
        raise ConfigurationError(
            f"mask N={n_total}, n_middle={n_middle}, n_edge={n_edge} leaves {max(m_active, 0)} active subcarriers"
        )

    nulls = _structured_null_set(n_total, n_middle, n_edge)
    active = tuple(k for k in range(-n_total // 2, n_total // 2) if k not in nulls)
    m = np.zeros(n_total, dtype=bool)
    m[natural_bin(np.array(active), n_total)] = True
    return SpectralMask(n_total=n_total, active_set=active, m=m, n_middle=n_middle, n_edge=n_edge)


def _infer_structure(n_total, active):
    """(n_middle, n_edge) if the active set has the middle/edge layout."""
    half = n_total // 2
    n_middle = 0
    while n_middle + 1 < half and (n_middle + 1) not in active:
        n_middle += 1
    n_edge = 0
    while half - 1 - n_edge > 0 and (half - 1 - n_edge) not in active:
        n_edge += 1
    if 0 in active or n_total - 2 * (n_middle + n_edge + 1) < 2:
        return None, None
    if set(range(-half, half)) - _structured_null_set(n_total, n_middle, n_edge) != active:
        return None, None
    return n_middle, n_edge


def build_mask_from_set(n_total, active):
    """Mask with exactly the given centered active indices."""
    _check_size(n_total)
    active = {int(k) for k in active}
    half = n_total // 2

    out_of_range = sorted(k for k in active if k < -half or k >= half)
    if out_of_range:
        raise ConfigurationError(f"active indices outside [-{half}, {half - 1}]: {out_of_range}")
    if -half in active:
        raise SymmetryError(f"bin -N/2 = {-half} has no mirror and must be null")
    unmatched = sorted(k for k in active if -k not in active)
    if unmatched:
        raise SymmetryError(f"active set is not Hermitian-symmetric; unmatched indices {unmatched}")
    if not active:
        raise ConfigurationError("active set is empty")

    m = np.zeros(n_total, dtype=bool)
    m[natural_bin(np.array(sorted(active)), n_total)] = True
    n_middle, n_edge = _infer_structure(n_total, active)
    return SpectralMask(n_total=n_total, active_set=tuple(sorted(active)), m=m, n_middle=n_middle, n_edge=n_edge)


def full_mask(n_total):
    """Every bin active. Only meaningful as the Z = 0 limiting case."""
    _check_size(n_total)
    m = np.ones(n_total, dtype=bool)
    active = tuple(int(k) for k in centered_index(centered_order(n_total), n_total))
    return SpectralMask(n_total=n_total, active_set=active, m=m)


def pattern_matrix(mask):
    """M = m m^T + (1 - m)(1 - m)^T, natural bin order on both axes."""
    m = mask.m.astype(np.uint8)
    return np.outer(m, m) + np.outer(1 - m, 1 - m)


@dataclass
class OpCounter:
    """Accumulates scalar operations spent on the fast path."""
    macs: int = 0
    additions: int = 0

    def add(self, macs=0, additions=0):
        self.macs += macs
        self.additions += additions


@dataclass(frozen=True)
class OpCount:
    encode_macs: int
    pass_macs: tuple
    additions: int
    storage_reals: int


@dataclass(frozen=True, eq=False)
class Precoder:
    mask: SpectralMask
    w: NDArray
    p: NDArray
    u_r: NDArray
    sigma_r: NDArray
    v_r: NDArray
    us_r: NDArray = field(repr=False)

    @property
    def rank_r(self):
        return int(self.sigma_r.size)

    @property
    def n(self):
        return self.mask.n_total

    def residuals(self):
        n = self.n
        return {
            'unitarity': unitarity_residual(self.w),
            'orthogonality': float(np.max(np.abs(self.p.T @ self.p - np.eye(n)))),
            'distance_from_identity': float(np.linalg.norm(self.p - np.eye(n))),
        }


def _compact_factors(p):
    n = p.shape[0]
    factors = svd(p - np.eye(n))
    sigma = factors.sigma
    if sigma.size == 0 or sigma[0] < RANK_CUTOFF:
        rank = 0
    else:
        rank = int(np.count_nonzero(sigma > max(RANK_CUTOFF * sigma[0], RANK_CUTOFF)))
    u_r = np.ascontiguousarray(factors.u[:, :rank].real)
    v_r = np.ascontiguousarray(factors.v[:, :rank].real)
    sigma_r = sigma[:rank].copy()
    return u_r, sigma_r, v_r


def _snap_pattern(w, pattern):
    """Zero the pattern-zero entries of a W rebuilt as F^H P."""
    off = pattern == 0
    scale = float(np.max(np.abs(w))) or 1.0
    leak = float(np.max(np.abs(w[off]))) if off.any() else 0.0
    if leak >= ZERO_SNAP * scale:
        raise SynthesisError(f"precoder is not patterned: {leak:.3e} at pattern-zero entries", magnitude=leak)
    w = w.copy()
    w[off] = 0.0
    return w


def conjugate_pair_basis(bins, n):
    """
    Unitary T over `bins` (a set closed under k -> -k mod n) such that T x
    is real whenever x[-k] = conj(x[k]) on those bins. Self-mirrored bins
    keep their coordinate; each pair (k, -k) becomes sqrt(2) Re and
    sqrt(2) Im of x[k].
    """
    bins = [int(b) for b in bins]
    position = {b: i for i, b in enumerate(bins)}
    t = np.zeros((len(bins), len(bins)), dtype=complex)
    row = 0
    for b in bins:
        mirror = (-b) % n
        if mirror not in position:
            raise SymmetryError(f"bin {b} has no mirror {mirror} in the set")
        if mirror == b:
            t[row, position[b]] = 1.0
            row += 1
        elif b < mirror:
            i, j = position[b], position[mirror]
            t[row, i] = t[row, j] = 1.0 / np.sqrt(2.0)
            t[row + 1, i] = -1j / np.sqrt(2.0)
            t[row + 1, j] = 1j / np.sqrt(2.0)
            row += 2
    return t


def _canonical_signs(v):
    """
    Flip each column so its largest-magnitude entry is positive. Entries
    tied with the largest within rounding count as largest, and the first
    of them decides.
    """
    if v.shape[1] == 0:
        return v
    mags = np.abs(v)
    first = np.argmax(mags >= (1.0 - SIGN_TIE) * mags.max(axis=0), axis=0)
    lead = v[first, np.arange(v.shape[1])]
    return v * np.where(lead < 0, -1.0, 1.0)


def _split_polar(block):
    """
    (U_s V_s^T over the non-null singular directions, canonical right null
    basis). Blocks of an orthogonal matrix have singular values in [0, 1],
    so both diagonal blocks share one absolute cutoff.
    """
    factors = svd(block)
    live = factors.sigma > RANK_TOL
    if live.all():
        return project_unitary(block), np.zeros((block.shape[1], 0))
    ranged = factors.u[:, live] @ factors.v[:, live].T
    return ranged, _canonical_signs(factors.v[:, ~live])


def patterned_polar(r, m_active):
    """
    Nearest block-diagonal orthogonal matrix to the real orthogonal `r`,
    with blocks (m_active, rest). Where a diagonal block is singular its
    polar factor is not unique; the null directions of the two blocks are
    then paired through the coupling blocks: the active block sends its
    null direction v_a to R_c v_b and the null block sends v_b to -R_d v_a.
    That keeps the result orthogonal and gives the rank-2 update in every
    such pair.
    """
    r_a, r_c = r[:m_active, :m_active], r[:m_active, m_active:]
    r_d, r_b = r[m_active:, :m_active], r[m_active:, m_active:]
    if r_b.size == 0:
        ranged_a, null_a = _split_polar(r_a)
        if null_a.shape[1]:
            raise SynthesisError(f"unpatterned block is singular in {null_a.shape[1]} direction(s)", magnitude=0.0)
        return ranged_a, np.zeros((0, 0))

    ranged_a, null_a = _split_polar(r_a)
    ranged_b, null_b = _split_polar(r_b)
    if null_a.shape[1] != null_b.shape[1]:
        raise SynthesisError(
            f"active and null blocks disagree on their singular directions ({null_a.shape[1]} vs {null_b.shape[1]})",
            magnitude=float(abs(null_a.shape[1] - null_b.shape[1])),
        )
    if null_a.shape[1]:
        logger.debug("Pairing %d singular direction(s) of the patterned blocks", null_a.shape[1])
    w_a = ranged_a + (r_c @ null_b) @ null_a.T
    w_b = ranged_b - (r_d @ null_a) @ null_b.T
    return w_a, w_b


def synthesize(mask):
    """
    W = proj(F^H * M), P = F W and the compact SVD of E = P - I.

    F^H * M is block diagonal over (active, null) bins, so W is projected
    block by block and the pattern zeros are exact. Each block is taken to
    real coordinates first, which keeps the rows of W conjugate-symmetric
    and F W real.
    """
    n = mask.n_total
    f = dft_matrix(n)
    fh = f.conj().T
    active = np.flatnonzero(mask.m)
    null = np.flatnonzero(~mask.m)

    t_a = conjugate_pair_basis(active, n)
    t_b = conjugate_pair_basis(null, n)
    order = np.concatenate([active, null])
    rows = np.zeros((n, n), dtype=complex)
    rows[:active.size, :active.size] = t_a
    rows[active.size:, active.size:] = t_b
    r = rows @ fh[np.ix_(order, order)]
    leak = float(np.max(np.abs(r.imag)))
    if leak >= REALNESS_TOL:
        raise SynthesisError(f"masked conjugate DFT is not real in pair coordinates: {leak:.3e}", magnitude=leak)

    w_a, w_b = patterned_polar(np.ascontiguousarray(r.real), active.size)
    w = np.zeros((n, n), dtype=complex)
    w[np.ix_(active, active)] = t_a.conj().T @ w_a
    if null.size:
        w[np.ix_(null, null)] = t_b.conj().T @ w_b

    residual = unitarity_residual(w)
    if residual >= UNITARY_TOL:
        raise SynthesisError(f"precoder is not unitary: residual {residual:.3e}", magnitude=residual)

    p_complex = f @ w
    imag = float(np.max(np.abs(p_complex.imag)))
    if imag >= REALNESS_TOL:
        raise SynthesisError(f"composite matrix FW is not real: max imaginary part {imag:.3e}", magnitude=imag)
    p = np.ascontiguousarray(p_complex.real)

    u_r, sigma_r, v_r = _compact_factors(p)
    if sigma_r.size != 2 * mask.z_null:
        raise SynthesisError(
            f"rank of P - I is {sigma_r.size}, expected 2Z = {2 * mask.z_null} for {mask}",
            magnitude=float(sigma_r.size),
        )

    precoder = Precoder(mask=mask, w=w, p=p, u_r=u_r, sigma_r=sigma_r, v_r=v_r, us_r=u_r * sigma_r)
    logger.info(
        "Synthesized precoder for %s: rank %d, unitarity %.2e, realness %.2e",
        mask, precoder.rank_r, residual, imag,
    )
    return precoder


def _check_vector(pre, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != pre.n:
        raise SizeError(f"expected length {pre.n}, got {x.shape[-1]}")
    return x


def encode_fast(pre, x, counter=None):
    """x + U_r Sigma_r V_r^T x. Accepts one block or a stack of blocks (rows)."""
    x = _check_vector(pre, x)
    out = x + (x @ pre.v_r) @ pre.us_r.T
    if counter is not None:
        blocks = 1 if x.ndim == 1 else x.shape[0]
        counter.add(macs=blocks * 2 * pre.n * pre.rank_r, additions=blocks * pre.n)
    return out


def decode_fast(pre, y, counter=None):
    """y + V_r Sigma_r U_r^T y, i.e. P^T y."""
    y = _check_vector(pre, y)
    out = y + (y @ pre.us_r) @ pre.v_r.T
    if counter is not None:
        blocks = 1 if y.ndim == 1 else y.shape[0]
        counter.add(macs=blocks * 2 * pre.n * pre.rank_r, additions=blocks * pre.n)
    return out


def op_count(pre):
    pass_macs = pre.n * pre.rank_r
    return OpCount(
        encode_macs=2 * pass_macs,
        pass_macs=(pass_macs, pass_macs),
        additions=pre.n,
        storage_reals=2 * pre.n * pre.rank_r,
    )


# --- on-disk cache ---

def cache_path(mask, directory):
    return Path(directory) / f"ucp_n{mask.n_total}_{mask.digest()[:16]}.bin"


def save_precoder(pre, path):
    """
    Little-endian layout: 16-byte header (magic, version, reserved, N, r),
    ceil(N/8) mask bytes (bit i = bin i), then float64 row-major
    U_r Sigma_r (N x r), V_r (N x r) and dense P (N x N).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.zeros(1, dtype=CACHE_HEADER)
    header['magic'] = CACHE_MAGIC
    header['version'] = CACHE_VERSION
    header['n'] = pre.n
    header['r'] = pre.rank_r
    with open(path, 'wb') as fh:
        fh.write(header.tobytes())
        fh.write(pre.mask.bits().tobytes())
        for block in (pre.us_r, pre.v_r, pre.p):
            fh.write(np.ascontiguousarray(block, dtype='<f8').tobytes())
    return path


def load_precoder(path):
    raw = Path(path).read_bytes()
    if len(raw) < CACHE_HEADER.itemsize:
        raise SizeError(f"precoder cache {path} is truncated")

    header = np.frombuffer(raw[:CACHE_HEADER.itemsize], dtype=CACHE_HEADER)[0]
    if header['magic'] != CACHE_MAGIC:
        raise ConfigurationError(f"{path} is not a precoder cache file")
    if header['version'] != CACHE_VERSION:
        raise ConfigurationError(f"precoder cache version {header['version']} is not supported (expected {CACHE_VERSION})")

    n, r = int(header['n']), int(header['r'])
    offset = CACHE_HEADER.itemsize
    mask_len = (n + 7) // 8
    expected = offset + mask_len + 8 * (2 * n * r + n * n)
    if len(raw) != expected:
        raise SizeError(f"precoder cache {path} has {len(raw)} bytes, expected {expected}")

    bits = np.unpackbits(np.frombuffer(raw[offset:offset + mask_len], dtype=np.uint8), bitorder='little')[:n]
    offset += mask_len
    active = centered_index(np.flatnonzero(bits), n)
    mask = build_mask_from_set(n, active.tolist()) if active.size < n else full_mask(n)

    payload = np.frombuffer(raw[offset:], dtype='<f8').astype(float)
    us_r = payload[:n * r].reshape(n, r)
    v_r = payload[n * r:2 * n * r].reshape(n, r)
    p = payload[2 * n * r:].reshape(n, n)

    sigma_r = np.linalg.norm(us_r, axis=0)
    u_r = us_r / np.where(sigma_r > 0, sigma_r, 1.0)
    w = dft_matrix(n).conj().T @ p
    w = _snap_pattern(w, pattern_matrix(mask))
    return Precoder(mask=mask, w=w, p=p, u_r=u_r, sigma_r=sigma_r, v_r=v_r, us_r=us_r)


def get_precoder(mask, cache_dir=None):
    """Load the cached precoder for `mask`, synthesizing and caching it if absent."""
    if cache_dir is None:
        return synthesize(mask)

    path = cache_path(mask, cache_dir)
    if path.exists():
        try:
            pre = load_precoder(path)
        except (ConfigurationError, SizeError, SynthesisError) as exc:
            logger.warning("Ignoring unusable precoder cache %s: %s", path, exc)
        else:
            if pre.mask == mask:
                logger.debug("Loaded precoder from %s", path)
                return pre
            logger.warning("Precoder cache %s holds a different mask, re-synthesizing", path)

    pre = synthesize(mask)
    save_precoder(pre, path)
    return pre
