"""
Dense linear algebra used by precoder synthesis.

Frequency vectors are stored in natural FFT order (bin 0 .. N-1). The
centered index k in [-N/2, N/2 - 1] maps to storage position k mod N;
`natural_bin` and `centered_index` are the only places that mapping lives.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .exceptions import NumericalError, SingularityError, SizeError

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-10
RANK_TOL = 1e-12

FORWARD = 'forward'
INVERSE = 'inverse'


def is_power_of_two(n):
    return n >= 2 and (n & (n - 1)) == 0


def natural_bin(k, n):
    """Storage position of centered frequency index k."""
    return np.asarray(k) % n


def centered_index(i, n):
    """Centered frequency index of storage position i."""
    i = np.asarray(i)
    return np.where(i < n // 2, i, i - n)


def centered_order(n):
    """Storage positions listed by ascending centered index."""
    return natural_bin(np.arange(-n // 2, n // 2), n)


def fft_unitary(x, direction=FORWARD):
    """
    Power-normalized DFT.

    inverse: s[n] = 1/sqrt(N) * sum_k X[k] exp(+j 2 pi k n / N), i.e. F @ X.
    forward: F^H @ x.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise SizeError(f"FFT length must be a power of two, got {n}")
    if direction == FORWARD:
        return np.fft.fft(x, norm='ortho')
    if direction == INVERSE:
        return np.fft.ifft(x, norm='ortho')
    raise ValueError(f"unknown direction {direction!r}")


def dft_matrix(n):
    """The N x N matrix F, rows time, columns frequency (natural order)."""
    return fft_unitary(np.eye(n, dtype=complex).T, INVERSE).T


@dataclass(frozen=True, eq=False)
class SvdFactors:
    u: NDArray
    sigma: NDArray
    v: NDArray

    def reconstruct(self):
        return (self.u * self.sigma) @ self.v.conj().T


def svd(a):
    """
    Thin SVD A = U diag(sigma) V^H with sigma descending.

    LAPACK's divide-and-conquer driver is tried first and the QR-iteration
    driver second; if both fail to converge a NumericalError names them.
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise SizeError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")

    attempted = []
    for driver in ('gesdd', 'gesvd'):
        attempted.append(driver)
        try:
            u, s, vh = scipy.linalg.svd(a, full_matrices=False, lapack_driver=driver, check_finite=False)
        except np.linalg.LinAlgError:
            logger.warning("SVD driver %s did not converge on %s matrix", driver, a.shape)
            continue
        return SvdFactors(u=u, sigma=s, v=vh.conj().T)

    raise NumericalError(
        f"SVD did not converge after {len(attempted)} LAPACK drivers ({', '.join(attempted)})",
        drivers=attempted,
    )


def unitarity_residual(q):
    """max |Q^H Q - I|."""
    q = np.asarray(q)
    return float(np.max(np.abs(q.conj().T @ q - np.eye(q.shape[1]))))


def project_unitary(a):
    """
    Frobenius-nearest unitary matrix to a square A: U V^H from its SVD.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SizeError(f"projection needs a square matrix, got shape {a.shape}")

    factors = svd(a)
    sigma = factors.sigma
    deficient = int(np.count_nonzero(sigma <= RANK_TOL * sigma[0])) if sigma.size and sigma[0] > 0 else sigma.size
    if deficient:
        raise SingularityError(
            f"matrix is rank deficient: {deficient} singular value(s) below {RANK_TOL:g} x largest; "
            "the unitary projection is not unique",
            count=deficient,
        )
    return factors.u @ factors.v.conj().T
