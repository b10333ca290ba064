"""Walsh-Hadamard analysis over {0,1}^d and marginal operators.

The transform is orthonormal: coefficient beta is
sum_gamma 2^{-d/2} (-1)^{<beta, gamma>} x_gamma, so applying it twice gives x back.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .core import BitMask, DimensionError, dominated_ints, popcount


def _bits(alpha) -> int:
    return alpha.bits if isinstance(alpha, BitMask) else int(alpha)


def _as_vector(x) -> tuple[np.ndarray, int]:
    v = np.asarray(x, dtype=float).ravel()
    n = v.size
    d = n.bit_length() - 1
    if n == 0 or 1 << d != n:
        raise DimensionError(f"length {n} is not a power of two")
    return v, d


def wht_unnormalized(v: np.ndarray) -> np.ndarray:
    """+-1 Hadamard transform along the last axis (length must be 2^k)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    lead = v.shape[:-1]
    a = v.reshape(*lead, n)
    h = 1
    while h < n:
        a = a.reshape(*lead, -1, 2, h)
        lo, hi = a[..., 0, :], a[..., 1, :]
        a = np.stack((lo + hi, lo - hi), axis=-2)
        h *= 2
    return a.reshape(*lead, n)


def fwht(x) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform, O(d 2^d)."""
    v, d = _as_vector(x)
    return wht_unnormalized(v) * 2.0 ** (-d / 2)


def basis_marginal_entry(alpha, beta, gamma, d: int) -> float:
    """Entry gamma of marginal alpha applied to Fourier basis vector f^beta.

    Zero unless beta is dominated by alpha; otherwise
    2^{d/2 - |alpha|} (-1)^{<beta, gamma>}.
    """
    a, b, g = _bits(alpha), _bits(beta), _bits(gamma)
    if g & a != g:
        raise ValueError(f"cell {g:b} is not dominated by marginal {a:b}")
    if b & a != b:
        return 0.0
    sign = -1.0 if popcount(b & g) & 1 else 1.0
    return sign * 2.0 ** (d / 2 - popcount(a))


def compute_marginal(alpha, x) -> np.ndarray:
    """Marginal over the attributes in alpha, cells in sub-mask order."""
    v, d = _as_vector(x)
    a = _bits(alpha)
    if a >> d:
        raise DimensionError(f"mask {a:b} does not fit d={d}")
    # axis t of the (2,)*d view is bit d-1-t
    drop = tuple(t for t in range(d) if not a >> (d - 1 - t) & 1)
    return v.reshape((2,) * d).sum(axis=drop).ravel() if d else v.copy()


def marginal_from_coeffs(alpha, coeffs: np.ndarray | Mapping[int, float], d: int | None = None) -> np.ndarray:
    """Rebuild marginal alpha from the Fourier coefficients of every beta below alpha."""
    a = _bits(alpha)
    if isinstance(coeffs, Mapping):
        if d is None:
            raise ValueError("d is required with sparse coefficients")
        try:
            c = np.array([coeffs[b] for b in dominated_ints(a)], dtype=float)
        except KeyError as exc:
            raise KeyError(f"missing Fourier coefficient {exc.args[0]:b}") from None
    else:
        full, dd = _as_vector(coeffs)
        if d is not None and d != dd:
            raise DimensionError(f"coefficient vector is for d={dd}, not {d}")
        d = dd
        c = full[dominated_ints(a)]
    k = popcount(a)
    # restricted to alpha's bits, (-1)^<beta,gamma> is a k-bit Hadamard matrix
    return wht_unnormalized(c) * 2.0 ** (d / 2 - k)


def fourier_marginal_matrix(marginals, masks, d: int) -> np.ndarray:
    """K x m matrix with entry ((i, gamma), beta) = (C^{alpha_i} f^beta)_gamma.

    Rows follow the marginals in order, cells in sub-mask order; columns follow
    ``masks``. Built from the closed form, so N = 2^d never appears.
    """
    masks = np.asarray(list(masks), dtype=np.int64)
    blocks = []
    for a in marginals:
        a = int(a)
        gammas = np.array(dominated_ints(a), dtype=np.int64)
        inside = (masks & a) == masks
        par = np.bitwise_count(gammas[:, None] & masks[None, :]) & 1
        blk = np.where(par, -1.0, 1.0) * 2.0 ** (d / 2 - popcount(a))
        blocks.append(blk * inside[None, :])
    return np.vstack(blocks) if blocks else np.zeros((0, masks.size))
