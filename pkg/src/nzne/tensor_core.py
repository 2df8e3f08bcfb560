"""Dense tensor primitives shared by the numerical modules.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128``. Every
reshape in this package uses NumPy's default row-major (C) linearization: the
last axis varies fastest. Site tensors of a matrix-product state are stored as
``(left_bond, physical, right_bond)`` and two-site operators acting on a pair
of physical legs ``(p1, p2)`` are indexed by ``p1 * d + p2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

__all__ = ["SvdResult", "as_tensor", "contract", "qr", "truncated_svd"]


def as_tensor(data) -> np.ndarray:
    """Return ``data`` as a finite complex128 array.

    Raises:
        ValueError: if any entry is NaN or infinite.
    """
    arr = np.asarray(data, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite entries")
    return arr


def contract(a: np.ndarray, b: np.ndarray, paired_axes: Sequence[tuple[int, int]] = ()) -> np.ndarray:
    """Contract ``a`` and ``b`` over the given ``(axis_of_a, axis_of_b)`` pairs.

    The output carries the unpaired axes of ``a`` followed by the unpaired axes
    of ``b``, each in their original order. With no pairs this is the outer
    product.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a: list[int] = []
    axes_b: list[int] = []
    for ia, ib in paired_axes:
        if not (-a.ndim <= ia < a.ndim) or not (-b.ndim <= ib < b.ndim):
            raise IndexError(f"axis pair ({ia}, {ib}) out of range for ranks {a.ndim}, {b.ndim}")
        ia %= a.ndim
        ib %= b.ndim
        if a.shape[ia] != b.shape[ib]:
            raise ValueError(f"extent mismatch on pair ({ia}, {ib}): {a.shape[ia]} != {b.shape[ib]}")
        axes_a.append(ia)
        axes_b.append(ib)
    if len(set(axes_a)) != len(axes_a) or len(set(axes_b)) != len(axes_b):
        raise ValueError("an axis may be paired at most once")
    return np.tensordot(a, b, axes=(axes_a, axes_b))


@dataclass(frozen=True)
class SvdResult:
    """Truncated singular value decomposition ``m ~ u @ diag(s) @ vh``.

    Attributes:
        u: Left isometry, shape ``(rows, k)``.
        s: Kept singular values in non-increasing order.
        vh: Right isometry, shape ``(k, cols)``.
        discarded_weight: Sum of squared dropped singular values divided by the
            sum of all squared singular values (0 for a zero matrix).
    """

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return int(self.s.size)

    @property
    def kept_weight(self) -> float:
        return 1.0 - self.discarded_weight

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.vh


def _full_svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge on ill-conditioned input
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd", check_finite=False)


def truncated_svd(m: np.ndarray, max_rank: int, cutoff: float = 0.0) -> SvdResult:
    """Best Frobenius-norm approximation of ``m`` with at most ``max_rank`` singular triplets.

    Keeps ``min(max_rank, #{s_i > cutoff * s_1}, numerical rank)`` triplets,
    where the numerical rank uses the usual ``s_1 * max(shape) * eps`` threshold.

    Args:
        m: A 2-axis array.
        max_rank: Upper bound on the number of kept triplets (>= 1).
        cutoff: Relative threshold on singular values; 0 disables it.

    Raises:
        ValueError: if ``m`` is not a matrix, contains non-finite entries or
            ``max_rank < 1``.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got rank-{m.ndim} tensor")
    if max_rank < 1:
        raise ValueError("max_rank must be at least 1")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    rows, cols = m.shape
    if m.size == 0 or not np.any(m):
        return SvdResult(
            np.zeros((rows, 0), dtype=m.dtype), np.zeros(0), np.zeros((0, cols), dtype=m.dtype), 0.0
        )

    u, s, vh = _full_svd(m)
    total = float(np.sum(s * s))
    s1 = s[0]
    keep = int(np.count_nonzero(s > s1 * max(rows, cols) * np.finfo(float).eps))
    if cutoff > 0.0:
        keep = min(keep, int(np.count_nonzero(s > cutoff * s1)))
    keep = max(1, min(keep, max_rank))
    discarded = float(np.sum(s[keep:] ** 2)) / total
    return SvdResult(u[:, :keep], s[:keep], vh[:keep, :], min(max(discarded, 0.0), 1.0))


def qr(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR decomposition."""
    return np.linalg.qr(m, mode="reduced")
