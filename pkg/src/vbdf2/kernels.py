"""BDF2 convolution kernels and their discrete orthogonal convolution (DOC) kernels.

Index conventions follow the math: levels ``n`` and ``k`` are 1-based.  A
DOC row for level ``n`` is returned as an array ``row`` with
``row[k-1] = theta^{(n)}_{n-k}`` for ``k = 1..n``.

DOC construction is written against :class:`KernelProvider` so any banded
multistep kernel with nonzero leading coefficient can be plugged in;
:class:`Bdf2Kernels` is the bandwidth-2 instance.
"""

from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidArgument
from .mesh import R_GRIGORIEFF, R_S1, RatioProfile, TimeMesh

_LOG_SPACE_RUN = 512


class KernelProvider(ABC):
    """Banded convolution kernels ``B^{(n)}_{m}``, zero for ``m >= bandwidth``."""

    bandwidth: int

    @property
    @abstractmethod
    def n_levels(self) -> int: ...

    @abstractmethod
    def coefficient(self, n: int, m: int) -> float:
        """Return ``B^{(n)}_m`` (``m = n - k`` is the lag)."""

    def leading(self, n: int) -> float:
        return self.coefficient(n, 0)

    def check_level(self, n: int) -> None:
        if not 1 <= n <= self.n_levels:
            raise InvalidArgument(f"level {n} outside 1..{self.n_levels}")

    def doc_row(self, n: int) -> np.ndarray:
        return doc_recursive(self, n)

    def lag_table(self, n: int) -> np.ndarray:
        """``out[m, j-1] = B^{(j)}_m`` for lags ``m < bandwidth`` and levels ``j <= n``."""
        self.check_level(n)
        return np.array([[self.coefficient(j, m) for j in range(1, n + 1)]
                         for m in range(self.bandwidth)])


@dataclass(frozen=True)
class Bdf2Kernels(KernelProvider):
    """Two-term BDF2 kernels.

    ``b0[n-1] = b^{(n)}_0`` and ``b1[n-1] = b^{(n)}_1``; level 1 is the BDF1
    step so ``b1[0]`` is stored as 0 and never used.
    """

    mesh: TimeMesh
    b0: np.ndarray = field(init=False, repr=False)
    b1: np.ndarray = field(init=False, repr=False)
    # hat-theta step factors: factor[k-1] = r_k^2 / (1 + 2 r_k), factor[0] unused
    factor: np.ndarray = field(init=False, repr=False)

    bandwidth = 2

    def __post_init__(self):
        tau = self.mesh.tau
        b0 = np.empty_like(tau)
        b1 = np.zeros_like(tau)
        factor = np.ones_like(tau)
        b0[0] = 1.0 / tau[0]
        r = self.mesh.ratios
        b0[1:] = (1.0 + 2.0 * r) / (tau[1:] * (1.0 + r))
        b1[1:] = -(r * r) / (tau[1:] * (1.0 + r))
        factor[1:] = r * r / (1.0 + 2.0 * r)
        for name, arr in (("b0", b0), ("b1", b1), ("factor", factor)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_levels(self) -> int:
        return self.mesh.n_steps

    def coefficient(self, n: int, m: int) -> float:
        if m == 0:
            return float(self.b0[n - 1])
        if m == 1 and n >= 2:
            return float(self.b1[n - 1])
        return 0.0

    def doc_row(self, n: int) -> np.ndarray:
        self.check_level(n)
        return theta_hat_row(self, n) / self.b0[:n]

    def lag_table(self, n: int) -> np.ndarray:
        self.check_level(n)
        return np.vstack((self.b0[:n], self.b1[:n]))


def build_bdf2_kernels(mesh: TimeMesh) -> Bdf2Kernels:
    return Bdf2Kernels(mesh)


def doc_recursive(kernels: KernelProvider, n: int) -> np.ndarray:
    """DOC row by back-substitution through the defining recursion."""
    kernels.check_level(n)
    w = kernels.bandwidth
    row = np.zeros(n)
    row[n - 1] = 1.0 / kernels.leading(n)
    for k in range(n - 1, 0, -1):
        acc = 0.0
        for j in range(k + 1, min(n, k + w - 1) + 1):
            acc += row[j - 1] * kernels.coefficient(j, j - k)
        row[k - 1] = -acc / kernels.leading(k)
    return row


def _check_pair(kernels: KernelProvider, n: int, k: int) -> None:
    kernels.check_level(n)
    if not 1 <= k <= n:
        raise InvalidArgument(f"need 1 <= k <= n, got k={k}, n={n}")


def _factor_product(factors: np.ndarray) -> float:
    if factors.size > _LOG_SPACE_RUN:
        return math.exp(float(np.log(factors).sum()))
    out = 1.0
    for f in factors:
        out *= f
    return out


def theta_hat(kernels: Bdf2Kernels, n: int, k: int) -> float:
    """``prod_{i=k+1}^{n} r_i^2 / (1 + 2 r_i)``; equals 1 when ``k == n``."""
    _check_pair(kernels, n, k)
    return _factor_product(kernels.factor[k:n])


def doc_explicit(kernels: Bdf2Kernels, n: int, k: int) -> float:
    _check_pair(kernels, n, k)
    return theta_hat(kernels, n, k) / float(kernels.b0[k - 1])


def theta_hat_row(kernels: Bdf2Kernels, n: int) -> np.ndarray:
    """``out[k-1] = hat-theta^{(n)}_{n-k}`` for ``k = 1..n``, built from the diagonal back."""
    kernels.check_level(n)
    out = np.empty(n)
    out[n - 1] = 1.0
    if n <= _LOG_SPACE_RUN + 1:
        acc = 1.0
        for k in range(n - 1, 0, -1):
            acc *= kernels.factor[k]
            out[k - 1] = acc
        return out
    logs = np.log(kernels.factor[1:n])
    # suffix sums: out[k-1] = exp(sum_{i=k+1}^{n} log f_i)
    out[:-1] = np.exp(np.cumsum(logs[::-1])[::-1])
    return out


def doc_table(kernels: KernelProvider, first: int, last: int) -> dict[int, np.ndarray]:
    """DOC rows for levels ``first..last`` (inclusive)."""
    kernels.check_level(first)
    kernels.check_level(last)
    return {n: kernels.doc_row(n) for n in range(first, last + 1)}


def orthogonality_defect(kernels: KernelProvider, n: int, row: np.ndarray | None = None,
                         scaled: bool = False) -> float:
    """Max over ``k`` of ``|sum_{j=k}^{n} theta^{(n)}_{n-j} B^{(j)}_{j-k} - delta_{nk}|``.

    The row defaults to :meth:`KernelProvider.doc_row` (the explicit product
    formula for BDF2), so the check is independent of the recursion that
    defines the kernels.

    With ``scaled=True`` each residual is divided by ``max(1, sum |terms|)``.
    The terms are of size ``theta_hat``, which grows like ``(r^2/(1+2r))^(n-k)``
    for ratios above ``1+sqrt(2)``; the absolute residual then carries the
    rounding error of the cancelling terms and cannot stay near machine epsilon.
    """
    kernels.check_level(n)
    if row is None:
        row = kernels.doc_row(n)
    row = np.asarray(row, dtype=float)
    lags = kernels.lag_table(n)
    acc = np.zeros(n)
    mag = np.zeros(n)
    # term for lag m at level k: theta^{(n)}_{n-(k+m)} B^{(k+m)}_m
    for m in range(min(kernels.bandwidth, n)):
        term = row[m:] * lags[m, m:]
        acc[: n - m] += term
        mag[: n - m] += np.abs(term)
    acc[n - 1] -= 1.0
    err = np.abs(acc)
    if scaled:
        err /= np.maximum(1.0, mag)
    return float(err.max())


def doc_row_sum(kernels: KernelProvider, n: int) -> float:
    return float(kernels.doc_row(n).sum())


def doc_double_sum(kernels: KernelProvider, n: int) -> float:
    """``sum_{k<=n} sum_{j<=k} theta^{(k)}_{k-j}``, which should equal ``t_n``."""
    return float(sum(doc_row_sum(kernels, k) for k in range(1, n + 1)))


def quadratic_form(kernels: KernelProvider, w) -> float:
    """``sum_k w_k sum_{j<=k} B^{(k)}_{k-j} w_j``."""
    w = np.asarray(w, dtype=float)
    n = w.size
    if n == 0:
        return 0.0
    kernels.check_level(n)
    total = 0.0
    for k in range(1, n + 1):
        inner = 0.0
        for j in range(max(1, k - kernels.bandwidth + 1), k + 1):
            inner += kernels.coefficient(k, k - j) * w[j - 1]
        total += w[k - 1] * inner
    return total


def b2_matrix_bands(kernels: Bdf2Kernels, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal ``2 b^{(k)}_0`` and off-diagonal ``b^{(k+1)}_1`` of the n-by-n matrix B2."""
    kernels.check_level(n)
    return 2.0 * kernels.b0[:n].copy(), kernels.b1[1:n].copy()


def _sturm_count(diag: np.ndarray, off2: np.ndarray, x: float) -> int:
    """Number of eigenvalues strictly less than ``x``."""
    count = 0
    q = diag[0] - x
    if q < 0.0:
        count += 1
    tiny = np.finfo(float).tiny
    for i in range(1, diag.size):
        if q == 0.0:
            q = tiny
        q = diag[i] - x - off2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


def tridiag_min_eigenvalue(diag, off, rtol: float = 1e-14, max_iter: int = 200) -> float:
    """Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    if diag.size == 1:
        return float(diag[0])
    absoff = np.abs(off)
    radius = np.zeros_like(diag)
    radius[:-1] += absoff
    radius[1:] += absoff
    lo = float(np.min(diag - radius))
    hi = float(np.max(diag + radius))
    norm_inf = float(np.max(np.abs(diag) + radius))
    tol = rtol * norm_inf
    off2 = off * off
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _sturm_count(diag, off2, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def psd_min_eigenvalue(kernels: Bdf2Kernels, n: int) -> float:
    diag, off = b2_matrix_bands(kernels, n)
    return tridiag_min_eigenvalue(diag, off)


def c_r_constant(profile: RatioProfile) -> float:
    """Bound on the hat-theta tail sums for meshes with few large ratios.

    ``C_r = (rh^2/(1+2 rh))^{N0} * (1+2 rc)/(1+2 rc - rc^2)`` with ``rc`` the
    largest ratio below ``1+sqrt(2)`` and ``rh`` the largest ratio in
    ``[1+sqrt(2), (3+sqrt(17))/2]``.
    """
    rc, rh = profile.r_c, profile.r_hat_c
    if rc >= R_GRIGORIEFF:
        raise DomainError(f"r_c={rc} >= 1+sqrt(2): the bound is vacuous")
    if profile.n1_count > 0 or profile.r_max > R_S1:
        raise DomainError("ratios above (3+sqrt(17))/2 present; the bound does not apply")
    head = (rh * rh / (1.0 + 2.0 * rh)) ** profile.n0_count if profile.n0_count else 1.0
    return head * (1.0 + 2.0 * rc) / (1.0 + 2.0 * rc - rc * rc)


def doc_tail_sum(kernels: Bdf2Kernels, j: int, n: int) -> float:
    """``sum_{k=j}^{n} hat-theta^{(k)}_{k-j}``."""
    _check_pair(kernels, n, j)
    total = 1.0
    acc = 1.0
    for i in range(j + 1, n + 1):
        acc *= kernels.factor[i - 1]
        total += acc
    return total


def doc_tail_sums(kernels: Bdf2Kernels, n: int) -> np.ndarray:
    """``out[j-1] = doc_tail_sum(kernels, j, n)`` for all ``j = 1..n`` in O(n)."""
    kernels.check_level(n)
    out = np.empty(n)
    out[n - 1] = 1.0
    for j in range(n - 1, 0, -1):
        out[j - 1] = 1.0 + kernels.factor[j] * out[j]
    return out


def write_kernel_csv(kernels: Bdf2Kernels, first: int, last: int, path) -> None:
    """Dump ``n,k,b0,b1,theta,theta_hat`` for levels ``first..last``.

    ``b0`` and ``b1`` are the kernels of level ``n``; ``theta`` and
    ``theta_hat`` are the DOC entries ``theta^{(n)}_{n-k}``.
    """
    with open(path, "w", newline="") as fh:
        write_kernel_rows(kernels, first, last, csv.writer(fh))


def write_kernel_rows(kernels: Bdf2Kernels, first: int, last: int, writer) -> None:
    writer.writerow(["n", "k", "b0", "b1", "theta", "theta_hat"])
    for n, row in doc_table(kernels, first, last).items():
        hat = theta_hat_row(kernels, n)
        for k in range(1, n + 1):
            writer.writerow([n, k, repr(float(kernels.b0[n - 1])),
                             repr(float(kernels.b1[n - 1])),
                             repr(float(row[k - 1])), repr(float(hat[k - 1]))])
