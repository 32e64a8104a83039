"""Spatial operators ``A = eps*Laplace + kappa`` for the BDF2 marcher.

Fields are plain numpy arrays (complex scalars for :class:`ScalarOperator`).
Every operator provides ``apply``, ``shifted_solve`` for ``(sigma I - A) u = rhs``,
the discrete ``inner`` product, ``norms`` and ``sample``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridMismatch, InvalidArgument, NumericalFailure

CG_RTOL = 1e-10


@dataclass
class SolveInfo:
    iterations: int = 0


class _Operator:
    def energy(self, u) -> float:
        """``-<A u, u>`` (equals ``eps |u|_1^2 + <-kappa u, u>``)."""
        return -self.inner(self.apply(u), u)

    def norm(self, u) -> float:
        return math.sqrt(max(self.inner(u, u), 0.0))


@dataclass(frozen=True)
class ScalarOperator(_Operator):
    """Multiplication by a (possibly complex) rate constant."""

    lam: complex

    shape = ()

    def zeros(self):
        return np.complex128(0.0)

    def apply(self, u):
        return self.lam * u

    def shifted_solve(self, sigma: float, rhs, x0=None, info: SolveInfo | None = None):
        d = sigma - self.lam
        if not (d.real if isinstance(d, complex) else d) > 0.0:
            raise DomainError(f"sigma - lambda = {d} is not in the right half plane")
        if info is not None:
            info.iterations = 0
        return rhs / d

    def inner(self, u, v) -> float:
        return float(np.real(np.conj(u) * v))

    def norms(self, u) -> tuple[float, float]:
        return float(abs(u)), 0.0

    def sample(self, func, t: float):
        return np.complex128(func(t))

    @property
    def kappa_max(self) -> float:
        return float(np.real(self.lam))


@dataclass(frozen=True)
class SpectralOperator(_Operator):
    """Fourier collocation on the periodic square ``(0, L)^2`` with constant kappa."""

    M: int
    epsilon: float
    kappa: float = 0.0
    L: float = 2.0

    def __post_init__(self):
        if self.M < 4 or self.M % 2:
            raise InvalidArgument(f"M must be even and >= 4, got {self.M}")
        if not self.epsilon > 0.0:
            raise InvalidArgument("epsilon must be positive")
        k = 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.L / self.M)
        kx, ky = np.meshgrid(k, k, indexing="ij")
        k2 = kx * kx + ky * ky
        object.__setattr__(self, "_k2", k2)
        object.__setattr__(self, "symbol", -self.epsilon * k2 + self.kappa)

    @property
    def shape(self):
        return (self.M, self.M)

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def kappa_max(self) -> float:
        return float(self.kappa)

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.M) * self.h
        return np.meshgrid(x, x, indexing="ij")

    def zeros(self):
        return np.zeros(self.shape)

    def _check(self, u):
        if np.shape(u) != self.shape:
            raise GridMismatch(f"field shape {np.shape(u)} != {self.shape}")

    def apply(self, u):
        self._check(u)
        return np.fft.ifft2(self.symbol * np.fft.fft2(u)).real

    def shifted_solve(self, sigma: float, rhs, x0=None, info: SolveInfo | None = None):
        self._check(rhs)
        if not sigma - self.kappa > 0.0:
            raise DomainError(f"sigma={sigma} <= kappa={self.kappa}: shifted operator indefinite")
        if info is not None:
            info.iterations = 0
        return np.fft.ifft2(np.fft.fft2(rhs) / (sigma - self.symbol)).real

    def inner(self, u, v) -> float:
        return float(self.h**2 * np.sum(u * v))

    def h1_semi(self, u) -> float:
        # Parseval form of the spectral gradient, consistent with ``apply``
        uh = np.fft.fft2(u)
        s = np.sum(self._k2 * np.abs(uh) ** 2) / self.M**2
        return math.sqrt(self.h**2 * s)

    def norms(self, u) -> tuple[float, float]:
        self._check(u)
        return self.norm(u), self.h1_semi(u)

    def sample(self, func, t: float):
        X, Y = self.grid()
        return np.broadcast_to(np.asarray(func(t, X, Y), dtype=float), self.shape).copy()


@dataclass(frozen=True)
class FdDirichletOperator(_Operator):
    """Five-point finite differences on the interior of ``(0, L)^2`` with ``u = 0`` on the boundary.

    ``kappa_field`` may be a scalar, an ``(M-1, M-1)`` array or a callable
    ``kappa(X, Y)``.
    """

    M: int
    epsilon: float
    kappa_field: object = 0.0
    kappa_star: float | None = None
    L: float = 2.0

    def __post_init__(self):
        if self.M < 3:
            raise InvalidArgument("M must be at least 3")
        if not self.epsilon > 0.0:
            raise InvalidArgument("epsilon must be positive")
        X, Y = self.grid()
        kap = self.kappa_field
        if callable(kap):
            kap = kap(X, Y)
        kap = np.broadcast_to(np.asarray(kap, dtype=float), self.shape).copy()
        kap.setflags(write=False)
        object.__setattr__(self, "kappa_values", kap)
        bound = float(np.max(np.abs(kap)))
        if self.kappa_star is None:
            object.__setattr__(self, "kappa_star", bound)
        elif bound > self.kappa_star * (1 + 1e-14):
            raise InvalidArgument(f"|kappa| reaches {bound} > kappa_star={self.kappa_star}")

    @property
    def shape(self):
        return (self.M - 1, self.M - 1)

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def kappa_max(self) -> float:
        return float(np.max(self.kappa_values))

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(1, self.M) * self.h
        return np.meshgrid(x, x, indexing="ij")

    def zeros(self):
        return np.zeros(self.shape)

    def _check(self, u):
        if np.shape(u) != self.shape:
            raise GridMismatch(f"field shape {np.shape(u)} != {self.shape}")

    def laplacian(self, u):
        p = np.pad(u, 1)
        return (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * u) / self.h**2

    def apply(self, u):
        self._check(u)
        return self.epsilon * self.laplacian(u) + self.kappa_values * u

    def shifted_solve(self, sigma: float, rhs, x0=None, info: SolveInfo | None = None):
        """Plain conjugate gradients on ``sigma I - A`` to relative residual 1e-10."""
        self._check(rhs)
        if not sigma - self.kappa_max > 0.0:
            raise DomainError(f"sigma={sigma} <= max kappa={self.kappa_max}: shifted operator indefinite")

        def op(v):
            return sigma * v - self.apply(v)

        x = np.zeros(self.shape) if x0 is None else np.array(x0, dtype=float)
        r = rhs - op(x)
        bnorm = np.linalg.norm(rhs)
        if bnorm == 0.0:
            if info is not None:
                info.iterations = 0
            return np.zeros(self.shape)
        p = r.copy()
        rr = float(np.sum(r * r))
        max_iter = 10 * self.M**2
        for it in range(max_iter + 1):
            if math.sqrt(rr) <= CG_RTOL * bnorm:
                if info is not None:
                    info.iterations = it
                return x
            Ap = op(p)
            alpha = rr / float(np.sum(p * Ap))
            x += alpha * p
            r -= alpha * Ap
            rr_new = float(np.sum(r * r))
            p = r + (rr_new / rr) * p
            rr = rr_new
        raise NumericalFailure(f"CG did not reach rtol {CG_RTOL} in {max_iter} iterations")

    def inner(self, u, v) -> float:
        return float(self.h**2 * np.sum(u * v))

    def h1_semi(self, u) -> float:
        # forward differences over every edge, boundary edges included,
        # so that h1^2 == <-laplacian u, u>
        p = np.pad(u, 1)
        dx = np.diff(p[:, 1:-1], axis=0) / self.h
        dy = np.diff(p[1:-1, :], axis=1) / self.h
        return math.sqrt(self.h**2 * (np.sum(dx * dx) + np.sum(dy * dy)))

    def norms(self, u) -> tuple[float, float]:
        self._check(u)
        return self.norm(u), self.h1_semi(u)

    def sample(self, func, t: float):
        X, Y = self.grid()
        return np.broadcast_to(np.asarray(func(t, X, Y), dtype=float), self.shape).copy()


def project_exact(op, t: float, func):
    """Sample ``func`` on the grid of ``op`` at time ``t``."""
    return op.sample(func, t)


def write_field_csv(u, path) -> None:
    """Row-major ``i,j,value`` snapshot."""
    u = np.asarray(u)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "value"])
        for (i, j), val in np.ndenumerate(u):
            w.writerow([i, j, repr(float(val))])


def read_field_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    i = np.array([int(r[0]) for r in rows])
    j = np.array([int(r[1]) for r in rows])
    out = np.zeros((i.max() + 1, j.max() + 1))
    out[i, j] = [float(r[2]) for r in rows]
    return out
