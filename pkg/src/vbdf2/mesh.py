"""Nonuniform time meshes, step-ratio profiles and ratio conditions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .rng import uniform_open

#: Positive root of 2 + 3r - r^2 = 0; the S1 step-ratio bound (~3.561).
R_S1 = (3.0 + math.sqrt(17.0)) / 2.0
#: Grigorieff's classical bound 1 + sqrt(2) (~2.414).
R_GRIGORIEFF = 1.0 + math.sqrt(2.0)


@dataclass(frozen=True)
class TimeMesh:
    """Time levels ``0 = t_0 < t_1 < ... < t_N = T``.

    ``tau[k-1]`` holds the step ``tau_k = t_k - t_{k-1}``.  Kernels are built
    from ``tau``, never from differences of ``t``.
    """

    t: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        tau = np.asarray(self.tau, dtype=float)
        if t.ndim != 1 or t.size < 2 or tau.size != t.size - 1:
            raise InvalidArgument("mesh needs at least two levels")
        if t[0] != 0.0:
            raise InvalidArgument("mesh must start at t_0 = 0")
        if not np.all(tau > 0.0):
            raise InvalidArgument("time steps must be positive")
        # steps are authoritative; levels may coincide in binary64 when a
        # step falls below an ulp of t (e.g. long geometric contractions)
        if not np.all(np.diff(t) >= 0.0):
            raise InvalidArgument("time levels must be increasing")
        t.setflags(write=False)
        tau.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "tau", tau)

    @classmethod
    def from_steps(cls, tau) -> "TimeMesh":
        tau = np.asarray(tau, dtype=float)
        if tau.ndim != 1 or tau.size == 0:
            raise InvalidArgument("need at least one step")
        if not np.all(tau > 0.0):
            raise InvalidArgument("all steps must be positive")
        return cls(np.concatenate(([0.0], np.cumsum(tau))), tau)

    @classmethod
    def from_levels(cls, t) -> "TimeMesh":
        t = np.asarray(t, dtype=float)
        return cls(t, np.diff(t))

    @property
    def n_steps(self) -> int:
        return self.tau.size

    @property
    def final_time(self) -> float:
        return float(self.t[-1])

    @property
    def tau_max(self) -> float:
        return float(self.tau.max())

    @property
    def ratios(self) -> np.ndarray:
        """``r_k = tau_k / tau_{k-1}`` for ``k = 2..N`` (length ``N-1``)."""
        return self.tau[1:] / self.tau[:-1]

    def ratio(self, k: int) -> float:
        if not 2 <= k <= self.n_steps:
            raise InvalidArgument(f"ratio index {k} outside 2..{self.n_steps}")
        return float(self.tau[k - 1] / self.tau[k - 2])

    def scaled(self, factor: float) -> "TimeMesh":
        return TimeMesh.from_steps(self.tau * factor)


@dataclass(frozen=True)
class RatioProfile:
    r: np.ndarray
    r_max: float
    n0_count: int
    n1_count: int
    r_c: float
    r_hat_c: float

    @property
    def satisfies_s1(self) -> bool:
        return check_s1(self)


def _check_counts(T: float, N: int) -> None:
    if not (isinstance(N, (int, np.integer)) and N >= 1):
        raise InvalidArgument(f"N must be a positive integer, got {N!r}")
    if not T > 0.0:
        raise InvalidArgument(f"T must be positive, got {T!r}")


def uniform_mesh(T: float, N: int) -> TimeMesh:
    _check_counts(T, N)
    # equal steps exactly, so every ratio is 1.0
    return TimeMesh(np.linspace(0.0, T, N + 1), np.full(N, T / N))


def geometric_mesh(T: float, N: int, ratio: float) -> TimeMesh:
    """Steps growing (or shrinking) by a fixed factor, scaled to total ``T``."""
    _check_counts(T, N)
    if not ratio > 0.0:
        raise InvalidArgument("ratio must be positive")
    # log-space keeps long geometric runs finite
    logs = np.arange(N) * math.log(ratio)
    raw = np.exp(logs - logs.max())
    return TimeMesh.from_steps(T * raw / raw.sum())


def _normalize(raw: np.ndarray, T: float) -> TimeMesh:
    tau = T * raw / raw.sum()
    t = np.concatenate(([0.0], np.cumsum(tau)))
    t[-1] = T
    return TimeMesh.from_levels(t)


def random_mesh(T: float, N: int, seed: int) -> TimeMesh:
    """Steps ``T * e_k / sum(e)`` with ``e_k`` uniform on (0, 1)."""
    _check_counts(T, N)
    return _normalize(uniform_open(seed, N), T)


def capped_random_mesh(T: float, N: int, seed: int, r_cap: float) -> TimeMesh:
    """Random mesh whose step ratios never exceed ``r_cap``.

    Raw uniform steps are swept forward with ``tau_k <- min(tau_k, r_cap*tau_{k-1})``.
    A single forward sweep already enforces the cap, and rescaling to the
    total ``T`` leaves ratios unchanged; the sweep is repeated (at most ten
    times) only to absorb rounding in the rescale.
    """
    _check_counts(T, N)
    if not r_cap >= 1e-3:
        raise InvalidArgument(f"r_cap must be at least 1e-3, got {r_cap!r}")
    raw = uniform_open(seed, N)
    for _ in range(10):
        clipped = False
        for k in range(1, N):
            lim = r_cap * raw[k - 1]
            if raw[k] > lim:
                raw[k] = lim
                clipped = True
        raw = raw / raw.sum()
        if not clipped:
            break
    tau = T * raw / raw.sum()
    # rescaling can nudge a capped ratio a few ulps over the cap
    for k in range(1, N):
        while tau[k] / tau[k - 1] > r_cap:
            tau[k] = np.nextafter(min(tau[k], r_cap * tau[k - 1]), 0.0)
    return TimeMesh.from_steps(tau)


def ratio_profile(mesh: TimeMesh) -> RatioProfile:
    r = mesh.ratios
    in_p = (r >= R_GRIGORIEFF) & (r <= R_S1)
    below = r[r < R_GRIGORIEFF]
    return RatioProfile(
        r=r,
        r_max=float(r.max()) if r.size else 1.0,
        n0_count=int(in_p.sum()),
        n1_count=int((r >= R_S1).sum()),
        r_c=float(below.max()) if below.size else 0.0,
        r_hat_c=float(r[in_p].max()) if in_p.any() else 0.0,
    )


def check_s1(profile: RatioProfile) -> bool:
    """True iff every ratio is at most (3+sqrt(17))/2.

    Sufficient for positive semi-definiteness of the BDF2 kernels, not
    necessary.
    """
    return bool(np.all(profile.r <= R_S1))


def gamma_n(profile: RatioProfile, n: int) -> float:
    """Becker's quantity ``sum_{k=2}^{n-2} max(0, r_k - r_{k+2})``."""
    N = profile.r.size + 1
    if not 1 <= n <= N:
        raise InvalidArgument(f"n={n} outside 1..{N}")
    if n < 4:
        return 0.0
    r = profile.r  # r[k-2] = r_k
    k = np.arange(2, n - 1)
    return float(np.maximum(0.0, r[k - 2] - r[k]).sum())


def write_mesh_csv(mesh: TimeMesh, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t_k"])
        for k, tk in enumerate(mesh.t):
            w.writerow([k, repr(float(tk))])


def read_mesh_csv(path) -> TimeMesh:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["k", "t_k"]:
        raise InvalidArgument(f"{path}: expected header 'k,t_k'")
    body = [r for r in rows[1:] if r]
    ks = [int(r[0]) for r in body]
    if ks != list(range(len(body))):
        raise InvalidArgument(f"{path}: levels must be numbered 0..N in order")
    return TimeMesh.from_levels([float(r[1]) for r in body])
