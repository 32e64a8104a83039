"""Variable-step BDF2 marching for ``D2 u^n = A u^n + f^n`` with runtime monitors."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument, NumericalFailure, PreconditionError, StateError
from .kernels import Bdf2Kernels, build_bdf2_kernels
from .mesh import TimeMesh
from .spatial import SolveInfo

log = logging.getLogger(__name__)

STARTING_SCHEMES = ("bdf1", "exact", "trapezoid")

# The kinetic weight of E^N needs r_{N+1}, which the mesh does not define.
# Any value in (0, (3+sqrt(17))/2] keeps the energy law valid; we continue
# with an equal step.
FINAL_RATIO = 1.0

MONOTONE_RTOL = 1e-10


@dataclass(frozen=True)
class Bdf2Config:
    starting_scheme: str = "bdf1"
    kappa_star: float = 0.0
    enforce_tau_gate: bool | None = None  # None: on iff kappa_star > 0
    monitor_energy: bool = True
    monitor_l2: bool = True

    def __post_init__(self):
        if self.starting_scheme not in STARTING_SCHEMES:
            raise InvalidArgument(
                f"unknown starting scheme {self.starting_scheme!r}; pick one of {STARTING_SCHEMES}")
        if self.kappa_star < 0:
            raise InvalidArgument("kappa_star must be nonnegative")

    @property
    def tau_gate_on(self) -> bool:
        if self.enforce_tau_gate is None:
            return self.kappa_star > 0
        return self.enforce_tau_gate


@dataclass
class StepRecord:
    n: int
    t: float
    tau: float
    r: float
    l2: float
    h1: float
    energy: float
    d_energy: float
    f_norm: float
    work: float  # 2 <f^n, u^n - u^{n-1}>
    iterations: int


@dataclass
class SolveTrace:
    records: list[StepRecord] = field(default_factory=list)
    monitor_energy: bool = True
    monitor_l2: bool = True

    @property
    def energy_monotone(self) -> bool:
        if not self.monitor_energy:
            raise StateError("energy monitor disabled")
        e = np.array([r.energy for r in self.records])
        return bool(np.all(e[1:] <= e[:-1] + MONOTONE_RTOL * np.abs(e[:-1])))

    @property
    def l2_monotone(self) -> bool:
        if not self.monitor_l2:
            raise StateError("L2 monitor disabled")
        a = self.l2_norms()
        return bool(np.all(a[1:] <= a[:-1] * (1.0 + MONOTONE_RTOL)))

    def l2_norms(self) -> np.ndarray:
        return np.array([r.l2 for r in self.records])

    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def forcing_norms(self) -> np.ndarray:
        return np.array([r.f_norm for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.write_rows(csv.writer(fh))

    def write_rows(self, writer) -> None:
        writer.writerow(["n", "t_n", "tau_n", "r_n", "l2_norm", "h1_semi", "energy", "d_energy"])
        for r in self.records:
            writer.writerow([r.n] + [repr(float(v)) for v in
                                     (r.t, r.tau, r.r, r.l2, r.h1, r.energy, r.d_energy)])


def bdf2_apply(kernels: Bdf2Kernels, levels: Sequence, n: int):
    """``D2 v^n`` from the trailing history ``levels = [..., v^{n-2}, v^{n-1}, v^n]``.

    Level 1 uses the BDF1 quotient.
    """
    kernels.check_level(n)
    need = 2 if n == 1 else 3
    if len(levels) < need:
        raise InvalidArgument(f"D2 at level {n} needs {need} history values, got {len(levels)}")
    if n == 1:
        v0, v1 = levels[-2], levels[-1]
        return kernels.b0[0] * (v1 - v0)
    v0, v1, v2 = levels[-3], levels[-2], levels[-1]
    return kernels.b0[n - 1] * (v2 - v1) + kernels.b1[n - 1] * (v1 - v0)


def _sample(op, f, t):
    if f is None:
        return op.zeros()
    return op.sample(f, t)


def first_step(scheme: str, op, mesh: TimeMesh, u0, f=None, exact=None, info=None):
    """Compute ``u^1`` with the requested starting scheme."""
    tau1 = float(mesh.tau[0])
    t1 = float(mesh.t[1])
    if scheme == "bdf1":
        return op.shifted_solve(1.0 / tau1, u0 / tau1 + _sample(op, f, t1), x0=u0, info=info)
    if scheme == "trapezoid":
        rhs = 2.0 * u0 / tau1 + op.apply(u0) + _sample(op, f, 0.0) + _sample(op, f, t1)
        return op.shifted_solve(2.0 / tau1, rhs, x0=u0, info=info)
    if scheme == "exact":
        if exact is None:
            raise InvalidArgument("exact-first-step needs a reference solution")
        if info is not None:
            info.iterations = 0
        return op.sample(exact, t1)
    raise InvalidArgument(f"unknown starting scheme {scheme!r}")


def march(op, mesh: TimeMesh, config: Bdf2Config, u0, f=None, exact=None):
    """Advance ``u0`` over ``mesh``; return ``(u_N, trace)``.

    ``f`` and ``exact`` are callables sampled through ``op.sample``
    (``func(t, X, Y)`` on grids, ``func(t)`` for scalars).
    """
    if config.tau_gate_on and config.kappa_star > 0:
        gate = 1.0 / (4.0 * config.kappa_star)
        if mesh.tau_max > gate:
            raise PreconditionError(
                f"max step {mesh.tau_max:.6g} exceeds 1/(4 kappa*) = {gate:.6g}")
    kern = build_bdf2_kernels(mesh)
    N = mesh.n_steps
    ratios = np.concatenate(([np.nan], mesh.ratios, [FINAL_RATIO]))  # ratios[k-1] = r_k

    trace = SolveTrace(monitor_energy=config.monitor_energy, monitor_l2=config.monitor_l2)
    info = SolveInfo()

    def record(n, u_new, u_old, fn, iterations):
        l2 = h1 = energy = d_energy = work = f_norm = math.nan
        if config.monitor_l2 or config.monitor_energy:
            l2, h1 = op.norms(u_new)
            f_norm = op.norm(fn)
        if config.monitor_energy:
            energy = op.energy(u_new)
            if n >= 1:
                diff = u_new - u_old
                r_next = ratios[n]
                energy += r_next / (1.0 + r_next) * op.inner(diff, diff) / mesh.tau[n - 1]
                d_energy = energy - trace.records[-1].energy
                work = 2.0 * op.inner(fn, diff)
        trace.records.append(StepRecord(
            n=n, t=float(mesh.t[n]), tau=float(mesh.tau[n - 1]) if n else 0.0,
            r=float(ratios[n - 1]) if n >= 2 else math.nan,
            l2=l2, h1=h1, energy=energy, d_energy=d_energy, f_norm=f_norm,
            work=work, iterations=iterations))

    u_prev = None
    u = np.array(u0, copy=True) if np.ndim(u0) else u0
    record(0, u, None, _sample(op, f, 0.0), 0)

    u_next = first_step(config.starting_scheme, op, mesh, u, f, exact, info=info)
    record(1, u_next, u, _sample(op, f, float(mesh.t[1])), info.iterations)
    u_prev, u = u, u_next

    for n in range(2, N + 1):
        b0 = kern.b0[n - 1]
        b1 = kern.b1[n - 1]
        fn = _sample(op, f, float(mesh.t[n]))
        rhs = b0 * u - b1 * (u - u_prev) + fn
        u_next = op.shifted_solve(b0, rhs, x0=u, info=info)
        record(n, u_next, u, fn, info.iterations)
        u_prev, u = u, u_next
    log.debug("march: N=%d scheme=%s final l2=%g", N, config.starting_scheme, trace.records[-1].l2)
    return u, trace


def energy_series(trace: SolveTrace) -> tuple[np.ndarray, np.ndarray]:
    """Energies ``E^k`` (k = 0..N) and differences ``E^k - E^{k-1}`` (k = 1..N)."""
    if not trace.monitor_energy:
        raise StateError("trace was produced with the energy monitor disabled")
    e = np.array([r.energy for r in trace.records])
    return e, np.diff(e)


def energy_law_defect(trace: SolveTrace) -> np.ndarray:
    """``(E^k - E^{k-1}) - 2<f^k, u^k - u^{k-1}>`` for k = 1..N; should be <= 0."""
    _, de = energy_series(trace)
    work = np.array([r.work for r in trace.records[1:]])
    return de - work


def l2_stability_bound(trace: SolveTrace) -> np.ndarray:
    """``||u^0|| + 2 t_n max_{1<=j<=n} ||f^j||`` for n = 0..N."""
    fmax = np.maximum.accumulate(np.concatenate(([0.0], trace.forcing_norms()[1:])))
    return trace.records[0].l2 + 2.0 * trace.times() * fmax


def gronwall_bound(trace: SolveTrace, kappa_star: float) -> np.ndarray:
    """``2 exp(4 kappa* t_{n-1}) (||u^0|| + 2 t_n max_j ||f^j||)`` for n = 1..N."""
    t = trace.times()
    return 2.0 * np.exp(4.0 * kappa_star * t[:-1]) * l2_stability_bound(trace)[1:]


def dahlquist_march(lam: complex, mesh: TimeMesh, y0: complex = 1.0) -> np.ndarray:
    """``|y^n|``, n = 0..N, for BDF2 (BDF1 first step) applied to ``y' = lam y``."""
    kern = build_bdf2_kernels(mesh)
    N = mesh.n_steps
    y = np.empty(N + 1, dtype=complex)
    y[0] = y0
    y[1] = kern.b0[0] * y[0] / (kern.b0[0] - lam)
    for n in range(2, N + 1):
        b0, b1 = kern.b0[n - 1], kern.b1[n - 1]
        y[n] = ((b0 - b1) * y[n - 1] + b1 * y[n - 2]) / (b0 - lam)
    return np.abs(y)


def _newton(residual, dres, x0: float, tol: float = 1e-13, max_iter: int = 50) -> float:
    x = x0
    fx = residual(x)
    for _ in range(max_iter):
        if abs(fx) <= tol * max(1.0, abs(x)):
            return x
        d = dres(x)
        if d == 0.0:
            break
        step = fx / d
        lam = 1.0
        while True:
            xn = x - lam * step
            fn = residual(xn)
            if abs(fn) < abs(fx) or lam < 1e-8:
                break
            lam *= 0.5
        if abs(xn - x) <= tol * max(1.0, abs(x)) and abs(fn) <= abs(fx):
            return xn
        x, fx = xn, fn
    if abs(fx) <= 1e3 * tol * max(1.0, abs(x)):
        return x
    raise NumericalFailure(f"Newton did not converge (residual {fx:.3e})")


def bdf2_scalar_nonlinear(g, mesh: TimeMesh, y0: float, perturb=None, dg=None) -> np.ndarray:
    """BDF2 trajectory of ``D2 y^n = g(t_n, y^n) + perturb[n-1]``."""
    kern = build_bdf2_kernels(mesh)
    N = mesh.n_steps
    if dg is None:
        def dg(t, y, h=1e-7):
            return (g(t, y + h) - g(t, y - h)) / (2 * h)
    eps = np.zeros(N) if perturb is None else np.asarray(perturb, dtype=float)
    y = np.empty(N + 1)
    y[0] = y0
    for n in range(1, N + 1):
        t = float(mesh.t[n])
        b0 = kern.b0[n - 1]
        if n == 1:
            rhs = b0 * y[0]
        else:
            b1 = kern.b1[n - 1]
            rhs = b0 * y[n - 1] - b1 * (y[n - 1] - y[n - 2])
        rhs += eps[n - 1]
        y[n] = _newton(lambda v: b0 * v - g(t, v) - rhs,
                       lambda v: b0 - dg(t, v), y[n - 1])
    return y


def zero_stability_probe(g, lipschitz: float, mesh: TimeMesh, y0: float, y0_perturbed: float,
                         eps, dg=None) -> float:
    """Worst observed ratio of the trajectory gap to the zero-stability bound.

    The bound is ``2 exp(4 L t_{n-1}) (|y0 - ybar0| + 2 t_n max_{j<=n} |eps_j|)``.
    """
    if mesh.tau_max > 1.0 / (4.0 * lipschitz):
        raise PreconditionError(f"max step {mesh.tau_max:.6g} exceeds 1/(4 L_g)")
    y = bdf2_scalar_nonlinear(g, mesh, y0, None, dg)
    yb = bdf2_scalar_nonlinear(g, mesh, y0_perturbed, eps, dg)
    gap = np.abs(y - yb)[1:]
    emax = np.maximum.accumulate(np.abs(np.asarray(eps, dtype=float)))
    bound = 2.0 * np.exp(4.0 * lipschitz * mesh.t[:-1]) * (abs(y0 - y0_perturbed) + 2.0 * mesh.t[1:] * emax)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(gap == 0.0, 0.0, gap / bound)
    return float(np.max(ratio)) if ratio.size else 0.0


@dataclass(frozen=True)
class ConsistencyReport:
    eta_norms: np.ndarray       # ||eta^j||, j = 1..N
    weighted_sums: np.ndarray   # sum_{k<=n} sum_{j<=k} theta^{(k)}_{k-j} ||eta^j||, n = 1..N

    @property
    def global_sum(self) -> float:
        return float(self.weighted_sums[-1])


def _norm_fn(op):
    if op is None:
        return lambda v: float(np.abs(v))
    return op.norm


def consistency_errors(mesh: TimeMesh, exact: Callable, exact_dt: Callable, op=None) -> ConsistencyReport:
    """Local errors ``eta^j = D2 u(t_j) - u'(t_j)`` on exact samples and their DOC-weighted sums.

    Without ``op`` the callables are scalar functions of ``t``; otherwise they
    are sampled on the operator grid.
    """
    kern = build_bdf2_kernels(mesh)
    N = mesh.n_steps
    norm = _norm_fn(op)

    def samp(func, t):
        return func(t) if op is None else op.sample(func, t)

    u = [samp(exact, float(tk)) for tk in mesh.t]
    eta = np.empty(N)
    for n in range(1, N + 1):
        hist = u[max(0, n - 2): n + 1]
        eta[n - 1] = norm(bdf2_apply(kern, hist, n) - samp(exact_dt, float(mesh.t[n])))
    # g_n = sum_j hat-theta^{(n)}_{n-j} ||eta^j|| / b0^{(j)} obeys g_n = f_n g_{n-1} + ||eta^n|| / b0^{(n)}
    sums = np.empty(N)
    g = 0.0
    total = 0.0
    for n in range(1, N + 1):
        g = (kern.factor[n - 1] * g if n >= 2 else 0.0) + eta[n - 1] / kern.b0[n - 1]
        total += g
        sums[n - 1] = total
    return ConsistencyReport(eta_norms=eta, weighted_sums=sums)


def _trapezoid_integral(fun, a: float, b: float, pieces: int) -> float:
    s = np.linspace(a, b, pieces + 1)
    v = np.array([fun(float(x)) for x in s])
    return float((b - a) / pieces * (v.sum() - 0.5 * (v[0] + v[-1])))


def consistency_bound(mesh: TimeMesh, d2_norm: Callable, d3_norm: Callable, refine: int = 10) -> np.ndarray:
    """Upper bound on the weighted consistency sums, for n = 1..N.

    ``tau_1 sum_k hat-theta^{(k)}_{k-1} int_0^{t_1} ||u_tt||
    + 3/2 sum_j tau_j^2 sum_{k>=j} hat-theta^{(k)}_{k-j} int_{t_{j-1}}^{t_j} ||u_ttt||``,
    with trapezoid quadrature using ``refine`` pieces per step.
    """
    kern = build_bdf2_kernels(mesh)
    N = mesh.n_steps
    tau = mesh.tau
    g2 = _trapezoid_integral(d2_norm, 0.0, float(mesh.t[1]), refine)
    g3 = np.array([_trapezoid_integral(d3_norm, float(mesh.t[j - 1]), float(mesh.t[j]), refine)
                   for j in range(1, N + 1)])
    out = np.empty(N)
    first = 0.0   # hat-theta^{(n)}_{n-1}
    h = 0.0       # sum_j tau_j^2 G3_j hat-theta^{(n)}_{n-j}
    total = 0.0
    for n in range(1, N + 1):
        f = kern.factor[n - 1] if n >= 2 else 0.0
        first = 1.0 if n == 1 else f * first
        h = f * h + tau[n - 1] ** 2 * g3[n - 1]
        total += tau[0] * first * g2 + 1.5 * h
        out[n - 1] = total
    return out
