"""Convergence studies and randomized stability suites for the BDF2 marcher."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels as K
from .errors import InvalidArgument
from .integrator import (Bdf2Config, consistency_bound, consistency_errors, dahlquist_march,
                         gronwall_bound, march, zero_stability_probe)
from .mesh import (R_S1, TimeMesh, capped_random_mesh, geometric_mesh, random_mesh,
                   ratio_profile, uniform_mesh)
from .rng import substream_seed, uniform_open
from .spatial import FdDirichletOperator, SpectralOperator

log = logging.getLogger(__name__)

MESH_FAMILIES = ("random", "capped-random", "uniform", "geometric")
TWO_PI = 2.0 * math.pi


# -- the manufactured heat problem: u = exp(-t) sin(2 pi x) cos(2 pi y) -------

def heat_mode(t, X, Y):
    return math.exp(-t) * np.sin(TWO_PI * X) * np.cos(TWO_PI * Y)


def heat_mode_dt(t, X, Y):
    return -heat_mode(t, X, Y)


def heat_forcing(epsilon: float, kappa: float = 0.0):
    """``f = u_t - eps*Laplace(u) - kappa*u`` for the single-mode solution."""
    c = -1.0 + 2.0 * TWO_PI**2 * epsilon - kappa

    def f(t, X, Y):
        return c * heat_mode(t, X, Y)
    return f


def initial_mode(X, Y):
    return np.sin(TWO_PI * X) * np.cos(TWO_PI * Y)


# -- configuration and results -------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    epsilon: float = 1.0
    T: float = 1.0
    N_list: tuple[int, ...] = (64, 128, 256, 512, 1024)
    seed: int = 0
    mesh_family: str = "random"
    starting_scheme: str = "bdf1"
    M: int = 32
    geometric_ratio: float = 1.5
    r_cap: float = R_S1

    def __post_init__(self):
        if self.mesh_family not in MESH_FAMILIES:
            raise InvalidArgument(f"mesh family must be one of {MESH_FAMILIES}")
        ns = list(self.N_list)
        if any(b != 2 * a for a, b in zip(ns, ns[1:])):
            raise InvalidArgument("N_list must double at every entry")


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    e_N: float
    tau_max: float
    order: float | None
    r_max: float
    n1: int


def make_mesh(family: str, T: float, N: int, seed: int = 0, *, r_cap: float = R_S1,
              ratio: float = 1.5) -> TimeMesh:
    """Mesh of the given family; random draws for each ``N`` use an independent substream."""
    if family == "uniform":
        return uniform_mesh(T, N)
    if family == "geometric":
        return geometric_mesh(T, N, ratio)
    sub = substream_seed(seed, N)
    if family == "random":
        return random_mesh(T, N, sub)
    if family == "capped-random":
        return capped_random_mesh(T, N, sub, r_cap)
    raise InvalidArgument(f"unknown mesh family {family!r}")


def solve_heat(epsilon: float, mesh: TimeMesh, M: int = 32, starting_scheme: str = "bdf1",
               kappa: float = 0.0, forced: bool = True):
    """Run the manufactured problem; return ``(u_N, trace, op, error)``."""
    op = SpectralOperator(M, epsilon, kappa)
    u0 = op.sample(lambda t, X, Y: initial_mode(X, Y), 0.0)
    f = heat_forcing(epsilon, kappa) if forced else None
    cfg = Bdf2Config(starting_scheme=starting_scheme)
    uN, trace = march(op, mesh, cfg, u0, f=f, exact=heat_mode if forced else None)
    err = op.norm(uN - op.sample(heat_mode, mesh.final_time)) if forced else math.nan
    return uN, trace, op, err


def run_convergence(config: ExperimentConfig) -> list[ConvergenceRow]:
    rows: list[ConvergenceRow] = []
    prev = None
    for N in config.N_list:
        mesh = make_mesh(config.mesh_family, config.T, N, config.seed,
                         r_cap=config.r_cap, ratio=config.geometric_ratio)
        _, _, _, err = solve_heat(config.epsilon, mesh, config.M, config.starting_scheme)
        prof = ratio_profile(mesh)
        order = math.log2(prev / err) if prev is not None else None
        rows.append(ConvergenceRow(N=N, e_N=err, tau_max=mesh.tau_max, order=order,
                                   r_max=prof.r_max, n1=prof.n1_count))
        log.info("N=%d e=%.3e order=%s", N, err, order)
        prev = err
    return rows


def fitted_order(rows: Sequence[ConvergenceRow]) -> float:
    """Least-squares slope of ``-log2 e(N)`` against ``log2 N``."""
    x = np.log2([r.N for r in rows])
    y = np.log2([r.e_N for r in rows])
    return float(-np.polyfit(x, y, 1)[0])


# -- stability suites ------------------------------------------------------------

@dataclass
class SuiteEntry:
    name: str
    cases: int
    passed: bool
    worst: float
    limit: float
    informational: bool = False
    note: str = ""


@dataclass
class StabilityReport:
    seed: int
    entries: list[SuiteEntry] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(e.passed for e in self.entries if not e.informational)


DEFAULT_COUNTS = {
    "doc_identities": 20,
    "psd_s1": 100,
    "energy_l2": 10,
    "a_stability": 100,
    "zero_stability": 20,
    "gronwall": 5,
    "consistency": 10,
    "psd_ungated": 50,
}

_S1_MESH_KEY = 1
_UNGATED_KEY = 2


def s1_mesh(seed: int, case: int, N: int, T: float = 1.0) -> TimeMesh:
    """Capped random mesh number ``case`` with every ratio at most (3+sqrt(17))/2."""
    return capped_random_mesh(T, N, substream_seed(seed, _S1_MESH_KEY, case, N), R_S1)


def _entry(name, cases, values, limit, *, informational=False, note=""):
    """Pass iff max(values) <= limit."""
    worst = max(values) if values else -math.inf
    return SuiteEntry(name, cases, bool(worst <= limit), float(worst), float(limit),
                      informational, note)


def suite_doc_identities(seed: int, cases: int, N: int = 200) -> list[SuiteEntry]:
    meshes = [uniform_mesh(1.0, N)] + [geometric_mesh(1.0, N, q) for q in (0.5, 1.5, 3.0, 3.5)]
    meshes += [random_mesh(1.0, N, substream_seed(seed, 3, c)) for c in range(cases)]
    orth, orth_abs, rows, rec = [], [], [], []
    for mesh in meshes:
        kern = K.build_bdf2_kernels(mesh)
        for n in range(1, N + 1):
            explicit = kern.doc_row(n)
            recursive = K.doc_recursive(kern, n)
            orth.append(K.orthogonality_defect(kern, n, explicit, scaled=True))
            orth_abs.append(K.orthogonality_defect(kern, n, explicit))
            rows.append(abs(explicit.sum() - mesh.tau[n - 1]) / mesh.tau[n - 1])
            ok = np.abs(explicit) > 1e-280
            rec.append(float(np.max(np.abs(recursive[ok] - explicit[ok]) / np.abs(explicit[ok]))))
    n = len(meshes)
    return [_entry("doc_orthogonality_scaled", n, orth, 1e-12),
            _entry("doc_orthogonality_abs", n, orth_abs, 1e-12, informational=True,
                   note="absolute residual grows with theta_hat when ratios exceed 1+sqrt(2)"),
            _entry("doc_row_sum", n, rows, 1e-12),
            _entry("doc_recursive_vs_explicit", n, rec, 1e-13)]


def suite_psd(seed: int, cases: int, vectors: int = 100, max_N: int = 64, r_cap: float = R_S1,
              key: int = _S1_MESH_KEY, informational: bool = False) -> list[SuiteEntry]:
    qf, eig = [], []
    for c in range(cases):
        N = 2 + int(uniform_open(substream_seed(seed, key, c), 1)[0] * (max_N - 1))
        mesh = capped_random_mesh(1.0, N, substream_seed(seed, key, c, N), r_cap)
        kern = K.build_bdf2_kernels(mesh)
        scale = float(kern.b0.max())
        if not informational:
            W = 2.0 * uniform_open(substream_seed(seed, key, c, 7), vectors * N).reshape(vectors, N) - 1.0
            for w in W:
                qf.append(-K.quadratic_form(kern, w) / (scale * float(w @ w)))
        eig.append(-K.psd_min_eigenvalue(kern, N) / scale)
    tag = "s1" if not informational else f"ungated(cap={r_cap:g})"
    out = []
    if qf:
        out.append(_entry(f"psd_quadratic_form_{tag}", cases, qf, 1e-10))
    out.append(_entry(f"psd_min_eigenvalue_{tag}", cases, eig, 1e-10, informational=informational,
                      note="negative eigenvalues here do not contradict S1 sufficiency"
                      if informational else ""))
    return out


def suite_energy_l2(seed: int, cases: int, N: int = 128, M: int = 32,
                    epsilons=(1.0, 0.1)) -> list[SuiteEntry]:
    energy, l2_bound, l2_step = [], [], []
    for eps in epsilons:
        for c in range(cases):
            mesh = s1_mesh(seed, c, N)
            _, trace, _, _ = solve_heat(eps, mesh, M, forced=False)
            e = np.array([r.energy for r in trace.records])
            a = trace.l2_norms()
            energy.append(float(np.max((e[1:] - e[:-1]) / np.abs(e[:-1]))))
            l2_bound.append(float(np.max(a[1:] / a[0])) - 1.0)
            l2_step.append(float(np.max(a[1:] / a[:-1])) - 1.0)
    n = len(epsilons) * cases
    return [_entry("energy_nonincreasing", n, energy, 1e-10),
            _entry("l2_bounded_by_initial", n, l2_bound, 1e-10),
            _entry("l2_stepwise_nonincreasing", n, l2_step, 1e-10, informational=True,
                   note="not implied by the stability theorem; BDF2 oscillates for lambda*tau < -1/2")]


A_STABILITY_LAMBDAS = (-1.0, -100.0, 1j, -1.0 + 10j)


def suite_a_stability(seed: int, cases: int, N: int = 64) -> list[SuiteEntry]:
    growth = []
    for c in range(cases):
        mesh = s1_mesh(seed, c, N)
        for lam in A_STABILITY_LAMBDAS:
            growth.append(float(np.max(dahlquist_march(lam, mesh))) - 1.0)
    stiff = float(dahlquist_march(-1e6, uniform_mesh(10.0, 10))[-1])
    return [_entry("a_stability", cases, growth, 1e-12),
            _entry("l_stability_probe", 1, [stiff], 1e-20)]


def suite_zero_stability(seed: int, cases: int, N: int = 64) -> list[SuiteEntry]:
    ratios = []
    for c in range(cases):
        mesh = s1_mesh(seed, c, N)
        eps = 1e-3 * (2.0 * uniform_open(substream_seed(seed, 5, c), N) - 1.0)
        dy0 = 1e-3 * (2.0 * uniform_open(substream_seed(seed, 6, c), 1)[0] - 1.0)
        ratios.append(zero_stability_probe(lambda t, y: math.sin(y), 1.0, mesh, 0.5, 0.5 + dy0, eps,
                                           dg=lambda t, y: math.cos(y)))
    return [_entry("zero_stability", cases, [r - 1.0 for r in ratios], 1e-8)]


def gronwall_case(mesh: TimeMesh, M: int = 16, kappa_star: float = 1.0):
    """FD Dirichlet run with ``kappa = kappa* cos(pi x) cos(pi y)``; returns (norms, bound)."""
    op = FdDirichletOperator(M, 1.0, lambda X, Y: kappa_star * np.cos(np.pi * X) * np.cos(np.pi * Y),
                             kappa_star)
    X, Y = op.grid()
    u0 = np.sin(np.pi * X / 2) * np.sin(np.pi * Y / 2) + 0.5 * np.sin(np.pi * X) * np.sin(1.5 * np.pi * Y)
    f = lambda t, X, Y: np.cos(3 * t) * np.sin(np.pi * X) * np.sin(np.pi * Y)  # noqa: E731
    cfg = Bdf2Config(kappa_star=kappa_star)
    _, trace = march(op, mesh, cfg, u0, f=f)
    return trace.l2_norms()[1:], gronwall_bound(trace, kappa_star)


def suite_gronwall(seed: int, cases: int, N: int = 64) -> list[SuiteEntry]:
    ratios = []
    for c in range(cases):
        norms, bound = gronwall_case(s1_mesh(seed, c, N))
        ratios.append(float(np.max(norms / bound)) - 1.0)
    return [_entry("gronwall_priori_bound", cases, ratios, 1e-8)]


def consistency_case(mesh: TimeMesh, M: int = 8):
    """Weighted eta sums and the bound assembled from hat-theta tail sums, both for n = 1..N."""
    op = SpectralOperator(M, 1.0)
    rep = consistency_errors(mesh, heat_mode, heat_mode_dt, op)
    mode_norm = op.norm(op.sample(lambda t, X, Y: initial_mode(X, Y), 0.0))
    decay = lambda t: math.exp(-t) * mode_norm  # noqa: E731  (|u_tt| = |u_ttt| = e^-t |mode|)
    return rep.weighted_sums, consistency_bound(mesh, decay, decay)


def suite_consistency(seed: int, cases: int, N: int = 128) -> list[SuiteEntry]:
    ratios = []
    for c in range(cases):
        lhs, rhs = consistency_case(s1_mesh(seed, c, N))
        ratios.append(float(np.max(lhs / rhs)))
    return [_entry("consistency_bound", cases, ratios, 1.05)]


SUITES = {
    "doc_identities": suite_doc_identities,
    "psd_s1": suite_psd,
    "energy_l2": suite_energy_l2,
    "a_stability": suite_a_stability,
    "zero_stability": suite_zero_stability,
    "gronwall": suite_gronwall,
    "consistency": suite_consistency,
    "psd_ungated": lambda seed, cases: suite_psd(seed, cases, r_cap=10.0, key=_UNGATED_KEY,
                                                 informational=True),
}


def run_stability_suite(seed: int = 0, counts: dict[str, int] | None = None) -> StabilityReport:
    """Run each randomized suite ``counts[name]`` times; zero or missing counts skip a suite."""
    counts = DEFAULT_COUNTS if counts is None else counts
    report = StabilityReport(seed)
    for name, fn in SUITES.items():
        cases = counts.get(name, 0)
        if cases <= 0:
            continue
        log.info("suite %s: %d cases", name, cases)
        report.entries.extend(fn(seed, cases))
    return report


# -- output ----------------------------------------------------------------------

CONVERGENCE_HEADER = ["N", "e(N)", "tau", "Order", "max r_k", "N1"]
CONVERGENCE_FIELDS = ["N", "e_N", "tau_max", "order", "r_max", "n1"]
REPORT_FIELDS = ["name", "cases", "passed", "informational", "worst", "limit", "note"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _md_row(cells) -> str:
    return "| " + " | ".join(cells) + " |"


def render(obj, fmt: str, caption: str | None = None) -> str:
    """Serialize a convergence table (list of rows) or a stability report."""
    if isinstance(obj, StabilityReport):
        fields, rows = REPORT_FIELDS, [asdict(e) for e in obj.entries]
        header = fields
    else:
        fields, rows = CONVERGENCE_FIELDS, [asdict(r) for r in obj]
        header = CONVERGENCE_HEADER
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in fields])
        return buf.getvalue()
    if fmt in ("md", "markdown"):
        lines = [caption, ""] if caption else []
        lines.append(_md_row(header))
        lines.append(_md_row(["---"] * len(header)))
        for r in rows:
            if isinstance(obj, StabilityReport):
                cells = [r["name"], str(r["cases"]), "pass" if r["passed"] else "FAIL",
                         "yes" if r["informational"] else "no", f"{r['worst']:.3e}",
                         f"{r['limit']:.1e}", r["note"]]
            else:
                cells = [str(r["N"]), f"{r['e_N']:.2e}", f"{r['tau_max']:.2e}",
                         "--" if r["order"] is None else f"{r['order']:.2f}",
                         f"{r['r_max']:.2f}", str(r["n1"])]
            lines.append(_md_row(cells))
        return "\n".join(lines) + "\n"
    raise InvalidArgument(f"unknown format {fmt!r}")


def emit(obj, path, fmt: str = "csv", caption: str | None = None) -> None:
    Path(path).write_text(render(obj, fmt, caption))


def convergence_caption(config: ExperimentConfig) -> str:
    return (f"BDF2 on {config.mesh_family} meshes, eps={config.epsilon:g}, T={config.T:g}, "
            f"M={config.M}, start={config.starting_scheme}, splitmix64 seed={config.seed}. "
            "Random meshes are seeded draws, so compare orders and error magnitudes, "
            "not individual table values.")
