"""Independent oracles for the fluctuation engine.

None of these reuse the analytic Jacobian or the sweep kernel: the
Jacobian is differenced numerically, the covariance is integrated with
a dense inverse per frequency, and the Lyapunov side is a direct
Kronecker solve.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .fluctuation import (
    FluctuationSystem,
    UnstableDriftError,
    build_system,
    max_real_eigenvalue,
    stability_tolerance,
)
from .model import ModelParams, NumericalError, derive_rates
from .steadystate import collective_rhs

JACOBIAN_TOL = 1e-6
LYAPUNOV_TOL = 1e-3
SHOT_NOISE_TOL = 1e-3
GAUGE_TOL = 1e-10


def variable_scales(x: np.ndarray) -> np.ndarray:
    """Per-variable magnitude used for difference steps."""
    x = np.asarray(x)
    field_scale = max(1.0, float(np.max(np.abs(x[0:8]))))
    pol_scale = max(1.0, float(np.max(np.abs(x[8:20]))))
    pop_scale = max(1.0, float(np.max(np.abs(x[20:26]))))
    s = np.empty(26)
    s[0:8] = field_scale
    s[8:20] = pol_scale
    s[20:26] = pop_scale
    return s


def finite_difference_jacobian(x: np.ndarray, params: ModelParams, rel_step: float = 1e-6) -> np.ndarray:
    dr = derive_rates(params)
    x = np.asarray(x, complex)
    h = rel_step * variable_scales(x)
    J = np.empty((26, 26), complex)
    for j in range(26):
        e = np.zeros(26, complex)
        e[j] = h[j]
        J[:, j] = (collective_rhs(x + e, params, dr) - collective_rhs(x - e, params, dr)) / (2 * h[j])
    return J


@dataclass(frozen=True)
class JacobianResidual:
    max_relative: float
    frobenius_ratio: float

    def passed(self, tol: float = JACOBIAN_TOL) -> bool:
        return self.frobenius_ratio <= tol and self.max_relative <= tol


def compare_jacobians(D: np.ndarray, J_fd: np.ndarray, floor: float = 1e-12) -> JacobianResidual:
    scale = float(np.max(np.abs(J_fd)))
    mask = (np.abs(J_fd) > floor * scale) | (np.abs(D) > floor * scale)
    diff = np.abs(D - J_fd)
    denom = np.maximum(np.abs(J_fd), np.abs(D))
    max_rel = float(np.max(diff[mask] / denom[mask])) if mask.any() else 0.0
    frob = float(np.linalg.norm(D - J_fd) / max(np.linalg.norm(D), 1e-300))
    return JacobianResidual(max_rel, frob)


def jacobian_check(steady, params: ModelParams, D: np.ndarray | None = None) -> JacobianResidual:
    x = steady.to_vector()
    if D is None:
        from .fluctuation import build_drift
        D = build_drift(steady, params).D
    return compare_jacobians(np.asarray(D), finite_difference_jacobian(x, params))


def log_symmetric_grid(omega_max: float, n_points: int, omega_min: float | None = None):
    """Midpoints and weights of a log-spaced composite rule on [-omega_max, omega_max].

    A linear core covers |Omega| < omega_min, the tails are geometric.
    """
    if omega_min is None:
        omega_min = omega_max * 1e-9
    n_core = max(2, n_points // 10)
    n_tail = max(2, (n_points - 2 * n_core) // 2)
    core_edges = np.linspace(0.0, omega_min, n_core + 1)
    tail_edges = np.geomspace(omega_min, omega_max, n_tail + 1)
    edges = np.concatenate([core_edges, tail_edges[1:]])
    mids = 0.5 * (edges[1:] + edges[:-1])
    w = np.diff(edges)
    return np.concatenate([-mids[::-1], mids]), np.concatenate([w[::-1], w])


def quadrature_covariance(D: np.ndarray, Diff: np.ndarray, omega_max: float, n_points: int,
                          omega_min: float | None = None, chunk: int = 256) -> np.ndarray:
    """V = integral of S(Omega) dOmega / 2 pi over the symmetric grid."""
    n = D.shape[0]
    om, w = log_symmetric_grid(omega_max, n_points, omega_min)
    eye = np.eye(n)
    V = np.zeros((n, n), complex)
    for k in range(0, om.size, chunk):
        o = om[k:k + chunk]
        Mp = np.linalg.inv(-1j * o[:, None, None] * eye - D)
        Mm = np.linalg.inv(1j * o[:, None, None] * eye - D)
        S = Mp @ Diff @ np.swapaxes(Mm, 1, 2)
        V += np.tensordot(w[k:k + chunk], S, axes=1)
    return V / (2 * math.pi)


def lyapunov_direct(D: np.ndarray, Diff: np.ndarray) -> np.ndarray:
    """Solve D V + V D^T + Diff = 0 by vectorization (plain transpose, not adjoint)."""
    n = D.shape[0]
    eye = np.eye(n)
    K = np.kron(eye, D) + np.kron(D, eye)
    v = np.linalg.solve(K, -Diff.reshape(-1, order="F"))
    return v.reshape((n, n), order="F")


def lyapunov_residual(D: np.ndarray, Diff: np.ndarray, V: np.ndarray) -> float:
    return float(np.linalg.norm(D @ V + V @ D.T + Diff) / np.linalg.norm(Diff))


def lyapunov_check(D: np.ndarray, Diff: np.ndarray, omega_max: float = 1e6, n_points: int = 100_000,
                   *, allow_unstable: bool = False, omega_min: float | None = None) -> float:
    D = np.asarray(D, complex)
    Diff = np.asarray(Diff, complex)
    tol = stability_tolerance(D)
    if not allow_unstable:
        lam = max_real_eigenvalue(D)
        if lam.real > tol:
            raise UnstableDriftError(lam, tol)
    if omega_min is None:
        # the neutral phase mode is left out; its share of V grows as 1/omega_min
        ev = np.abs(np.linalg.eigvals(D))
        ev = ev[ev > tol]
        omega_min = 1e-3 * float(ev.min()) if ev.size else omega_max * 1e-9
    V = quadrature_covariance(D, Diff, omega_max, n_points, omega_min)
    return lyapunov_residual(D, Diff, V)


def shot_noise_deviation(system: FluctuationSystem, omega: float = 1e6, *, allow_unstable: bool = False) -> float:
    """max |C_xx - 1| at a single high frequency, by dense inverses."""
    D, Diff = system.D, system.Diff
    if not allow_unstable:
        lam = max_real_eigenvalue(D)
        if lam.real > stability_tolerance(D):
            raise UnstableDriftError(lam, stability_tolerance(D))
    from .basis import quadrature_vectors
    va, vb = quadrature_vectors()
    vb = system.b_sign * vb
    n = D.shape[0]
    Mp = np.linalg.inv(-1j * omega * np.eye(n) - D)
    Mm = np.linalg.inv(1j * omega * np.eye(n) - D)
    S = Mp @ Diff @ Mm.T
    p = system.params
    caa = 1 + 4 * (p.kappa_a - p.kappa_ap) * (va @ S @ va).real
    cbb = 1 + 4 * (p.kappa_b - p.kappa_bp) * (vb @ S @ vb).real
    return float(max(abs(caa - 1), abs(cbb - 1)))


def gauge_deviation(params: ModelParams, omegas, *, refine: bool = True, allow_unstable: bool = False) -> float:
    """Largest spectral change between the two real-amplitude gauges of b."""
    s1 = build_system(params, refine=refine, b_gauge=-1).sweep(omegas, allow_unstable=allow_unstable)
    s2 = build_system(params, refine=refine, b_gauge=1).sweep(omegas, allow_unstable=allow_unstable)
    dev = 0.0
    for name in ("C_aa", "C_bb", "C_ab"):
        a, b = getattr(s1, name), getattr(s2, name)
        dev = max(dev, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    return dev


@dataclass
class VerificationReport:
    jacobian_residual: float = math.nan
    lyapunov_residual: float = math.nan
    stability_margin: float = math.nan
    shot_noise_deviation: float = math.nan
    gauge_deviation: float = math.nan
    notes: list = field(default_factory=list)

    def checks(self) -> dict:
        """name -> (value, tolerance, passed); NaN means the oracle was skipped."""
        out = {
            "jacobian_residual": (self.jacobian_residual, JACOBIAN_TOL,
                                  self.jacobian_residual <= JACOBIAN_TOL),
            "stability_margin": (self.stability_margin, 0.0, None),
            "lyapunov_residual": (self.lyapunov_residual, LYAPUNOV_TOL,
                                  self.lyapunov_residual <= LYAPUNOV_TOL),
            "shot_noise_deviation": (self.shot_noise_deviation, SHOT_NOISE_TOL,
                                     self.shot_noise_deviation <= SHOT_NOISE_TOL),
            "gauge_deviation": (self.gauge_deviation, GAUGE_TOL,
                                self.gauge_deviation <= GAUGE_TOL),
        }
        return out

    @property
    def passed(self) -> bool:
        ok = True
        for name, (value, _tol, good) in self.checks().items():
            if good is None:
                continue
            if math.isnan(value):
                if name in ("jacobian_residual",):
                    ok = False
                continue
            ok = ok and bool(good)
        return ok and not any(n.startswith("FAIL") for n in self.notes)

    def lines(self) -> list[str]:
        out = []
        for name, (value, tol, good) in self.checks().items():
            if good is None:
                out.append(f"{name} = {value:.6g}")
            elif math.isnan(value):
                out.append(f"{name}: skipped")
            else:
                out.append(f"{name} = {value:.6g} (tol {tol:g}) {'PASS' if good else 'FAIL'}")
        out.extend(self.notes)
        return out

    def record(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def run_suite(params: ModelParams, *, lyapunov_points: int = 100_000, omega_max: float = 1e6,
              system: FluctuationSystem | None = None) -> VerificationReport:
    rep = VerificationReport()
    try:
        sysm = system if system is not None else build_system(params)
    except NumericalError as exc:
        rep.notes.append(f"FAIL steady state: {exc}")
        return rep
    rep.jacobian_residual = jacobian_check(sysm.steady, params, sysm.D).frobenius_ratio
    lam = max_real_eigenvalue(sysm.D)
    rep.stability_margin = lam.real
    if not sysm.steady.lasing:
        rep.notes.append("below threshold: spectrum oracles skipped")
        return rep
    if lam.real > stability_tolerance(sysm.D):
        rep.notes.append(f"FAIL unstable drift matrix: eigenvalue {lam.real:.6g}{lam.imag:+.6g}j;"
                         " spectrum oracles skipped")
        return rep
    rep.lyapunov_residual = lyapunov_check(sysm.D, sysm.Diff, omega_max, lyapunov_points)
    rep.shot_noise_deviation = shot_noise_deviation(sysm, omega_max)
    rep.gauge_deviation = gauge_deviation(params, np.geomspace(1e-2, 1e4, 50))
    return rep


# ---------------------------------------------------------------- figure trends

@dataclass(frozen=True)
class TrendResult:
    name: str
    passed: bool
    detail: str


LOW_OMEGA = 1e-3


def _sweep_for(params: ModelParams, omegas, allow_unstable: bool):
    return build_system(params).sweep(omegas, allow_unstable=allow_unstable)


def figure_trend_suite(params_base: ModelParams | None = None, *, allow_unstable: bool = False,
                       n_points: int = 200) -> list[TrendResult]:
    """Qualitative trends of the noise and cross-correlation spectra."""
    base = params_base if params_base is not None else ModelParams()
    grid = np.geomspace(LOW_OMEGA, 1e4, n_points)
    results: list[TrendResult] = []
    cache: dict = {}

    def get(**kw):
        key = tuple(sorted(kw.items()))
        if key not in cache:
            ratio = kw.pop("ratio")
            xi = kw.pop("xi", None)
            changes = dict(kw)
            if xi is not None:
                changes.update(xi_a=xi, xi_b=xi)
            if "g" in changes:
                g = changes.pop("g")
                changes.update(g_a=g, g_b=g)
            p = base.replace(**changes).with_pump_ratio(ratio)
            try:
                cache[key] = _sweep_for(p, grid, allow_unstable)
            except NumericalError as exc:
                cache[key] = exc
        return cache[key]

    def trend(name, fn):
        try:
            ok, detail = fn()
        except UnstableDriftError as exc:
            ok, detail = False, f"unstable drift matrix, max Re eig {exc.eigenvalue.real:.4g}"
        except NumericalError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(TrendResult(name, bool(ok), detail))

    def need(s):
        if isinstance(s, Exception):
            raise s
        return s

    def sub_sql():
        s = need(get(xi=0.8, ratio=1.011, p=0.0))
        return s.C_aa.min() < 1, f"min C_aa = {s.C_aa.min():.6g}"

    def monotone_pump():
        vals = [need(get(xi=0.8, ratio=r, p=0.0)).C_aa[0] for r in (1.001, 1.01, 1.011)]
        return vals[0] > vals[1] > vals[2], "C_aa(0) = " + ", ".join(f"{v:.6g}" for v in vals)

    def modes_differ():
        s = need(get(xi=0.8, ratio=1.011, p=0.0))
        rel = np.abs(s.C_aa - s.C_bb) / np.maximum(np.abs(s.C_aa), np.abs(s.C_bb))
        return rel.max() > 0.1, f"max relative |C_aa - C_bb| = {rel.max():.6g}"

    def weak_overlap():
        s = need(get(xi=0.1, ratio=1.011, p=0.0))
        return s.C_aa.min() >= 0.99, f"min C_aa = {s.C_aa.min():.6g}"

    def regularity():
        details, ok = [], True
        for r in (1.01, 1.011):
            c0 = need(get(xi=0.8, ratio=r, p=0.0)).C_aa[0]
            c1 = need(get(xi=0.8, ratio=r, p=1.0)).C_aa[0]
            ok = ok and c1 >= c0
            details.append(f"R={r}: p=1 {c1:.6g} vs p=0 {c0:.6g}")
        return ok, "; ".join(details)

    def anticorrelation():
        vals = {xi: need(get(xi=xi, ratio=1.01, p=0.0)).C_ab[0] for xi in (0.5, 0.8, 0.1)}
        bounded = all(np.all(np.abs(need(get(xi=xi, ratio=1.01, p=0.0)).C_ab) <= 1) for xi in vals)
        ok = vals[0.5] < 0 and vals[0.8] < 0 and vals[0.1] >= -0.05 and bounded
        return ok, ", ".join(f"C_ab(xi={k}) = {v:.6g}" for k, v in vals.items()) + f", |C_ab|<=1: {bounded}"

    def coupling():
        weak = need(get(g=0.01, ratio=1.01, p=0.0, xi=0.8))
        strong = need(get(g=0.1, ratio=1.01, p=0.0, xi=0.8))
        dev = float(np.max(np.abs(weak.C_aa - 1)))
        return dev <= 0.05 and strong.C_aa.min() < 1, (
            f"g=0.01: max |C_aa-1| = {dev:.6g}; g=0.1: min C_aa = {strong.C_aa.min():.6g}")

    trend("sub-SQL at xi=0.8", sub_sql)
    trend("low-frequency noise falls with pump", monotone_pump)
    trend("a and b spectra differ", modes_differ)
    trend("no suppression at xi=0.1", weak_overlap)
    trend("regular pump does not help", regularity)
    trend("intermodal anticorrelation", anticorrelation)
    trend("weak coupling removes suppression", coupling)
    return results
