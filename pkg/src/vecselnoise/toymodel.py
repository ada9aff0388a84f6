"""Single emitter coupled to two cavity modes through the same transition.

Basis ordering is (emitter) x (mode a Fock) x (mode b Fock) with emitter
index 1 for the upper level, so the flat index is e*(N+1)**2 + na*(N+1) + nb.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import NumericalError


class ToyIntegrationError(NumericalError):
    pass


class TruncationWarning(UserWarning):
    pass


TRACE_TOL = 1e-8
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8
LEAKAGE_TOL = 1e-6


@dataclass(frozen=True)
class ToyConfig:
    g: float = 0.01
    gamma_perp: float = 1.0
    gamma_2: float = 0.1
    fock_cutoff: int = 6
    alpha_a: complex = 0.25
    alpha_b: complex = 0.25
    excited: bool = True

    def __post_init__(self):
        if self.fock_cutoff < 2:
            raise ValueError("fock_cutoff must be at least 2")
        if self.g < 0 or self.gamma_perp <= 0 or self.gamma_2 <= 0:
            raise ValueError("rates must be positive (g may be zero)")

    @property
    def dim(self) -> int:
        return 2 * (self.fock_cutoff + 1) ** 2

    def truncation_safe(self) -> bool:
        return self.fock_cutoff >= 4 * max(abs(self.alpha_a) ** 2, abs(self.alpha_b) ** 2)

    def max_step(self) -> float:
        return 0.05 / max(self.gamma_perp, self.gamma_2, self.g * math.sqrt(self.fock_cutoff))


@dataclass
class DensityState:
    rho: np.ndarray
    t: float = 0.0


class ToyOperators:
    def __init__(self, config: ToyConfig):
        n = config.fock_cutoff + 1
        self.config = config
        self.n = n
        lower = sp.diags(np.sqrt(np.arange(1, n)), 1, format="csr")
        eye_f = sp.identity(n, format="csr")
        eye_e = sp.identity(2, format="csr")
        sm = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
        self.a = sp.kron(eye_e, sp.kron(lower, eye_f), format="csr")
        self.b = sp.kron(eye_e, sp.kron(eye_f, lower), format="csr")
        self.sm = sp.kron(sm, sp.identity(n * n), format="csr")
        A = self.a + self.b
        self.H = (config.g * (self.sm.T @ A + A.T @ self.sm)).tocsr()
        level = np.repeat([-1.0, 1.0], n * n)  # sigma_z eigenvalues
        self.level = level
        # L(sigma_z) rho = 2 sz rho sz - 2 rho acts elementwise
        self.dephase = 2.0 * np.outer(level, level) - 2.0
        self.upper = (level > 0).astype(float)
        na = np.tile(np.repeat(np.arange(n), n), 2)
        nb = np.tile(np.tile(np.arange(n), n), 2)
        self.top_layer = (na == n - 1) | (nb == n - 1)


def lindblad_rhs(rho: np.ndarray, config: ToyConfig, ops: ToyOperators | None = None) -> np.ndarray:
    """-i[H, rho] + gamma_perp L(sigma_z) rho + gamma_2 L(sigma^-) rho."""
    ops = ops if ops is not None else ToyOperators(config)
    rho_h = rho.conj().T
    rH = (ops.H @ rho_h).conj().T  # rho @ H for sparse H
    out = -1j * (ops.H @ rho - rH)
    out += config.gamma_perp * ops.dephase * rho
    jump = ops.sm @ (ops.sm @ rho_h).conj().T
    u = ops.upper
    out += config.gamma_2 * (2.0 * jump - u[:, None] * rho - rho * u[None, :])
    return out


def coherent_fock(alpha: complex, n: int) -> np.ndarray:
    k = np.arange(n)
    logfact = np.array([math.lgamma(i + 1) for i in k])
    amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logfact) * np.power(complex(alpha), k)
    return amp / np.linalg.norm(amp)


def initial_state(config: ToyConfig) -> DensityState:
    n = config.fock_cutoff + 1
    e = np.array([0.0, 1.0]) if config.excited else np.array([1.0, 0.0])
    psi = np.kron(e, np.kron(coherent_fock(config.alpha_a, n), coherent_fock(config.alpha_b, n)))
    return DensityState(np.outer(psi, psi.conj()), 0.0)


def leakage(rho: np.ndarray, ops: ToyOperators) -> float:
    return float(np.real(np.diag(rho))[ops.top_layer].sum())


def check_state(rho: np.ndarray, positivity: bool = False) -> None:
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ToyIntegrationError(f"trace drifted to {tr.real:.12g}{tr.imag:+.3g}j")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > HERMITIAN_TOL:
        raise ToyIntegrationError(f"hermiticity violated by {herm:.3e}")
    if positivity:
        lam = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if lam < -POSITIVITY_TOL:
            raise ToyIntegrationError(f"negative eigenvalue {lam:.3e}")


def evolve(
    state: DensityState,
    config: ToyConfig,
    t_final: float,
    dt: float | None = None,
    *,
    observer=None,
    observe_every: int = 1,
    positivity_every: int = 500,
    ops: ToyOperators | None = None,
) -> DensityState:
    """Fixed-step RK4 from ``state.t`` to ``t_final`` with invariant checks.

    ``observer(t, rho)`` is called at the start and every ``observe_every`` steps.
    """
    ops = ops if ops is not None else ToyOperators(config)
    hmax = config.max_step()
    dt = hmax if dt is None else dt
    if dt > hmax * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds the stability bound {hmax:g}")
    span = t_final - state.t
    if span < 0:
        raise ValueError("t_final precedes the current time")
    steps = int(math.ceil(span / dt - 1e-9))
    h = span / steps if steps else 0.0
    rho = state.rho.astype(complex, copy=True)
    t0 = state.t
    f = lambda r: lindblad_rhs(r, config, ops)  # noqa: E731
    if observer is not None:
        observer(t0, rho)
    warned = False
    for k in range(1, steps + 1):
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        check_state(rho, positivity=(k % positivity_every == 0 or k == steps))
        if not warned and leakage(rho, ops) > LEAKAGE_TOL:
            warnings.warn(f"Fock truncation leakage {leakage(rho, ops):.2e} exceeds {LEAKAGE_TOL:g}",
                          TruncationWarning, stacklevel=2)
            warned = True
        if observer is not None and k % observe_every == 0:
            observer(t0 + k * h, rho)
    return DensityState(rho, t0 + steps * h)


def expect(op, rho: np.ndarray) -> complex:
    return complex(np.sum((op @ rho).diagonal()))


# ---------------------------------------------------------------- coefficient fit

@dataclass
class ToyFit:
    g: float
    gamma_perp: float
    dispersive_shift: float
    kerr_coefficient: float
    dispersive_target: float
    kerr_target: float
    photon_numbers: list
    phase_rates: list
    damping_rates: list
    fit_residual: float
    conclusive: bool
    notes: list = field(default_factory=list)

    def relative_errors(self) -> tuple[float, float]:
        def rel(x, y):
            if y == 0:
                return abs(x)
            return abs(x - y) / abs(y)
        return rel(self.dispersive_shift, self.dispersive_target), rel(self.kerr_coefficient, self.kerr_target)

    def lines(self) -> list[str]:
        e1, e2 = self.relative_errors()
        out = [
            f"g = {self.g:g}, gamma_perp = {self.gamma_perp:g}",
            f"dispersive shift: fitted {self.dispersive_shift:.6e}, analytic 2g^2/gamma_perp = "
            f"{self.dispersive_target:.6e}, relative error {e1:.3g}",
            f"Kerr coefficient: fitted {self.kerr_coefficient:.6e}, analytic 4g^4/gamma_perp^3 = "
            f"{self.kerr_target:.6e}, relative error {e2:.3g}",
        ]
        for n, w, k in zip(self.photon_numbers, self.phase_rates, self.damping_rates):
            out.append(f"  n_sym = {n:g}: phase rate {w:.6e}, amplitude damping rate {k:.6e}")
        out.append(f"fit residual {self.fit_residual:.3e}; {'conclusive' if self.conclusive else 'inconclusive'}")
        out.extend(self.notes)
        return out


def phase_and_damping_rate(config: ToyConfig, window: float, transient: float | None = None,
                           dt: float | None = None, samples: int = 200) -> tuple[float, float]:
    """Linear fits of -arg<a> and -log|<a>| over a window after the emitter transient."""
    ops = ToyOperators(config)
    transient = 5.0 / config.gamma_2 if transient is None else transient
    dt = config.max_step() if dt is None else dt
    state = evolve(initial_state(config), config, transient, dt, ops=ops)
    steps = int(math.ceil(window / dt - 1e-9))
    every = max(1, steps // samples)
    ts, zs = [], []

    def observe(t, rho):
        ts.append(t)
        zs.append(expect(ops.a, rho))

    evolve(state, config, transient + window, dt, observer=observe, observe_every=every, ops=ops)
    ts = np.array(ts)
    zs = np.array(zs)
    if np.any(np.abs(zs) == 0):
        return 0.0, 0.0
    phase = np.unwrap(np.angle(zs))
    omega = -np.polyfit(ts, phase, 1)[0]
    damping = -np.polyfit(ts, np.log(np.abs(zs)), 1)[0]
    return float(omega), float(damping)


def extract_effective_coefficients(
    config: ToyConfig,
    photon_numbers=(0.1, 0.2, 0.3),
    window: float | None = None,
    residual_tol: float = 0.05,
) -> ToyFit:
    """Fit omega(n) = 2 chi1 + 4 chi2 (2 n + 1) over symmetric-mode photon numbers n.

    Each run starts with the symmetric superposition (a + b)/sqrt(2) in a
    coherent state of mean number n and the antisymmetric one in vacuum.
    """
    target1 = 2 * config.g**2 / config.gamma_perp
    target2 = 4 * config.g**4 / config.gamma_perp**3
    window = 20.0 / config.gamma_2 if window is None else window
    notes = []
    if config.gamma_perp > 0 and config.g / config.gamma_perp > 0.02 + 1e-12:
        notes.append("warning: g/gamma_perp exceeds 0.02; adiabatic regime not guaranteed")
    rates, damps = [], []
    for n in photon_numbers:
        amp = math.sqrt(n / 2.0)
        cfg = ToyConfig(config.g, config.gamma_perp, config.gamma_2, config.fock_cutoff, amp, amp, True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", TruncationWarning)
            w, k = phase_and_damping_rate(cfg, window)
        if caught:
            notes.append(f"n_sym = {n:g}: {caught[0].message}")
        rates.append(w)
        damps.append(k)
    ns = np.asarray(photon_numbers, float)
    slope, intercept = np.polyfit(ns, np.asarray(rates), 1)
    pred = slope * ns + intercept
    spread = max(float(np.max(np.abs(rates))), 1e-300)
    resid = float(np.max(np.abs(pred - rates)) / spread) if spread > 1e-300 else 0.0
    chi2 = slope / 8.0
    chi1 = (intercept - 4 * chi2) / 2.0
    return ToyFit(
        g=config.g, gamma_perp=config.gamma_perp,
        dispersive_shift=float(chi1), kerr_coefficient=float(chi2),
        dispersive_target=target1, kerr_target=target2,
        photon_numbers=list(map(float, ns)), phase_rates=rates, damping_rates=damps,
        fit_residual=resid, conclusive=resid <= residual_tol, notes=notes,
    )


def antisymmetric_number(config: ToyConfig, ops: ToyOperators | None = None):
    """Operator (a - b)^dag (a - b) / 2."""
    ops = ops if ops is not None else ToyOperators(config)
    d = (ops.a - ops.b) / math.sqrt(2.0)
    return (d.conj().T @ d).tocsr()
