"""Stationary solutions of the collective laser equations.

Two routes are provided: the quasiclassical closed forms, and a damped
Newton solve on the full 26-variable collective system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import basis as bx
from .model import DerivedRates, ModelParams, NumericalError, derive_rates, threshold_rate


class RefinementError(NumericalError):
    def __init__(self, message: str, residual: float = math.nan):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


@dataclass(frozen=True)
class SteadyState:
    I_a: float
    I_b: float
    a_plus: complex
    a_minus: complex
    b_plus: complex
    b_minus: complex
    M2_plus: float
    M2_minus: float
    N2_plus: float
    N2_minus: float
    L2_plus: float
    L2_minus: float
    P_plus: complex
    P_minus: complex
    Q_plus: complex
    Q_minus: complex
    Xi_plus: complex
    Xi_minus: complex
    lasing_a: bool
    lasing_b: bool
    refined: bool = False

    def to_vector(self) -> np.ndarray:
        f = np.array([self.a_plus, self.a_minus, self.b_plus, self.b_minus], complex)
        pz = np.array([self.P_plus, self.P_minus, self.Q_plus, self.Q_minus,
                       self.Xi_plus, self.Xi_minus], complex)
        pops = np.array([self.M2_plus, self.M2_minus, self.N2_plus, self.N2_minus,
                         self.L2_plus, self.L2_minus], complex)
        return np.concatenate([f, f.conj(), pz, pz.conj(), pops])

    @classmethod
    def from_vector(cls, x: np.ndarray, refined: bool, lasing_floor: float = 1e-9) -> "SteadyState":
        x = np.asarray(x, complex)
        I_a = float(abs(x[0]) ** 2 + abs(x[1]) ** 2)
        I_b = float(abs(x[2]) ** 2 + abs(x[3]) ** 2)
        pops = x[20:26].real
        return cls(
            I_a=I_a, I_b=I_b,
            a_plus=complex(x[0]), a_minus=complex(x[1]),
            b_plus=complex(x[2]), b_minus=complex(x[3]),
            M2_plus=float(pops[0]), M2_minus=float(pops[1]),
            N2_plus=float(pops[2]), N2_minus=float(pops[3]),
            L2_plus=float(pops[4]), L2_minus=float(pops[5]),
            P_plus=complex(x[8]), P_minus=complex(x[9]),
            Q_plus=complex(x[10]), Q_minus=complex(x[11]),
            Xi_plus=complex(x[12]), Xi_minus=complex(x[13]),
            lasing_a=I_a > lasing_floor, lasing_b=I_b > lasing_floor,
            refined=refined,
        )

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def lasing(self) -> bool:
        return self.lasing_a or self.lasing_b

    def polarization_intensities(self) -> dict:
        """Intensities projected on x/y linear polarizations of each mode."""
        ax = abs(self.a_plus + self.a_minus) ** 2 / 2
        ay = abs(self.a_plus - self.a_minus) ** 2 / 2
        bx_ = abs(self.b_plus + self.b_minus) ** 2 / 2
        by = abs(self.b_minus - self.b_plus) ** 2 / 2
        return {"a_x": ax, "a_y": ay, "b_x": bx_, "b_y": by}


def threshold(params: ModelParams, derived: DerivedRates | None = None) -> tuple[float, float]:
    return threshold_rate(params, "a"), threshold_rate(params, "b")


def closed_form_intensities(params: ModelParams, derived: DerivedRates | None = None) -> tuple[float, float]:
    dr = derived if derived is not None else derive_rates(params)
    ga2, gb2 = params.g_a**2, params.g_b**2
    la = params.kappa_a - params.kappa_ap
    lb = params.kappa_b - params.kappa_bp
    xa, xb = params.xi_a, params.xi_b
    denom = 1.0 - xa * xb
    gp = params.gamma_perp

    def single(g2, R, loss):
        return R / loss - dr.d * gp / g2

    if denom <= 0.0:
        # full overlap on both sides: the coupled form is singular
        raise ValueError("closed-form intensities undefined for xi_a * xi_b = 1")
    I_a = (ga2 * params.R_a / la - xb * gb2 * dr.R_b / lb - dr.d * gp * (1 - xb)) / (ga2 * denom)
    I_b = (gb2 * dr.R_b / lb - xa * ga2 * params.R_a / la - dr.d * gp * (1 - xa)) / (gb2 * denom)
    if I_a >= 0 and I_b >= 0:
        return I_a, I_b
    if I_a < 0 and I_b < 0:
        return 0.0, 0.0
    if I_a < 0:
        return 0.0, max(single(gb2, dr.R_b, lb), 0.0)
    return max(single(ga2, params.R_a, la), 0.0), 0.0


def closed_form_steady(params: ModelParams, derived: DerivedRates | None = None,
                       b_gauge: int = -1) -> SteadyState:
    """Quasiclassical stationary state in the real-amplitude gauge.

    a is x-polarized (a+ = a-); b is y-polarized with b+ = b_gauge * sqrt(I_b/2)
    and b- = -b+.
    """
    if b_gauge not in (1, -1):
        raise ValueError("b_gauge must be +1 or -1")
    dr = derived if derived is not None else derive_rates(params)
    I_a, I_b = closed_form_intensities(params, dr)
    sa = math.sqrt(I_a / 2)
    sb = math.sqrt(I_b / 2)
    a_p, a_m = sa, sa
    b_p, b_m = b_gauge * sb, -b_gauge * sb
    big_m = (dr.d / params.gamma_2) * params.R_a / (dr.d + dr.c_a * (I_a + dr.zeta_ab * I_b))
    big_n = (dr.d / params.gamma_2) * dr.R_b / (dr.d + dr.c_b * (I_b + dr.zeta_ba * I_a))
    lam = math.sqrt(params.xi_a) * big_m
    m2 = (1 - math.sqrt(params.xi_a)) * big_m
    n2 = (1 - math.sqrt(params.xi_b)) * big_n
    G = complex(params.gamma_perp, params.nu)
    ga, gb = params.g_a, params.g_b
    return SteadyState(
        I_a=I_a, I_b=I_b,
        a_plus=complex(a_p), a_minus=complex(a_m),
        b_plus=complex(b_p), b_minus=complex(b_m),
        M2_plus=m2, M2_minus=m2, N2_plus=n2, N2_minus=n2, L2_plus=lam, L2_minus=lam,
        P_plus=m2 * ga * a_p / G, P_minus=m2 * ga * a_m / G,
        Q_plus=n2 * gb * b_p / G, Q_minus=n2 * gb * b_m / G,
        Xi_plus=lam * (ga * a_p + gb * b_p) / G, Xi_minus=lam * (ga * a_m + gb * b_m) / G,
        lasing_a=I_a > 0, lasing_b=I_b > 0, refined=False,
    )


def dark_steady(params: ModelParams, derived: DerivedRates | None = None) -> SteadyState:
    """Trivial fixed point: no fields, unsaturated populations."""
    dr = derived if derived is not None else derive_rates(params)
    y = np.array([dr.R_1, dr.R_1, dr.R_2, dr.R_2, dr.R_3, dr.R_3]) / params.gamma_2
    x = np.zeros(bx.DIM, complex)
    x[20:26] = y
    return SteadyState.from_vector(x, refined=True)


def _swap(v):
    return v[::-1]


def collective_rhs(x: np.ndarray, params: ModelParams, derived: DerivedRates | None = None) -> np.ndarray:
    """Noise-free time derivative of the 26 collective variables.

    Conjugate entries are treated as independent inputs, so the map is
    holomorphic in ``x`` and its Jacobian is the drift matrix.
    """
    dr = derived if derived is not None else derive_rates(params)
    x = np.asarray(x, complex)
    ga, gb = params.g_a, params.g_b
    a, b, ac, bc = x[bx.A], x[bx.B], x[bx.AC], x[bx.BC]
    P, Q, Xi = x[bx.P], x[bx.Q], x[bx.XI]
    Pc, Qc, Xic = x[bx.PC], x[bx.QC], x[bx.XIC]
    M, N, L = x[bx.M], x[bx.N], x[bx.L]
    ca = params.dichroism_sign_a * complex(params.kappa_ap, params.omega_ap)
    cb = params.dichroism_sign_b * complex(params.kappa_bp, params.omega_bp)
    G = complex(params.gamma_perp, params.nu)
    Gc = G.conjugate()
    g2, gc = params.gamma_2, params.gamma_c

    out = np.empty(bx.DIM, complex)
    out[bx.A] = -params.kappa_a * a + ca * _swap(a) + ga * (P + Xi)
    out[bx.B] = -params.kappa_b * b + cb * _swap(b) + gb * (Q + Xi)
    out[bx.AC] = -params.kappa_a * ac + ca.conjugate() * _swap(ac) + ga * (Pc + Xic)
    out[bx.BC] = -params.kappa_b * bc + cb.conjugate() * _swap(bc) + gb * (Qc + Xic)
    out[bx.P] = -G * P + ga * M * a
    out[bx.Q] = -G * Q + gb * N * b
    out[bx.XI] = -G * Xi + L * (ga * a + gb * b)
    out[bx.PC] = -Gc * Pc + ga * M * ac
    out[bx.QC] = -Gc * Qc + gb * N * bc
    out[bx.XIC] = -Gc * Xic + L * (ga * ac + gb * bc)
    out[bx.M] = dr.R_1 - g2 * M - gc * (M - _swap(M)) - ga * (ac * P + Pc * a)
    out[bx.N] = dr.R_2 - g2 * N - gc * (N - _swap(N)) - gb * (bc * Q + Qc * b)
    out[bx.L] = (dr.R_3 - g2 * L - gc * (L - _swap(L))
                 - ((ga * ac + gb * bc) * Xi + Xic * (ga * a + gb * b)))
    return out


def collective_jacobian(x: np.ndarray, params: ModelParams) -> np.ndarray:
    """Analytic Jacobian of :func:`collective_rhs` (complex 26x26)."""
    x = np.asarray(x, complex)
    ga, gb = params.g_a, params.g_b
    ca = params.dichroism_sign_a * complex(params.kappa_ap, params.omega_ap)
    cb = params.dichroism_sign_b * complex(params.kappa_bp, params.omega_bp)
    G = complex(params.gamma_perp, params.nu)
    J = np.zeros((bx.DIM, bx.DIM), complex)
    for s in range(2):
        o = 1 - s
        ia, ib, iac, ibc = s, 2 + s, 4 + s, 6 + s
        ip, iq, ix = 8 + s, 10 + s, 12 + s
        ipc, iqc, ixc = 14 + s, 16 + s, 18 + s
        im, in_, il = 20 + s, 22 + s, 24 + s
        a, b, ac, bc = x[ia], x[ib], x[iac], x[ibc]
        P, Q, Xi, Pc, Qc, Xic = x[ip], x[iq], x[ix], x[ipc], x[iqc], x[ixc]
        M, N, L = x[im], x[in_], x[il]

        # fields
        J[ia, ia] = -params.kappa_a
        J[ia, o] = ca
        J[ia, ip] = J[ia, ix] = ga
        J[ib, ib] = -params.kappa_b
        J[ib, 2 + o] = cb
        J[ib, iq] = J[ib, ix] = gb
        J[iac, iac] = -params.kappa_a
        J[iac, 4 + o] = ca.conjugate()
        J[iac, ipc] = J[iac, ixc] = ga
        J[ibc, ibc] = -params.kappa_b
        J[ibc, 6 + o] = cb.conjugate()
        J[ibc, iqc] = J[ibc, ixc] = gb

        # polarizations
        J[ip, ip] = -G
        J[ip, ia] = ga * M
        J[ip, im] = ga * a
        J[iq, iq] = -G
        J[iq, ib] = gb * N
        J[iq, in_] = gb * b
        J[ix, ix] = -G
        J[ix, ia] = ga * L
        J[ix, ib] = gb * L
        J[ix, il] = ga * a + gb * b
        J[ipc, ipc] = -G.conjugate()
        J[ipc, iac] = ga * M
        J[ipc, im] = ga * ac
        J[iqc, iqc] = -G.conjugate()
        J[iqc, ibc] = gb * N
        J[iqc, in_] = gb * bc
        J[ixc, ixc] = -G.conjugate()
        J[ixc, iac] = ga * L
        J[ixc, ibc] = gb * L
        J[ixc, il] = ga * ac + gb * bc

        # populations
        for row in (im, in_, il):
            J[row, row] = -params.gamma_2 - params.gamma_c
            J[row, row + (1 if s == 0 else -1)] = params.gamma_c
        J[im, iac] = -ga * P
        J[im, ip] = -ga * ac
        J[im, ipc] = -ga * a
        J[im, ia] = -ga * Pc
        J[in_, ibc] = -gb * Q
        J[in_, iq] = -gb * bc
        J[in_, iqc] = -gb * b
        J[in_, ib] = -gb * Qc
        J[il, iac] = -ga * Xi
        J[il, ibc] = -gb * Xi
        J[il, ix] = -(ga * ac + gb * bc)
        J[il, ixc] = -(ga * a + gb * b)
        J[il, ia] = -ga * Xic
        J[il, ib] = -gb * Xic
    return J


# ---------------------------------------------------------------- refinement

_CI = np.array(bx.COMPLEX_INDEPENDENT)
_RI = np.array(bx.REAL_INDEPENDENT)
_NC = len(_CI)


def _to_real(x: np.ndarray) -> np.ndarray:
    return np.concatenate([x[_CI].real, x[_CI].imag, x[_RI].real])


def _to_complex(u: np.ndarray) -> np.ndarray:
    x = np.zeros(bx.DIM, complex)
    z = u[:_NC] + 1j * u[_NC:2 * _NC]
    x[_CI] = z
    x[bx.CONJ[_CI]] = z.conj()
    x[_RI] = u[2 * _NC:]
    return x


def _real_jacobian(J: np.ndarray) -> np.ndarray:
    """Real Jacobian of the 26 real residuals w.r.t. the 26 real unknowns."""
    cols = []
    for j in _CI:
        cols.append(J[:, j] + J[:, bx.CONJ[j]])
    for j in _CI:
        cols.append(1j * (J[:, j] - J[:, bx.CONJ[j]]))
    for j in _RI:
        cols.append(J[:, j])
    C = np.stack(cols, axis=1)
    return np.concatenate([C[_CI].real, C[_CI].imag, C[_RI].real], axis=0)


def residual_scale(x: np.ndarray, params: ModelParams, derived: DerivedRates) -> float:
    pop_scale = float(np.max(np.abs(x[20:26])))
    return max(derived.R, params.gamma_2 * pop_scale)


def residual_norm(x: np.ndarray, params: ModelParams, derived: DerivedRates) -> float:
    return float(np.max(np.abs(collective_rhs(x, params, derived))))


def _gauge_row(x: np.ndarray) -> np.ndarray:
    """Constraint fixing the global optical phase of the brighter mode."""
    row = np.zeros(2 * _NC + len(_RI))
    Ia = abs(x[0]) ** 2 + abs(x[1]) ** 2
    Ib = abs(x[2]) ** 2 + abs(x[3]) ** 2
    if Ia >= Ib:
        row[_NC + 0] = row[_NC + 1] = 1.0   # Im(a+ + a-) = 0
    else:
        row[_NC + 3] = 1.0                  # Im(b- - b+) = 0
        row[_NC + 2] = -1.0
    return row


def _newton(x0, params, derived, tol_factor, max_iter):
    u = _to_real(x0)
    x = x0
    scale = residual_scale(x, params, derived)
    for it in range(max_iter + 1):
        x = _to_complex(u)
        F = collective_rhs(x, params, derived)
        Fr = _to_real(F)
        res = float(np.max(np.abs(F)))
        scale = residual_scale(x, params, derived)
        if res <= tol_factor * scale:
            return x, res, it, True
        if it == max_iter:
            break
        Jr = _real_jacobian(collective_jacobian(x, params))
        g = _gauge_row(x)
        A = np.vstack([Jr, g])
        rhs = np.concatenate([-Fr, [-float(g @ u)]])
        # column scaling keeps the mixed field/population magnitudes balanced
        cs = np.maximum(np.abs(u), 1.0)
        rs = np.maximum(np.max(np.abs(A * cs), axis=1), 1e-300)
        step = np.linalg.lstsq((A * cs) / rs[:, None], rhs / rs, rcond=None)[0] * cs
        lam = 1.0
        base = np.max(np.abs(Fr))
        for _ in range(30):
            trial = u + lam * step
            ft = np.max(np.abs(collective_rhs(_to_complex(trial), params, derived)))
            if np.isfinite(ft) and ft < base * (1 - 1e-4 * lam):
                break
            lam *= 0.5
        u = u + lam * step
    return x, res, max_iter, False


def _field_norm(x):
    return float(np.sum(np.abs(x[0:4]) ** 2))


def _continuation(params, b_gauge, tol_factor, max_iter, n_steps, s0=1e-4, min_step=1e-7):
    """Follow the lasing branch while the overlap grows from s0 * xi to xi.

    A step is rejected and halved when Newton fails or the fields collapse.
    """
    ps = params.replace(xi_a=params.xi_a * s0, xi_b=params.xi_b * s0)
    ds = derive_rates(ps)
    x, res, it, ok = _newton(closed_form_steady(ps, ds, b_gauge=b_gauge).to_vector(),
                             ps, ds, tol_factor, max_iter)
    if not ok or _field_norm(x) == 0.0:
        raise RefinementError("no lasing solution at the weak-overlap start", res)
    s, h, steps = s0, 1.0 / n_steps, 1
    while s < 1.0:
        s_new = min(1.0, s + h)
        ps = params.replace(xi_a=params.xi_a * s_new, xi_b=params.xi_b * s_new)
        ds = derive_rates(ps)
        x_new, res_new, it_new, ok = _newton(x, ps, ds, tol_factor, max_iter)
        steps += 1
        if ok and _field_norm(x_new) > 1e-3 * _field_norm(x):
            x, res, it, s = x_new, res_new, it_new, s_new
            h = min(1.0 / n_steps, 2 * h)
            continue
        h /= 2
        if h < min_step:
            raise RefinementError(f"continuation stalled at overlap scale {s:.6g}", res_new)
    return x, res, it, steps


@dataclass(frozen=True)
class RefineInfo:
    residual: float
    scale: float
    iterations: int
    continuation_steps: int


def refine_steady(
    initial: SteadyState,
    params: ModelParams,
    derived: DerivedRates | None = None,
    *,
    tol_factor: float = 1e-10,
    max_iter: int = 100,
    continuation_steps: int = 40,
    return_info: bool = False,
):
    """Newton refinement of a stationary state on the full collective system.

    When the direct solve collapses to the dark state, the region-3 overlap
    is switched on gradually (``xi -> s * xi``) starting from a nearly
    uncoupled system where the closed form is accurate.
    """
    dr = derived if derived is not None else derive_rates(params)
    if not initial.lasing:
        dark = dark_steady(params, dr)
        x = dark.to_vector()
        res = residual_norm(x, params, dr)
        info = RefineInfo(res, residual_scale(x, params, dr), 0, 0)
        return (dark, info) if return_info else dark

    b_gauge = 1 if initial.b_plus.real > 0 else -1
    x, res, it, ok = _newton(initial.to_vector(), params, dr, tol_factor, max_iter)
    fields_lit = abs(x[0]) ** 2 + abs(x[1]) ** 2 + abs(x[2]) ** 2 + abs(x[3]) ** 2
    target = initial.I_a + initial.I_b
    steps_used = 0
    if not ok or fields_lit < 1e-6 * target:
        x, res, it, steps_used = _continuation(params, b_gauge, tol_factor, max_iter, continuation_steps)
    scale = residual_scale(x, params, dr)
    out = SteadyState.from_vector(x, refined=True)
    info = RefineInfo(res, scale, it, steps_used)
    return (out, info) if return_info else out
