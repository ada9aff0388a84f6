"""Linearized fluctuation system and photocurrent noise spectra."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import basis as bx
from .basis import FluctuationBasis, quadrature_vectors
from .model import DerivedRates, ModelParams, NumericalError, derive_rates
from .steadystate import (
    SteadyState,
    closed_form_steady,
    collective_jacobian,
    refine_steady,
)

if os.environ.get("VECSELNOISE_BACKEND", "").lower() == "numpy":
    from ._sweep_py import sweep_kernel as _kernel
    BACKEND = "numpy"
else:
    try:
        from ._sweep import sweep_kernel as _kernel
        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._sweep_py import sweep_kernel as _kernel
        BACKEND = "numpy"


class UnstableDriftError(NumericalError):
    def __init__(self, eigenvalue: complex, tol: float):
        self.eigenvalue = complex(eigenvalue)
        self.tol = tol
        super().__init__(
            f"drift matrix is not stable: eigenvalue {self.eigenvalue.real:.6g}"
            f"{self.eigenvalue.imag:+.6g}j has positive real part (tolerance {tol:.3g})"
        )


class SingularResolventError(NumericalError):
    def __init__(self, omega: float):
        self.omega = float(omega)
        super().__init__(f"resolvent is singular at Omega = {self.omega:.17g}")


_BLOCKS = {
    "A": slice(0, 8),
    "P": slice(8, 20),
    "N": slice(20, 26),
}


@dataclass(frozen=True)
class DriftMatrix:
    D: np.ndarray

    def block(self, rows: str, cols: str) -> np.ndarray:
        return self.D[_BLOCKS[rows], _BLOCKS[cols]]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.D)


@dataclass(frozen=True)
class DiffusionMatrix:
    Diff: np.ndarray


def build_drift(steady: SteadyState, params: ModelParams, derived: DerivedRates | None = None) -> DriftMatrix:
    D = collective_jacobian(steady.to_vector(), params)
    D.setflags(write=False)
    return DriftMatrix(D)


def build_diffusion(
    steady: SteadyState,
    params: ModelParams,
    derived: DerivedRates | None = None,
    lower_populations: np.ndarray | None = None,
) -> DiffusionMatrix:
    """Ordered Langevin-force correlators, Diff[i, j] = <Z_i(t) Z_j(t')> / delta(t - t').

    ``lower_populations`` (M1+, M1-, N1+, N1-, L1+, L1-) re-enables the
    anti-normally ordered polarization entries; by default lower levels are
    empty and those entries vanish.
    """
    dr = derived if derived is not None else derive_rates(params)
    x = steady.to_vector()
    Df = np.zeros((bx.DIM, bx.DIM), complex)

    # the cross-circular entry 2 kappa_p pairs with a -kappa_p drift coupling;
    # its sign follows the coupling so the loss matrix and noise stay matched
    for base, kap, kapp, sign in ((0, params.kappa_a, params.kappa_ap, params.dichroism_sign_a),
                                  (2, params.kappa_b, params.kappa_bp, params.dichroism_sign_b)):
        for s in range(2):
            Df[base + s, base + 4 + s] = 2 * kap
            Df[base + s, base + 4 + 1 - s] = -2 * sign * kapp

    pops = x[20:26].real
    lower = np.zeros(6) if lower_populations is None else np.asarray(lower_populations, float)
    rates = (dr.R_1, dr.R_2, dr.R_3)
    R, p = dr.R, params.p
    g2, gc, gp, g1 = params.gamma_2, params.gamma_c, params.gamma_perp, params.gamma_1
    for y in range(3):
        Ry = rates[y]
        Yp, Ym = pops[2 * y], pops[2 * y + 1]
        for s in range(2):
            r = 20 + 2 * y + s
            Df[r, r] = Ry * (1 - Ry / R * p / 2) + g2 * pops[2 * y + s] + gc * (Yp + Ym)
            Df[r, 20 + 2 * y + 1 - s] = -Ry**2 / R * p / 2 - gc * (Yp + Ym)
        for z in range(3):
            if z == y:
                continue
            cross = -rates[z] * Ry / R * p / 2
            Df[20 + 2 * y:22 + 2 * y, 20 + 2 * z:22 + 2 * z] = cross

        for s in range(2):
            ip, ipc = 8 + 2 * y + s, 14 + 2 * y + s
            own, other = 20 + 2 * y + s, 20 + 2 * y + 1 - s
            Df[ipc, ip] = (2 * gp - g2 - gc) * pops[2 * y + s] + gc * pops[2 * y + 1 - s] + Ry
            Df[ip, ipc] = (2 * gp - g1) * lower[2 * y + s]
            Xbar = x[ip]
            Df[ip, own] = (g2 + gc) * Xbar
            Df[ip, other] = -gc * Xbar
            # Hermitian closure <B^ A^> = conj<A B>
            Df[own, ipc] = np.conj(Df[ip, own])
            Df[other, ipc] = np.conj(Df[ip, other])
    Df.setflags(write=False)
    return DiffusionMatrix(Df)


def stability_tolerance(D: np.ndarray) -> float:
    return 1e-9 * float(np.linalg.norm(D, ord=np.inf))


def max_real_eigenvalue(D: np.ndarray) -> complex:
    ev = np.linalg.eigvals(D)
    return complex(ev[np.argmax(ev.real)])


def check_stability(D: np.ndarray, tol: float | None = None) -> complex:
    """Raise UnstableDriftError unless every eigenvalue has Re <= tol.

    A tolerance slightly above zero admits the neutral phase mode.
    """
    tol = stability_tolerance(D) if tol is None else tol
    lam = max_real_eigenvalue(D)
    if lam.real > tol:
        raise UnstableDriftError(lam, tol)
    return lam


@dataclass(frozen=True)
class SpectrumPoint:
    Omega: float
    C_aa: float
    C_bb: float
    C_ab: float
    d_aa: complex
    d_bb: complex
    d_ab: complex


@dataclass
class SpectrumSweep:
    Omega: np.ndarray
    C_aa: np.ndarray
    C_bb: np.ndarray
    C_ab: np.ndarray
    d_aa: np.ndarray
    d_bb: np.ndarray
    d_ab: np.ndarray
    lasing: bool = True
    meta: dict = field(default_factory=dict)

    COLUMNS = ("Omega", "C_aa", "C_bb", "C_ab", "d_aa", "d_bb", "d_ab")

    def __len__(self) -> int:
        return self.Omega.size

    def point(self, k: int) -> SpectrumPoint:
        return SpectrumPoint(float(self.Omega[k]), float(self.C_aa[k]), float(self.C_bb[k]),
                             float(self.C_ab[k]), complex(self.d_aa[k]), complex(self.d_bb[k]),
                             complex(self.d_ab[k]))

    def rows(self):
        """Real-valued rows; raw densities are reported by their real parts."""
        for k in range(len(self)):
            yield (float(self.Omega[k]), float(self.C_aa[k]), float(self.C_bb[k]), float(self.C_ab[k]),
                   float(self.d_aa[k].real), float(self.d_bb[k].real), float(self.d_ab[k].real))


def _normalize(d: np.ndarray, params: ModelParams):
    la = params.kappa_a - params.kappa_ap
    lb = params.kappa_b - params.kappa_bp
    C_aa = 1 + 4 * la * d[:, 0].real
    C_bb = 1 + 4 * lb * d[:, 1].real
    with np.errstate(invalid="ignore", divide="ignore"):
        C_ab = 4 * np.sqrt(la * lb) * d[:, 2].real / np.sqrt(C_aa * C_bb)
    return C_aa, C_bb, C_ab


def _vectors(b_sign: int = 1):
    va, vb = quadrature_vectors()
    return va, b_sign * vb


def sweep(
    omegas,
    D: np.ndarray,
    Diff: np.ndarray,
    params: ModelParams,
    *,
    b_sign: int = 1,
    num_threads: int = 1,
    check: bool = True,
    lasing: bool = True,
) -> SpectrumSweep:
    """Noise spectra at each positive frequency, in the order given."""
    om = np.asarray(omegas, float)
    if om.ndim != 1 or om.size == 0:
        raise ValueError("frequency grid must be a non-empty 1-D array")
    if not np.all(np.isfinite(om)) or np.any(om <= 0):
        raise ValueError("frequencies must be positive and finite")
    if check:
        check_stability(D)
    va, vb = _vectors(b_sign)
    d, status = _kernel(D, Diff, va, vb, om, num_threads)
    if np.any(status):
        raise SingularResolventError(om[np.flatnonzero(status)[0]])
    C_aa, C_bb, C_ab = _normalize(d, params)
    return SpectrumSweep(om, C_aa, C_bb, C_ab, d[:, 0], d[:, 1], d[:, 2], lasing=lasing)


def spectrum_at(Omega: float, D: np.ndarray, Diff: np.ndarray, params: ModelParams,
                *, b_sign: int = 1, check: bool = True) -> SpectrumPoint:
    if check:
        check_stability(D)
    va, vb = _vectors(b_sign)
    d, status = _kernel(D, Diff, va, vb, np.array([float(Omega)]), 1)
    if status[0]:
        raise SingularResolventError(Omega)
    C_aa, C_bb, C_ab = _normalize(d, params)
    return SpectrumPoint(float(Omega), float(C_aa[0]), float(C_bb[0]), float(C_ab[0]),
                         complex(d[0, 0]), complex(d[0, 1]), complex(d[0, 2]))


def spectral_density_matrix(Omega: float, D: np.ndarray, Diff: np.ndarray) -> np.ndarray:
    """Full S(Omega) = M(Omega) Diff M(-Omega)^T (diagnostics)."""
    n = D.shape[0]
    Mp = np.linalg.inv(-1j * Omega * np.eye(n) - D)
    Mm = np.linalg.inv(1j * Omega * np.eye(n) - D)
    return Mp @ Diff @ Mm.T


@dataclass(frozen=True)
class FluctuationSystem:
    params: ModelParams
    derived: DerivedRates
    steady: SteadyState
    drift: DriftMatrix
    diffusion: DiffusionMatrix
    basis: FluctuationBasis = FluctuationBasis()
    b_sign: int = 1

    @property
    def D(self) -> np.ndarray:
        return self.drift.D

    @property
    def Diff(self) -> np.ndarray:
        return self.diffusion.Diff

    def stability_margin(self) -> float:
        return max_real_eigenvalue(self.D).real

    def sweep(self, omegas, *, allow_unstable: bool = False, num_threads: int = 1) -> SpectrumSweep:
        out = sweep(omegas, self.D, self.Diff, self.params, b_sign=self.b_sign,
                    num_threads=num_threads, check=not allow_unstable, lasing=self.steady.lasing)
        out.meta["stability_margin"] = self.stability_margin()
        return out


def build_system(
    params: ModelParams,
    *,
    refine: bool = True,
    b_gauge: int = -1,
    lower_populations=None,
) -> FluctuationSystem:
    """Steady state plus drift and diffusion matrices.

    ``b_gauge`` picks the sign of b+ in the real-amplitude gauge
    (b+ = b_gauge * sqrt(I_b / 2), b- = -b+); the output quadrature of b
    follows the same choice so spectra do not depend on it.
    """
    dr = derive_rates(params)
    steady = closed_form_steady(params, dr, b_gauge=b_gauge)
    if refine:
        steady = refine_steady(steady, params, dr)
    return FluctuationSystem(
        params=params,
        derived=dr,
        steady=steady,
        drift=build_drift(steady, params, dr),
        diffusion=build_diffusion(steady, params, dr, lower_populations),
        b_sign=-b_gauge,
    )


def log_grid(omega_min: float, omega_max: float, n: int) -> np.ndarray:
    return np.geomspace(omega_min, omega_max, n)


def linear_grid(omega_min: float, omega_max: float, n: int) -> np.ndarray:
    return np.linspace(omega_min, omega_max, n)
