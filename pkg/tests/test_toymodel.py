import math
import warnings

import numpy as np
import pytest

from vecselnoise.toymodel import (
    DensityState,
    ToyConfig,
    ToyIntegrationError,
    ToyOperators,
    TruncationWarning,
    antisymmetric_number,
    check_state,
    coherent_fock,
    evolve,
    expect,
    extract_effective_coefficients,
    initial_state,
    lindblad_rhs,
    phase_and_damping_rate,
)


def dense_lindblad(rho, cfg):
    # textbook construction with dense Kronecker products
    n = cfg.fock_cutoff + 1
    a1 = np.diag(np.sqrt(np.arange(1, n)), 1)
    I = np.eye(n)
    sm = np.array([[0, 1], [0, 0]], complex)
    sz = np.diag([-1.0, 1.0])
    A = np.kron(np.eye(2), np.kron(a1, I) + np.kron(I, a1))
    S = np.kron(sm, np.eye(n * n))
    Z = np.kron(sz, np.eye(n * n))
    H = cfg.g * (S.conj().T @ A + A.conj().T @ S)

    def L(x):
        return 2 * x @ rho @ x.conj().T - x.conj().T @ x @ rho - rho @ x.conj().T @ x

    return -1j * (H @ rho - rho @ H) + cfg.gamma_perp * L(Z) + cfg.gamma_2 * L(S)


def random_density(dim, rng):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_rhs_matches_dense(seed):
    cfg = ToyConfig(g=0.3, gamma_perp=0.7, gamma_2=0.2, fock_cutoff=3)
    rng = np.random.default_rng(seed)
    rho = random_density(cfg.dim, rng)
    assert np.allclose(lindblad_rhs(rho, cfg), dense_lindblad(rho, cfg), atol=1e-13)
    # also for non-Hermitian arguments, as met inside RK stages
    x = rng.normal(size=rho.shape) + 1j * rng.normal(size=rho.shape)
    assert np.allclose(lindblad_rhs(x, cfg), dense_lindblad(x, cfg), atol=1e-12)


def test_rhs_traceless_and_hermitian():
    cfg = ToyConfig(g=0.05, fock_cutoff=4)
    rho = random_density(cfg.dim, np.random.default_rng(5))
    out = lindblad_rhs(rho, cfg)
    assert abs(np.trace(out)) < 1e-13
    assert np.allclose(out, out.conj().T, atol=1e-14)


def test_antisymmetric_number_conserved():
    cfg = ToyConfig(g=0.05, fock_cutoff=8, alpha_a=0.3, alpha_b=-0.1)
    ops = ToyOperators(cfg)
    Nm = antisymmetric_number(cfg, ops)
    s0 = initial_state(cfg)
    s1 = evolve(s0, cfg, 10.0, ops=ops)
    rate = abs(expect(Nm, s1.rho) - expect(Nm, s0.rho)) / 10.0
    assert rate <= 1e-10


def test_coherent_state_normalized():
    v = coherent_fock(0.4 + 0.1j, 12)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    n = np.arange(12)
    assert np.sum(n * np.abs(v) ** 2) == pytest.approx(abs(0.4 + 0.1j) ** 2, rel=1e-8)


def test_uncoupled_emitter_decay_and_dephasing():
    cfg = ToyConfig(g=0.0, gamma_perp=0.5, gamma_2=0.1, fock_cutoff=2, alpha_a=0, alpha_b=0)
    n2 = 9
    e = np.array([1.0, 1.0]) / math.sqrt(2)
    psi = np.kron(e, np.eye(n2)[0])
    state = DensityState(np.outer(psi, psi.conj()))
    out = evolve(state, cfg, 3.0, cfg.max_step() / 8)
    up = out.rho[n2, n2].real
    coh = abs(out.rho[0, n2])
    # L(sigma^-) empties the upper level at 2 gamma_2, coherences decay at 4 gamma_perp + gamma_2
    assert up == pytest.approx(0.5 * math.exp(-2 * 0.1 * 3.0), rel=1e-8)
    assert coh == pytest.approx(0.5 * math.exp(-(4 * 0.5 + 0.1) * 3.0), rel=1e-7)


def test_rk4_fourth_order():
    cfg = ToyConfig(g=0.2, gamma_perp=1.0, gamma_2=0.3, fock_cutoff=3, alpha_a=0.3, alpha_b=0.1)
    s0 = initial_state(cfg)
    h = cfg.max_step()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        r1 = evolve(s0, cfg, 2.0, h).rho
        r2 = evolve(s0, cfg, 2.0, h / 2).rho
        r4 = evolve(s0, cfg, 2.0, h / 4).rho
    ratio = np.abs(r1 - r2).max() / np.abs(r2 - r4).max()
    assert 12 < ratio < 20


def test_invariants_enforced():
    with pytest.raises(ToyIntegrationError):
        check_state(np.diag([0.5, 0.4]).astype(complex))
    bad = np.array([[0.5, 0.1], [0.0, 0.5]], complex)
    with pytest.raises(ToyIntegrationError):
        check_state(bad)
    neg = np.diag([1.1, -0.1]).astype(complex)
    with pytest.raises(ToyIntegrationError):
        check_state(neg, positivity=True)


def test_step_bound_enforced():
    cfg = ToyConfig(fock_cutoff=2)
    with pytest.raises(ValueError):
        evolve(initial_state(cfg), cfg, 1.0, dt=10 * cfg.max_step())


def test_truncation_warning():
    cfg = ToyConfig(g=0.3, fock_cutoff=2, alpha_a=1.0, alpha_b=1.0)
    assert not cfg.truncation_safe()
    with pytest.warns(TruncationWarning):
        evolve(initial_state(cfg), cfg, 0.1)


def test_bad_config():
    with pytest.raises(ValueError):
        ToyConfig(fock_cutoff=1)
    with pytest.raises(ValueError):
        ToyConfig(gamma_perp=0.0)


def test_field_mean_stays_real():
    # the model is invariant under sigma_z times complex conjugation, so real
    # coherent amplitudes keep <a> real for all times
    cfg = ToyConfig(g=0.02, fock_cutoff=5, alpha_a=0.3, alpha_b=0.2)
    ops = ToyOperators(cfg)
    out = evolve(initial_state(cfg), cfg, 20.0, ops=ops)
    z = expect(ops.a, out.rho)
    assert abs(z.imag) <= 1e-12 * abs(z)


def test_amplitude_damping_rate():
    cfg = ToyConfig(g=0.01, fock_cutoff=3, alpha_a=0.2, alpha_b=0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        w, k = phase_and_damping_rate(cfg, 20.0)
    # adiabatic elimination of the dephased emitter
    assert k == pytest.approx(2 * cfg.g**2 / (4 * cfg.gamma_perp + cfg.gamma_2), rel=1e-3)
    assert abs(w) <= 1e-12


def test_zero_coupling_gives_zero_coefficients():
    cfg = ToyConfig(g=0.0, fock_cutoff=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        fit = extract_effective_coefficients(cfg, window=5.0)
    assert fit.dispersive_shift == 0.0 and fit.kerr_coefficient == 0.0
    assert fit.dispersive_target == 0.0 and fit.kerr_target == 0.0
    assert len(fit.lines()) >= 3
