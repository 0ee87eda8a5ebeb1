import dataclasses

import numpy as np
import pytest
from scipy.integrate import quad, simpson

from qeraser import (
    ApparatusConfig,
    DegenerateConditioningError,
    DomainError,
    IdlerDetector,
    SlitLabel,
    conditional_density,
    detector_probability,
    idler_transfer,
    joint_density,
    marginal_density_d0,
    normalization_constant,
    normalized_marginal,
    sinc,
    slit_amplitude,
    symmetric_grid,
    transfer_matrix,
)

D1, D2 = IdlerDetector.D1, IdlerDetector.D2
BS_OUT = ApparatusConfig(beam_splitter_in=False)
BS_IN = ApparatusConfig(beam_splitter_in=True)

# sin(0.1*pi)/(0.1*pi), evaluated independently before the module existed.
SINC_TENTH_PI = 0.983631643083466


def test_sinc_basics():
    assert sinc(0.0) == 1.0
    assert sinc(np.pi) == pytest.approx(0.0, abs=1e-16)
    # series branch joins the direct branch smoothly
    z = np.array([1e-5, 9.9e-5, 1.01e-4, 1e-3])
    direct = np.sin(z) / z
    assert np.allclose(sinc(z), direct, rtol=0, atol=1e-15)


def test_slit_amplitude_at_center():
    amp = slit_amplitude(0.0, SlitLabel.A, BS_OUT)
    assert amp == pytest.approx(1.0 + 0.0j, abs=1e-15)


def test_slit_amplitude_half_period():
    amp = slit_amplitude(0.5, SlitLabel.A, BS_OUT)
    assert abs(amp) == pytest.approx(SINC_TENTH_PI, abs=1e-12)
    assert np.angle(amp) == pytest.approx(np.pi / 2, abs=1e-12)


def test_slit_mirror_symmetry():
    u = np.linspace(-5, 5, 1001)
    a = np.abs(slit_amplitude(u, SlitLabel.A, BS_OUT))
    b = np.abs(slit_amplitude(-u, SlitLabel.B, BS_OUT))
    assert np.allclose(a, b, rtol=0, atol=1e-15)


def test_which_path_transfer():
    assert idler_transfer(SlitLabel.A, D1, bs_in=False) == 1.0 + 0.0j
    assert idler_transfer(SlitLabel.A, D2, bs_in=False) == 0.0 + 0.0j
    assert idler_transfer(SlitLabel.B, D2, bs_in=False) == 1.0 + 0.0j
    assert idler_transfer(SlitLabel.B, D1, bs_in=False) == 0.0 + 0.0j


def test_beam_splitter_transfer_is_half_half():
    for slit in SlitLabel:
        for det in IdlerDetector:
            assert abs(idler_transfer(slit, det, bs_in=True)) ** 2 == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("bs_in", [False, True])
def test_transfer_unitarity(bs_in):
    m = transfer_matrix(bs_in)
    assert np.allclose(m.conj().T @ m, np.eye(2), rtol=0, atol=1e-15)


def test_joint_density_center_value():
    assert joint_density(0.0, D1, BS_IN) == pytest.approx(0.5, abs=1e-15)


def test_joint_density_antifringe_null():
    # (1 - sin(2 pi u))/2 vanishes at u = 1/4: direct complex arithmetic
    # must reproduce the null.
    assert joint_density(0.25, D2, BS_IN) == pytest.approx(0.0, abs=1e-16)


def test_joint_density_which_path_is_pure_envelope():
    u = np.linspace(-5, 5, 4001)
    beta = BS_OUT.slit_ratio
    expected = 0.5 * sinc(np.pi * beta * u) ** 2
    assert np.allclose(joint_density(u, D1, BS_OUT), expected, rtol=0, atol=1e-15)
    # no fringe-period oscillation: inner product with sin/cos vanishes
    dens = joint_density(u, D1, BS_OUT)
    x = np.stack([dens, dens * np.sin(2 * np.pi * u), dens * np.cos(2 * np.pi * u)], axis=1)
    coef, *_ = np.linalg.lstsq(x, dens, rcond=None)
    assert np.hypot(coef[1], coef[2]) / coef[0] < 1e-12


def test_joint_density_domain_error():
    with pytest.raises(DomainError):
        joint_density(5.001, D1, BS_IN)
    with pytest.raises(DomainError):
        marginal_density_d0(np.array([0.0, -6.0]), BS_IN)


def test_marginal_center_and_symmetry():
    assert marginal_density_d0(0.0, BS_OUT) == pytest.approx(1.0, abs=1e-15)
    assert marginal_density_d0(0.25, BS_OUT) == marginal_density_d0(-0.25, BS_OUT)


def test_no_signaling_identity_dense_grid():
    # The observable D0 statistics cannot depend on the idler-arm routing:
    # bs in and bs out give the same marginal everywhere.
    u = symmetric_grid(5.0, 10001)
    diff = marginal_density_d0(u, BS_IN) - marginal_density_d0(u, BS_OUT)
    assert np.max(np.abs(diff)) < 1e-12


@pytest.mark.parametrize("cfg", [BS_OUT, BS_IN,
                                 dataclasses.replace(BS_IN, envelope_offset=0.3)])
def test_completeness_identity(cfg):
    u = symmetric_grid(cfg.detector_range, 10001)
    total = joint_density(u, D1, cfg) + joint_density(u, D2, cfg)
    assert np.max(np.abs(total - marginal_density_d0(u, cfg))) < 1e-12


def test_conditional_normalized_by_adaptive_quadrature():
    # Independent check of the Simpson normalization: adaptive quadrature.
    for cfg in (BS_OUT, BS_IN):
        for det in IdlerDetector:
            val, _ = quad(lambda x: conditional_density(x, det, cfg), -5, 5, limit=200)
            assert val == pytest.approx(1.0, abs=1e-8)
    val, _ = quad(lambda x: normalized_marginal(x, BS_IN), -5, 5, limit=200)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_conditional_full_visibility_at_center():
    # (1 + sin 2 pi u) swings between 0 and 2: the conditional touches zero
    # and twice the (normalized) envelope, i.e. unit visibility.
    norm = normalization_constant(BS_IN)
    top = conditional_density(0.25, D1, BS_IN)
    env = marginal_density_d0(0.25, BS_IN) / norm
    assert top == pytest.approx(2.0 * env, rel=1e-12)
    assert conditional_density(-0.25, D1, BS_IN) < 1e-15


def test_conditional_which_path_matches_single_slit_envelope():
    cfg = dataclasses.replace(BS_OUT, envelope_offset=0.3)
    u = np.linspace(-4, 4, 2001)
    beta = cfg.slit_ratio
    env_a = sinc(np.pi * beta * (u - cfg.envelope_offset)) ** 2
    env_a /= simpson(sinc(np.pi * beta * (symmetric_grid(5.0)
                                          - cfg.envelope_offset)) ** 2, x=symmetric_grid(5.0))
    assert np.allclose(conditional_density(u, D1, cfg), env_a, rtol=1e-9, atol=1e-12)


def test_antifringe_mirror_identity():
    # Exact pointwise statement of the antifringe relation: D2 is the
    # mirror image of D1 (the envelope is even, the fringe flips sign).
    u = symmetric_grid(5.0, 10001)
    d1 = conditional_density(u, D1, BS_IN)
    d2 = conditional_density(-u, D2, BS_IN)
    assert np.max(np.abs(d1 - d2)) < 1e-12


def test_antifringe_half_period_shift_of_fringe_factor():
    # After dividing out the envelope, D1's oscillation is exactly D2's
    # shifted by half a period.
    u = symmetric_grid(4.5, 9001)
    env_u = marginal_density_d0(u, BS_IN)
    env_s = marginal_density_d0(u + 0.5, BS_IN)
    f1 = joint_density(u, D1, BS_IN) / env_u
    f2 = joint_density(u + 0.5, D2, BS_IN) / env_s
    assert np.max(np.abs(f1 - f2)) < 1e-12


@pytest.mark.parametrize("k", [-1, 0, 1])
def test_fringe_extrema_near_center(k):
    # The envelope slope drags each local maximum slightly off 1/4 + k
    # (by ~2e-3 at k=0, ~2e-2 at |k|=1); the D2 null at those points is exact.
    x = 0.25 + k
    window = np.linspace(x - 0.2, x + 0.2, 4001)
    vals = conditional_density(window, D1, BS_IN)
    u_max = window[np.argmax(vals)]
    assert abs(u_max - x) < 0.02
    assert conditional_density(x, D1, BS_IN) >= 0.995 * vals.max()
    assert conditional_density(x, D2, BS_IN) < 1e-12


def test_detector_probabilities():
    for cfg in (BS_OUT, BS_IN):
        assert detector_probability(D1, cfg) == pytest.approx(0.5, abs=1e-10)
        total = detector_probability(D1, cfg) + detector_probability(D2, cfg)
        assert total == pytest.approx(1.0, abs=1e-10)
    # equal-intensity slits keep the split even regardless of envelope offset
    cfg = dataclasses.replace(BS_OUT, envelope_offset=0.3)
    assert detector_probability(D1, cfg) == pytest.approx(0.5, abs=1e-10)


def test_marginal_has_no_fringe_component():
    # Envelope-anchored least squares on the exact marginal: the fitted
    # fringe amplitude is zero to rounding, which is the operational meaning
    # of "no interference pattern at D0".
    u = symmetric_grid(5.0, 10001)
    dens = marginal_density_d0(u, BS_IN)
    x = np.stack([dens, dens * np.sin(2 * np.pi * u), dens * np.cos(2 * np.pi * u)], axis=1)
    coef, *_ = np.linalg.lstsq(x, dens, rcond=None)
    assert np.hypot(coef[1], coef[2]) / coef[0] < 1e-12
    assert abs(simpson(dens * np.sin(2 * np.pi * u), x=u)) < 1e-12


def test_degenerate_conditioning_guard(monkeypatch):
    # Degenerate conditioning cannot occur for the modeled configurations;
    # exercise the guard directly through a zero-weight density.
    from qeraser import amplitudes

    amplitudes._detector_weight.cache_clear()
    monkeypatch.setattr(
        amplitudes, "joint_density",
        lambda u, det, c: np.zeros_like(np.asarray(u, dtype=float)))
    try:
        with pytest.raises(DegenerateConditioningError):
            amplitudes.conditional_density(0.0, D1, BS_OUT)
    finally:
        amplitudes._detector_weight.cache_clear()
