import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipflow.constitutive import (
    PPotential,
    PowerLaw,
    certify_bounds,
    hessian_coefficients,
    potential,
    potential_field,
    stress,
    stress_fd,
    stress_field,
    stress_hessian,
    stress_hessian_fd,
    stress_prefactor,
)
from slipflow.tensors import SymTensor, inner, norm, random_sym_tensor

LAWS = (PowerLaw.A, PowerLaw.B)
EXPONENTS = (1.9, 2.0, 2.5, 3.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        PPotential(PowerLaw.B, p=1.0)
    with pytest.raises(ValueError):
        PPotential(PowerLaw.B, p=2.0, mu=0.0)
    with pytest.raises(ValueError):
        PPotential(PowerLaw.B, p=2.0, delta=-0.1)
    with pytest.raises(ValueError):
        PPotential(PowerLaw.A, p=2.5, delta=0.0)  # not C^2 at zero strain


def test_potential_at_zero():
    for law in LAWS:
        pp = PPotential(law, p=2.7, delta=1.0)
        assert potential(pp, SymTensor.zero(3)) == 0.0


def test_newtonian_quadratic_potential():
    pp = PPotential(PowerLaw.B, p=2.0, delta=0.0, mu=1.0)
    b = SymTensor.identity(2)  # |B| = sqrt(2)
    assert potential(pp, b) == pytest.approx(1.0, rel=1e-14)


def test_potential_power4_value():
    # F(s) = (mu/q) [(delta + s^2)^{q/2} - delta^{q/2}] at s = 1
    pp = PPotential(PowerLaw.B, p=4.0, delta=1.0, mu=1.0)
    b = SymTensor(3, np.array([1.0, 0, 0, 0, 0, 0]))
    assert potential(pp, b) == pytest.approx(0.75, rel=1e-14)
    # F' must reproduce the stress prefactor: S = (delta + |B|^2)^{(q-2)/2} B
    s = stress(pp, b)
    assert np.allclose(s.packed, 2.0 * b.packed, rtol=1e-14)


def test_stress_vanishes_at_zero():
    for law in LAWS:
        pp = PPotential(law, p=1.9, delta=1.0)
        assert np.all(stress(pp, SymTensor.zero(3)).packed == 0.0)


def test_newtonian_stress_exact(rng):
    pp = PPotential(PowerLaw.B, p=2.0, delta=0.4, mu=1.7)
    for _ in range(20):
        b = random_sym_tensor(rng, 3, 10 ** rng.uniform(-3, 3))
        s = stress(pp, b)
        assert np.array_equal(s.packed, 1.7 * b.packed)


def test_stress_derived_example():
    pp = PPotential(PowerLaw.B, p=4.0, delta=0.5, mu=1.0)
    b = SymTensor(2, np.array([0.0, 0.5, 0.0]))  # |B|^2 = 1/2
    s = stress(pp, b)
    assert np.allclose(s.packed, b.packed, rtol=1e-15)
    # cross-check against the finite-difference gradient of the potential
    fd = stress_fd(pp, b)
    assert np.allclose(s.to_matrix(), fd, rtol=1e-7, atol=1e-10)


def test_stress_gradient_consistency_bulk(rng):
    # 1e3 random points across laws and exponents, relative error <= 1e-6
    worst = 0.0
    for law in LAWS:
        for p in (1.9, 2.5):
            pp = PPotential(law, p=p, delta=1.0)
            for _ in range(250):
                b = random_sym_tensor(rng, 3, 10 ** rng.uniform(-2, 2))
                s = stress(pp, b).to_matrix()
                fd = stress_fd(pp, b)
                worst = max(
                    worst, np.linalg.norm(s - fd) / max(np.linalg.norm(s), 1e-30)
                )
    assert worst <= 1e-6


def test_hessian_newtonian_identity():
    pp = PPotential(PowerLaw.B, p=2.0, delta=0.3, mu=1.0)
    h = stress_hessian(pp, SymTensor.identity(3))
    eye4 = np.einsum("jl,km->jklm", np.eye(3), np.eye(3))
    assert np.allclose(h, eye4, atol=1e-15)


def test_hessian_fd_agreement(rng):
    for law in LAWS:
        for p in EXPONENTS:
            pp = PPotential(law, p=p, delta=1.0)
            b = random_sym_tensor(rng, 3, 1.7)
            h = stress_hessian(pp, b)
            hfd = stress_hessian_fd(pp, b, step=1e-5)
            rel = np.linalg.norm((h - hfd).ravel()) / np.linalg.norm(h.ravel())
            assert rel <= 1e-6, (law, p, rel)


def test_hessian_pair_symmetry_exact(rng):
    pp = PPotential(PowerLaw.B, p=2.5, delta=1.0)
    b = random_sym_tensor(rng, 3, 0.8)
    h = stress_hessian(pp, b)
    assert np.array_equal(h, h.transpose(2, 3, 0, 1))


def test_hessian_singular_point_rejected():
    pp = PPotential(PowerLaw.B, p=1.9, delta=0.0)
    with pytest.raises(ValueError):
        stress_hessian(pp, SymTensor.zero(3))
    # fine away from zero
    stress_hessian(pp, SymTensor.identity(3))


def test_monotonicity_all_laws(rng):
    for law in LAWS:
        for p in EXPONENTS:
            pp = PPotential(law, p=p, delta=1.0)
            for _ in range(200):
                b = random_sym_tensor(rng, 3, 10 ** rng.uniform(-3, 3))
                c = random_sym_tensor(rng, 3, 10 ** rng.uniform(-3, 3))
                gap = inner(stress(pp, b) - stress(pp, c), b - c)
                assert gap >= 0.0, (law, p, gap)


def test_convexity_along_segments(rng):
    pp = PPotential(PowerLaw.B, p=2.5, delta=1.0)
    for _ in range(1000):
        b = random_sym_tensor(rng, 3, 10 ** rng.uniform(-1, 1))
        c = random_sym_tensor(rng, 3, 10 ** rng.uniform(-1, 1))
        mid = 0.5 * (b + c)
        assert potential(pp, mid) <= 0.5 * (
            potential(pp, b) + potential(pp, c)
        ) + 1e-12


def test_coercivity_estimate_stable_under_resampling():
    pp = PPotential(PowerLaw.B, p=2.5, delta=1.0)
    c1 = certify_bounds(pp, samples=20_000, seed=3).coercivity_est
    c2 = certify_bounds(pp, samples=40_000, seed=4).coercivity_est
    assert c1 > 0 and c2 > 0
    assert abs(c2 - c1) <= 0.2 * c1


def test_certificate_newtonian_all_ratios_one():
    cert = certify_bounds(PPotential(PowerLaw.B, p=2.0, delta=1.0), samples=5000)
    assert cert.gamma1_est == 1.0
    assert cert.gamma2_est == 1.0
    assert cert.c1gamma1_est == 1.0
    assert cert.c2gamma2_est == 1.0
    assert cert.coercivity_est == 1.0
    assert cert.violations == 0
    assert cert.passed


def test_certificate_sampling_run():
    cert = certify_bounds(
        PPotential(PowerLaw.B, p=2.5, delta=1.0),
        samples=100_000,
        magnitude_range=(1e-3, 1e3),
        seed=0,
    )
    assert cert.violations == 0
    assert cert.gamma1_est > 0 and cert.c1gamma1_est > 0
    assert np.isfinite(cert.gamma2_est) and np.isfinite(cert.c2gamma2_est)
    d = cert.to_dict()
    assert d["passed"] is True and d["samples"] == 100_000


def test_certificate_rejects_bad_sample_count():
    with pytest.raises(ValueError):
        certify_bounds(PPotential(), samples=0)


def test_stress_field_matches_pointwise(rng):
    pp = PPotential(PowerLaw.A, p=2.2, delta=0.7, mu=1.3)
    d = rng.standard_normal((2, 2, 5, 4))
    d = 0.5 * (d + d.transpose(1, 0, 2, 3))
    s = stress_field(pp, d)
    b = SymTensor.from_matrix(d[:, :, 2, 1])
    assert np.allclose(s[:, :, 2, 1], stress(pp, b).to_matrix(), rtol=1e-13)
    phi = potential_field(pp, d)
    assert phi[2, 1] == pytest.approx(potential(pp, b), rel=1e-13)


def test_stress_field_zero_strain_masked():
    pp = PPotential(PowerLaw.B, p=1.9, delta=0.0)  # singular prefactor at 0
    d = np.zeros((2, 2, 3, 3))
    assert np.all(stress_field(pp, d) == 0.0)


def test_stress_overflow_is_hard_failure():
    pp = PPotential(PowerLaw.B, p=3.0, delta=1.0)
    b = SymTensor(2, np.array([1e200, 0.0, 1e200]))
    with pytest.raises(FloatingPointError):
        stress(pp, b)


@settings(max_examples=80, deadline=None)
@given(
    p=st.floats(1.5, 4.0),
    mag=st.floats(1e-3, 1e3),
    law=st.sampled_from(LAWS),
)
def test_stress_parallel_and_dissipative(p, mag, law):
    pp = PPotential(law, p=p, delta=1.0)
    rng = np.random.default_rng(7)
    b = random_sym_tensor(rng, 3, mag)
    s = stress(pp, b)
    # stress is a positive scalar multiple of the strain
    g = stress_prefactor(pp, norm(b))
    assert np.allclose(s.packed, g * b.packed, rtol=1e-12)
    assert inner(s, b) >= 0.0


def test_hessian_coefficients_limit_at_zero():
    for law in LAWS:
        pp = PPotential(law, p=2.5, delta=1.0)
        a1, g = hessian_coefficients(pp, 0.0)
        assert a1 == 0.0  # masked limit, multiplies B (x) B = 0
        assert g > 0.0
