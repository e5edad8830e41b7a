"""Shear-dependent constitutive laws and their structural certification.

Two built-in power-law families generate the extra stress from a convex
scalar potential F with F(0) = F'(0) = 0:

* ``PowerLaw.A``:  S(B) = mu (delta + |B|)^(q-2) B
* ``PowerLaw.B``:  S(B) = mu (delta + |B|^2)^((q-2)/2) B

Both come from Phi(B) = F(|B|) with, writing s = |B|,

* law A:  F(s) = mu [((delta+s)^q - delta^q)/q - delta ((delta+s)^(q-1) - delta^(q-1))/(q-1)]
* law B:  F(s) = (mu/q) [(delta + s^2)^(q/2) - delta^(q/2)]

so that F'(s)/s reproduces the stress prefactor.  The Hessian of Phi with
respect to the n^2 matrix entries is

    H[B]_{jk,lm} = a1(s) B_jk B_lm + g(s) d_jl d_km,

with g = F'/s and a1 = g'/s.  ``certify_bounds`` samples tensor pairs across
magnitudes and reports empirical extrema of the coercivity, monotonicity,
growth and Lipschitz ratios; a negative lower-bound ratio anywhere means the
law is not an admissible potential (or there is a bug).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .tensors import SymTensor, inner, norm, packed_weights

__all__ = [
    "PowerLaw",
    "PPotential",
    "ConstitutiveCertificate",
    "potential",
    "stress",
    "stress_hessian",
    "stress_hessian_fd",
    "stress_fd",
    "certify_bounds",
    "stress_field",
    "potential_field",
    "stress_prefactor",
    "hessian_coefficients",
]


class PowerLaw(str, enum.Enum):
    A = "power-a"
    B = "power-b"


@dataclass(frozen=True)
class PPotential:
    """A constitutive law: family, growth exponent p (> 1), shift delta, viscosity mu."""

    law: PowerLaw = PowerLaw.B
    p: float = 2.0
    delta: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if self.p <= 1.0:
            raise ValueError(f"growth exponent must exceed 1, got p={self.p}")
        if self.mu <= 0.0:
            raise ValueError(f"viscosity must be positive, got mu={self.mu}")
        if self.delta < 0.0:
            raise ValueError(f"delta must be nonnegative, got delta={self.delta}")
        if self.law == PowerLaw.A and self.delta == 0.0:
            # F for law A is not C^2 at zero strain when delta vanishes.
            raise ValueError("law A requires delta > 0")

    @property
    def q(self) -> float:
        """The (1.3)-style exponent; identical to p."""
        return self.p


def _f_value(pp: PPotential, s):
    s = np.asarray(s, dtype=float)
    q, d, mu = pp.p, pp.delta, pp.mu
    if pp.law == PowerLaw.B:
        return (mu / q) * ((d + s * s) ** (q / 2.0) - d ** (q / 2.0))
    t = d + s
    return mu * ((t**q - d**q) / q - d * (t ** (q - 1.0) - d ** (q - 1.0)) / (q - 1.0))


def stress_prefactor(pp: PPotential, s):
    """g(s) = F'(s)/s, the scalar viscosity factor: S(B) = g(|B|) B.

    For delta = 0 and p < 2 the factor diverges as s -> 0; callers that need
    S itself must mask s = 0 (the stress limit is exactly zero).
    """
    s = np.asarray(s, dtype=float)
    q, d, mu = pp.p, pp.delta, pp.mu
    with np.errstate(divide="ignore"):
        if pp.law == PowerLaw.B:
            return mu * (d + s * s) ** ((q - 2.0) / 2.0)
        return mu * (d + s) ** (q - 2.0)


def hessian_coefficients(pp: PPotential, s):
    """Coefficients (a1, g) of H[B] = a1 B (x) B + g I at strain magnitude s.

    a1 = g'(s)/s.  At s = 0 with law A the coefficient diverges while the
    Hessian stays finite (a1 B (x) B -> 0); the returned a1 is zeroed there so
    the assembled Hessian takes its limit value.
    """
    s = np.asarray(s, dtype=float)
    q, d, mu = pp.p, pp.delta, pp.mu
    g = stress_prefactor(pp, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        if pp.law == PowerLaw.B:
            a1 = mu * (q - 2.0) * (d + s * s) ** ((q - 4.0) / 2.0)
        else:
            a1 = mu * (q - 2.0) * (d + s) ** (q - 3.0) / s
    # a1 multiplies B (x) B, which vanishes at s = 0; zeroing the (possibly
    # divergent) coefficient there yields the correct Hessian limit.
    a1 = np.where(s == 0.0, 0.0, a1)
    return a1, g


def potential(pp: PPotential, b: SymTensor) -> float:
    """Phi(B) = F(|B|)."""
    return float(_f_value(pp, norm(b)))


def stress(pp: PPotential, b: SymTensor) -> SymTensor:
    """Extra stress S(B) = F'(|B|) B / |B|, continuously extended by S(0) = 0."""
    s = norm(b)
    if s == 0.0:
        return SymTensor.zero(b.dim)
    with np.errstate(invalid="ignore", over="ignore"):
        out = SymTensor(b.dim, stress_prefactor(pp, s) * b.packed)
    if not np.all(np.isfinite(out.packed)):
        raise FloatingPointError(f"non-finite stress at |B|={s} for {pp}")
    return out


def _check_hessian_domain(pp: PPotential, s: float) -> None:
    if s == 0.0 and pp.delta == 0.0 and pp.p < 2.0:
        raise ValueError("Hessian is unbounded at B = 0 when delta = 0 and p < 2")


def stress_hessian(pp: PPotential, b: SymTensor) -> np.ndarray:
    """Closed-form Hessian of Phi as an (n, n, n, n) array, symmetric in (jk) <-> (lm)."""
    s = norm(b)
    _check_hessian_domain(pp, s)
    a1, g = hessian_coefficients(pp, s)
    n = b.dim
    bm = b.to_matrix()
    eye4 = np.einsum("jl,km->jklm", np.eye(n), np.eye(n))
    return float(a1) * np.einsum("jk,lm->jklm", bm, bm) + float(g) * eye4


def _potential_of_matrix(pp: PPotential, m: np.ndarray) -> float:
    return float(_f_value(pp, np.linalg.norm(m)))


def _stress_of_matrix(pp: PPotential, m: np.ndarray) -> np.ndarray:
    s = np.linalg.norm(m)
    if s == 0.0:
        return np.zeros_like(m)
    return stress_prefactor(pp, s) * m


def stress_fd(pp: PPotential, b: SymTensor, step: float = 1e-6) -> np.ndarray:
    """Finite-difference gradient of the potential; independent oracle for ``stress``."""
    m = b.to_matrix()
    n = b.dim
    out = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            e = np.zeros((n, n))
            e[j, k] = step
            out[j, k] = (
                _potential_of_matrix(pp, m + e) - _potential_of_matrix(pp, m - e)
            ) / (2.0 * step)
    return out


def stress_hessian_fd(pp: PPotential, b: SymTensor, step: float = 1e-5) -> np.ndarray:
    """Central finite difference of the stress; validation fallback for the closed form."""
    s = norm(b)
    _check_hessian_domain(pp, s)
    m = b.to_matrix()
    n = b.dim
    out = np.zeros((n, n, n, n))
    for l in range(n):
        for mm in range(n):
            e = np.zeros((n, n))
            e[l, mm] = step
            out[:, :, l, mm] = (
                _stress_of_matrix(pp, m + e) - _stress_of_matrix(pp, m - e)
            ) / (2.0 * step)
    return out


# ---------------------------------------------------------------------------
# vectorized field kernels (packed or full-matrix nodal arrays)
# ---------------------------------------------------------------------------


def _field_magnitude(d: np.ndarray) -> np.ndarray:
    """|D| at every node for a strain field of shape (n, n, *grid shape)."""
    return np.sqrt(np.einsum("ij...,ij...->...", d, d))


def stress_field(pp: PPotential, d: np.ndarray) -> np.ndarray:
    """S(D) applied nodewise to a strain field of shape (n, n, *grid shape)."""
    s = _field_magnitude(d)
    g = stress_prefactor(pp, s)
    g = np.where(s == 0.0, 0.0, g)  # S(0) = 0 even where g diverges
    out = g * d
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite stress in field evaluation")
    return out


def potential_field(pp: PPotential, d: np.ndarray) -> np.ndarray:
    """Phi(D) at every node."""
    return _f_value(pp, _field_magnitude(d))


# ---------------------------------------------------------------------------
# sampling-based certification of the structural bounds
# ---------------------------------------------------------------------------


@dataclass
class ConstitutiveCertificate:
    """Empirical extrema of the structural ratios over sampled tensor pairs."""

    gamma1_est: float
    gamma2_est: float
    c1gamma1_est: float
    c2gamma2_est: float
    coercivity_est: float
    samples: int
    magnitude_range: tuple[float, float]
    violations: int
    law: str = ""
    p: float = 0.0
    delta: float = 0.0
    mu: float = 0.0
    seed: int = 0
    dim: int = 3
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "law": self.law,
            "p": self.p,
            "delta": self.delta,
            "mu": self.mu,
            "dim": self.dim,
            "seed": self.seed,
            "samples": self.samples,
            "magnitude_range": list(self.magnitude_range),
            "gamma1_est": self.gamma1_est,
            "gamma2_est": self.gamma2_est,
            "c1gamma1_est": self.c1gamma1_est,
            "c2gamma2_est": self.c2gamma2_est,
            "coercivity_est": self.coercivity_est,
            "violations": self.violations,
            "passed": self.passed,
            **self.extras,
        }


def _random_packed(rng: np.random.Generator, count: int, dim: int, lo: float, hi: float):
    """Packed tensors with log-uniform norms in [lo, hi] and uniform directions."""
    w = packed_weights(dim)
    y = rng.standard_normal((count, w.size)) / np.sqrt(w)
    nrm = np.sqrt(np.einsum("k,nk,nk->n", w, y, y))
    nrm = np.where(nrm == 0.0, 1.0, nrm)
    mags = np.exp(rng.uniform(np.log(lo), np.log(hi), size=count))
    packed = y * (mags / nrm)[:, None]
    return packed, mags


def certify_bounds(
    pp: PPotential,
    samples: int,
    magnitude_range: tuple[float, float] = (1e-3, 1e3),
    dim: int = 3,
    seed: int = 0,
) -> ConstitutiveCertificate:
    """Sample (B, C) pairs and estimate the structural constants of the law.

    Lower-bound ratios (Hessian quadratic form, monotonicity, coercivity)
    must be strictly positive; any nonpositive value counts as a violation.
    Upper-bound ratios (Hessian norm, Lipschitz) are reported as maxima.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = magnitude_range
    w = packed_weights(dim)

    b, sb = _random_packed(rng, samples, dim, lo, hi)
    c, sc = _random_packed(rng, samples, dim, lo, hi)
    pm2 = (pp.p - 2.0) / 2.0

    gb = stress_prefactor(pp, sb)
    gc = stress_prefactor(pp, sc)
    a1b, _ = hessian_coefficients(pp, sb)

    # Hessian quadratic form H[B](C, C) = a1 (B:C)^2 + g |C|^2
    bc = np.einsum("k,nk,nk->n", w, b, c)
    qf = a1b * bc**2 + gb * sc**2
    wb = (1.0 + sb**2) ** pm2
    gamma1_ratios = qf / (wb * sc**2)

    # operator norm of the Hessian on matrices: eigenvalues are g (orthogonal
    # to B) and a1 |B|^2 + g (along B)
    hnorm = np.maximum(np.abs(gb), np.abs(a1b * sb**2 + gb))
    gamma2_ratios = hnorm / wb

    # difference ratios: monotonicity (lower) and Lipschitz (upper)
    ds = gb[:, None] * b - gc[:, None] * c
    diff = b - c
    dn2 = np.einsum("k,nk,nk->n", w, diff, diff)
    mono = np.einsum("k,nk,nk->n", w, ds, diff)
    dsn = np.sqrt(np.einsum("k,nk,nk->n", w, ds, ds))
    wbc = (1.0 + sb**2 + sc**2) ** pm2
    mono_ratios = mono / (wbc * dn2)
    lip_ratios = dsn / (wbc * np.sqrt(dn2))

    # coercivity S(B):B against the weighted magnitude
    coer_ratios = gb * sb**2 / (wb * sb**2)

    violations = int(np.sum((gamma1_ratios <= 0) | (mono_ratios <= 0) | (coer_ratios <= 0)))

    return ConstitutiveCertificate(
        gamma1_est=float(np.min(gamma1_ratios)),
        gamma2_est=float(np.max(gamma2_ratios)),
        c1gamma1_est=float(np.min(mono_ratios)),
        c2gamma2_est=float(np.max(lip_ratios)),
        coercivity_est=float(np.min(coer_ratios)),
        samples=samples,
        magnitude_range=(lo, hi),
        violations=violations,
        law=pp.law.value,
        p=pp.p,
        delta=pp.delta,
        mu=pp.mu,
        seed=seed,
        dim=dim,
        extras={
            "monotonicity_min": float(np.min(mono)),
        },
    )
