"""Galerkin evolution in the Stokes eigenbasis with monotone implicit stepping.

The coefficients c_k(t) of u_m = sum_k c_k a_k obey

    dc_k/dt = (f, a_k) - (S(D(u_m)), D(a_k)) + T_k(c),

where the transport pairing T is assembled in the antisymmetrized form

    T[k, l] = ((V x a_l, grad a_k) - (V x a_k, grad a_l)) / 2,

a consistent discretization of the written tensor pairing whose contraction
with c vanishes structurally, so transport is energy-neutral to roundoff.
Implicit Euler steps are solved by Newton iteration with the constitutive
Hessian; monotonicity of the stress makes the per-step problem uniquely
solvable for any dt, and the scheme dissipates the discrete energy exactly
up to the Newton tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .constitutive import PPotential, hessian_coefficients, stress_field
from .domain import (
    Grid,
    VelocityField,
    divergence,
    leray_project,
    lp_norm,
    sym_gradient_field,
    velocity_gradient,
    _quad_weights,
)
from .expressions import evaluate
from .stokes import StokesBasis, solve_eigen

__all__ = [
    "SimConfig",
    "SimState",
    "EnergyLedger",
    "SimResult",
    "GalerkinSystem",
    "project_initial",
    "galerkin_rhs",
    "step_implicit_euler",
    "simulate",
]


@dataclass
class SimConfig:
    """Everything a run needs: law, grid, basis size, time stepping and data."""

    potential: PPotential
    grid: Grid
    modes: int = 8
    t_final: float = 1.0
    dt: float = 1e-2
    u0: tuple | None = None  # component expressions over x1..xn
    forcing: tuple | None = None  # component expressions, may use t
    transport: tuple | None = None  # solenoidal field V, tangential at the wall
    newton_tol: float = 1e-11
    newton_max_iter: int = 30
    seed: int = 0
    lagged_transport: bool = False  # V := u_m(t_n); experimental, not certified

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_final < self.dt:
            raise ValueError("t_final must be at least one step")
        if self.modes < 1:
            raise ValueError("need at least one mode")
        for name in ("u0", "forcing", "transport"):
            exprs = getattr(self, name)
            if exprs is not None and len(exprs) != self.grid.dim:
                raise ValueError(f"{name} needs {self.grid.dim} component expressions")

    @property
    def num_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def to_dict(self) -> dict:
        return {
            "potential": {
                "law": self.potential.law.value,
                "p": self.potential.p,
                "delta": self.potential.delta,
                "mu": self.potential.mu,
            },
            "grid": {
                "dim": self.grid.dim,
                "radius": self.grid.radius,
                "cells": self.grid.cells,
                "half_space": self.grid.half_space,
            },
            "modes": self.modes,
            "t_final": self.t_final,
            "dt": self.dt,
            "u0": list(self.u0) if self.u0 else None,
            "forcing": list(self.forcing) if self.forcing else None,
            "transport": list(self.transport) if self.transport else None,
            "newton_tol": self.newton_tol,
            "newton_max_iter": self.newton_max_iter,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        from .constitutive import PowerLaw

        pot = d.get("potential", {})
        grd = d.get("grid", {})
        return cls(
            potential=PPotential(
                law=PowerLaw(pot.get("law", "power-b")),
                p=float(pot.get("p", 2.0)),
                delta=float(pot.get("delta", 1.0)),
                mu=float(pot.get("mu", 1.0)),
            ),
            grid=Grid(
                dim=int(grd.get("dim", 2)),
                radius=float(grd.get("radius", 1.0)),
                cells=int(grd.get("cells", 8)),
                half_space=bool(grd.get("half_space", True)),
            ),
            modes=int(d.get("modes", 8)),
            t_final=float(d.get("t_final", 1.0)),
            dt=float(d.get("dt", 1e-2)),
            u0=tuple(d["u0"]) if d.get("u0") else None,
            forcing=tuple(d["forcing"]) if d.get("forcing") else None,
            transport=tuple(d["transport"]) if d.get("transport") else None,
            newton_tol=float(d.get("newton_tol", 1e-11)),
            newton_max_iter=int(d.get("newton_max_iter", 30)),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class SimState:
    t: float
    c: np.ndarray
    step: int = 0


@dataclass
class EnergyLedger:
    """Per-step bookkeeping of the discrete energy identity."""

    times: list = dataclass_field(default_factory=list)
    energy: list = dataclass_field(default_factory=list)
    dissipation: list = dataclass_field(default_factory=list)  # (S(D u), D u) dt
    work: list = dataclass_field(default_factory=list)  # (f, u) dt
    transport: list = dataclass_field(default_factory=list)  # c . T c dt
    inequality_residual: list = dataclass_field(default_factory=list)

    def record_initial(self, energy: float) -> None:
        self.times.append(0.0)
        self.energy.append(energy)

    def record_step(self, t, energy, diss_dt, work_dt, transport_dt) -> None:
        prev = self.energy[-1]
        self.times.append(t)
        self.energy.append(energy)
        self.dissipation.append(diss_dt)
        self.work.append(work_dt)
        self.transport.append(transport_dt)
        self.inequality_residual.append(energy - prev + 2.0 * diss_dt - 2.0 * work_dt)

    def max_upstep(self) -> float:
        return max(self.inequality_residual, default=0.0)

    def max_transport(self) -> float:
        return max((abs(x) for x in self.transport), default=0.0)

    def cumulative_bound_lhs(self) -> float:
        """max over times of [energy(t) + cumulative dissipation up to t]."""
        cum = np.concatenate([[0.0], np.cumsum(self.dissipation)])
        return float(np.max(np.asarray(self.energy) + cum))

    def rows(self):
        for n in range(1, len(self.energy)):
            yield (
                self.times[n],
                self.energy[n],
                self.dissipation[n - 1],
                self.work[n - 1],
                self.transport[n - 1],
            )


class GalerkinSystem:
    """Precomputed basis arrays and pairings for one configuration."""

    def __init__(
        self,
        config: SimConfig,
        basis: StokesBasis | None = None,
        v_field: VelocityField | None = None,
    ):
        self.config = config
        self.pp = config.potential
        self.grid = config.grid
        if basis is None:
            basis = solve_eigen(config.grid, config.modes, recover_pressures=False)
        if basis.num_modes < config.modes:
            raise ValueError("basis has fewer modes than the configuration asks for")
        self.basis = basis
        m = config.modes
        g = self.grid
        self.m = m
        self.wq = _quad_weights(g)
        self.fields = basis.fields[:m]
        self.strain = np.stack(
            [sym_gradient_field(VelocityField(g, self.fields[k])) for k in range(m)]
        )
        self.lam = basis.eigenvalues[:m].copy()

        self.v_field = self._load_transport(v_field)
        self.t_matrix = self._transport_matrix(self.v_field)
        self.max_newton_iterations = 0

        self._forcing_static = None
        self._forcing_exprs = config.forcing
        self._forcing_time_dependent = bool(
            config.forcing and any("t" in _names_of(e) for e in config.forcing)
        )
        if config.forcing and not self._forcing_time_dependent:
            f = VelocityField.from_expressions(g, config.forcing)
            self._forcing_static = self._project_onto_modes(f.data)
        self._f_cache: dict[float, np.ndarray] = {}

    # -- data loading -------------------------------------------------------

    def _load_transport(self, v_field: VelocityField | None) -> VelocityField | None:
        cfg = self.config
        if v_field is None and cfg.transport is None:
            return None
        raw = v_field or VelocityField.from_expressions(self.grid, cfg.transport)
        v = leray_project(raw)
        scale = max(lp_norm(v.data, 2.0, self.grid), 1e-30)
        div_res = lp_norm(divergence(v), 2.0, self.grid) / scale
        if self.grid.half_space:
            wall = np.abs(v.data[self.grid.normal_axis].take(0, axis=self.grid.normal_axis))
            trace_res = float(np.max(wall)) / scale
        else:
            trace_res = 0.0
        if div_res > 1e-8 or trace_res > 1e-8:
            raise ValueError(
                f"transport field fails solenoidal/tangential validation: "
                f"div={div_res:.2e}, trace={trace_res:.2e}"
            )
        return v

    def _project_onto_modes(self, data: np.ndarray) -> np.ndarray:
        return np.einsum("x,kx->k", (self.wq[None] * data).reshape(-1),
                         self.fields.reshape(self.m, -1))

    def _transport_matrix(self, v: VelocityField | None) -> np.ndarray:
        if v is None:
            return np.zeros((self.m, self.m))
        g = self.grid
        grads = np.stack(
            [
                velocity_gradient(VelocityField(g, self.fields[k]), slip_parity=True)
                for k in range(self.m)
            ]
        )  # (m, i, j, *shape): d a_j / d x_i
        # H_k[j] = sum_i V_i d a_k,j / d x_i, weighted by quadrature
        h = np.einsum("i...,kij...->kj...", v.data, grads)
        p = np.einsum(
            "kjx,ljx->kl",
            (h * self.wq).reshape(self.m, g.dim, -1),
            self.fields.reshape(self.m, g.dim, -1),
        )
        return 0.5 * (p - p.T)

    # -- pairings -----------------------------------------------------------

    def reconstruct(self, c: np.ndarray) -> VelocityField:
        return VelocityField(self.grid, np.einsum("k,k...->...", c, self.fields))

    def strain_of(self, c: np.ndarray) -> np.ndarray:
        return np.einsum("k,k...->...", c, self.strain)

    def forcing_vector(self, t: float) -> np.ndarray:
        if self._forcing_exprs is None:
            return np.zeros(self.m)
        if not self._forcing_time_dependent:
            return self._forcing_static
        if t not in self._f_cache:
            coords = self.grid.coords()
            data = np.stack(
                [evaluate(e, coords, t=t) for e in self._forcing_exprs]
            )
            self._f_cache[t] = self._project_onto_modes(data)
        return self._f_cache[t]

    def stress_vector(self, c: np.ndarray) -> np.ndarray:
        d = self.strain_of(c)
        s = stress_field(self.pp, d)
        return np.einsum(
            "x,kx->k",
            (s * self.wq).reshape(-1),
            self.strain.reshape(self.m, -1),
        )

    def dissipation_of(self, c: np.ndarray) -> float:
        return float(np.dot(c, self.stress_vector(c)))

    def stress_jacobian(self, c: np.ndarray) -> np.ndarray:
        d = self.strain_of(c)
        s_mag = np.sqrt(np.einsum("ij...,ij...->...", d, d))
        a1, g = hessian_coefficients(self.pp, s_mag)
        tk = np.einsum("ij...,kij...->k...", d, self.strain).reshape(self.m, -1)
        w = self.wq.reshape(-1)
        p1 = (tk * (w * a1.reshape(-1))) @ tk.T
        flat = self.strain.reshape(self.m, self.grid.dim**2, -1)
        p2 = np.einsum("kcx,lcx,x->kl", flat, flat, w * g.reshape(-1))
        return p1 + p2

    def rhs(self, c: np.ndarray, t: float) -> np.ndarray:
        return self.forcing_vector(t) - self.stress_vector(c) + self.t_matrix @ c


def _names_of(expr: str) -> set:
    import ast

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError:
        return set()
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)}


def project_initial(u0: VelocityField, basis: StokesBasis, modes: int | None = None):
    """Coefficients (u0, a_k) and the L2 reconstruction error."""
    g = basis.grid
    m = basis.num_modes if modes is None else modes
    wq = _quad_weights(g)
    c = np.einsum(
        "x,kx->k",
        (wq[None] * u0.data).reshape(-1),
        basis.fields[:m].reshape(m, -1),
    )
    recon = np.einsum("k,k...->...", c, basis.fields[:m])
    err = lp_norm(u0.data - recon, 2.0, g)
    return c, err


def galerkin_rhs(c: np.ndarray, t: float, system: GalerkinSystem) -> np.ndarray:
    """Coefficient time derivatives of the Galerkin system."""
    return system.rhs(c, t)


def step_implicit_euler(state: SimState, system: GalerkinSystem) -> SimState:
    """One implicit Euler step solved by damped Newton iteration.

    The residual is G(c) = c - c_n - dt rhs(c, t+dt); its Jacobian
    I + dt (S'(c) - T) has positive-definite symmetric part, so the step has
    a unique solution and undamped Newton converges for the certified
    configurations; a backtracking line search covers the rest.
    """
    cfg = system.config
    dt = cfg.dt
    t_next = state.t + dt
    c_n = state.c
    scale = max(1.0, float(np.linalg.norm(c_n)))
    tol = cfg.newton_tol * scale

    if cfg.lagged_transport:
        system.t_matrix = system._transport_matrix(system.reconstruct(c_n))

    c = c_n.copy()

    def residual(cc):
        return cc - c_n - dt * system.rhs(cc, t_next)

    g_vec = residual(c)
    res = float(np.linalg.norm(g_vec))
    eye = np.eye(system.m)
    for it in range(cfg.newton_max_iter):
        if res <= tol:
            system.max_newton_iterations = max(system.max_newton_iterations, it)
            return SimState(t=t_next, c=c, step=state.step + 1)
        jac = eye + dt * (system.stress_jacobian(c) - system.t_matrix)
        delta = np.linalg.solve(jac, -g_vec)
        alpha = 1.0
        while True:
            c_try = c + alpha * delta
            g_try = residual(c_try)
            res_try = float(np.linalg.norm(g_try))
            if res_try < res or res_try <= tol:
                c, g_vec, res = c_try, g_try, res_try
                break
            alpha *= 0.5
            if alpha < 1e-8:
                raise RuntimeError(
                    f"implicit step stalled at t={t_next:.4g}: residual {res:.3e}"
                )
    if res <= tol:
        system.max_newton_iterations = max(
            system.max_newton_iterations, cfg.newton_max_iter
        )
        return SimState(t=t_next, c=c, step=state.step + 1)
    raise RuntimeError(
        f"Newton failed to reach tol {tol:.1e} in {cfg.newton_max_iter} iterations "
        f"at t={t_next:.4g}: residual {res:.3e}"
    )


@dataclass
class SimResult:
    config: SimConfig
    times: np.ndarray
    coefficients: np.ndarray  # (steps + 1, m)
    ledger: EnergyLedger
    summary: dict
    system: GalerkinSystem

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("passed", False))


def _forcing_pprime_norm(system: GalerkinSystem, times, p: float) -> float:
    """Space-time L^{p'} norm of f, raised to the p' power."""
    cfg = system.config
    if cfg.forcing is None:
        return 0.0
    pprime = p / (p - 1.0)
    g = system.grid
    coords = g.coords()
    total = 0.0
    for t in times:
        data = np.stack([evaluate(e, coords, t=t) for e in cfg.forcing])
        mag = np.sqrt(np.sum(data**2, axis=0))
        total += cfg.dt * float(np.sum(system.wq * mag**pprime))
    return total


def simulate(
    config: SimConfig,
    basis: StokesBasis | None = None,
    u0_field: VelocityField | None = None,
    v_field: VelocityField | None = None,
    bound_constant: float = 1.0,
) -> SimResult:
    """Run to t_final, keep the energy ledger, and check the a-priori bound.

    The recorded bound is sup_t [ ||u_m(t)||^2 + cumulative dissipation ]
    against ||u_0||^2 + C ||f||^{p'}_{p'}; the empirical constant
    (lhs - ||u_0||^2) / ||f||^{p'} is reported whenever f is nonzero.
    """
    system = GalerkinSystem(config, basis=basis, v_field=v_field)
    if u0_field is not None:
        c0, recon_err = project_initial(u0_field, system.basis, modes=config.modes)
    elif config.u0 is not None:
        u0 = VelocityField.from_expressions(config.grid, config.u0)
        c0, recon_err = project_initial(u0, system.basis, modes=config.modes)
    else:
        c0, recon_err = np.zeros(config.modes), 0.0

    ledger = EnergyLedger()
    e0 = float(np.dot(c0, c0))
    ledger.record_initial(e0)

    state = SimState(t=0.0, c=c0)
    coeffs = [c0.copy()]
    steps = config.num_steps
    for _ in range(steps):
        state = step_implicit_euler(state, system)
        c = state.c
        energy = float(np.dot(c, c))
        diss_dt = config.dt * system.dissipation_of(c)
        work_dt = config.dt * float(np.dot(system.forcing_vector(state.t), c))
        transport_dt = config.dt * float(np.dot(c, system.t_matrix @ c))
        ledger.record_step(state.t, energy, diss_dt, work_dt, transport_dt)
        coeffs.append(c.copy())

    times = np.arange(steps + 1) * config.dt
    fnorm = _forcing_pprime_norm(system, times[1:], config.potential.p)
    bound_lhs = ledger.cumulative_bound_lhs()
    bound_rhs = e0 + bound_constant * fnorm
    slack = 1e-9 * max(1.0, e0)
    energy_scale = max(1.0, max(ledger.energy))
    summary = {
        "radius": config.grid.radius,
        "steps": steps,
        "initial_energy": e0,
        "final_energy": ledger.energy[-1],
        "sup_energy": max(ledger.energy),
        "total_dissipation": float(np.sum(ledger.dissipation)),
        "reconstruction_error": recon_err,
        "forcing_pprime_norm": fnorm,
        "bound_lhs": bound_lhs,
        "bound_rhs": bound_rhs,
        "bound_margin": bound_rhs + slack - bound_lhs,
        "bound_ok": bound_lhs <= bound_rhs + slack,
        "empirical_bound_constant": (
            (bound_lhs - e0) / fnorm if fnorm > 0 else 0.0
        ),
        "max_inequality_upstep": ledger.max_upstep(),
        "inequality_ok": ledger.max_upstep() <= 1e-9 * energy_scale,
        "max_transport": ledger.max_transport(),
        "transport_ok": ledger.max_transport()
        <= 1e-10 * max(1.0, max(ledger.energy)),
        "max_newton_iterations": system.max_newton_iterations,
    }
    summary["passed"] = bool(
        summary["bound_ok"] and summary["inequality_ok"] and summary["transport_ok"]
    )
    return SimResult(
        config=config,
        times=times,
        coefficients=np.array(coeffs),
        ledger=ledger,
        summary=summary,
        system=system,
    )
