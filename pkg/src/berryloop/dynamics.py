"""Adaptive real-time variational dynamics around the twist loop.

Per accepted step: grow the ansatz TETRIS-style until the McLachlan
distance is below the cutoff, pick the time step from the parameter-update
rule max|theta_dot| dt < dtheta_max, then advance theta and both global
phase integrals with one classical RK4 step whose stage Hamiltonians sit
at the exact stage times.  The loop schedule runs t: 0 -> T/2 with
rho = 2 pi t / T, then t: T/2 -> 0 with rho = 2 pi (T - t) / T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import (
    ORIGIN_DYNAMICS,
    REAL_TIME,
    Ansatz,
    EomWorkspace,
    resource_metrics,
    screen_pool,
)
from .imag_time import STALL_TOL, _trailing_zero_generators
from .model import OperatorPool

HALF_FORWARD = "forward"
HALF_BACKWARD = "backward"


@dataclass
class DynConfig:
    """Real-time evolution and growth knobs.

    dt_max / dt_init default to T/200 of the schedule when left None.
    Setting dtheta_max to math.inf turns the adaptive step rule off, so
    dt_max acts as a fixed step size.
    """

    pool: OperatorPool
    l2_cut: float = 1e-4
    dtheta_max: float = 0.01
    dt_init: float | None = None
    dt_max: float | None = None
    lambda_reg: float = 1e-6

    def __post_init__(self):
        if self.l2_cut <= 0 or self.dtheta_max <= 0 or self.lambda_reg < 0:
            raise ValueError("l2_cut, dtheta_max must be positive; lambda_reg >= 0")
        for name in ("dt_init", "dt_max"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive when set")


@dataclass(frozen=True)
class LoopSchedule:
    """Cyclic adiabatic protocol: rho winds 0 -> 2 pi while t goes out and back."""

    t_total: float

    def __post_init__(self):
        if self.t_total <= 0:
            raise ValueError("loop time T must be positive")

    @property
    def boundary(self) -> float:
        return self.t_total / 2.0

    def rho_of(self, t: float, half: str) -> float:
        if half == HALF_FORWARD:
            return 2.0 * math.pi * t / self.t_total
        if half == HALF_BACKWARD:
            return 2.0 * math.pi * (self.t_total - t) / self.t_total
        raise ValueError(f"unknown half {half!r}")

    @property
    def halves(self):
        return (
            (HALF_FORWARD, 0.0, self.boundary, 1.0),
            (HALF_BACKWARD, self.boundary, 0.0, -1.0),
        )


@dataclass(frozen=True)
class PhaseAccumulator:
    """Global-phase integrals: dynamical (phi_g1) and geometric (phi_g2)."""

    phi_g1: float = 0.0
    phi_g2: float = 0.0

    @property
    def phi_g(self) -> float:
        return self.phi_g1 + self.phi_g2


@dataclass
class TrajectoryPoint:
    step: int
    t: float
    rho: float
    half: str
    energy: float
    l2: float
    n_theta: int
    cnot: int
    depth: int
    phi_g1: float
    phi_g2: float
    state: np.ndarray | None = None
    infid_f: float = math.nan
    infid_ft: float = math.nan


@dataclass
class TrajectoryRecord:
    points: list
    metadata: dict = field(default_factory=dict)
    saturated: bool = False
    growth_events: list = field(default_factory=list)

    @property
    def boundary_index(self) -> int:
        """Index of the first point of the backward half (rho = pi there)."""
        for i, p in enumerate(self.points):
            if p.half == HALF_BACKWARD:
                return i
        return len(self.points) - 1


def adaptive_dt(theta_dot: np.ndarray, cfg: DynConfig, dt_max: float | None = None) -> float:
    """dt = min(dt_max, dtheta_max / max|theta_dot|); dt_max when at rest."""
    cap = dt_max if dt_max is not None else cfg.dt_max
    if cap is None:
        raise ValueError("dt_max is unset; pass it or set it on the config")
    peak = float(np.max(np.abs(theta_dot))) if theta_dot.size else 0.0
    if peak == 0.0 or not math.isfinite(cfg.dtheta_max):
        return cap
    return min(cap, cfg.dtheta_max / peak)


def _stage(a: Ansatz, thetas, h, lambda_reg):
    """(theta_dot, energy, geometric integrand) at the given point."""
    ws = EomWorkspace(a, h, lambda_reg, mode=REAL_TIME, need_var=False,
                      thetas=thetas)
    return ws.theta_dot, ws.energy, ws.phase_velocity()


def _rk4_advance(a, thetas, ham_at, t, dt, lambda_reg, stage1=None):
    """One classical RK4 step of theta plus the two phase quadratures."""
    k1 = stage1 if stage1 is not None else _stage(a, thetas, ham_at(t), lambda_reg)
    h_mid = ham_at(t + dt / 2.0)
    k2 = _stage(a, thetas + (dt / 2.0) * k1[0], h_mid, lambda_reg)
    k3 = _stage(a, thetas + (dt / 2.0) * k2[0], h_mid, lambda_reg)
    k4 = _stage(a, thetas + dt * k3[0], ham_at(t + dt), lambda_reg)
    new_thetas = thetas + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    dphi1 = (dt / 6.0) * (-k1[1] - 2.0 * k2[1] - 2.0 * k3[1] - k4[1])
    dphi2 = (dt / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    if not np.all(np.isfinite(new_thetas)):
        raise FloatingPointError("non-finite parameters after RK4 step")
    return new_thetas, dphi1, dphi2


def rk4_step(a: Ansatz, ham_at, t: float, dt: float, acc: PhaseAccumulator,
             cfg: DynConfig):
    """Advance a copy of the ansatz and the phase accumulator by one step.

    The ansatz structure is frozen within the step; only angles move.
    """
    out = a.copy()
    new_thetas, dphi1, dphi2 = _rk4_advance(
        out, out.thetas, ham_at, t, dt, cfg.lambda_reg
    )
    out.set_thetas(new_thetas)
    return out, PhaseAccumulator(acc.phi_g1 + dphi1, acc.phi_g2 + dphi2)


def _grow(a: Ansatz, ws: EomWorkspace, cfg: DynConfig, growth_events: list) -> bool:
    """TETRIS growth: rank candidates by post-append L2, append the best,
    then walk the ranking appending disjoint-support candidates until the
    qubits are covered.  Returns True when growth saturates.
    """
    pool = cfg.pool.elements
    all_qubits = (1 << a.n_qubits) - 1
    saturated = False
    while ws.l2 > cfg.l2_cut:
        l2_cand, reduction = screen_pool(ws, pool)
        skip = _trailing_zero_generators(a)
        if skip:
            for j, gen in enumerate(pool):
                if (gen.x_mask, gen.z_mask) in skip:
                    l2_cand[j] = np.inf
                    reduction[j] = 0.0
        order = np.argsort(l2_cand, kind="stable")
        if reduction[order[0]] <= STALL_TOL:
            saturated = True
            break
        covered = 0
        appended = []
        for idx in order:
            idx = int(idx)
            if not np.isfinite(l2_cand[idx]):
                continue
            gen = pool[idx]
            if appended and (gen.support & covered):
                continue
            a.append(gen, 0.0, ORIGIN_DYNAMICS)
            ws.append_column(gen)
            covered |= gen.support
            appended.append(gen)
            if covered == all_qubits:
                break
        growth_events.append(appended)
    return saturated


def screen_and_grow(a: Ansatz, h, cfg: DynConfig):
    """Grown copy of the ansatz at the current point (public surface).

    Returns (ansatz, saturated).  The engine uses the in-place variant to
    keep its workspace incremental.
    """
    out = a.copy()
    ws = EomWorkspace(out, h, cfg.lambda_reg, mode=REAL_TIME)
    saturated = _grow(out, ws, cfg, [])
    return out, saturated


def evolve(a: Ansatz, schedule: LoopSchedule, ham_of_rho, cfg: DynConfig,
           keep_snapshots: bool = True):
    """Run the full cyclic loop; returns (ansatz, phases, trajectory).

    ham_of_rho maps a twist angle to the Hamiltonian PauliSum.  All angles
    (ground-prep and dynamics origins alike) evolve jointly.
    """
    a = a.copy()
    dt_max = cfg.dt_max if cfg.dt_max is not None else schedule.t_total / 200.0
    dt_first = cfg.dt_init if cfg.dt_init is not None else dt_max

    ham_cache: dict = {}

    def ham(rho: float):
        h = ham_cache.get(rho)
        if h is None:
            if len(ham_cache) > 64:
                ham_cache.clear()
            h = ham_of_rho(rho)
            ham_cache[rho] = h
        return h

    acc = PhaseAccumulator()
    points: list = []
    growth_events: list = []
    saturated = False
    step = 0

    def record(t, half, ws):
        rho = schedule.rho_of(t, half)
        cnot, depth = resource_metrics(a)
        points.append(TrajectoryPoint(
            step=step, t=t, rho=rho, half=half,
            energy=ws.energy, l2=ws.l2, n_theta=a.n_params,
            cnot=cnot, depth=depth,
            phi_g1=acc.phi_g1, phi_g2=acc.phi_g2,
            state=ws.psi.copy() if keep_snapshots else None,
        ))

    ws = EomWorkspace(a, ham(0.0), cfg.lambda_reg, mode=REAL_TIME)
    for half, t_start, t_end, sign in schedule.halves:
        t = t_start
        while abs(t - t_end) > 1e-12:
            saturated = _grow(a, ws, cfg, growth_events) or saturated
            record(t, half, ws)
            cap = dt_first if step == 0 else dt_max
            remaining = abs(t_end - t)
            dt_abs = min(adaptive_dt(ws.theta_dot, cfg, cap), remaining)
            hits_end = dt_abs >= remaining - 1e-15
            dt = sign * dt_abs

            def ham_at(tt, _half=half):
                return ham(schedule.rho_of(tt, _half))

            stage1 = (ws.theta_dot, ws.energy, ws.phase_velocity())
            new_thetas, dphi1, dphi2 = _rk4_advance(
                a, a.thetas, ham_at, t, dt, cfg.lambda_reg, stage1
            )
            a.set_thetas(new_thetas)
            acc = PhaseAccumulator(acc.phi_g1 + dphi1, acc.phi_g2 + dphi2)
            t = t_end if hits_end else t + dt
            step += 1
            ws = EomWorkspace(a, ham(schedule.rho_of(t, half)),
                              cfg.lambda_reg, mode=REAL_TIME)
        if abs(t - t_end) > 1e-9:
            raise RuntimeError(f"half-cycle endpoint missed: t={t!r} vs {t_end!r}")
        if half == HALF_BACKWARD:
            record(t, half, ws)
    traj = TrajectoryRecord(
        points=points,
        metadata={
            "t_total": schedule.t_total,
            "l2_cut": cfg.l2_cut,
            "dtheta_max": cfg.dtheta_max,
            "dt_max": dt_max,
            "dt_init": dt_first,
            "lambda_reg": cfg.lambda_reg,
        },
        saturated=saturated,
        growth_events=growth_events,
    )
    return a, acc, traj
