"""Adaptive variational imaginary-time evolution for ground-state prep.

Follows McLachlan's principle for the flow d|psi>/dtau = -(H - <H>)|psi>:

    m_{mu nu} = Re[ <d_mu|d_nu> + g_mu g_nu ]
    v_mu      = -Re[ <d_mu|H psi> ] + <H> Re[ g_mu ]

with m theta_dot = v integrated by forward Euler.  Before every step the
ansatz is grown, one pool element at a time, while the imaginary-time
McLachlan distance l2 = var[H] - v . theta_dot exceeds the cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import (
    IMAG_TIME,
    ORIGIN_GROUND_PREP,
    Ansatz,
    EomWorkspace,
    resource_metrics,
    screen_pool,
)
from .model import OperatorPool
from .pauli import PauliSum, StateVector

# Below this McLachlan-distance reduction a candidate is considered useless.
STALL_TOL = 1e-12


@dataclass
class ItConfig:
    """Imaginary-time integration and growth knobs."""

    pool: OperatorPool
    dtau: float = 0.02
    l2_cut_it: float = 1e-6
    max_steps: int = 5000
    energy_tol: float = 1e-8
    lambda_reg: float = 1e-6

    def __post_init__(self):
        if self.dtau <= 0 or self.l2_cut_it <= 0:
            raise ValueError("dtau and l2_cut_it must be positive")
        if self.max_steps < 1 or self.energy_tol <= 0:
            raise ValueError("max_steps and energy_tol must be positive")


@dataclass
class ItReport:
    """Outcome of a ground-state preparation run."""

    energy: float
    variance: float
    l2_it: float
    n_steps: int
    n_params: int
    cnot_count: int
    depth: int
    converged: bool
    warnings: list = field(default_factory=list)
    # Filled by callers holding an exact reference state.
    infidelity: float | None = None


def it_eom(a: Ansatz, h: PauliSum, lambda_reg: float = 1e-6):
    """(m, v, l2_it) of the imaginary-time flow at the current parameters."""
    ws = EomWorkspace(a, h, lambda_reg, mode=IMAG_TIME)
    return ws.m.copy(), ws.v.copy(), ws.l2


def _trailing_zero_generators(a: Ansatz):
    """Generators in the trailing theta=0 run; re-appending one of these
    duplicates its derivative column exactly and only the regularizer
    would (spuriously) reward it."""
    keys = set()
    for unit in reversed(a.units):
        if unit.theta != 0.0:
            break
        keys.add((unit.generator.x_mask, unit.generator.z_mask))
    return keys


def _grow_single(a: Ansatz, ws: EomWorkspace, cfg: ItConfig) -> bool:
    """Append the best pool element while l2 exceeds the cutoff.

    Returns True if growth stalled (no candidate reduces l2 meaningfully).
    """
    pool = cfg.pool.elements
    while ws.l2 > cfg.l2_cut_it:
        l2_cand, reduction = screen_pool(ws, pool)
        skip = _trailing_zero_generators(a)
        if skip:
            for j, gen in enumerate(pool):
                if (gen.x_mask, gen.z_mask) in skip:
                    l2_cand[j] = np.inf
                    reduction[j] = 0.0
        best = int(np.argmin(l2_cand))
        if reduction[best] <= STALL_TOL:
            return True
        a.append(pool[best], 0.0, ORIGIN_GROUND_PREP)
        ws.append_column(pool[best])
    return False


def avqite_run(h: PauliSum, reference: StateVector, cfg: ItConfig):
    """Grow and relax an ansatz toward the ground state of h.

    Stops when var[H] < energy_tol or after max_steps Euler updates; a
    non-converged run is reported through the warnings list, not raised.
    """
    a = Ansatz(reference)
    warnings: list = []
    converged = False
    stalled = False
    n_steps = 0
    ws = EomWorkspace(a, h, cfg.lambda_reg, mode=IMAG_TIME)
    for _ in range(cfg.max_steps):
        if ws.var_h < cfg.energy_tol:
            converged = True
            break
        stalled = _grow_single(a, ws, cfg) or stalled
        a.set_thetas(a.thetas + cfg.dtau * ws.theta_dot)
        n_steps += 1
        ws = EomWorkspace(a, h, cfg.lambda_reg, mode=IMAG_TIME)
    else:
        if ws.var_h < cfg.energy_tol:
            converged = True
    if not converged:
        warnings.append("avqite-unconverged")
    if stalled:
        warnings.append("avqite-growth-stalled")
    cnots, depth = resource_metrics(a)
    report = ItReport(
        energy=ws.energy,
        variance=ws.var_h,
        l2_it=ws.l2,
        n_steps=n_steps,
        n_params=a.n_params,
        cnot_count=cnots,
        depth=depth,
        converged=converged,
        warnings=warnings,
    )
    return a, report
