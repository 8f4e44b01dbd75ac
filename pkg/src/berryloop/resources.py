"""Circuit-resource accounting along trajectories and across sweeps.

All-to-all connectivity is assumed: a weight-p rotation costs 2(p-1)
CNOTs, and depth counts layers of parameterized unitaries (not compiled
gate layers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dynamics import TrajectoryRecord


@dataclass(frozen=True)
class ResourcePoint:
    rho: float
    cnot: int
    depth: int
    n_theta: int


@dataclass
class ResourceTrace:
    """Per-step resource counts of one run; counts never decrease because
    units are never removed."""

    points: list
    metadata: dict = field(default_factory=dict)

    @property
    def max_cnot(self) -> int:
        return max((p.cnot for p in self.points), default=0)

    @property
    def max_depth(self) -> int:
        return max((p.depth for p in self.points), default=0)

    @property
    def final_cnot(self) -> int:
        return self.points[-1].cnot if self.points else 0

    @property
    def initial_cnot(self) -> int:
        return self.points[0].cnot if self.points else 0

    @property
    def initial_depth(self) -> int:
        return self.points[0].depth if self.points else 0


def trace_from_trajectory(traj: TrajectoryRecord) -> ResourceTrace:
    """Copy the per-step resource counts, enforcing monotonicity."""
    points = []
    prev_cnot = prev_depth = 0
    for p in traj.points:
        if p.cnot < prev_cnot or p.depth < prev_depth:
            raise RuntimeError(
                "resource counts decreased along the trajectory "
                "(ansatz units must never be removed)"
            )
        prev_cnot, prev_depth = p.cnot, p.depth
        points.append(ResourcePoint(rho=p.rho, cnot=p.cnot, depth=p.depth,
                                    n_theta=p.n_theta))
    return ResourceTrace(points=points, metadata=dict(traj.metadata))


@dataclass(frozen=True)
class SweepSummaryRow:
    delta: float
    t_total: float
    max_cnot: int
    max_depth: int
    phi_b_principal: float | None


@dataclass
class SweepSummary:
    rows: list
    cnot_ratio: float | None
    depth_ratio: float | None


def sweep_summary(traces) -> SweepSummary:
    """Per-run maxima plus the nontrivial/trivial resource ratio.

    Runs whose principal Berry phase is closer to pi than to 0 count as
    topologically nontrivial.
    """
    rows = []
    nontrivial_cnot: list = []
    trivial_cnot: list = []
    nontrivial_depth: list = []
    trivial_depth: list = []
    for trace in traces:
        meta = trace.metadata
        phi = meta.get("phi_b_principal")
        row = SweepSummaryRow(
            delta=meta.get("delta", 0.0),
            t_total=meta.get("t_total", 0.0),
            max_cnot=trace.max_cnot,
            max_depth=trace.max_depth,
            phi_b_principal=phi,
        )
        rows.append(row)
        if phi is not None:
            if abs(phi) > math.pi / 2:
                nontrivial_cnot.append(trace.max_cnot)
                nontrivial_depth.append(trace.max_depth)
            else:
                trivial_cnot.append(trace.max_cnot)
                trivial_depth.append(trace.max_depth)
    cnot_ratio = depth_ratio = None
    if nontrivial_cnot and trivial_cnot and max(trivial_cnot) > 0:
        cnot_ratio = max(nontrivial_cnot) / max(trivial_cnot)
    if nontrivial_depth and trivial_depth and max(trivial_depth) > 0:
        depth_ratio = max(nontrivial_depth) / max(trivial_depth)
    return SweepSummary(rows=rows, cnot_ratio=cnot_ratio, depth_ratio=depth_ratio)
