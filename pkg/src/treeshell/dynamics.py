"""Time integration of the truncated tree model.

The state holds one non-negative value per node of generations 0..n, in
generation-major order.  The right-hand side of node j is

    v_j' = c_j v_par^2 - sum_children c_k v_j v_k,

with the forcing f standing in as the parent value of the root.  At the
truncation generation the missing offspring sum is closed either with
zeros (free truncation) or with the constant-solution values, which makes
the constant solution an exact equilibrium of the truncated system.

Integration is a fixed-step classical 4-stage Runge-Kutta scheme; no
adaptivity, so residual tables are reproducible.  Stiffness grows like
2**(alpha n): shrink dt with depth (guideline dt <= 0.1 * 2**(-alpha n)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .coefficients import RcmModel
from .solution import ConstantSolution
from .tree import TreeIndex

__all__ = [
    "TruncatedState",
    "rhs",
    "step",
    "Trajectory",
    "integrate",
    "EnergyBalance",
    "energy_balance",
    "relax_to_constant",
]

CLOSURES = ("zero", "stationary")


def _row_slices(N: int, depth: int) -> list[slice]:
    out, start = [], 0
    for g in range(depth + 1):
        out.append(slice(start, start + N**g))
        start += N**g
    return out


@dataclass(frozen=True)
class TruncatedState:
    """Non-negative node values on generations 0..depth plus the closure mode."""

    model: RcmModel
    depth: int
    values: np.ndarray          # flat, generation-major, length sum N^g
    closure: str = "zero"
    t: float = 0.0

    def __post_init__(self):
        if self.closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}")
        expected = sum(self.model.N**g for g in range(self.depth + 1))
        if len(self.values) != expected:
            raise ValueError(f"state needs {expected} values, got {len(self.values)}")
        if np.any(self.values < 0):
            raise ValueError("componentwise states are non-negative")

    @property
    def slices(self) -> list[slice]:
        return _row_slices(self.model.N, self.depth)

    def row(self, generation: int) -> np.ndarray:
        return self.values[self.slices[generation]]

    def value_of(self, j: TreeIndex) -> float:
        return float(self.row(j.generation)[j.code])

    def energy(self) -> float:
        return float(self.values @ self.values)

    @classmethod
    def zeros(cls, model: RcmModel, depth: int, closure: str = "zero"):
        size = sum(model.N**g for g in range(depth + 1))
        return cls(model, depth, np.zeros(size), closure)

    @classmethod
    def from_constant(cls, solution: ConstantSolution, depth: int,
                      closure: str = "stationary", scale: float = 1.0):
        rows = solution.log2_u_rows(depth)
        values = np.concatenate([np.exp2(r) for r in rows]) * scale
        return cls(solution.model, depth, values, closure)


def _closure_weights(solution: ConstantSolution, depth: int) -> np.ndarray:
    """sum_k c_k u_k over the truncated offspring of each boundary node.

    For the constant solution the offspring sum collapses to
    2**(alpha(depth+1) + q) * sum(delta^{3/2}) times the node's own value.
    """
    m = solution.model
    u_row = np.exp2(solution.log2_u_rows(depth)[depth])
    factor = 2.0 ** (m.alpha * (depth + 1) + solution.q) * float(
        np.sum(m.deltas**1.5))
    return factor * u_row


def _rhs_core(model: RcmModel, depth: int, closure: str, values: np.ndarray,
              closure_weights: np.ndarray | None) -> np.ndarray:
    """Right-hand side on a raw value array (RK4 stages may dip negative)."""
    N, f = model.N, model.forcing
    deltas = model.deltas
    out = np.empty_like(values)
    sl = _row_slices(N, depth)
    for g in range(depth + 1):
        v = values[sl[g]]
        if g == 0:
            inflow = np.array([f * f])
        else:
            c = 2.0 ** (model.alpha * g) * np.tile(deltas, N ** (g - 1))
            inflow = c * np.repeat(values[sl[g - 1]], N) ** 2
        if g < depth:
            c_child = 2.0 ** (model.alpha * (g + 1)) * np.tile(deltas, N**g)
            child_sum = (c_child * values[sl[g + 1]]).reshape(-1, N).sum(axis=1)
            outflow = v * child_sum
        elif closure == "stationary":
            outflow = v * closure_weights
        else:
            outflow = 0.0
        out[sl[g]] = inflow - outflow
    return out


def rhs(state: TruncatedState,
        closure_weights: np.ndarray | None = None) -> np.ndarray:
    """Exact right-hand side of the truncated system."""
    if closure_weights is None and state.closure == "stationary":
        closure_weights = _closure_weights(ConstantSolution(state.model),
                                           state.depth)
    return _rhs_core(state.model, state.depth, state.closure, state.values,
                     closure_weights)


def step(state: TruncatedState, dt: float,
         closure_weights: np.ndarray | None = None
         ) -> tuple[TruncatedState, float]:
    """One classical RK4 step; returns the new state and the clamp magnitude.

    Negative components produced by the discrete step are clamped to zero
    (the exact dynamics cannot cross zero: v_j = 0 gives v_j' >= 0) and the
    total clamped mass is reported so runs can be rejected when it matters.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if closure_weights is None and state.closure == "stationary":
        closure_weights = _closure_weights(ConstantSolution(state.model),
                                           state.depth)

    def deriv(values: np.ndarray) -> np.ndarray:
        return _rhs_core(state.model, state.depth, state.closure, values,
                         closure_weights)

    v = state.values
    k1 = deriv(v)
    k2 = deriv(v + 0.5 * dt * k1)
    k3 = deriv(v + 0.5 * dt * k2)
    k4 = deriv(v + dt * k3)
    new = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError(f"non-finite state at t = {state.t + dt}")
    negative = new < 0
    clamp = float(-new[negative].sum()) if negative.any() else 0.0
    return replace(state, values=np.maximum(new, 0.0), t=state.t + dt), clamp


@dataclass(frozen=True)
class Trajectory:
    model: RcmModel
    depth: int
    closure: str
    dt: float
    times: np.ndarray
    states: np.ndarray          # (records, nodes)
    clamp_total: float

    def row(self, record: int, generation: int) -> np.ndarray:
        return self.states[record][_row_slices(self.model.N, self.depth)[generation]]


def integrate(state: TruncatedState, dt: float, steps: int,
              record_every: int = 1,
              max_clamp_rate: float | None = 1e-8) -> Trajectory:
    """Advance `steps` RK4 steps, recording every `record_every`-th state.

    The exact dynamics cannot cross zero, so clamping should only mop up
    rounding noise; a run whose clamped mass per unit time exceeds
    max_clamp_rate times the state scale is rejected (pass None to keep
    such a run anyway).
    """
    weights = None
    if state.closure == "stationary":
        weights = _closure_weights(ConstantSolution(state.model), state.depth)
    times = [state.t]
    records = [state.values.copy()]
    clamp_total = 0.0
    scale = float(np.abs(state.values).max())
    current = state
    for i in range(steps):
        current, clamp = step(current, dt, weights)
        clamp_total += clamp
        scale = max(scale, float(np.abs(current.values).max()))
        if (i + 1) % record_every == 0:
            times.append(current.t)
            records.append(current.values.copy())
    if max_clamp_rate is not None and steps > 0 and scale > 0:
        rate = clamp_total / (steps * dt)
        if rate > max_clamp_rate * scale:
            raise RuntimeError(
                f"clamped mass rate {rate:.3e} exceeds {max_clamp_rate:.1e} "
                f"x state scale {scale:.3e}; decrease dt")
    return Trajectory(state.model, state.depth, state.closure, dt * record_every,
                      np.asarray(times), np.asarray(records), clamp_total)


# ---------------------------------------------------------------------------
# energy budget of a finite subtree along a trajectory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyBalance:
    times: np.ndarray
    dE_dt: np.ndarray           # centered finite differences of sum_T v^2
    flux: np.ndarray            # 2 f^2 v_root - boundary outflow, same times
    max_residual: float
    max_relative_residual: float


def energy_balance(traj: Trajectory, subtree: Iterable[TreeIndex],
                   stencil: int = 5) -> EnergyBalance:
    """Check d/dt sum_{j in T} v_j^2 against the flux formula along a run.

    The derivative is taken by a centered finite difference on the recorded
    grid (3- or 5-point stencil; 5 keeps the differencing error at
    O(dt^4), far below the model identity being tested).  T must stay
    within depth-1 so its boundary is fully represented; under the zero
    closure a T touching the truncation generation is flagged.
    """
    if stencil not in (3, 5):
        raise ValueError("stencil must be 3 or 5")
    m = traj.model
    N = m.N
    nodes = set(subtree)
    root = TreeIndex.root(N)
    if root not in nodes:
        raise ValueError("T must contain the root")
    max_gen = max(j.generation for j in nodes)
    if max_gen > traj.depth - 1:
        raise ValueError("T must stay within depth - 1")
    for j in nodes:
        if not j.is_root and j.parent() not in nodes:
            raise ValueError("T is not prefix-closed")
    if traj.closure == "zero" and max_gen == traj.depth - 1:
        warnings.warn("T touches the truncation boundary under the zero "
                      "closure; fluxes into absent offspring are dropped",
                      RuntimeWarning, stacklevel=2)

    sl = _row_slices(N, traj.depth)
    member = [(j.generation, j.code) for j in nodes]
    boundary = [(k.generation, k.code,
                 m.coefficient_of(k) * 2.0 ** (m.alpha * k.generation),
                 j.generation, j.code)
                for j in nodes for k in j.offspring() if k not in nodes]

    states = traj.states
    energy = np.zeros(len(states))
    for g, code in member:
        energy += states[:, sl[g].start + code] ** 2
    inflow = 2.0 * m.forcing**2 * states[:, 0]
    outflow = np.zeros(len(states))
    for g, code, c_k, gp, cp in boundary:
        outflow += 2.0 * c_k * states[:, sl[gp].start + cp] ** 2 \
            * states[:, sl[g].start + code]
    flux = inflow - outflow

    dt = traj.dt
    if stencil == 3:
        dE = (energy[2:] - energy[:-2]) / (2 * dt)
        inner = slice(1, -1)
    else:
        dE = (-energy[4:] + 8 * energy[3:-1] - 8 * energy[1:-3] + energy[:-4]) \
            / (12 * dt)
        inner = slice(2, -2)
    res = np.abs(dE - flux[inner])
    # normalise by the gross throughput: the net flux vanishes at equilibrium
    scale = max(float((np.abs(inflow) + np.abs(outflow)).max()), 1e-300)
    return EnergyBalance(traj.times[inner], dE, flux[inner],
                         float(res.max()), float(res.max()) / scale)


def relax_to_constant(solution: ConstantSolution, initial: TruncatedState,
                      dt: float, steps: int, record_every: int = 1
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Distance series sum (v_j - u_j)^2 along a run; purely observational.

    Whether the constant solution attracts is an open question; nothing is
    asserted here.
    """
    traj = integrate(initial, dt, steps, record_every)
    u = np.concatenate([np.exp2(r)
                        for r in solution.log2_u_rows(initial.depth)])
    dist = ((traj.states - u[None, :]) ** 2).sum(axis=1)
    return traj.times, dist
