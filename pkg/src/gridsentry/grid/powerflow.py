"""Newton-Raphson AC power flow and sensor measurement generation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import (GridCase, N_SENSORS, branch_admittances, build_admittance)


class SingularJacobianError(RuntimeError):
    """The power-flow Jacobian became singular."""


@dataclass
class PowerFlowSolution:
    voltage_magnitude: np.ndarray  # (14,)
    voltage_angle: np.ndarray      # (14,) radians, slack at 0
    line_flow_active: np.ndarray   # (20,) sending-end convention
    generation_active: np.ndarray  # (5,) [slack, gen 2, 3, 6, 8]
    converged: bool
    iterations: int
    max_mismatch: float


def _complex_voltage(sol: PowerFlowSolution) -> np.ndarray:
    return sol.voltage_magnitude * np.exp(1j * sol.voltage_angle)


def _ds_dv(Y: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of complex bus injections w.r.t. angle and magnitude."""
    I = Y @ V
    diagV = np.diag(V)
    diagI = np.diag(I)
    diagVnorm = np.diag(V / np.abs(V))
    dS_dVa = 1j * diagV @ np.conj(diagI - Y @ diagV)
    dS_dVm = diagV @ np.conj(Y @ diagVnorm) + np.conj(diagI) @ diagVnorm
    return dS_dVa, dS_dVm


def solve_power_flow(case: GridCase,
                     loads_p: np.ndarray,
                     loads_q: np.ndarray,
                     gen_setpoints: dict[int, float],
                     warm_start: PowerFlowSolution | None = None,
                     tol: float = 1e-8,
                     max_iter: int = 20) -> PowerFlowSolution:
    """Solve the AC power flow for one steady-state snapshot.

    loads_p/loads_q are full 14-bus demand vectors in pu; gen_setpoints maps
    generator bus id -> active setpoint. The slack bus absorbs the system
    imbalance plus losses. Non-convergence is returned as a flagged solution,
    not raised.
    """
    n = case.n_bus
    loads_p = np.asarray(loads_p, dtype=float)
    loads_q = np.asarray(loads_q, dtype=float)
    if loads_p.shape != (n,) or loads_q.shape != (n,):
        raise ValueError(f"load vectors must have shape ({n},)")

    Y = build_admittance(case)
    slack = case.slack_bus - 1
    pv = np.array([b - 1 for b in case.generator_buses], dtype=int)
    pq = np.array([b.id - 1 for b in case.buses if b.kind == "load"], dtype=int)
    pvpq = np.sort(np.concatenate([pv, pq]))

    # scheduled injections (generation minus load)
    p_sched = -loads_p.copy()
    for bus_id, p in gen_setpoints.items():
        p_sched[bus_id - 1] += p
    q_sched = -loads_q.copy()

    vm = np.ones(n)
    va = np.zeros(n)
    if warm_start is not None and warm_start.converged:
        vm = warm_start.voltage_magnitude.copy()
        va = warm_start.voltage_angle.copy()
    for b in case.buses:
        if b.kind in ("slack", "generator"):
            vm[b.id - 1] = b.voltage_setpoint
    va[slack] = 0.0

    converged = False
    iterations = 0
    max_mismatch = np.inf
    npq = len(pq)
    for iterations in range(1, max_iter + 1):
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        dp = p_sched[pvpq] - S.real[pvpq]
        dq = q_sched[pq] - S.imag[pq]
        mis = np.concatenate([dp, dq])
        max_mismatch = float(np.max(np.abs(mis)))
        if max_mismatch < tol:
            converged = True
            iterations -= 1
            break
        dS_dVa, dS_dVm = _ds_dv(Y, V)
        J = np.block([
            [dS_dVa[np.ix_(pvpq, pvpq)].real, dS_dVm[np.ix_(pvpq, pq)].real],
            [dS_dVa[np.ix_(pq, pvpq)].imag, dS_dVm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = np.linalg.solve(J, mis)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(
                f"singular Jacobian at iteration {iterations}") from exc
        va[pvpq] += dx[:len(pvpq)]
        vm[pq] += dx[len(pvpq):]
    else:
        # final mismatch after the last update
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        dp = p_sched[pvpq] - S.real[pvpq]
        dq = q_sched[pq] - S.imag[pq]
        max_mismatch = float(np.max(np.abs(np.concatenate([dp, dq]))))
        converged = max_mismatch < tol

    V = vm * np.exp(1j * va)
    S = V * np.conj(Y @ V)
    Yf, _ = branch_admittances(case)
    f_idx = np.array([br.from_bus - 1 for br in case.branches])
    flows = (V[f_idx] * np.conj(Yf @ V)).real

    gen_order = [case.slack_bus] + case.generator_buses
    gen_p = np.array([S.real[b - 1] + loads_p[b - 1] for b in gen_order])

    return PowerFlowSolution(
        voltage_magnitude=vm, voltage_angle=va,
        line_flow_active=flows, generation_active=gen_p,
        converged=converged, iterations=iterations, max_mismatch=max_mismatch)


def sensor_values(case: GridCase, sol: PowerFlowSolution) -> np.ndarray:
    """Noiseless 39-sensor vector [20 line flows | 5 generations | 14 voltages]."""
    return np.concatenate([sol.line_flow_active, sol.generation_active,
                           sol.voltage_magnitude])


@dataclass
class MeasurementFrame:
    timestamp: int
    values: np.ndarray  # (39,)


def noise_scale(noiseless: np.ndarray, noise_sigma: float,
                floor: float = 0.01) -> np.ndarray:
    """Per-sensor noise std: proportional with a floor on the signal magnitude."""
    return noise_sigma * np.maximum(np.abs(noiseless), floor)


def measure(case: GridCase, sol: PowerFlowSolution, noise_sigma: float,
            rng: np.random.Generator, timestamp: int = 0) -> MeasurementFrame:
    """Sensor function plus i.i.d. zero-mean Gaussian noise."""
    if not sol.converged:
        raise ValueError("cannot measure a non-converged solution")
    clean = sensor_values(case, sol)
    if noise_sigma == 0:
        values = clean
    else:
        values = clean + rng.standard_normal(N_SENSORS) * noise_scale(clean, noise_sigma)
    return MeasurementFrame(timestamp=timestamp, values=values)
