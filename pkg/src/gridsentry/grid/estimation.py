"""Weighted-least-squares state estimation over the 39-sensor measurement model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .case import GridCase, N_SENSORS, branch_admittances, build_admittance
from .powerflow import MeasurementFrame


class RankDeficientError(RuntimeError):
    """The WLS gain matrix is rank deficient."""


@dataclass
class StateEstimate:
    voltage_magnitude: np.ndarray    # (14,)
    voltage_angle: np.ndarray        # (14,)
    predicted_measurements: np.ndarray  # (39,)
    objective: float                 # weighted sum of squared residuals
    converged: bool
    iterations: int


def _measurement_model(case: GridCase, va: np.ndarray, vm: np.ndarray,
                       gen_loads: np.ndarray):
    """h(x) and its Jacobian w.r.t. [va(non-slack) | vm(all)]."""
    n = case.n_bus
    Y = build_admittance(case)
    Yf, _ = branch_admittances(case)
    f_idx = np.array([br.from_bus - 1 for br in case.branches])
    slack = case.slack_bus - 1
    nonslack = np.array([i for i in range(n) if i != slack])

    V = vm * np.exp(1j * va)
    Vnorm = V / np.abs(V)
    I = Y @ V
    If = Yf @ V
    S = V * np.conj(I)

    nb = len(case.branches)
    Cf = np.zeros((nb, n))
    Cf[np.arange(nb), f_idx] = 1.0

    dSf_dVa = 1j * (np.conj(np.diag(If)) @ Cf @ np.diag(V)
                    - np.diag(V[f_idx]) @ np.conj(Yf @ np.diag(V)))
    dSf_dVm = (np.conj(np.diag(If)) @ Cf @ np.diag(Vnorm)
               + np.diag(V[f_idx]) @ np.conj(Yf @ np.diag(Vnorm)))
    dS_dVa = 1j * np.diag(V) @ np.conj(np.diag(I) - Y @ np.diag(V))
    dS_dVm = np.diag(V) @ np.conj(Y @ np.diag(Vnorm)) + np.conj(np.diag(I)) @ np.diag(Vnorm)

    gen_order = [case.slack_bus] + case.generator_buses
    g_idx = np.array([b - 1 for b in gen_order])

    h = np.concatenate([
        (V[f_idx] * np.conj(If)).real,
        S.real[g_idx] + gen_loads[g_idx],
        vm,
    ])

    H = np.zeros((N_SENSORS, len(nonslack) + n))
    H[:nb, :len(nonslack)] = dSf_dVa[:, nonslack].real
    H[:nb, len(nonslack):] = dSf_dVm.real
    H[nb:nb + 5, :len(nonslack)] = dS_dVa[np.ix_(g_idx, nonslack)].real
    H[nb:nb + 5, len(nonslack):] = dS_dVm[g_idx, :].real
    H[nb + 5:, len(nonslack):] = np.eye(n)
    return h, H


def estimate_state(case: GridCase, frame: MeasurementFrame, weights: np.ndarray,
                   gen_bus_loads: np.ndarray | None = None,
                   tol: float = 1e-10, max_iter: int = 30) -> StateEstimate:
    """Gauss-Newton WLS fit of (voltage magnitudes, angles) to one frame.

    weights are per-sensor measurement variances. gen_bus_loads is the full
    14-bus active load vector used to translate bus injections into generation
    sensor predictions; scenario data carries no load at generator buses, so
    the default is zeros.
    """
    z = np.asarray(frame.values, dtype=float)
    if z.shape != (N_SENSORS,):
        raise ValueError(f"frame must have {N_SENSORS} values")
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (N_SENSORS,) or np.any(weights <= 0):
        raise ValueError("weights must be 39 positive variances")
    gen_loads = (np.zeros(case.n_bus) if gen_bus_loads is None
                 else np.asarray(gen_bus_loads, dtype=float))

    n = case.n_bus
    slack = case.slack_bus - 1
    nonslack = np.array([i for i in range(n) if i != slack])
    W = 1.0 / weights

    # initialize magnitudes from the direct voltage sensors, angles flat
    vm = z[25:].copy()
    vm = np.clip(vm, 0.5, 1.5)
    va = np.zeros(n)

    converged = False
    iterations = 0
    h = np.zeros(N_SENSORS)
    for iterations in range(1, max_iter + 1):
        h, H = _measurement_model(case, va, vm, gen_loads)
        r = z - h
        grad = H.T @ (W * r)
        G = H.T @ (W[:, None] * H)
        try:
            c = np.linalg.cholesky(G)
        except np.linalg.LinAlgError as exc:
            raise RankDeficientError("WLS gain matrix is rank deficient") from exc
        dx = np.linalg.solve(c.T, np.linalg.solve(c, grad))
        va[nonslack] += dx[:len(nonslack)]
        vm += dx[len(nonslack):]
        if np.max(np.abs(dx)) < tol:
            # at a stationary point of the weighted SSR
            h, _ = _measurement_model(case, va, vm, gen_loads)
            converged = True
            break

    r = z - h
    return StateEstimate(
        voltage_magnitude=vm, voltage_angle=va,
        predicted_measurements=h,
        objective=float(np.sum(W * r * r)),
        converged=converged, iterations=iterations)
