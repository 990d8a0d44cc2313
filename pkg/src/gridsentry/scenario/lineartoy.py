"""Linear state-space toy system for exact covertness property checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinearSystem:
    A: np.ndarray  # (n, n)
    B: np.ndarray  # (n, p)
    C: np.ndarray  # (m, n)
    x0: np.ndarray  # (n,)

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ValueError("B and C must be dimensioned against A")
        if self.x0.shape != (n,):
            raise ValueError("x0 has wrong length")
        if np.linalg.matrix_rank(self.C) < min(self.C.shape):
            raise ValueError("C must have full rank")


def random_system(rng: np.random.Generator, n=3, p=2, m=3,
                  spectral_radius=0.9) -> LinearSystem:
    A = rng.standard_normal((n, n))
    A *= spectral_radius / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-9)
    B = rng.standard_normal((n, p))
    C = rng.standard_normal((m, n))
    return LinearSystem(A=A, B=B, C=C, x0=rng.standard_normal(n))


def simulate(sys: LinearSystem, controls: np.ndarray,
             noise: np.ndarray | None = None) -> np.ndarray:
    """Outputs y_1..y_T for x_t = A x_{t-1} + B u_{t-1}, y_t = C x_t (+ noise)."""
    T = controls.shape[0]
    x = sys.x0.copy()
    ys = np.empty((T, sys.C.shape[0]))
    for t in range(T):
        x = sys.A @ x + sys.B @ controls[t]
        ys[t] = sys.C @ x
    if noise is not None:
        ys = ys + noise
    return ys


def linear_mask_bias(sys: LinearSystem, a: np.ndarray) -> np.ndarray:
    """One-step output bias of an additive control manipulation."""
    a = np.asarray(a)
    if a.shape != (sys.B.shape[1],):
        raise ValueError(f"attack vector must have length {sys.B.shape[1]}")
    return sys.C @ (sys.B @ a)


def covert_attack_run(sys: LinearSystem, controls: np.ndarray,
                      attacks: np.ndarray, noise: np.ndarray | None = None
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(nominal, attacked, masked) output sequences under a covert attack.

    The attacker tracks the accumulated state deviation d_t = A d_{t-1}
    + B a_{t-1} and subtracts the output bias C d_t from the attacked
    measurements, so the masked sequence reproduces the nominal one. Both
    sequences share the same measurement noise.
    """
    if attacks.shape != controls.shape:
        raise ValueError("attack sequence must match the control sequence shape")
    T = controls.shape[0]
    nominal = simulate(sys, controls, noise)
    attacked = simulate(sys, controls + attacks, noise)
    masked = attacked.copy()
    d = np.zeros_like(sys.x0)
    for t in range(T):
        d = sys.A @ d + sys.B @ attacks[t]
        masked[t] = attacked[t] - sys.C @ d
    return nominal, attacked, masked
