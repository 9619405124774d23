"""Coupled neuronal oscillator ensembles in three signaling regimes.

Two neuron models cover the three regimes:

Bonhoeffer-van der Pol (regular and chaotic regimes, 2 state variables)::

    dx_i/dt = x_i - x_i^3/3 - y_i + I_i + eps*X(t) + a(t)
    dy_i/dt = x_i + alpha_i - b*y_i

Hindmarsh-Rose (bursting regime, 3 state variables)::

    dx_i/dt = y_i + 3*x_i^2 - x_i^3 - z_i + I_i + eps*X(t) + a(t)
    dy_i/dt = 1 - 5*x_i^2 - y_i
    dz_i/dt = r*(s*(x_i - x0) - z_i)

X(t) is the ensemble mean of the first state variable (the mean field),
eps the coupling factor, and a(t) a stimulation drive shared by all
neurons.  Per-neuron heterogeneity enters through alpha_i and I_i, drawn
uniformly from narrow ranges.

The recovery damping b and the slow-adaptation constants (r, s, x0) were
calibrated so that the unforced ensembles oscillate collectively about
the equilibria -0.2568 (regular), -0.2636 (chaotic) and -0.2772
(bursting), with the default coupling factors 0.03 / 0.02 / 0.2.

Integration is classical fixed-step RK4 with the mean field recomputed
at every stage, so the ensemble is advanced as one fully coupled system.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

# Bonhoeffer-van der Pol recovery damping.
BVP_RECOVERY_DAMPING = 0.8

# Hindmarsh-Rose slow-adaptation constants.
HR_ADAPT_RATE = 0.01
HR_ADAPT_GAIN = 8.0
HR_ADAPT_REVERSAL = -0.55

# Any state component beyond this magnitude counts as integrator blow-up;
# legitimate spiking amplitudes stay of order 1-3.
DIVERGENCE_LIMIT = 1e6


class NumericalDivergence(RuntimeError):
    """State left the finite / bounded region during integration."""


class RegimeKind(Enum):
    REGULAR = "regular"
    CHAOTIC = "chaotic"
    BURSTING = "bursting"

    @property
    def state_dim(self) -> int:
        return 3 if self is RegimeKind.BURSTING else 2


# Per-regime defaults: coupling factor, alpha range, drive-current range.
# alpha is unused by the bursting regime.
_REGIME_DEFAULTS = {
    RegimeKind.REGULAR: (0.03, (0.67, 0.73), (0.73, 0.79)),
    RegimeKind.CHAOTIC: (0.02, (0.665, 0.735), (0.71, 0.81)),
    RegimeKind.BURSTING: (0.2, (0.0, 0.0), (2.9, 3.1)),
}


@dataclass
class Heterogeneity:
    """Uniform ranges the per-neuron intrinsic parameters are drawn from."""

    alpha_range: tuple[float, float]
    drive_range: tuple[float, float]

    @classmethod
    def for_regime(cls, regime: RegimeKind) -> "Heterogeneity":
        _, alpha, drive = _REGIME_DEFAULTS[regime]
        return cls(alpha_range=alpha, drive_range=drive)


@dataclass
class EnsembleConfig:
    regime: RegimeKind = RegimeKind.REGULAR
    n_neurons: int = 100
    coupling: float | None = None
    dt: float = 0.05
    substeps_per_env_step: int = 2
    heterogeneity: Heterogeneity | None = None
    seed: int = 0

    def __post_init__(self):
        if self.coupling is None:
            self.coupling = _REGIME_DEFAULTS[self.regime][0]
        if self.heterogeneity is None:
            self.heterogeneity = Heterogeneity.for_regime(self.regime)

    def validate(self) -> None:
        if self.n_neurons < 1:
            raise ValueError(f"n_neurons must be >= 1, got {self.n_neurons}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.substeps_per_env_step < 1:
            raise ValueError(
                f"substeps_per_env_step must be >= 1, got {self.substeps_per_env_step}"
            )
        if self.coupling < 0:
            raise ValueError(f"coupling must be >= 0, got {self.coupling}")


@dataclass
class EnsembleState:
    """Ensemble snapshot: one row of state variables per neuron.

    ``states`` has shape (N, 2) for Bonhoeffer-van der Pol and (N, 3) for
    Hindmarsh-Rose.  ``intrinsic`` holds the per-neuron heterogeneous
    parameters, columns (alpha, I) or (I,).  Rows never change count or
    order after initialization.
    """

    regime: RegimeKind
    states: np.ndarray
    intrinsic: np.ndarray
    t: float = 0.0

    def copy(self) -> "EnsembleState":
        return replace(self, states=self.states.copy(), intrinsic=self.intrinsic.copy())


def init_ensemble(config: EnsembleConfig, rng: np.random.Generator) -> EnsembleState:
    """Draw a fresh ensemble: intrinsic parameters first, then state variables.

    Initial conditions: x, y ~ U[-1, 1]; z ~ U[2.5, 3.5] (bursting only).
    The draw order is fixed, so a given generator state always produces
    the same ensemble.
    """
    config.validate()
    n = config.n_neurons
    het = config.heterogeneity
    if config.regime is RegimeKind.BURSTING:
        drive = rng.uniform(*het.drive_range, n)
        intrinsic = drive[:, None].copy()
        states = np.column_stack([
            rng.uniform(-1.0, 1.0, n),
            rng.uniform(-1.0, 1.0, n),
            rng.uniform(2.5, 3.5, n),
        ])
    else:
        alpha = rng.uniform(*het.alpha_range, n)
        drive = rng.uniform(*het.drive_range, n)
        intrinsic = np.column_stack([alpha, drive])
        states = np.column_stack([
            rng.uniform(-1.0, 1.0, n),
            rng.uniform(-1.0, 1.0, n),
        ])
    return EnsembleState(regime=config.regime, states=states, intrinsic=intrinsic)


def mean_field(state: EnsembleState) -> float:
    """Arithmetic mean of the first state variable over all neurons."""
    return float(state.states[:, 0].mean())


def regime_derivatives(
    regime: RegimeKind,
    states: np.ndarray,
    intrinsic: np.ndarray,
    mean_field_value: float,
    drive: float,
    coupling: float,
) -> np.ndarray:
    """Time derivatives for all neurons at once, (N, D) in and out.

    The mean-field value is passed in explicitly so integrator stages can
    evaluate it from their own stage states.
    """
    x = states[:, 0]
    common = coupling * mean_field_value + drive
    if regime is RegimeKind.BURSTING:
        y = states[:, 1]
        z = states[:, 2]
        current = intrinsic[:, 0]
        dx = y + 3.0 * x * x - x * x * x - z + current + common
        dy = 1.0 - 5.0 * x * x - y
        dz = HR_ADAPT_RATE * (HR_ADAPT_GAIN * (x - HR_ADAPT_REVERSAL) - z)
        return np.stack([dx, dy, dz], axis=1)
    y = states[:, 1]
    alpha = intrinsic[:, 0]
    current = intrinsic[:, 1]
    dx = x - x * x * x / 3.0 - y + current + common
    dy = x + alpha - BVP_RECOVERY_DAMPING * y
    return np.stack([dx, dy], axis=1)


def derivatives(
    regime: RegimeKind,
    neuron_state: np.ndarray,
    intrinsic: np.ndarray,
    mean_field_value: float,
    drive: float,
    coupling: float,
) -> np.ndarray:
    """Single-neuron derivative row under a given mean field and drive."""
    row = regime_derivatives(
        regime,
        np.asarray(neuron_state, dtype=float)[None, :],
        np.asarray(intrinsic, dtype=float)[None, :],
        mean_field_value,
        drive,
        coupling,
    )
    return row[0]


def rk4_step(f, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of an autonomous system."""
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_ensemble(
    state: EnsembleState, action: float, config: EnsembleConfig
) -> EnsembleState:
    """Advance the coupled ensemble by one environment step.

    Runs ``substeps_per_env_step`` RK4 substeps of size ``dt`` with the
    stimulation drive held constant.  Every RK4 stage recomputes the mean
    field from the stage states, so the coupling is integrated fully
    implicitly in the ensemble sense.  Pure: the input state is not
    modified.

    Raises NumericalDivergence if any state variable becomes non-finite
    or exceeds DIVERGENCE_LIMIT in magnitude.
    """
    regime = state.regime
    intrinsic = state.intrinsic
    coupling = config.coupling
    action = float(action)

    def f(y):
        return regime_derivatives(
            regime, y, intrinsic, float(y[:, 0].mean()), action, coupling
        )

    y = state.states
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.substeps_per_env_step):
            y = rk4_step(f, y, config.dt)
    if not np.all(np.isfinite(y)) or np.abs(y).max() > DIVERGENCE_LIMIT:
        raise NumericalDivergence(
            f"ensemble state diverged at t={state.t:.3f} (|max|="
            f"{np.abs(y[np.isfinite(y)]).max() if np.isfinite(y).any() else float('nan'):.3g})"
        )
    elapsed = config.dt * config.substeps_per_env_step
    return EnsembleState(
        regime=regime, states=y, intrinsic=intrinsic, t=state.t + elapsed
    )
