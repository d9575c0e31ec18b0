"""The variational regression map and its closed-form evaluation.

The map multiplies every column ``m`` of the encoded table by
``cos(phi_m)``: an ancilla prepared in ``|+>`` picks up ``exp(+i phi_m)``
on its ``|0>`` branch and ``exp(-i phi_m)`` on its ``|1>`` branch for the
basis states of column ``m`` (the symmetric controlled-phase convention;
the one-sided ``exp(-i phi)`` variant differs only by a phase that the
final Hadamard-and-project step cancels).  Projecting the ancilla back
onto ``|0>`` leaves the unnormalized state with amplitudes
``x_lm cos(phi_m)``, whose cost-operator expectation is the scaled MSE
``sum_l (sum_m x_lm cos(phi_m))^2``.

Trained weights are recovered as ``W_m = -cos(phi_m) / cos(phi_0)``; the
response phase is conventionally pinned to ``phi_0 = pi`` so the search
can run over unconstrained cosine variables.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import StandardizedTable
from .encoders import ONE_HOT, PreparedState
from .statevector import (
    DiagonalPhaseSpec,
    StateVector,
    apply_controlled_diagonal_phase,
    apply_hadamard,
    extract_projected_qubit,
    project_qubit,
)

DEGENERATE_COS_TOL = 1e-9


class DegeneratePhaseError(ValueError):
    """cos(phi_0) is (numerically) zero: weights are undefined."""


@dataclass(frozen=True)
class PhaseVector:
    """Variational angles ``(phi_0, ..., phi_M)``; ``phi_0`` belongs to the
    response column."""

    phis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phis", np.asarray(self.phis, dtype=np.float64))
        if self.phis.ndim != 1 or self.phis.size < 2:
            raise ValueError("need phases for the response and at least one feature")

    @property
    def num_features(self) -> int:
        return self.phis.size - 1

    def cosines(self) -> np.ndarray:
        return np.cos(self.phis)


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)


def phases_to_weights(phases: PhaseVector) -> WeightVector:
    """``W_m = -cos(phi_m) / cos(phi_0)``; rejects degenerate ``phi_0``."""
    return cosines_to_weights(phases.cosines())


def cosines_to_weights(cosines: np.ndarray) -> WeightVector:
    c = np.asarray(cosines, dtype=np.float64)
    if abs(c[0]) <= DEGENERATE_COS_TOL:
        raise DegeneratePhaseError("cos(phi_0) ~ 0; trained model is invalid")
    return WeightVector(-c[1:] / c[0])


def phases_from_cosines(cosines: np.ndarray) -> PhaseVector:
    """Angles realizing the given cosine variables on the circuit; values
    are clamped to [-1, 1] (the search may wander outside)."""
    c = np.clip(np.asarray(cosines, dtype=np.float64), -1.0, 1.0)
    return PhaseVector(np.arccos(c))


def regression_map_state(prep: PreparedState, phases: PhaseVector) -> StateVector:
    """The pre-projection state: ancilla ``|+>`` attached above the data
    register, one controlled phase per column, Hadamard on the ancilla."""
    layout = prep.layout
    if phases.num_features != layout.num_features:
        raise ValueError(
            f"phase vector has {phases.num_features} features, layout {layout.num_features}"
        )
    anc = layout.ancilla
    dim = prep.state.amplitudes.size
    amps = np.zeros(2 * dim, dtype=np.complex128)
    amps[:dim] = prep.state.amplitudes
    state = apply_hadamard(StateVector(layout.data_qubit_count + 1, amps), anc)

    phis = phases.phis
    if layout.scheme == ONE_HOT:
        cols = layout.num_features + 1
        for j in range(layout.num_cells):
            spec = DiagonalPhaseSpec(((j, 1),), phis[j % cols], sign_qubit=anc)
            state = apply_controlled_diagonal_phase(state, spec)
    else:
        for m in range(layout.num_features + 1):
            controls = tuple((q, (m >> q) & 1) for q in range(layout.n_m))
            state = apply_controlled_diagonal_phase(
                state, DiagonalPhaseSpec(controls, phis[m], sign_qubit=anc)
            )
    return apply_hadamard(state, anc)


def apply_regression_map(prep: PreparedState, phases: PhaseVector) -> tuple[StateVector, float]:
    """Run the map and project the ancilla onto ``|0>``.

    Returns the **unnormalized** post-selected state over the data qubits
    (amplitudes ``x_lm cos(phi_m)`` for a unit-norm input) and the
    ancilla-0 probability ``sum x_lm^2 cos^2(phi_m)`` relative to the
    input norm.
    """
    anc = prep.layout.ancilla
    full = regression_map_state(prep, phases)
    projected, prob = project_qubit(full, anc, "z0")
    return extract_projected_qubit(projected, anc, "z0"), prob


def analytic_cost(std: StandardizedTable, phases: PhaseVector) -> float:
    """``sum_l (sum_m x_lm cos(phi_m))^2`` evaluated classically."""
    return analytic_cost_from_cosines(std.values, phases.cosines())


def analytic_cost_from_cosines(values: np.ndarray, cosines: np.ndarray) -> float:
    r = values @ np.asarray(cosines, dtype=np.float64)
    return float(r @ r)


def analytic_gradient(std: StandardizedTable, phases: PhaseVector) -> np.ndarray:
    """d(cost)/d(phi_m) = -2 sin(phi_m) * (X^T X cos(phi))_m.

    Chain rule applied to :func:`analytic_cost`; central finite
    differences are the arbiter for the overall sign convention.
    """
    residual = std.values @ phases.cosines()
    return -2.0 * np.sin(phases.phis) * (std.values.T @ residual)
