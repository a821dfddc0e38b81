"""Dense statevector simulation: gates, parameterized circuits, measurement.

Conventions (fixed and tested):
- qubit 0 is the most significant bit of the basis index
- RX/RY/RZ(theta) = exp(-i * theta * P / 2); CRZ/CRX apply the rotation
  on the target when the control is |1>
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

NORM_ATOL = 1e-9


class EncodingError(ValueError):
    """Input cannot be amplitude-encoded (zero norm)."""


class GateKind(str, Enum):
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    H = "h"
    CNOT = "cnot"
    CZ = "cz"
    CRZ = "crz"
    CRX = "crx"


PARAMETRIC_KINDS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ,
                              GateKind.CRZ, GateKind.CRX})
TWO_QUBIT_KINDS = frozenset({GateKind.CNOT, GateKind.CZ,
                             GateKind.CRZ, GateKind.CRX})
# Controlled rotations have generator eigenvalues {0, +-1/2}, so the plain
# two-point shift rule is not exact for them; the gradient code uses a
# four-point rule for these kinds.
CONTROLLED_ROTATION_KINDS = frozenset({GateKind.CRZ, GateKind.CRX})


@dataclass(frozen=True)
class Gate:
    """One gate instance: kind, target qubits, optional parameter slot."""

    kind: GateKind
    targets: tuple[int, ...]
    param_slot: int | None = None

    def __post_init__(self):
        arity = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind.value} takes {arity} target(s)")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("gate targets must be distinct")
        if (self.param_slot is not None) != (self.kind in PARAMETRIC_KINDS):
            raise ValueError(
                f"{self.kind.value}: parametric gates need a slot, others must not have one"
            )


@dataclass(frozen=True)
class ParameterizedCircuit:
    """Ordered gate list over n_qubits with n_params parameter slots."""

    gates: tuple[Gate, ...]
    n_qubits: int
    n_params: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        seen = set()
        for g in self.gates:
            if any(t < 0 or t >= self.n_qubits for t in g.targets):
                raise ValueError(f"gate target out of range for {self.n_qubits} qubits")
            if g.param_slot is not None:
                if not 0 <= g.param_slot < self.n_params:
                    raise ValueError(f"parameter slot {g.param_slot} out of range")
                seen.add(g.param_slot)
        if seen != set(range(self.n_params)):
            raise ValueError("every parameter slot must be referenced at least once")


@dataclass(frozen=True)
class Statevector:
    """Unit-norm complex amplitude vector over 2^n_qubits basis states."""

    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (2 ** self.n_qubits,):
            raise ValueError("amplitude length must be 2^n_qubits")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"state norm {norm} deviates from 1")


def zero_state(n_qubits: int) -> Statevector:
    amps = np.zeros(2 ** n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(amps, n_qubits)


# ---------------------------------------------------------------------------
# batched kernels: amps has shape (batch, 2^n); theta is a scalar or (batch,)

def _broadcast(v, extra_axes: int):
    v = np.asarray(v)
    if v.ndim == 0:
        return v
    return v.reshape((-1,) + (1,) * extra_axes)


def _fix(n: int, assignments) -> tuple:
    # index tuple into (batch, 2, ..., 2); qubit q lives on axis q + 1
    sl = [slice(None)] * (n + 1)
    for q, v in assignments:
        sl[q + 1] = v
    return tuple(sl)


def apply_gate_batch(amps: np.ndarray, gate: Gate, n_qubits: int,
                     theta=None) -> np.ndarray:
    """Apply one gate to a (batch, 2^n) amplitude array; returns a new array.

    theta may be a scalar or a per-row (batch,) array for parametric kinds.
    """
    batch = amps.shape[0]
    t = amps.reshape((batch,) + (2,) * n_qubits)
    kind = gate.kind

    if kind in (GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.H):
        (q,) = gate.targets
        a = np.moveaxis(t, q + 1, -1)
        x0, x1 = a[..., 0], a[..., 1]
        if kind == GateKind.H:
            y0 = (x0 + x1) / np.sqrt(2.0)
            y1 = (x0 - x1) / np.sqrt(2.0)
        else:
            half = _broadcast(np.asarray(theta) / 2.0, n_qubits - 1)
            if kind == GateKind.RX:
                c, s = np.cos(half), np.sin(half)
                y0 = c * x0 - 1j * s * x1
                y1 = -1j * s * x0 + c * x1
            elif kind == GateKind.RY:
                c, s = np.cos(half), np.sin(half)
                y0 = c * x0 - s * x1
                y1 = s * x0 + c * x1
            else:  # RZ
                phase = np.exp(-1j * half)
                y0 = phase * x0
                y1 = np.conj(phase) * x1
        out = np.stack([y0, y1], axis=-1)
        return np.moveaxis(out, -1, q + 1).reshape(batch, -1)

    ctrl, targ = gate.targets
    new = t.copy()
    if kind == GateKind.CNOT:
        i0 = _fix(n_qubits, [(ctrl, 1), (targ, 0)])
        i1 = _fix(n_qubits, [(ctrl, 1), (targ, 1)])
        new[i0], new[i1] = t[i1], t[i0]
    elif kind == GateKind.CZ:
        new[_fix(n_qubits, [(ctrl, 1), (targ, 1)])] *= -1.0
    elif kind == GateKind.CRZ:
        half = _broadcast(np.asarray(theta) / 2.0, n_qubits - 2)
        phase = np.exp(-1j * half)
        i0 = _fix(n_qubits, [(ctrl, 1), (targ, 0)])
        i1 = _fix(n_qubits, [(ctrl, 1), (targ, 1)])
        new[i0] = t[i0] * phase
        new[i1] = t[i1] * np.conj(phase)
    elif kind == GateKind.CRX:
        half = _broadcast(np.asarray(theta) / 2.0, n_qubits - 2)
        c, s = np.cos(half), np.sin(half)
        i0 = _fix(n_qubits, [(ctrl, 1), (targ, 0)])
        i1 = _fix(n_qubits, [(ctrl, 1), (targ, 1)])
        a0, a1 = t[i0], t[i1]
        new[i0] = c * a0 - 1j * s * a1
        new[i1] = -1j * s * a0 + c * a1
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown gate kind {kind}")
    return new.reshape(batch, -1)


def run_circuit_batch(circuit: ParameterizedCircuit, params: np.ndarray,
                      amps: np.ndarray, angle_offsets: np.ndarray | None = None
                      ) -> np.ndarray:
    """Run the circuit on a (batch, 2^n) array of states.

    angle_offsets, if given, is a (batch, n_gates) array added to the
    resolved angle of each parametric gate per row (used by the
    parameter-shift gradient).
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (circuit.n_params,):
        raise ValueError(
            f"expected {circuit.n_params} parameters, got {params.shape}"
        )
    out = amps
    for gi, gate in enumerate(circuit.gates):
        theta = None
        if gate.param_slot is not None:
            theta = params[gate.param_slot]
            if angle_offsets is not None:
                theta = theta + angle_offsets[:, gi]
        out = apply_gate_batch(out, gate, circuit.n_qubits, theta)
    return out


def measure_prob_batch(amps: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """P(qubit = 1) per batch row."""
    batch = amps.shape[0]
    t = amps.reshape((batch,) + (2,) * n_qubits)
    sel = t[_fix(n_qubits, [(qubit, 1)])]
    return np.sum(np.abs(sel) ** 2, axis=tuple(range(1, n_qubits))).real


# ---------------------------------------------------------------------------
# single-state API

def amplitude_encode(x) -> Statevector:
    """Write a real vector into state amplitudes: amp_i = x_i / ||x||."""
    values = np.asarray(getattr(x, "values", x), dtype=np.float64)
    n = values.shape[0]
    if values.ndim != 1 or n == 0 or (n & (n - 1)) != 0:
        raise ValueError("input length must be a power of two")
    norm = np.linalg.norm(values)
    if norm == 0.0:
        raise EncodingError("cannot amplitude-encode a zero vector")
    return Statevector((values / norm).astype(np.complex128), int(np.log2(n)))


def apply_gate(state: Statevector, gate: Gate, theta: float | None = None) -> Statevector:
    if (theta is not None) != (gate.kind in PARAMETRIC_KINDS):
        raise ValueError("theta must be supplied iff the gate is parametric")
    if any(t < 0 or t >= state.n_qubits for t in gate.targets):
        raise ValueError("gate target out of range")
    out = apply_gate_batch(state.amplitudes[None, :], gate, state.n_qubits, theta)
    return Statevector(out[0], state.n_qubits)


def run_circuit(circuit: ParameterizedCircuit, params: np.ndarray,
                state: Statevector) -> Statevector:
    if state.n_qubits != circuit.n_qubits:
        raise ValueError("input state width does not match the circuit")
    out = run_circuit_batch(circuit, params, state.amplitudes[None, :])
    return Statevector(out[0], state.n_qubits)


def measure_prob(state: Statevector, qubit: int) -> float:
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit index {qubit} out of range")
    return float(measure_prob_batch(state.amplitudes[None, :], qubit, state.n_qubits)[0])
