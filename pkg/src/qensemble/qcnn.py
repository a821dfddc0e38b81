"""QCNN base-learner architectures: 4-qubit (12 params) and 6-qubit (81 params).

A model alternates two-qubit convolution blocks on open-boundary adjacent
pairs with pooling steps (CRZ + CRX from a control onto a target, after
which the control qubit is dropped). The class-1 probability is read off
the single surviving qubit.

Parameter counting (no weight sharing, every slot used exactly once):
- 4 qubits: 3 conv blocks x 2 params + 3 pool steps x 2 params = 12
- 6 qubits: 7 conv blocks x 10 params + 5 pool steps x 2 params
  + 1 readout rotation = 81

The 4-qubit conv unit is one parameterized rotation per qubit plus a CZ,
with fixed Hadamards around some blocks to vary the rotation basis
(Hadamards and CZs carry no parameters).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import (
    Gate,
    GateKind,
    ParameterizedCircuit,
    Statevector,
    measure_prob,
    measure_prob_batch,
    run_circuit,
    run_circuit_batch,
)


@dataclass(frozen=True)
class ConvBlock:
    qubits: tuple[int, int]
    slots: tuple[int, ...]


@dataclass(frozen=True)
class PoolStep:
    control: int
    target: int
    slots: tuple[int, ...]


@dataclass(frozen=True)
class QcnnLayer:
    conv_blocks: tuple[ConvBlock, ...]
    pool_steps: tuple[PoolStep, ...]


@dataclass(frozen=True)
class QcnnArchitecture:
    arch_id: str
    n_qubits: int
    layers: tuple[QcnnLayer, ...]
    readout_rotation_slot: int | None  # extra RY on the readout qubit
    readout_qubit: int
    total_params: int
    circuit: ParameterizedCircuit


class _Slots:
    def __init__(self):
        self.next = 0

    def take(self, k: int) -> tuple[int, ...]:
        out = tuple(range(self.next, self.next + k))
        self.next += k
        return out


def _conv2_gates(a: int, b: int, slots, spec) -> list[Gate]:
    # one parameterized rotation per qubit plus a CZ entangler; fixed
    # (non-parametric) Hadamards set the rotation basis per block
    ax_a, ax_b, h_pre, h_post = spec
    gates = []
    if h_pre:
        gates += [Gate(GateKind.H, (a,)), Gate(GateKind.H, (b,))]
    gates += [
        Gate(ax_a, (a,), slots[0]),
        Gate(ax_b, (b,), slots[1]),
        Gate(GateKind.CZ, (a, b)),
    ]
    if h_post:
        gates += [Gate(GateKind.H, (a,)), Gate(GateKind.H, (b,))]
    return gates


def _conv10_gates(a: int, b: int, slots) -> list[Gate]:
    return [
        Gate(GateKind.RY, (a,), slots[0]),
        Gate(GateKind.RY, (b,), slots[1]),
        Gate(GateKind.CNOT, (a, b)),
        Gate(GateKind.RZ, (a,), slots[2]),
        Gate(GateKind.RZ, (b,), slots[3]),
        Gate(GateKind.CNOT, (b, a)),
        Gate(GateKind.RX, (a,), slots[4]),
        Gate(GateKind.RX, (b,), slots[5]),
        Gate(GateKind.CZ, (a, b)),
        Gate(GateKind.RY, (a,), slots[6]),
        Gate(GateKind.RY, (b,), slots[7]),
        Gate(GateKind.CNOT, (a, b)),
        Gate(GateKind.RZ, (a,), slots[8]),
        Gate(GateKind.RZ, (b,), slots[9]),
    ]


def _pool_gates(control: int, target: int, slots) -> list[Gate]:
    return [
        Gate(GateKind.CRZ, (control, target), slots[0]),
        Gate(GateKind.CRX, (control, target), slots[1]),
    ]


# 4-qubit conv block specs: (axis on first qubit, axis on second qubit,
# Hadamards before, Hadamards after). Chosen by a small architecture
# search on the reference digits task; swap via the declarative layout.
_CONV4_SPECS = {
    (0, 1): (GateKind.RY, GateKind.RZ, True, False),
    (2, 3): (GateKind.RY, GateKind.RY, True, False),
    (1, 3): (GateKind.RY, GateKind.RX, True, True),
}

# (conv pairs, pool (control -> target)) per layer, readout rotation flag
_LAYOUTS = {
    4: (
        [
            ([(0, 1), (2, 3)], [(0, 1), (2, 3)]),
            ([(1, 3)], [(3, 1)]),
        ],
        False,
    ),
    6: (
        [
            ([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], [(0, 1), (2, 3), (4, 5)]),
            ([(1, 3), (3, 5)], [(1, 3), (5, 3)]),
        ],
        True,
    ),
}


def build_qcnn(n_qubits: int) -> tuple[QcnnArchitecture, ParameterizedCircuit]:
    """Build the architecture and its compiled circuit for a 4- or 6-qubit model."""
    if n_qubits not in _LAYOUTS:
        raise ValueError(f"unsupported width {n_qubits}; choose 4 or 6")
    conv_size = 2 if n_qubits == 4 else 10
    layer_specs, with_readout_rotation = _LAYOUTS[n_qubits]

    slots = _Slots()
    gates: list[Gate] = []
    layers: list[QcnnLayer] = []
    active = set(range(n_qubits))
    for conv_pairs, pool_pairs in layer_specs:
        blocks = []
        for a, b in conv_pairs:
            if a not in active or b not in active:
                raise AssertionError("layout touches a pooled-away qubit")
            block_slots = slots.take(conv_size)
            if n_qubits == 4:
                gates.extend(_conv2_gates(a, b, block_slots, _CONV4_SPECS[(a, b)]))
            else:
                gates.extend(_conv10_gates(a, b, block_slots))
            blocks.append(ConvBlock((a, b), block_slots))
        pools = []
        for control, target in pool_pairs:
            pool_slots = slots.take(2)
            gates.extend(_pool_gates(control, target, pool_slots))
            pools.append(PoolStep(control, target, pool_slots))
            active.discard(control)
        layers.append(QcnnLayer(tuple(blocks), tuple(pools)))

    if len(active) != 1:
        raise AssertionError(f"pooling left {len(active)} active qubits")
    readout_qubit = active.pop()

    readout_slot = None
    if with_readout_rotation:
        (readout_slot,) = slots.take(1)
        gates.append(Gate(GateKind.RY, (readout_qubit,), readout_slot))

    circuit = ParameterizedCircuit(tuple(gates), n_qubits, slots.next)
    arch = QcnnArchitecture(
        arch_id=f"qcnn{n_qubits}",
        n_qubits=n_qubits,
        layers=tuple(layers),
        readout_rotation_slot=readout_slot,
        readout_qubit=readout_qubit,
        total_params=slots.next,
        circuit=circuit,
    )
    return arch, circuit


def forward(arch: QcnnArchitecture, params: np.ndarray, encoded: Statevector) -> float:
    """P(readout qubit = 1), the class-1 probability for one encoded sample."""
    if encoded.n_qubits != arch.n_qubits:
        raise ValueError("encoded state width does not match the architecture")
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.total_params,):
        raise ValueError(f"expected {arch.total_params} parameters")
    return measure_prob(run_circuit(arch.circuit, params, encoded), arch.readout_qubit)


def forward_batch(arch: QcnnArchitecture, params: np.ndarray,
                  amps: np.ndarray) -> np.ndarray:
    """Class-1 probabilities for a (batch, 2^n) array of encoded states."""
    out = run_circuit_batch(arch.circuit, np.asarray(params, dtype=np.float64), amps)
    return measure_prob_batch(out, arch.readout_qubit, arch.n_qubits)


def architecture_description(arch: QcnnArchitecture) -> dict:
    """Declarative record of the exact compiled model (gate kind, targets, slot)."""
    return {
        "format_version": 1,
        "arch_id": arch.arch_id,
        "n_qubits": arch.n_qubits,
        "total_params": arch.total_params,
        "readout_qubit": arch.readout_qubit,
        "gates": [
            {"kind": g.kind.value, "targets": list(g.targets), "slot": g.param_slot}
            for g in arch.circuit.gates
        ],
    }


def circuit_from_description(desc: dict) -> tuple[ParameterizedCircuit, int]:
    """Rebuild (circuit, readout_qubit) from an architecture description."""
    gates = tuple(
        Gate(GateKind(g["kind"]), tuple(g["targets"]), g["slot"])
        for g in desc["gates"]
    )
    circuit = ParameterizedCircuit(gates, desc["n_qubits"], desc["total_params"])
    return circuit, desc["readout_qubit"]
