'''
State preparation circuits
==========================

Builds a circuit of single-qubit rotations and CNOTs that maps ``|0...0⟩``
to an arbitrary target state, up to a global phase.

The construction has two stages of uniformly controlled rotations: first
RY multiplexors set the amplitude magnitudes qubit by qubit, then RZ
multiplexors, from the last qubit back to the first, set the relative
phases. Each multiplexor on ``m`` controls uses ``2^m`` rotations and
``2^m`` CNOTs before the cancellation pass, so ``n`` qubits never need
more than ``2^(n+2) - 6`` gates.
'''
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from statevector import (
    DEFAULT_TOLERANCES,
    QtvError,
    StateError,
    apply_matrix,
    basis_state,
    fidelity,
)

logger = logging.getLogger(__name__)

ANGLE_CUTOFF = 1e-12

CX_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


class SynthesisError(QtvError):
    ''' A synthesized circuit does not reproduce its target '''


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(phi):
    return np.array([[np.exp(-0.5j * phi), 0], [0, np.exp(0.5j * phi)]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    '''
    ``kind`` is ``ry``, ``rz`` or ``cx``; a ``cx`` lists (control, target).
    '''
    kind: str
    params: Tuple[float, ...]
    qubits: Tuple[int, ...]

    def matrix(self):
        if self.kind == 'ry':
            return ry(self.params[0])
        if self.kind == 'rz':
            return rz(self.params[0])
        if self.kind == 'cx':
            return CX_MATRIX
        raise SynthesisError('Unknown gate {}'.format(self.kind))

    def to_text(self):
        params = ','.join('{:.12g}'.format(p) for p in self.params) or '-'
        return '{} {} {}'.format(self.kind, params, ','.join(str(q) for q in self.qubits))


@dataclass(frozen=True)
class CircuitDescription:
    n_qubits: int
    gates: Tuple[Gate, ...]

    @property
    def gate_count(self):
        return len(self.gates)

    def count(self, kind):
        return sum(1 for g in self.gates if g.kind == kind)

    def to_text(self):
        ''' One ``<gate> <params> <targets>`` line per gate '''
        header = '# qubits {} gates {}'.format(self.n_qubits, self.gate_count)
        return '\n'.join([header] + [g.to_text() for g in self.gates]) + '\n'

    def to_dict(self):
        return {
            'n_qubits': self.n_qubits,
            'gate_count': self.gate_count,
            'cx_count': self.count('cx'),
            'gates': [g.to_text() for g in self.gates],
        }


def _cx(control, target):
    return Gate('cx', (), (control, target))


def _multiplexor(kind, angles, controls, target):
    '''
    Uniformly controlled rotation: ``angles[x]`` is applied to ``target``
    when the controls read ``x`` (first control most significant).
    '''
    if not controls:
        return [Gate(kind, (float(angles[0]),), (target,))]
    half = len(angles) // 2
    a = (angles[:half] + angles[half:]) / 2
    b = (angles[:half] - angles[half:]) / 2
    head = _multiplexor(kind, a, controls[1:], target)
    tail = _multiplexor(kind, b, controls[1:], target)
    # reversing the second half lets its leading CNOT cancel the head's last one
    return head + [_cx(controls[0], target)] + tail[::-1] + [_cx(controls[0], target)]


def _append(out, gate):
    if gate.kind != 'cx':
        if abs(gate.params[0]) >= ANGLE_CUTOFF:
            out.append(gate)
        return
    # CNOTs sharing a target commute
    j = len(out) - 1
    while j >= 0 and out[j].kind == 'cx' and out[j].qubits[1] == gate.qubits[1]:
        if out[j] == gate:
            del out[j]
            return
        j -= 1
    out.append(gate)


def simulate(circuit):
    ''' Run the circuit on ``|0...0⟩`` '''
    state = basis_state('0' * circuit.n_qubits)
    for g in circuit.gates:
        state = apply_matrix(state, g.matrix(), g.qubits)
    return state


def synth_prep_circuit(target, tol=DEFAULT_TOLERANCES):
    '''
    Preparation circuit for a normalized target state.

    Parameters
    ----------
    target: StateVector
        The state to prepare
    tol: Tolerances
        ``fidelity`` bounds the re-simulation check

    Returns
    -------
    CircuitDescription
        Verified by simulation; SynthesisError otherwise
    '''
    if not target.is_normalized(tol.normalization):
        raise StateError('Target state is not normalized')
    n = target.n_qubits
    amps = target.amps
    gates = []

    prob = np.abs(amps) ** 2
    for k in range(n):
        p = prob.reshape(1 << k, 2, -1).sum(axis=2)
        m = np.sqrt(p)
        theta = 2 * np.arctan2(m[:, 1], m[:, 0])
        for g in _multiplexor('ry', theta, list(range(k)), k):
            _append(gates, g)

    omega = np.where(np.abs(amps) > 0, np.angle(amps), 0.0)
    for k in range(n - 1, -1, -1):
        pairs = omega.reshape(1 << k, 2)
        phi = pairs[:, 1] - pairs[:, 0]
        for g in _multiplexor('rz', phi, list(range(k)), k):
            _append(gates, g)
        omega = pairs.mean(axis=1)

    circuit = CircuitDescription(n, tuple(gates))
    f = fidelity(simulate(circuit), target, tol)
    if f < 1 - tol.fidelity:
        raise SynthesisError('Circuit reproduces the target with fidelity {:.3e} only'.format(f))
    logger.debug('Synthesized %d gates (%d cx) for %d qubits, fidelity %.15f',
                 circuit.gate_count, circuit.count('cx'), n, f)
    return circuit


def read_circuit(filename):
    ''' Parse the text export back into a CircuitDescription '''
    n_qubits = None
    gates = []
    with open(filename, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line.startswith('# qubits'):
                n_qubits = int(line.split()[2])
                continue
            if not line or line.startswith('#'):
                continue
            kind, params, qubits = line.split()
            params = () if params == '-' else tuple(float(p) for p in params.split(','))
            gates.append(Gate(kind, params, tuple(int(q) for q in qubits.split(','))))
    if n_qubits is None:
        raise SynthesisError('{}: missing "# qubits" header'.format(filename))
    return CircuitDescription(n_qubits, tuple(gates))
