'''
Dense state-vector arithmetic
=============================

Small dense simulator used by every protocol check in this repository.

Qubit ordering is big-endian on the printed labels: qubit 0 is the most
significant bit of the basis index, so the ket ``|b0 b1 ... b(n-1)>`` lives
at index ``int('b0b1...', 2)``. All printed kets transcribe left-to-right
with no translation.

The values defined here (``StateVector``, ``DensityMatrix``,
``LocalOperatorWord``) are immutable after construction and every operation
is a pure function of its inputs.
'''
import dataclasses
import itertools
import logging
import os
import re
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la

logger = logging.getLogger(__name__)

DEFAULT_MAX_QUBITS = 16
MAX_QUBITS_ENV = 'QTV_MAX_QUBITS'

_configured_max_qubits = DEFAULT_MAX_QUBITS


class QtvError(Exception):
    ''' Root of all the errors raised by this package '''


class CapacityError(QtvError):
    ''' A state would exceed the configured maximum number of qubits '''


class StateError(QtvError):
    ''' Malformed state, operator or qubit list '''


class StateFileError(StateError):
    ''' A state file could not be parsed '''


@dataclass(frozen=True)
class Tolerances:
    orthonormality: float = 1e-10
    fidelity: float = 1e-9
    probability_sum: float = 1e-12
    rank: float = 1e-9
    zero_probability: float = 1e-14
    entropy_eigen: float = 1e-12
    normalization: float = 1e-10

    def __post_init__(self):
        for field in dataclasses.fields(self):
            if not getattr(self, field.name) > 0:
                raise ValueError('Tolerance {} must be positive'.format(field.name))

    def replace(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


DEFAULT_TOLERANCES = Tolerances()


def configure(max_qubits=None):
    '''
    Set the process-wide default capacity. The ``QTV_MAX_QUBITS``
    environment variable still takes precedence when it is set.
    '''
    global _configured_max_qubits
    if max_qubits is not None:
        if max_qubits < 1:
            raise ValueError('max_qubits must be at least 1')
        _configured_max_qubits = int(max_qubits)


def max_qubits():
    ''' The capacity cap in effect right now '''
    value = os.environ.get(MAX_QUBITS_ENV)
    if value:
        try:
            return int(value)
        except ValueError:
            raise CapacityError('{}={!r} is not an integer'.format(MAX_QUBITS_ENV, value))
    return _configured_max_qubits


def _check_capacity(n_qubits):
    cap = max_qubits()
    if n_qubits > cap:
        raise CapacityError(
            '{} qubits requested, the configured maximum is {}'.format(n_qubits, cap))


@dataclass(frozen=True, eq=False)
class StateVector:
    '''
    Dense complex amplitude vector over ``n_qubits`` qubits.

    A length-1 vector is the 0-qubit scalar marker returned when a
    projection leaves no qubit behind. ``placeholder`` flags the residual
    of a zero-probability outcome.
    '''
    amps: np.ndarray
    label: Optional[str] = None
    placeholder: bool = False

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        size = amps.shape[0]
        n = size.bit_length() - 1
        if size < 1 or (1 << n) != size:
            raise StateError('Amplitude count {} is not a power of two'.format(size))
        _check_capacity(n)
        if not np.all(np.isfinite(amps)):
            raise StateError('Amplitudes must be finite')
        amps.setflags(write=False)
        object.__setattr__(self, 'amps', amps)

    @property
    def n_qubits(self):
        return self.amps.shape[0].bit_length() - 1

    @property
    def dim(self):
        return self.amps.shape[0]

    def norm(self):
        return float(np.linalg.norm(self.amps))

    def is_normalized(self, tol=DEFAULT_TOLERANCES.normalization):
        return abs(self.norm() ** 2 - 1.0) <= tol

    def normalized(self):
        nrm = self.norm()
        if nrm == 0.0:
            raise StateError('Cannot normalize the zero vector')
        return StateVector(self.amps / nrm, label=self.label)

    def with_label(self, label):
        return StateVector(self.amps, label=label, placeholder=self.placeholder)

    def amplitude(self, bits):
        ''' Amplitude of the computational ket written as a bit string '''
        if len(bits) != self.n_qubits:
            raise StateError('Ket {} does not have {} qubits'.format(bits, self.n_qubits))
        return complex(self.amps[int(bits, 2)])

    def support(self, tol=1e-15):
        ''' Bit strings of the nonzero amplitudes, in index order '''
        n = self.n_qubits
        return [format(i, '0{}b'.format(n)) if n > 0 else ''
                for i in np.flatnonzero(np.abs(self.amps) > tol)]

    def __repr__(self):
        return 'StateVector(n_qubits={}, label={!r}{})'.format(
            self.n_qubits, self.label, ', placeholder' if self.placeholder else '')


def basis_state(bits, label=None):
    '''
    Computational basis ket from a bit string, e.g. ``basis_state('0101')``
    '''
    if not bits or set(bits) - {'0', '1'}:
        raise StateError('Invalid ket {!r}'.format(bits))
    amps = np.zeros(1 << len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps, label=label or '|{}>'.format(bits))


def uniform_state(n_qubits):
    dim = 1 << n_qubits
    return StateVector(np.full(dim, 1.0 / np.sqrt(dim)), label='uniform')


def scalar_marker():
    return StateVector(np.ones(1), label='scalar')


def from_amplitudes(terms, n_qubits=None, label=None):
    '''
    Build a state from ``(coefficient, bits)`` pairs. Repeated kets add up.
    '''
    terms = list(terms)
    if not terms:
        raise StateError('No terms given')
    if n_qubits is None:
        n_qubits = len(terms[0][1])
    amps = np.zeros(1 << n_qubits, dtype=complex)
    for coef, bits in terms:
        if len(bits) != n_qubits:
            raise StateError('Ket {} does not have {} qubits'.format(bits, n_qubits))
        amps[int(bits, 2)] += coef
    return StateVector(amps, label=label)


def tensor(a, b):
    '''
    Tensor product ``a (x) b``; the qubits of ``a`` come first.
    '''
    _check_capacity(a.n_qubits + b.n_qubits)
    label = None
    if a.label and b.label:
        label = '{}{}'.format(a.label, b.label)
    return StateVector(np.kron(a.amps, b.amps), label=label)


def tensor_all(states):
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


# Local operator letters. sigma_2 follows the standard convention, which is
# the negative of the matrix printed with the transformation list.
LETTERS = {
    'I': np.array([[1, 0], [0, 1]], dtype=complex),
    'σ1': np.array([[0, 1], [1, 0]], dtype=complex),
    'σ2': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'σ3': np.array([[1, 0], [0, -1]], dtype=complex),
    'P1': np.array([[1, 0], [0, 0]], dtype=complex),
    'P2': np.array([[0, 0], [0, 1]], dtype=complex),
    'F1': np.array([[0, 1], [0, 0]], dtype=complex),
    'F2': np.array([[0, 0], [1, 0]], dtype=complex),
}
PAULI_LETTERS = ('I', 'σ1', 'σ2', 'σ3')
PHASES = (1, -1, 1j, -1j)

_LETTER_ALIASES = {
    'σx': 'σ1', 'σy': 'σ2', 'σz': 'σ3',
    's1': 'σ1', 's2': 'σ2', 's3': 'σ3',
    'X': 'σ1', 'Y': 'σ2', 'Z': 'σ3',
}
_ADJOINT_LETTER = {'F1': 'F2', 'F2': 'F1'}
_PHASE_PREFIX = {1: '', -1: '-', 1j: 'i', -1j: '-i'}


def _snap_phase(value):
    for p in PHASES:
        if abs(value - p) < 1e-12:
            return p
    raise StateError('Phase {} is not one of +1, -1, +i, -i'.format(value))


@dataclass(frozen=True)
class LocalOperatorWord:
    '''
    Tensor product of single-qubit letters with a global phase in
    {+1, -1, +i, -i}. Words made only of I, σ1, σ2, σ3 are unitary.
    '''
    letters: Tuple[str, ...]
    phase: complex = 1

    def __post_init__(self):
        letters = tuple(_LETTER_ALIASES.get(l, l) for l in self.letters)
        unknown = [l for l in letters if l not in LETTERS]
        if unknown:
            raise StateError('Unknown operator letters {}'.format(unknown))
        if not letters:
            raise StateError('A word needs at least one letter')
        object.__setattr__(self, 'letters', letters)
        object.__setattr__(self, 'phase', _snap_phase(complex(self.phase)))

    @property
    def arity(self):
        return len(self.letters)

    @property
    def is_unitary(self):
        return all(l in PAULI_LETTERS for l in self.letters)

    def matrix(self):
        out = np.ones((1, 1), dtype=complex)
        for l in self.letters:
            out = np.kron(out, LETTERS[l])
        return self.phase * out

    def dagger(self):
        letters = tuple(_ADJOINT_LETTER.get(l, l) for l in self.letters)
        return LocalOperatorWord(letters, np.conj(self.phase))

    def same_letters(self, other):
        return self.letters == other.letters

    def __str__(self):
        return _PHASE_PREFIX[self.phase] + '⊗'.join(self.letters)

    @classmethod
    def parse(cls, text):
        '''
        Read a word in printed notation such as ``iσ2⊗σ1`` or ``-I⊗σ3``.
        Each factor may carry its own ``i`` or sign.
        '''
        phase = 1
        letters = []
        for factor in re.split(r'⊗|\(x\)', text.strip()):
            factor = factor.strip()
            while factor[:1] in ('-', '+'):
                if factor[0] == '-':
                    phase = -phase
                factor = factor[1:].strip()
            if factor.startswith('i') and factor[1:2] != '':
                phase = phase * 1j
                factor = factor[1:]
            letters.append(factor)
        return cls(tuple(letters), phase)


def pauli_words(n_letters):
    ''' All phase-free Pauli words, lexicographic with I < σ1 < σ2 < σ3 '''
    return [LocalOperatorWord(letters)
            for letters in itertools.product(PAULI_LETTERS, repeat=n_letters)]


def _check_targets(targets, n_qubits):
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise StateError('Duplicate target qubits {}'.format(targets))
    for t in targets:
        if t < 0 or t >= n_qubits:
            raise StateError('Target qubit {} out of range for {} qubits'.format(t, n_qubits))
    return targets


def apply_matrix(state, matrix, targets):
    '''
    Apply a ``2^k x 2^k`` matrix to the listed qubits (first target is the
    most significant bit of the matrix index).
    '''
    n = state.n_qubits
    targets = _check_targets(targets, n)
    k = len(targets)
    op = np.asarray(matrix, dtype=complex)
    if op.shape != (1 << k, 1 << k):
        raise StateError('Matrix shape {} does not act on {} qubits'.format(op.shape, k))
    psi = state.amps.reshape((2,) * n)
    psi = np.tensordot(op.reshape((2,) * (2 * k)), psi,
                       axes=(list(range(k, 2 * k)), targets))
    psi = np.moveaxis(psi, list(range(k)), targets)
    return StateVector(psi.reshape(-1), label=state.label)


def apply_word(state, word, targets):
    '''
    Apply a local operator word letter by letter on the target qubits.

    Parameters
    ----------
    state: StateVector
        The state to transform
    word: LocalOperatorWord
        One letter per target
    targets: list of int
        Qubit indices, distinct and in range

    Returns
    -------
    The transformed state. The norm is preserved when the word is unitary.
    '''
    n = state.n_qubits
    targets = _check_targets(targets, n)
    if len(targets) != word.arity:
        raise StateError('Word {} has {} letters for {} targets'.format(
            word, word.arity, len(targets)))
    psi = state.amps.reshape((2,) * n)
    for letter, t in zip(word.letters, targets):
        if letter == 'I':
            continue
        psi = np.moveaxis(np.tensordot(LETTERS[letter], psi, axes=([1], [t])), 0, t)
    return StateVector(word.phase * psi.reshape(-1), label=state.label)


def contract(amps, n_qubits, probe_amps, positions):
    '''
    Unnormalized post-measurement vector ``<probe|_positions psi>``.

    The remaining qubits keep their relative order.
    '''
    k = len(positions)
    psi = np.asarray(amps).reshape((2,) * n_qubits)
    psi = np.moveaxis(psi, list(positions), list(range(k)))
    psi = psi.reshape(1 << k, -1)
    return np.conj(probe_amps) @ psi


def project_subset(state, probe, subset, tol=DEFAULT_TOLERANCES):
    '''
    Project the listed qubits onto ``probe``.

    Returns
    -------
    probability: float
        Squared norm of the projected vector
    residual: StateVector
        Normalized state of the complement qubits, a flagged placeholder
        when the probability is below the zero-probability threshold, or
        the 0-qubit scalar marker when no qubit remains
    '''
    n = state.n_qubits
    subset = _check_targets(subset, n)
    if probe.n_qubits != len(subset):
        raise StateError('Probe has {} qubits for a subset of {}'.format(
            probe.n_qubits, len(subset)))
    if not probe.is_normalized(tol.normalization):
        raise StateError('Probe {} is not normalized (norm {:.3e})'.format(
            probe.label, probe.norm()))
    r = contract(state.amps, n, probe.amps, subset)
    probability = float(np.real(np.vdot(r, r)))
    if len(subset) == n:
        return probability, scalar_marker()
    if probability < tol.zero_probability:
        return probability, StateVector(np.zeros_like(r), label=probe.label, placeholder=True)
    return probability, StateVector(r / np.sqrt(probability), label=probe.label)


def fidelity(a, b, tol=DEFAULT_TOLERANCES):
    ''' Phase-invariant overlap ``|<a|b>|^2`` of two normalized states '''
    if a.n_qubits != b.n_qubits:
        raise StateError('Dimension mismatch: {} vs {} qubits'.format(a.n_qubits, b.n_qubits))
    for s in (a, b):
        if not s.is_normalized(tol.normalization):
            raise StateError('State {} is not normalized'.format(s.label))
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise StateError('Density matrix must be square')
        dim = entries.shape[0]
        if dim < 1 or dim & (dim - 1):
            raise StateError('Density matrix size {} is not a power of two'.format(dim))
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @property
    def n_qubits(self):
        return self.entries.shape[0].bit_length() - 1

    def hermiticity_defect(self):
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def defects(self):
        ''' Deviations from the density-matrix invariants '''
        herm = self.hermiticity_defect()
        evals = la.eigvalsh((self.entries + self.entries.conj().T) / 2)
        return {
            'hermiticity': herm,
            'trace': float(abs(np.trace(self.entries) - 1.0)),
            'min_eigenvalue': float(evals.min()),
        }


def reduced_density(state, keep, tol=DEFAULT_TOLERANCES):
    '''
    Partial trace of a pure state down to the ``keep`` qubits, in the
    order listed.
    '''
    n = state.n_qubits
    if not len(keep):
        raise StateError('Nothing to keep')
    keep = _check_targets(keep, n)
    if not state.is_normalized(tol.normalization):
        raise StateError('State is not normalized')
    k = len(keep)
    psi = np.moveaxis(state.amps.reshape((2,) * n), keep, list(range(k)))
    m = psi.reshape(1 << k, -1)
    return DensityMatrix(m @ m.conj().T)


def entropy_bits(rho, tol=DEFAULT_TOLERANCES):
    ''' von Neumann entropy in bits; eigenvalues under the cutoff count as zero '''
    if rho.hermiticity_defect() > tol.orthonormality:
        raise StateError('Density matrix is not Hermitian')
    evals = la.eigvalsh(rho.entries)
    evals = evals[evals >= tol.entropy_eigen]
    return float(-np.sum(evals * np.log2(evals))) + 0.0


def random_state(n_qubits, seed):
    '''
    Haar-like random state: independent standard normal real and imaginary
    parts, then normalized. Deterministic for a fixed seed.
    '''
    if n_qubits < 1:
        raise StateError('Need at least one qubit')
    _check_capacity(n_qubits)
    rng = np.random.default_rng(int(seed) % (1 << 64))
    dim = 1 << n_qubits
    amps = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(amps / np.linalg.norm(amps), label='random({})'.format(seed))


def write_state_file(state, filename, header=None, tol=1e-15):
    '''
    Write one ``<bitstring> <re> <im>`` line per nonzero amplitude.
    ``header`` lines are emitted as ``#`` comments.
    '''
    n = state.n_qubits
    lines = []
    for h in header or []:
        lines.append('# ' + h)
    for i in np.flatnonzero(np.abs(state.amps) > tol):
        amp = state.amps[i]
        lines.append('{} {!r} {!r}'.format(
            format(i, '0{}b'.format(n)), float(amp.real), float(amp.imag)))
    with open(filename, 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines) + '\n')


def read_state_file(filename, label=None):
    '''
    Parse a state file. The bit-string length fixes the qubit count;
    repeated bit strings are rejected.
    '''
    terms = {}
    n_qubits = None
    with open(filename, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 3:
                raise StateFileError('{}:{}: expected "<bits> <re> <im>"'.format(filename, lineno))
            bits, re_part, im_part = fields
            if set(bits) - {'0', '1'}:
                raise StateFileError('{}:{}: bad bit string {!r}'.format(filename, lineno, bits))
            if n_qubits is None:
                n_qubits = len(bits)
            elif len(bits) != n_qubits:
                raise StateFileError('{}:{}: expected {} bits'.format(filename, lineno, n_qubits))
            if bits in terms:
                raise StateFileError('{}:{}: duplicate ket {}'.format(filename, lineno, bits))
            try:
                terms[bits] = complex(float(re_part), float(im_part))
            except ValueError:
                raise StateFileError('{}:{}: bad amplitude'.format(filename, lineno))
    if not terms:
        raise StateFileError('{}: no amplitudes'.format(filename))
    return from_amplitudes([(c, b) for b, c in terms.items()], n_qubits,
                           label=label or os.path.basename(str(filename)))
