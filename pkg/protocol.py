'''
Protocol engine
===============

Generic machinery for measurement-based protocols. A protocol is a channel,
a partition of the composite qubits into roles, an ordered list of
measurement stages and a receiving role. The engine enumerates every
outcome path, derives Pauli corrections, derives the basis an intermediate
party must measure, and diffs printed correction tables against the derived
ones.

The composite state of a run is ``input (x) channel``: the unknown qubits
come first, the channel qubits follow in their own order.
'''
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg as la

from statevector import (
    DEFAULT_TOLERANCES,
    PHASES,
    LocalOperatorWord,
    QtvError,
    StateError,
    StateVector,
    apply_word,
    basis_state,
    contract,
    fidelity,
    pauli_words,
    project_subset,
    random_state,
    tensor,
    uniform_state,
)

logger = logging.getLogger(__name__)

MAX_CORRECTION_QUBITS = 3

STATUS_OK = 'ok'
STATUS_ZERO = 'zero-probability'
STATUS_UNCORRECTABLE = 'uncorrectable'
STATUS_LOW_FIDELITY = 'low-fidelity'

DIFF_MATCH = 'match'
DIFF_PHASE = 'phase-only'
DIFF_MISMATCH = 'mismatch'
DIFF_MISSING = 'missing'


class ProtocolError(QtvError):
    ''' Inconsistent protocol description or an unusable outcome path '''


def round_sig(x, digits=12):
    ''' Stable float for reports '''
    if x is None:
        return None
    return float('{:.{}g}'.format(float(x), digits)) + 0.0


@dataclass(frozen=True, eq=False)
class QubitPartition:
    roles: Dict[str, Tuple[int, ...]]

    def __post_init__(self):
        roles = OrderedDict((name, tuple(int(q) for q in qubits))
                            for name, qubits in self.roles.items())
        object.__setattr__(self, 'roles', roles)

    def __getitem__(self, role):
        if role not in self.roles:
            raise ProtocolError('Unknown role {!r}'.format(role))
        return self.roles[role]

    @property
    def n_qubits(self):
        return sum(len(q) for q in self.roles.values())

    def validate(self, n_qubits):
        seen = [q for qubits in self.roles.values() for q in qubits]
        if len(set(seen)) != len(seen):
            raise ProtocolError('Roles share qubits: {}'.format(dict(self.roles)))
        if sorted(seen) != list(range(n_qubits)):
            raise ProtocolError('Roles {} do not cover qubits 0..{}'.format(
                dict(self.roles), n_qubits - 1))

    def to_dict(self):
        return {name: list(q) for name, q in self.roles.items()}


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    '''
    Labeled family of normalized probes on an ordered qubit subset.
    ``raw_norms`` keeps the norm of each element before normalization.
    '''
    name: str
    subset: Tuple[int, ...]
    elements: Tuple[Tuple[str, StateVector], ...]
    raw_norms: Tuple[float, ...] = ()
    anchor: str = ''
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'subset', tuple(int(q) for q in self.subset))
        object.__setattr__(self, 'elements', tuple(self.elements))
        labels = [l for l, _ in self.elements]
        if len(set(labels)) != len(labels):
            raise ProtocolError('Duplicate labels in basis {}'.format(self.name))
        for label, probe in self.elements:
            if probe.n_qubits != len(self.subset):
                raise ProtocolError('{}: element {} has {} qubits for a subset of {}'.format(
                    self.name, label, probe.n_qubits, len(self.subset)))
        if not self.raw_norms:
            object.__setattr__(self, 'raw_norms', tuple(p.norm() for _, p in self.elements))

    @classmethod
    def from_states(cls, name, subset, labeled, anchor='', notes=()):
        '''
        Normalize raw ``(label, state)`` pairs on ingest. Vanishing states
        are dropped with a note.
        '''
        elements, norms, notes = [], [], list(notes)
        for label, state in labeled:
            nrm = state.norm()
            if nrm == 0.0:
                notes.append('{} vanishes and is left out'.format(label))
                continue
            elements.append((label, state.normalized().with_label(label)))
            norms.append(nrm)
        return cls(name, tuple(subset), tuple(elements), tuple(norms), anchor, tuple(notes))

    @classmethod
    def from_data(cls, name, subset, data, anchor=''):
        ''' Basis from a list of PaperDatum '''
        elements, norms, notes = [], [], []
        for d in data:
            if d.normalized is None:
                notes.append('{} vanishes and is left out'.format(d.label))
                continue
            elements.append((d.label, d.normalized))
            norms.append(d.norm)
            notes.extend('{}: {}'.format(d.label, n) for n in d.notes)
        return cls(name, tuple(subset), tuple(elements), tuple(norms), anchor, tuple(notes))

    @property
    def labels(self):
        return [l for l, _ in self.elements]

    @property
    def complete(self):
        return len(self.elements) == 1 << len(self.subset)

    @property
    def constants(self):
        ''' Normalization constant applied to each element '''
        return tuple(1.0 / n for n in self.raw_norms)

    def probe(self, label):
        for l, p in self.elements:
            if l == label:
                return p
        raise ProtocolError('Basis {} has no element {!r}'.format(self.name, label))

    def __len__(self):
        return len(self.elements)


@dataclass(frozen=True)
class BasisReport:
    name: str
    size: int
    complete: bool
    max_overlap: float
    normalization_defect: float
    completeness_defect: Optional[float]
    raw_norms: Tuple[float, ...]
    constants: Tuple[float, ...]
    orthonormal: bool
    anchor: str = ''
    notes: Tuple[str, ...] = ()

    def to_dict(self):
        return {
            'name': self.name,
            'anchor': self.anchor,
            'size': self.size,
            'complete': self.complete,
            'max_overlap': round_sig(self.max_overlap),
            'normalization_defect': round_sig(self.normalization_defect),
            'completeness_defect': round_sig(self.completeness_defect),
            'raw_norms': [round_sig(n) for n in self.raw_norms],
            'constants': [round_sig(c) for c in self.constants],
            'orthonormal': self.orthonormal,
            'notes': list(self.notes),
        }


def check_orthonormal(basis, tol=DEFAULT_TOLERANCES):
    '''
    Overlaps, norms and completeness of a basis. Defects are returned,
    never raised.
    '''
    if not len(basis):
        return BasisReport(basis.name, 0, False, 0.0, 0.0, None, (), (), False,
                           basis.anchor, basis.notes + ('empty basis',))
    a = np.stack([p.amps for _, p in basis.elements])
    gram = a.conj() @ a.T
    off = gram - np.diag(np.diag(gram))
    max_overlap = float(np.max(np.abs(off))) if len(basis) > 1 else 0.0
    norm_defect = float(np.max(np.abs(np.diag(gram) - 1.0)))
    completeness = None
    if basis.complete:
        completeness = float(np.max(np.abs(a.T @ a.conj() - np.eye(a.shape[1]))))
    ok = max_overlap <= tol.orthonormality and norm_defect <= tol.normalization
    return BasisReport(basis.name, len(basis), basis.complete, max_overlap, norm_defect,
                       completeness, basis.raw_norms, basis.constants, ok,
                       basis.anchor, basis.notes)


@dataclass(frozen=True, eq=False)
class OutcomeRecord:
    labels: Tuple[str, ...]
    probability: float
    residual: StateVector
    correction: Optional[LocalOperatorWord] = None
    fidelity_after: Optional[float] = None


def enumerate_outcomes(state, basis, tol=DEFAULT_TOLERANCES):
    ''' One record per basis element, in basis order '''
    if any(q >= state.n_qubits for q in basis.subset):
        raise ProtocolError('Basis {} reaches outside a {}-qubit state'.format(
            basis.name, state.n_qubits))
    out = []
    for label, probe in basis.elements:
        p, residual = project_subset(state, probe, basis.subset, tol)
        out.append(OutcomeRecord((label,), p, residual))
    return out


@dataclass(frozen=True, eq=False)
class Stage:
    '''
    One measurement by ``role``. ``conditional`` replaces ``basis`` when
    the basis depends on the labels of the earlier stages.
    '''
    role: str
    basis: Optional[MeasurementBasis] = None
    conditional: Optional[Dict[Tuple[str, ...], MeasurementBasis]] = None

    def basis_for(self, prefix):
        if self.conditional is not None:
            return self.conditional.get(tuple(prefix))
        return self.basis

    def bases(self):
        if self.conditional is not None:
            return list(self.conditional.values())
        return [self.basis]

    @property
    def subset(self):
        return self.bases()[0].subset


@dataclass(frozen=True, eq=False)
class CorrectionTable:
    '''
    Outcome label tuple -> correction word. ``None`` marks an outcome with
    no uniform Pauli correction.
    '''
    rows: Dict[Tuple[str, ...], Optional[LocalOperatorWord]]
    notes: Dict[Tuple[str, ...], str] = field(default_factory=dict)
    anchor: str = ''

    def __getitem__(self, labels):
        return self.rows[tuple(labels)]

    def __contains__(self, labels):
        return tuple(labels) in self.rows

    def __len__(self):
        return len(self.rows)

    @property
    def correctable(self):
        return all(w is not None for w in self.rows.values())

    def letter_set(self):
        return {w.letters for w in self.rows.values() if w is not None}

    def to_dict(self):
        return {
            'anchor': self.anchor,
            'rows': [{'labels': list(k), 'correction': None if w is None else str(w),
                      'note': self.notes.get(k, '')}
                     for k, w in self.rows.items()],
        }


@dataclass(frozen=True, eq=False)
class ProtocolSpec:
    name: str
    variant: str
    channel: StateVector
    partition: QubitPartition
    stages: Tuple[Stage, ...]
    receiver_role: str
    unknown_role: str = 'unknown'
    paper_table: Optional[CorrectionTable] = None
    expected_coverage: Optional[float] = 1.0
    anchor: str = ''
    notes: Tuple[str, ...] = ()

    @property
    def n_unknown(self):
        return len(self.partition[self.unknown_role])

    @property
    def receiver(self):
        return self.partition[self.receiver_role]

    @property
    def protocol_id(self):
        return '{}/{}'.format(self.name, self.variant)


def validate_spec(spec):
    ''' Reject a spec whose roles, stages and receiver do not fit together '''
    n = spec.n_unknown + spec.channel.n_qubits
    spec.partition.validate(n)
    unknown = set(spec.partition[spec.unknown_role])
    remaining = list(range(n))
    for i, stage in enumerate(spec.stages):
        allowed = set(spec.partition[stage.role]) | unknown
        for basis in stage.bases():
            if basis is None:
                raise ProtocolError('Stage {} of {} has no basis'.format(i, spec.protocol_id))
            if not set(basis.subset) <= allowed:
                raise ProtocolError('Stage {} measures {} outside role {} of {}'.format(
                    i, basis.subset, stage.role, spec.protocol_id))
            if not set(basis.subset) <= set(remaining):
                raise ProtocolError('Stage {} measures qubits already measured'.format(i))
            if basis.subset != stage.subset:
                raise ProtocolError('Conditional bases of stage {} differ in subset'.format(i))
        remaining = [q for q in remaining if q not in stage.subset]
    if remaining != sorted(spec.receiver):
        raise ProtocolError('{} leaves qubits {} unmeasured, receiver holds {}'.format(
            spec.protocol_id, remaining, list(spec.receiver)))
    if spec.n_unknown > MAX_CORRECTION_QUBITS or len(spec.receiver) != spec.n_unknown:
        raise ProtocolError('Receiver arity {} does not match {} unknown qubits'.format(
            len(spec.receiver), spec.n_unknown))


def _walk(stages, state, remaining, labels, prob, tol):
    if not stages:
        yield labels, prob, state
        return
    stage = stages[0]
    basis = stage.basis_for(labels)
    if basis is None:
        return
    positions = [remaining.index(q) for q in basis.subset]
    rest = [q for q in remaining if q not in basis.subset]
    for label, probe in basis.elements:
        p, residual = project_subset(state, probe, positions, tol)
        yield from _walk(stages[1:], residual, rest, labels + (label,), prob * p, tol)


def outcome_paths(spec, psi, tol=DEFAULT_TOLERANCES):
    '''
    Every outcome path of ``psi (x) channel`` as ``(labels, probability,
    receiver state)``, in stage-then-basis order.
    '''
    if psi.n_qubits != spec.n_unknown:
        raise ProtocolError('{} expects a {}-qubit input, got {}'.format(
            spec.protocol_id, spec.n_unknown, psi.n_qubits))
    composite = tensor(psi, spec.channel)
    return list(_walk(list(spec.stages), composite, list(range(composite.n_qubits)),
                      (), 1.0, tol))


def _best_phase(overlap):
    return max(PHASES, key=lambda p: (p * overlap).real)


def _first_word(pairs, k, tol):
    ''' Lexicographically first Pauli word restoring every (got, want) pair '''
    targets = list(range(k))
    for word in pauli_words(k):
        fixed = [apply_word(got, word, targets) for got, _ in pairs]
        if all(fidelity(f, want, tol) >= 1 - tol.fidelity for f, (_, want) in zip(fixed, pairs)):
            overlap = np.vdot(pairs[0][1].amps, fixed[0].amps)
            return LocalOperatorWord(word.letters, _best_phase(overlap))
    return None


def solve_pauli_correction(got, want, tol=DEFAULT_TOLERANCES):
    '''
    Pauli word ``W`` (letters I, σ1, σ2, σ3) with ``W got`` equal to
    ``want`` up to a global phase.

    Parameters
    ----------
    got: StateVector
        The receiver's state
    want: StateVector
        The state to restore, same qubit count (at most 3)

    Returns
    -------
    LocalOperatorWord or None
        The lexicographically first solution, its phase chosen so that
        ``<want|W|got>`` is as close to real positive as the four phases
        allow; ``None`` when no Pauli word works.
    '''
    if got.n_qubits != want.n_qubits:
        raise StateError('Dimension mismatch: {} vs {} qubits'.format(got.n_qubits, want.n_qubits))
    if got.n_qubits > MAX_CORRECTION_QUBITS:
        raise ProtocolError('Pauli search is limited to {} qubits'.format(MAX_CORRECTION_QUBITS))
    return _first_word([(got, want)], got.n_qubits, tol)


def default_probes(n_qubits, seed=7):
    ''' |0..0⟩, |1..1⟩, the uniform superposition and one random state '''
    return [basis_state('0' * n_qubits), basis_state('1' * n_qubits),
            uniform_state(n_qubits), random_state(n_qubits, seed)]


def derive_correction_table(spec, probes=None, tol=DEFAULT_TOLERANCES):
    '''
    Correction per outcome path, kept only when one word works for every
    probe. Paths that no probe reaches are left out of the rows and noted.
    '''
    validate_spec(spec)
    if probes is None:
        probes = default_probes(spec.n_unknown)
    if len(probes) < 2:
        raise ProtocolError('Deriving corrections needs at least two probe inputs')
    runs = [(psi, outcome_paths(spec, psi, tol)) for psi in probes]
    order = [labels for labels, _, _ in runs[0][1]]
    by_path = {labels: [] for labels in order}
    for psi, paths in runs:
        for labels, p, residual in paths:
            if p >= tol.zero_probability:
                by_path.setdefault(labels, []).append((residual, psi))
    rows, notes = OrderedDict(), {}
    for labels, pairs in by_path.items():
        if not pairs:
            notes[labels] = STATUS_ZERO
            continue
        word = _first_word(pairs, spec.n_unknown, tol)
        rows[labels] = word
        if word is None:
            notes[labels] = 'no single Pauli word restores every probe'
    table = CorrectionTable(rows, notes)
    logger.debug('%s: %d correction rows, %d unreached', spec.protocol_id, len(rows),
                 sum(1 for v in notes.values() if v == STATUS_ZERO))
    return table


@dataclass(frozen=True)
class TableDiff:
    labels: Tuple[str, ...]
    paper: Optional[str]
    derived: Optional[str]
    status: str
    note: str = ''

    @property
    def agrees(self):
        return self.status in (DIFF_MATCH, DIFF_PHASE)

    def to_dict(self):
        return {'labels': list(self.labels), 'paper': self.paper, 'derived': self.derived,
                'status': self.status, 'note': self.note}


def compare_tables(paper, derived):
    '''
    Per-outcome status, sorted by label: ``match`` (same letters and phase),
    ``phase-only``, ``mismatch`` or ``missing``.
    '''
    out = []
    for key in sorted(set(paper.rows) | set(derived.rows)):
        note = paper.notes.get(key) or derived.notes.get(key, '')
        if key not in paper.rows or key not in derived.rows:
            p = paper.rows.get(key)
            d = derived.rows.get(key)
            out.append(TableDiff(key, p and str(p), d and str(d), DIFF_MISSING, note))
            continue
        p, d = paper.rows[key], derived.rows[key]
        if p is None or d is None:
            status = DIFF_MISMATCH
        elif p.same_letters(d):
            status = DIFF_MATCH if p.phase == d.phase else DIFF_PHASE
        else:
            status = DIFF_MISMATCH
        out.append(TableDiff(key, p and str(p), d and str(d), status, note))
    return out


@dataclass(frozen=True)
class PathSummary:
    labels: Tuple[str, ...]
    probability: float
    correction: Optional[str]
    fidelity: Optional[float]
    status: str

    def to_dict(self):
        return {
            'labels': list(self.labels),
            'probability': round_sig(self.probability),
            'correction': self.correction,
            'fidelity': round_sig(self.fidelity),
            'status': self.status,
        }


@dataclass(frozen=True, eq=False)
class VerificationReport:
    protocol: str
    variant: str
    trials: int
    coverage: float
    coverage_range: Tuple[float, float]
    expected_coverage: Optional[float]
    outcomes: Tuple[PathSummary, ...]
    diffs: Tuple[TableDiff, ...]
    passed: bool
    anchor: str = ''
    notes: Tuple[str, ...] = ()

    @property
    def min_fidelity(self):
        values = [o.fidelity for o in self.outcomes if o.fidelity is not None]
        return min(values) if values else None

    def count(self, status):
        return sum(1 for o in self.outcomes if o.status == status)

    def to_dict(self):
        return {
            'protocol': self.protocol,
            'variant': self.variant,
            'anchor': self.anchor,
            'trials': self.trials,
            'coverage': round_sig(self.coverage),
            'coverage_range': [round_sig(c) for c in self.coverage_range],
            'expected_coverage': self.expected_coverage,
            'min_fidelity': round_sig(self.min_fidelity),
            'outcomes': [o.to_dict() for o in self.outcomes],
            'diffs': [d.to_dict() for d in self.diffs],
            'notes': list(self.notes),
            'pass': self.passed,
        }


def run_protocol(spec, inputs, table=None, tol=DEFAULT_TOLERANCES):
    '''
    Run every outcome path for each input and apply the corrections.

    Parameters
    ----------
    spec: ProtocolSpec
        The protocol to run
    inputs: StateVector or list of StateVector
        Unknown states, one trial each
    table: CorrectionTable, optional
        Corrections to apply; derived from the default probes when omitted

    Returns
    -------
    VerificationReport
        Per path: mean probability, correction and the minimum fidelity
        over the trials where the path was reached.
    '''
    validate_spec(spec)
    if isinstance(inputs, StateVector):
        inputs = [inputs]
    if not inputs:
        raise ProtocolError('No inputs to run')
    if table is None:
        table = derive_correction_table(spec, tol=tol)
    k = spec.n_unknown
    targets = list(range(k))

    order, probs, fids, reached, status = [], {}, {}, {}, {}
    coverages = []
    for psi in inputs:
        total = 0.0
        for labels, p, residual in outcome_paths(spec, psi, tol):
            if labels not in probs:
                order.append(labels)
                probs[labels], fids[labels], reached[labels] = [], [], False
                status[labels] = STATUS_ZERO
            probs[labels].append(p)
            total += p
            if p < tol.zero_probability:
                continue
            reached[labels] = True
            word = table.rows.get(labels)
            if word is None:
                status[labels] = STATUS_UNCORRECTABLE
                continue
            f = fidelity(apply_word(residual, word, targets), psi, tol)
            fids[labels].append(f)
            if f < 1 - tol.fidelity:
                status[labels] = STATUS_LOW_FIDELITY
            elif status[labels] == STATUS_ZERO:
                status[labels] = STATUS_OK
        coverages.append(total)

    outcomes = []
    for labels in order:
        word = table.rows.get(labels)
        outcomes.append(PathSummary(
            labels, float(np.mean(probs[labels])),
            None if word is None else str(word),
            min(fids[labels]) if fids[labels] else None,
            status[labels]))

    coverage = float(np.mean(coverages))
    coverage_ok = True
    if spec.expected_coverage is not None:
        coverage_ok = all(abs(c - spec.expected_coverage) <= tol.probability_sum + 1e-12
                          for c in coverages)
    paths_ok = all(o.status in (STATUS_OK, STATUS_ZERO) for o in outcomes)
    diffs = ()
    if spec.paper_table is not None:
        diffs = tuple(compare_tables(spec.paper_table, table))
    report = VerificationReport(
        spec.name, spec.variant, len(inputs), coverage,
        (float(min(coverages)), float(max(coverages))), spec.expected_coverage,
        tuple(outcomes), diffs, bool(paths_ok and coverage_ok and any(reached.values())),
        spec.anchor, spec.notes)
    logger.info('%s: %d paths, coverage %.12f, pass %s', spec.protocol_id, len(outcomes),
                coverage, report.passed)
    return report


@dataclass(frozen=True, eq=False)
class Isometry:
    '''
    Linear map from the unknown input to the qubits left after a
    conditioned outcome prefix, scaled by ``1/sqrt(probability)``.
    '''
    matrix: np.ndarray
    n_input: int
    output_qubits: Tuple[int, ...]
    probability: float
    input_independent: bool
    deviation: float
    conditioned: Tuple[str, ...] = ()

    def apply(self, psi):
        return StateVector(self.matrix @ psi.amps)

    def column(self, u):
        return StateVector(self.matrix[:, u])


def protocol_isometry(spec, conditioned, tol=DEFAULT_TOLERANCES):
    '''
    Columns are the unnormalized residuals of the computational inputs
    after the ``conditioned`` outcomes of the first stages.
    '''
    conditioned = tuple(conditioned)
    if len(conditioned) > len(spec.stages):
        raise ProtocolError('{} has only {} stages'.format(spec.protocol_id, len(spec.stages)))
    u = spec.n_unknown
    columns = []
    remaining = None
    for x in range(1 << u):
        state = tensor(basis_state(format(x, '0{}b'.format(u))), spec.channel)
        amps = state.amps
        remaining = list(range(state.n_qubits))
        for i, (stage, label) in enumerate(zip(spec.stages, conditioned)):
            basis = stage.basis_for(conditioned[:i])
            if basis is None:
                raise ProtocolError('No basis after {}'.format(conditioned[:i]))
            positions = [remaining.index(q) for q in basis.subset]
            amps = contract(amps, len(remaining), basis.probe(label).amps, positions)
            remaining = [q for q in remaining if q not in basis.subset]
        columns.append(np.asarray(amps).reshape(-1))
    g = np.stack(columns, axis=1)
    p = np.real(np.sum(np.abs(g) ** 2, axis=0))
    p_mean = float(np.mean(p))
    if p_mean < tol.zero_probability:
        raise ProtocolError('Outcome prefix {} has zero probability'.format(conditioned))
    gram = g.conj().T @ g / p_mean
    deviation = float(np.max(np.abs(gram - np.eye(g.shape[1]))))
    independent = deviation <= tol.fidelity
    if not independent:
        logger.info('%s after %s: outcome probability depends on the input (deviation %.3e)',
                    spec.protocol_id, conditioned, deviation)
    return Isometry(g / np.sqrt(p_mean), u, tuple(remaining), p_mean, independent,
                    deviation, conditioned)


def _fix_phase(v):
    i = int(np.argmax(np.abs(v) > np.max(np.abs(v)) - 1e-12))
    return v * (abs(v[i]) / v[i])


def derive_intermediate_basis(iso, intermediate, receiver=1, tol=DEFAULT_TOLERANCES, name=None):
    '''
    Basis for the party holding the first ``intermediate`` output qubits of
    ``iso`` such that every element leaves the receiver a multiple of one
    Pauli word applied to the input.

    For each word ``W`` the admissible vectors solve a homogeneous linear
    system restricted to the support of ``iso``. The system is injective on
    the support, so each word has at most one solution direction and the
    greedy orthogonality filter only drops directions already covered.

    Returns
    -------
    basis: MeasurementBasis
        Possibly incomplete
    words: dict
        label -> LocalOperatorWord
    '''
    k = intermediate
    if len(iso.output_qubits) != k + receiver or iso.n_input != receiver:
        raise ProtocolError('Isometry maps {} to {} qubits, expected {} to {}'.format(
            iso.n_input, len(iso.output_qubits), receiver, k + receiver))
    dr = 1 << receiver
    g = iso.matrix.reshape(1 << k, dr * dr)
    u_full, s, _ = la.svd(g, full_matrices=False)
    rank = int(np.sum(s > tol.rank * max(1.0, s[0] if len(s) else 0.0)))
    if rank == 0:
        raise ProtocolError('Isometry is zero')
    u = u_full[:, :rank]
    h = u.conj().T @ g

    accepted, words, dims = [], OrderedDict(), OrderedDict()
    for w in pauli_words(receiver):
        wv = w.matrix().reshape(-1)
        wv = wv / np.linalg.norm(wv)
        proj = np.eye(dr * dr) - np.outer(wv, wv.conj())
        z = la.null_space(proj @ h.T, rcond=tol.rank)
        dims[str(w)] = z.shape[1]
        for j in range(z.shape[1]):
            b = _fix_phase(u @ z[:, j].conj())
            b = b / np.linalg.norm(b)
            if all(abs(np.vdot(a, b)) <= tol.orthonormality for _, a in accepted):
                label = '{}/{}'.format(w, j)
                accepted.append((label, b))
                words[label] = w
    basis = MeasurementBasis(
        name or 'derived{}'.format(list(iso.conditioned)), iso.output_qubits[:k],
        tuple((label, StateVector(b, label=label)) for label, b in accepted),
        notes=('solution dimensions {}'.format(dict(dims)),))
    if not accepted:
        logger.info('No Pauli-completable element after %s', iso.conditioned)
    return basis, words


def merge_bases(bases, words=None, name='merged', tol=DEFAULT_TOLERANCES):
    '''
    Merge derived bases into one: exact duplicates are dropped, elements
    overlapping an accepted one count as conflicts.

    Returns
    -------
    (MeasurementBasis, dict label -> word, number of conflicts)
    '''
    words = words or [{} for _ in bases]
    accepted, merged_words, conflicts = [], OrderedDict(), 0
    subset = bases[0].subset if bases else ()
    for basis, wmap in zip(bases, words):
        if basis.subset != subset:
            raise ProtocolError('Cannot merge bases on different subsets')
        for label, probe in basis.elements:
            overlaps = [abs(np.vdot(p.amps, probe.amps)) for _, p in accepted]
            if any(o ** 2 >= 1 - tol.fidelity for o in overlaps):
                continue
            if any(o > tol.orthonormality for o in overlaps):
                conflicts += 1
                continue
            new_label = label
            taken = {l for l, _ in accepted}
            n = 1
            while new_label in taken:
                new_label = '{}.{}'.format(label, n)
                n += 1
            accepted.append((new_label, probe.with_label(new_label)))
            if label in wmap:
                merged_words[new_label] = wmap[label]
    notes = ('{} conflicting element(s) dropped'.format(conflicts),) if conflicts else ()
    return MeasurementBasis(name, subset, tuple(accepted), notes=notes), merged_words, conflicts


def stage_prefixes(spec, upto):
    ''' Label tuples of the first ``upto`` stages '''
    prefixes = [()]
    for i in range(upto):
        nxt = []
        for prefix in prefixes:
            basis = spec.stages[i].basis_for(prefix)
            if basis is not None:
                nxt.extend(prefix + (label,) for label in basis.labels)
        prefixes = nxt
    return prefixes


@dataclass(frozen=True, eq=False)
class DerivedStage:
    merged: MeasurementBasis
    per_prefix: Dict[Tuple[str, ...], MeasurementBasis]
    words: Dict[str, LocalOperatorWord]
    conflicts: int
    sizes: Dict[str, int]

    def stage(self, role):
        ''' The merged basis, or per-prefix bases when merging conflicts '''
        if self.conflicts:
            return Stage(role, conditional=dict(self.per_prefix))
        return Stage(role, basis=self.merged)

    def to_dict(self):
        return {'per_outcome_sizes': dict(self.sizes), 'merged_size': len(self.merged),
                'conflicts': self.conflicts, 'outcome_independent': not self.conflicts}


def derive_stage_basis(spec, intermediate, name='derived', tol=DEFAULT_TOLERANCES):
    '''
    Basis for the next party after all stages of ``spec``, derived per
    outcome prefix and merged into one outcome-independent basis when the
    per-prefix solutions do not conflict.
    '''
    per_prefix, word_maps, sizes = OrderedDict(), [], OrderedDict()
    for prefix in stage_prefixes(spec, len(spec.stages)):
        try:
            iso = protocol_isometry(spec, prefix, tol)
        except ProtocolError:
            sizes['/'.join(prefix)] = 0
            continue
        basis, words = derive_intermediate_basis(
            iso, intermediate, spec.n_unknown, tol, name='{}[{}]'.format(name, '/'.join(prefix)))
        per_prefix[prefix] = basis
        word_maps.append(words)
        sizes['/'.join(prefix)] = len(basis)
    if not per_prefix:
        raise ProtocolError('{} has no reachable outcome to derive from'.format(spec.protocol_id))
    merged, words, conflicts = merge_bases(list(per_prefix.values()), word_maps, name, tol)
    if conflicts:
        logger.info('%s: %d conflicting elements, keeping per-outcome bases', name, conflicts)
    return DerivedStage(merged, per_prefix, words, conflicts, sizes)


def channel_slices(channel, sender, receiver):
    '''
    The channel as a matrix, rows over the ``sender`` qubits and columns
    over the ``receiver`` qubits (channel-local indices).
    '''
    n = channel.n_qubits
    if sorted(list(sender) + list(receiver)) != list(range(n)):
        raise ProtocolError('Sender and receiver must split the channel qubits')
    psi = np.moveaxis(channel.amps.reshape((2,) * n), list(sender) + list(receiver),
                      list(range(n)))
    return psi.reshape(1 << len(sender), 1 << len(receiver))


def steering_basis(channel, n_unknown, sender, receiver, maps, name='steering',
                   anchor='', tol=DEFAULT_TOLERANCES):
    '''
    Measurement on the unknown and sender qubits whose outcome ``label``
    leaves the receiver in ``matrix @ psi`` (up to a positive factor).

    ``maps`` is a list of ``(label, matrix)`` with ``2^|receiver|`` rows and
    ``2^n_unknown`` columns. The channel's receiver slices must be
    orthogonal with equal norms.
    '''
    c = channel_slices(channel, sender, receiver)
    gram = c.conj().T @ c
    norms = np.real(np.diag(gram))
    if (np.max(np.abs(gram - np.diag(np.diag(gram)))) > tol.orthonormality
            or np.max(norms) - np.min(norms) > tol.orthonormality):
        raise ProtocolError('Receiver slices of the channel are not orthogonal with equal norms')
    z = (c / np.sqrt(norms)).T
    subset = tuple(range(n_unknown)) + tuple(n_unknown + q for q in sender)
    elements = []
    for label, m in maps:
        m = np.asarray(m, dtype=complex)
        if m.shape != (c.shape[1], 1 << n_unknown):
            raise ProtocolError('Map {} has shape {}, expected {}'.format(
                label, m.shape, (c.shape[1], 1 << n_unknown)))
        probe = m.conj().T @ z
        elements.append((label, StateVector(probe.reshape(-1), label=label)))
    return MeasurementBasis.from_states(name, subset, elements, anchor=anchor)


@dataclass(frozen=True)
class PauliFit:
    kind: str
    word: Optional[LocalOperatorWord] = None
    scale: complex = 0j


def pauli_fit(matrix, tol=1e-9):
    '''
    Classify a square map as ``zero``, a multiple of a phase-free Pauli
    word (``pauli``) or ``non-pauli``.
    '''
    m = np.asarray(matrix, dtype=complex)
    dim = m.shape[0]
    k = dim.bit_length() - 1
    if m.shape != (dim, dim) or (1 << k) != dim:
        raise StateError('pauli_fit needs a 2^k x 2^k matrix, got {}'.format(m.shape))
    nrm = np.linalg.norm(m)
    if nrm <= tol:
        return PauliFit('zero')
    for w in pauli_words(k):
        wm = w.matrix()
        scale = np.trace(wm.conj().T @ m) / dim
        if np.linalg.norm(m - scale * wm) <= tol * max(1.0, nrm):
            return PauliFit('pauli', w, complex(scale))
    return PauliFit('non-pauli')


def real_form_label(word):
    ''' Printed-style label with iσ2 for σ2, e.g. ``iσ2⊗σ1`` '''
    return '⊗'.join('iσ2' if l == 'σ2' else l for l in word.letters)


def real_form_maps(n_qubits):
    '''
    ``(label, matrix)`` for every n-qubit Pauli word with σ2 taken as the
    real matrix iσ2, lexicographic.
    '''
    out = []
    for w in pauli_words(n_qubits):
        phase = 1j ** sum(1 for l in w.letters if l == 'σ2')
        out.append((real_form_label(w), np.real_if_close(phase * w.matrix())))
    return out
