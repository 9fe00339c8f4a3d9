'''
Seven-qubit channel protocols
=============================

Teleportation of one, two and three qubits and the three state-sharing
proposals over the seven-qubit channel, each wired twice: once with the
printed measurement families exactly as transcribed, and once with
replacements derived from the reconstructed channel. The printed runs
report whatever the printed data does; the derived runs must verify.

Every check in this module returns plain JSON-serializable dictionaries
that carry the citation anchor of the printed artifact they look at.
'''
import functools
import itertools
import logging
import re
from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

import printed
from channels import BELL_LABELS, bell, cached_reconstruction, ghz_family, xwz_channel
from protocol import (
    DIFF_MISMATCH,
    CorrectionTable,
    MeasurementBasis,
    ProtocolError,
    ProtocolSpec,
    QubitPartition,
    Stage,
    channel_slices,
    check_orthonormal,
    compare_tables,
    derive_correction_table,
    derive_stage_basis,
    pauli_fit,
    protocol_isometry,
    real_form_label,
    real_form_maps,
    round_sig,
    run_protocol,
    steering_basis,
)
from statevector import (
    DEFAULT_TOLERANCES,
    LETTERS,
    LocalOperatorWord,
    StateError,
    StateVector,
    apply_word,
    basis_state,
    fidelity,
    project_subset,
    random_state,
    tensor,
)

logger = logging.getLogger(__name__)

VARIANTS = ('derived', 'printed')
CHANNEL_QUBITS = 7
QSS3_ORDERINGS = ('charlie-single', 'bob-single')
COEFFICIENTS = ('α', 'β')

_BELL_TOKEN_RE = re.compile(r'\|(Φ[+-]|Ψ[+-])⟩')


def _art():
    return printed.load_artifacts()


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ProtocolError('Unknown variant {!r}, expected one of {}'.format(variant, VARIANTS))


def _partition(roles):
    return QubitPartition({name: tuple(q) for name, q in roles.items()})


def trial_inputs(n_qubits, trials, seed):
    ''' Seeded random inputs, one per trial '''
    if trials < 1:
        raise ValueError('trials must be at least 1')
    return [random_state(n_qubits, seed + t) for t in range(trials)]


def bell_basis(subset):
    return MeasurementBasis.from_states('Bell', subset, [(l, bell(l)) for l in BELL_LABELS])


def ghz_basis(subset):
    return MeasurementBasis.from_states('GHZ', subset, [(s.label, s) for s in ghz_family()])


def family_diff(data, derived, tol=DEFAULT_TOLERANCES):
    '''
    Best-matching derived element for every printed datum. A row is a
    ``match`` only when the fidelity reaches 1 and the datum carries no
    transcription note.
    '''
    rows = []
    for d in data:
        best, best_f = None, None
        if d.normalized is not None and len(derived):
            for label, probe in derived.elements:
                f = fidelity(d.normalized, probe, tol)
                if best_f is None or f > best_f + 1e-12:
                    best, best_f = label, f
        ok = best_f is not None and best_f >= 1 - tol.fidelity and not d.notes
        rows.append(OrderedDict([
            ('label', d.label),
            ('anchor', d.anchor),
            ('best_match', best),
            ('fidelity', round_sig(best_f)),
            ('status', 'match' if ok else 'flagged'),
            ('notes', list(d.notes)),
        ]))
    return rows


def _flagged(rows):
    return sum(1 for r in rows if r['status'] != 'match')


def _stage(role, basis):
    return Stage(role, basis=basis)


# teleportation

def derived_teleport_basis(n_unknown, tol=DEFAULT_TOLERANCES):
    '''
    Sender measurement for n-qubit teleportation: outcome ``W`` leaves the
    receiver in ``W psi`` for every Pauli word ``W`` (σ2 read as iσ2).
    '''
    sender = tuple(range(CHANNEL_QUBITS - n_unknown))
    receiver = tuple(range(CHANNEL_QUBITS - n_unknown, CHANNEL_QUBITS))
    return steering_basis(xwz_channel(), n_unknown, sender, receiver, real_form_maps(n_unknown),
                          name='teleport{}-derived'.format(n_unknown), tol=tol)


def basis_teleport1():
    ''' The printed ξ±, ν± family, normalized on ingest '''
    section = _art()['teleport1']
    return MeasurementBasis.from_data('ξ±/ν±', range(7), printed.pm_family(section),
                                      anchor=section['anchor'])


def teleport2_group_data():
    '''
    One printed probe per coefficient group of the two-qubit expansion,
    built from the printed block states.
    '''
    art = _art()
    blocks = art['teleport2_blocks']['states']
    expansion = art['teleport2_expansion']
    data = []
    for i, group in enumerate(expansion['groups'], start=1):
        label = 'G{:02d}'.format(i)
        raw = ' '.join(printed.render_term(t, sign)
                       for sign, letter, kl in printed.group_terms(group['coefficients'])
                       for t in printed.parse_terms(blocks[letter + kl]))
        anchor = '{}: group {} ({})'.format(expansion['anchor'], i, group['coefficients'])
        data.append(printed.make_datum(label, anchor, raw))
    return data


def paper_table_teleport2():
    '''
    The printed table as a CorrectionTable keyed by group label, plus the
    printed Bob-state column with a well-formedness flag per row.
    '''
    section = _art()['teleport2_table']
    rows, notes, column = OrderedDict(), {}, []
    for i, row in enumerate(section['rows'], start=1):
        key = ('G{:02d}'.format(i),)
        rows[key] = LocalOperatorWord.parse(row['unitary'])
        repeated = printed.duplicated_kets(row['bob'])
        if repeated:
            notes[key] = 'malformed as printed: repeated ket {}'.format(', '.join(repeated))
        column.append(OrderedDict([('row', i), ('bob', row['bob']), ('unitary', row['unitary']),
                                   ('well_formed', not repeated)]))
    return CorrectionTable(rows, notes, section['anchor']), column


def teleport3_family(lines, prefixes=None, anchor=None):
    '''
    64 probes, one per 3-qubit Pauli word ``W`` (σ2 read as iσ2): the signed
    sum of the decomposition lines ``L_{u j}`` with ``W[j, u] != 0``, where
    block ``L`` carries prefix ``u`` and ``j`` is the receiver ket.
    '''
    prefixes = prefixes or printed.appendix1_prefixes()
    anchor = anchor or _art()['appendix1']['anchor']
    block_of = {bits: block for block, bits in prefixes.items()}
    data = []
    for label, m in real_form_maps(3):
        parts = []
        for u in range(8):
            for j in range(8):
                coef = np.real(m[j, u])
                if abs(coef) < 0.5:
                    continue
                line = block_of[format(u, '03b')] + format(j, '03b')
                parts.extend(printed.render_term(t, 1 if coef > 0 else -1)
                             for t in printed.parse_terms(lines[line]))
        data.append(printed.make_datum(label, '{}: permutation sum {}'.format(anchor, label),
                                       ' '.join(parts)))
    return data


def _teleport_spec(n, variant, basis, partition, anchor, paper_table=None, notes=()):
    return ProtocolSpec('teleport{}'.format(n), variant, xwz_channel(), partition,
                        (_stage('alice', basis),), 'bob', paper_table=paper_table,
                        expected_coverage=1.0, anchor=anchor, notes=tuple(notes))


@functools.lru_cache(maxsize=None)
def spec_teleport1(variant='derived'):
    _check_variant(variant)
    section = _art()['teleport1']
    basis = basis_teleport1() if variant == 'printed' else derived_teleport_basis(1)
    return _teleport_spec(1, variant, basis, _partition(section['partition']), section['anchor'])


@functools.lru_cache(maxsize=None)
def spec_teleport2(variant='derived'):
    _check_variant(variant)
    section = _art()['teleport2_blocks']
    partition = _partition(section['partition'])
    if variant == 'printed':
        basis = MeasurementBasis.from_data('expansion groups', range(7), teleport2_group_data(),
                                           anchor=_art()['teleport2_expansion']['anchor'])
        table, _ = paper_table_teleport2()
        return _teleport_spec(2, variant, basis, partition, section['anchor'], paper_table=table)
    return _teleport_spec(2, variant, derived_teleport_basis(2), partition, section['anchor'])


@functools.lru_cache(maxsize=None)
def spec_teleport3(variant='derived'):
    '''
    Bob holds the last three channel qubits: every decomposition line is
    paired with a three-qubit receiver ket, whatever the printed owner
    sentence says.
    '''
    _check_variant(variant)
    section = _art()['teleport3']
    if variant == 'printed':
        lines = printed.appendix1_lines()
    else:
        lines = cached_reconstruction().corrected_lines
    basis = MeasurementBasis.from_data('teleport3-{}'.format(variant), range(7),
                                       teleport3_family(lines), anchor=_art()['appendix1']['anchor'])
    return _teleport_spec(3, variant, basis, _partition(section['partition']), section['anchor'],
                          notes=(section['note'],))


# state sharing

def _qss_base(name, first):
    section = _art()[name]
    return ProtocolSpec(name, 'base', xwz_channel(), _partition(section['partition']),
                        (_stage('alice', first),), 'charlie', anchor=section['anchor'])


@functools.lru_cache(maxsize=None)
def derived_qss_bob(name):
    ''' Derived Bob stage of proposal 1 or 2 '''
    if name == 'qss1':
        return derive_stage_basis(_qss_base('qss1', bell_basis((0, 1))), 5, name='qss1-bob')
    if name == 'qss2':
        return derive_stage_basis(_qss_base('qss2', ghz_basis((0, 1, 2))), 4, name='qss2-bob')
    raise ProtocolError('No derived Bob stage for {}'.format(name))


def _printed_bob(name, subset):
    section = _art()[name]['bob_basis']
    return MeasurementBasis.from_data('{} bob printed'.format(name), subset,
                                      printed.pm_family(section), anchor=section['anchor'])


@functools.lru_cache(maxsize=None)
def spec_qss1(variant='derived'):
    _check_variant(variant)
    base = _qss_base('qss1', bell_basis((0, 1)))
    if variant == 'printed':
        stage = _stage('bob', _printed_bob('qss1', (2, 3, 4, 5, 6)))
    else:
        stage = derived_qss_bob('qss1').stage('bob')
    return replace(base, variant=variant, stages=base.stages + (stage,))


@functools.lru_cache(maxsize=None)
def spec_qss2(variant='derived'):
    '''
    The printed X±, Y± are read with α and β stripped, each ± giving two
    basis vectors.
    '''
    _check_variant(variant)
    base = _qss_base('qss2', ghz_basis((0, 1, 2)))
    if variant == 'printed':
        stage = _stage('bob', _printed_bob('qss2', (3, 4, 5, 6)))
    else:
        stage = derived_qss_bob('qss2').stage('bob')
    return replace(base, variant=variant, stages=base.stages + (stage,))


def _relabel_bell(text, relabel):
    return _BELL_TOKEN_RE.sub(lambda m: '|{}⟩'.format(relabel[m.group(1)]), text)


def bc_maps(ordering='bob-single', relabel=None):
    '''
    The printed joint Bob-Charlie states as ``(name, 8x2 map)`` with rows
    over qubits (5, 6, 7) and columns over (α, β).
    '''
    if ordering not in QSS3_ORDERINGS:
        raise ProtocolError('Unknown ordering {!r}'.format(ordering))
    out = []
    for name, raw in _art()['qss3']['bob_charlie']['states'].items():
        text = _relabel_bell(raw, relabel) if relabel else raw
        m = printed.linear_map(text, COEFFICIENTS)
        if ordering == 'charlie-single':
            # printed order is (7, 5, 6)
            m = m.reshape(2, 2, 2, 2).transpose(1, 2, 0, 3).reshape(8, 2)
        out.append((name, m))
    return out


def _charlie_fits(m, bob_elements):
    t = m.reshape(4, 2, 2)
    return OrderedDict((label, pauli_fit(np.tensordot(b.amps.conj(), t, axes=(0, 0))))
                       for label, b in bob_elements)


def _charlie_maps(maps, bob_elements):
    '''
    Pauli word left on Charlie per (BC state, Bob outcome), None for an
    outcome of zero probability; None overall when one outcome is not
    Pauli-correctable.
    '''
    out = OrderedDict()
    for name, m in maps:
        fits = _charlie_fits(m, bob_elements)
        if any(f.kind == 'non-pauli' for f in fits.values()):
            return None
        out[name] = OrderedDict((label, f.word) for label, f in fits.items())
    return out


@dataclass(frozen=True, eq=False)
class OrderingResult:
    ordering: Optional[str]
    relabel: Dict[str, str]
    bob_basis: Optional[MeasurementBasis]
    corrections: Dict[str, Dict[str, Optional[LocalOperatorWord]]]
    attempts: int
    correctable: Dict[str, int]

    def to_dict(self):
        return {
            'ordering': self.ordering,
            'bell_labels': dict(self.relabel),
            'bob_basis': self.bob_basis.name if self.bob_basis is not None else None,
            'attempts': self.attempts,
            'correctable_relabelings': dict(self.correctable),
            'corrections': {bc: {b: None if w is None else str(w) for b, w in row.items()}
                            for bc, row in self.corrections.items()},
        }


@functools.lru_cache(maxsize=None)
def qss3_ordering_search():
    '''
    Try both readings of the joint Bob-Charlie kets with every relabeling
    of the Bell states (identity first), Bob measuring his two qubits in
    the Bell basis. The first combination that leaves Charlie
    Pauli-correctable for every BC state and every Bob outcome of nonzero
    probability wins; the number of such relabelings is kept per reading.
    '''
    bob = bell_basis((5, 6))
    found, counts, attempts = None, OrderedDict(), 0
    for ordering in QSS3_ORDERINGS:
        counts[ordering] = 0
        for perm in itertools.permutations(BELL_LABELS):
            relabel = OrderedDict(zip(BELL_LABELS, perm))
            attempts += 1
            corrections = _charlie_maps(bc_maps(ordering, relabel), bob.elements)
            if corrections is None:
                continue
            counts[ordering] += 1
            if found is None:
                found = (ordering, relabel, corrections)
    if found is None:
        logger.warning('qss3: no reading of the Bob-Charlie states survives a Bell measurement')
        return OrderingResult(None, {}, None, {}, attempts, counts)
    ordering, relabel, corrections = found
    logger.info('qss3 reading: %s, Bell labels %s (%d attempts, correctable %s)',
                ordering, dict(relabel), attempts, dict(counts))
    return OrderingResult(ordering, relabel, bob, corrections, attempts, counts)


def _flip_single(m, ordering):
    ''' Flip the printed single qubit: 7 when Charlie's, 5 when Bob's '''
    axis = 2 if ordering == 'charlie-single' else 0
    return np.flip(m.reshape(2, 2, 2, 2), axis=axis).reshape(8, 2)


def qss3_alice_maps(search):
    ''' BC maps and their partners with the single printed qubit flipped, A1..A8, A1x..A8x '''
    maps = bc_maps(search.ordering, search.relabel)
    out = [('A' + name[2:], m) for name, m in maps]
    out += [('A{}x'.format(name[2:]), _flip_single(m, search.ordering)) for name, m in maps]
    return out


@functools.lru_cache(maxsize=None)
def derived_qss3_alice():
    search = qss3_ordering_search()
    if search.ordering is None:
        raise ProtocolError('No reading of the Bob-Charlie states is Pauli-correctable')
    return steering_basis(xwz_channel(), 1, (0, 1, 2, 3), (4, 5, 6), qss3_alice_maps(search),
                          name='qss3-alice-derived')


@functools.lru_cache(maxsize=None)
def derived_qss3_bob():
    base = _qss_base('qss3', derived_qss3_alice())
    return derive_stage_basis(base, 2, name='qss3-bob')


def qss3_printed_bob():
    ''' The printed B1..B4, product states of Bob's two qubits '''
    section = _art()['qss3']['bob_basis']
    return MeasurementBasis.from_states(
        'B1..B4', (5, 6), [(name, printed.evaluate(raw, label=name))
                           for name, raw in section['states'].items()], anchor=section['anchor'])


@functools.lru_cache(maxsize=None)
def spec_qss3(variant='derived'):
    _check_variant(variant)
    search = qss3_ordering_search()
    if variant == 'printed':
        section = _art()['qss3']['alice_basis']
        alice = MeasurementBasis.from_data('A1..A8', (0, 1, 2, 3, 4),
                                           printed.plain_family(section), anchor=section['anchor'])
        base = _qss_base('qss3', alice)
        spec = replace(base, stages=base.stages + (_stage('bob', qss3_printed_bob()),))
    else:
        base = _qss_base('qss3', derived_qss3_alice())
        spec = replace(base, stages=base.stages + (derived_qss3_bob().stage('bob'),))
    return replace(spec, variant=variant,
                   notes=('Bob-Charlie reading: {}'.format(search.ordering),))


SPECS = OrderedDict([
    ('teleport1', spec_teleport1),
    ('teleport2', spec_teleport2),
    ('teleport3', spec_teleport3),
    ('qss1', spec_qss1),
    ('qss2', spec_qss2),
    ('qss3', spec_qss3),
])


def get_spec(name, variant='derived'):
    if name not in SPECS:
        raise ProtocolError('Unknown protocol {!r}, expected one of {}'.format(name, list(SPECS)))
    return SPECS[name](variant)


@functools.lru_cache(maxsize=None)
def correction_table(name, variant='derived', tol=DEFAULT_TOLERANCES):
    return derive_correction_table(get_spec(name, variant), tol=tol)


# printed-data checks

def channel_report():
    rec = cached_reconstruction()
    return OrderedDict([
        ('anchor', _art()['appendix1']['anchor']),
        ('n_kets', rec.n_kets),
        ('norm', round_sig(rec.channel.norm())),
        ('discrepancies', [d.to_dict() for d in rec.discrepancies]),
    ])


def teleport1_term_check(tol=DEFAULT_TOLERANCES):
    '''
    Every printed term of ξ± and ν± against the derived outcome its datum
    matches best. Terms whose overlap has the sign opposite to the whole
    datum, or vanishes, are listed; ``corrected_fidelity`` is the fidelity
    once those terms are flipped.
    '''
    derived = spec_teleport1('derived').stages[0].basis
    data = printed.pm_family(_art()['teleport1'])
    rows = []
    for d, diff in zip(data, family_diff(data, derived, tol)):
        target = derived.probe(diff['best_match'])
        sign = np.sign(np.real(np.vdot(target.amps, d.normalized.amps)))
        terms, flipped = [], []
        for t in printed.parse_terms(d.raw):
            o = sign * np.real(np.vdot(target.amps, printed.evaluate(printed.render_term(t)).amps))
            bad = o <= tol.orthonormality
            if bad:
                terms.append(printed.render_term(t).replace(' ', ''))
            flipped.append(printed.render_term(t, -1 if bad else 1))
        corrected = printed.evaluate(' '.join(flipped)).normalized()
        rows.append(OrderedDict([
            ('label', d.label),
            ('anchor', d.anchor),
            ('best_match', diff['best_match']),
            ('opposite_terms', terms),
            ('corrected_fidelity', round_sig(fidelity(corrected, target, tol))),
        ]))
    return rows


def appendix1_family(tol=DEFAULT_TOLERANCES):
    '''
    The 64 printed decomposition states with their pairwise overlaps and
    every ket printed under the wrong block prefix.

    Returns
    -------
    (list of PaperDatum, report dict)
    '''
    art = _art()['appendix1']
    prefixes = art['prefixes']
    data = [printed.make_datum(name, '{}, line {}'.format(art['anchor'], name), raw)
            for name, raw in art['states'].items()]
    a = np.stack([d.normalized.amps for d in data])
    gram = np.abs(a.conj() @ a.T)
    np.fill_diagonal(gram, 0.0)
    violations = []
    for d in data:
        for term in printed.parse_terms(d.raw):
            if term.kets[0][:3] != prefixes[d.label[0]]:
                violations.append(OrderedDict([
                    ('line', d.label), ('anchor', d.anchor),
                    ('ket', printed.render_term(term).replace(' ', '')),
                    ('block_prefix', prefixes[d.label[0]])]))
    blocks = OrderedDict()
    for i, block in enumerate(sorted(prefixes)):
        sub = gram[8 * i:8 * i + 8, 8 * i:8 * i + 8]
        blocks[block] = round_sig(np.max(sub))
    report = OrderedDict([
        ('anchor', art['anchor']),
        ('size', len(data)),
        ('raw_norms', sorted({round_sig(d.norm) for d in data})),
        ('max_overlap', round_sig(np.max(gram))),
        ('block_max_overlap', blocks),
        ('overlapping_pairs', [[data[i].label, data[j].label]
                               for i, j in zip(*np.nonzero(np.triu(gram) > tol.orthonormality))]),
        ('prefix_violations', violations),
    ])
    return data, report


def teleport2_block_check(tol=DEFAULT_TOLERANCES):
    '''
    Printed block states against ``|unknown bits⟩ (x) slice_kl`` of the
    reconstructed channel.
    '''
    section = _art()['teleport2_blocks']
    c = channel_slices(xwz_channel(), range(5), (5, 6))
    rows = []
    for name, raw in section['states'].items():
        letter, kl = name[0], name[1:]
        want = tensor(basis_state(section['unknown_bits'][letter]),
                      StateVector(c[:, int(kl, 2)]).normalized())
        datum = printed.make_datum(name, '{}: {}'.format(section['anchor'], name), raw)
        f = fidelity(datum.normalized, want, tol)
        rows.append(OrderedDict([
            ('label', name), ('anchor', datum.anchor), ('fidelity', round_sig(f)),
            ('status', 'match' if f >= 1 - tol.fidelity else 'flagged')]))
    return rows


def teleport2_expansion_check():
    ''' Coefficient groups printed for more than one Bob state '''
    groups = _art()['teleport2_expansion']['groups']
    seen, duplicates = OrderedDict(), []
    for i, g in enumerate(groups, start=1):
        key = g['coefficients'].replace(' ', '')
        if key in seen:
            duplicates.append([seen[key], i])
        else:
            seen[key] = i
    return OrderedDict([('anchor', _art()['teleport2_expansion']['anchor']),
                        ('duplicate_groups', duplicates)])


def teleport2_table_check(tol=DEFAULT_TOLERANCES):
    '''
    Each printed row read as a linear map of the input: its Pauli fit, the
    printed correction checked against it (literally and with the tensor
    factors swapped), and the comparison with the derived correction of
    the outcome that leaves that Bob state.
    '''
    section = _art()['teleport2_table']
    symbols = tuple(section['symbols'])
    m_in = printed.linear_map(section['input'], symbols)
    derived = correction_table('teleport2', 'derived', tol)
    paper_rows, derived_rows, notes, rows = OrderedDict(), OrderedDict(), {}, []
    for i, row in enumerate(section['rows'], start=1):
        key = ('row{:02d}'.format(i),)
        word = LocalOperatorWord.parse(row['unitary'])
        paper_rows[key] = word
        repeated = printed.duplicated_kets(row['bob'])
        fit = None
        if repeated:
            notes[key] = 'malformed as printed: repeated ket {}'.format(', '.join(repeated))
        else:
            fit = pauli_fit(printed.linear_map(row['bob'], symbols) @ m_in.conj().T)
            if fit.kind != 'pauli':
                notes[key] = 'printed Bob state is not a Pauli image of the input'
        pauli = fit is not None and fit.kind == 'pauli'
        derived_rows[key] = derived.rows.get((real_form_label(fit.word),)) if pauli else None
        rows.append(OrderedDict([
            ('row', i),
            ('bob', row['bob']),
            ('unitary', row['unitary']),
            ('well_formed', not repeated),
            ('implied', str(fit.word) if pauli else (fit.kind if fit else 'malformed')),
            ('consistent', pauli and word.letters == fit.word.letters),
            ('consistent_reversed', pauli and word.letters[::-1] == fit.word.letters),
        ]))
    diffs = compare_tables(CorrectionTable(paper_rows, notes), CorrectionTable(derived_rows))
    for r, d in zip(rows, diffs):
        r['derived'] = d.derived
        r['status'] = d.status
        r['note'] = d.note
    return OrderedDict([
        ('anchor', section['anchor']),
        ('malformed', sum(1 for r in rows if not r['well_formed'])),
        ('rows', rows),
    ])


def appendix2_check(coefficients=None, trials=10, seed=7, drop=None, tol=DEFAULT_TOLERANCES):
    '''
    Rebuild ``psi (x) channel`` from the derived three-qubit outcomes:
    sum over outcomes of ``probe (x) sqrt(p) W^-1 (<psi|W r> psi)``.

    Parameters
    ----------
    coefficients: list of 8 complex, optional
        A fixed normalized input ``a|000⟩ + ... + h|111⟩``; random draws
        otherwise
    trials: int
        Number of random draws
    drop: str, optional
        Outcome label left out of the sum

    Returns
    -------
    dict with the maximum Euclidean residual over the draws
    '''
    spec = spec_teleport3('derived')
    table = correction_table('teleport3', 'derived', tol)
    basis = spec.stages[0].basis
    if drop is not None and drop not in basis.labels:
        raise ProtocolError('No outcome {!r} to drop'.format(drop))
    if coefficients is not None:
        psi = StateVector(np.asarray(coefficients, dtype=complex), label='coefficients')
        if psi.n_qubits != 3 or not psi.is_normalized(tol.normalization):
            raise StateError('Expected 8 normalized coefficients a..h')
        draws = [psi]
    else:
        draws = trial_inputs(3, trials, seed)
    targets = [0, 1, 2]
    worst, used = 0.0, 0
    for psi in draws:
        state = tensor(psi, spec.channel)
        right = np.zeros(state.dim, dtype=complex)
        used = 0
        for label, probe in basis.elements:
            if label == drop:
                continue
            p, residual = project_subset(state, probe, basis.subset, tol)
            if p < tol.zero_probability:
                continue
            word = table.rows.get((label,))
            if word is None:
                raise ProtocolError('Outcome {} has no correction'.format(label))
            fixed = apply_word(residual, word, targets)
            restored = StateVector(np.vdot(psi.amps, fixed.amps) * psi.amps)
            undone = apply_word(restored, word.dagger(), targets)
            right += np.sqrt(p) * np.kron(probe.amps, undone.amps)
            used += 1
        worst = max(worst, float(np.linalg.norm(state.amps - right)))
    return OrderedDict([
        ('anchor', _art()['appendix2']['anchor']),
        ('draws', len(draws)),
        ('outcomes', used),
        ('dropped', drop),
        ('max_residual', round_sig(worst)),
    ])


def qss1_expansion_check(tol=DEFAULT_TOLERANCES):
    '''
    The printed Bob-Charlie expansion after Alice's Φ+ against the columns
    of the derived isometry, one coefficient part at a time.
    '''
    section = _art()['qss1']['phi_plus']
    iso = protocol_isometry(_qss_base('qss1', bell_basis((0, 1))), ('Φ+',), tol)
    m = printed.linear_map(section['expansion'], COEFFICIENTS)
    parts = []
    for i, symbol in enumerate(COEFFICIENTS):
        col = StateVector(m[:, i])
        best, best_f = None, -1.0
        if col.norm() > 0:
            col = col.normalized()
            for u in range(iso.matrix.shape[1]):
                f = fidelity(col, iso.column(u).normalized(), tol)
                if f > best_f + 1e-12:
                    best, best_f = u, f
        parts.append(OrderedDict([('symbol', symbol), ('best_column', best),
                                  ('fidelity', round_sig(best_f))]))
    return OrderedDict([
        ('anchor', section['anchor']),
        ('input_independent', iso.input_independent),
        ('repeated_kets', printed.duplicated_kets(section['expansion'], per_symbol=True)),
        ('parts', parts),
    ])


def _charlie_word(text):
    fit = pauli_fit(printed.linear_map(text, COEFFICIENTS))
    return fit.word if fit.kind == 'pauli' else None


def qss_table_check(name, tol=DEFAULT_TOLERANCES):
    '''
    The printed Bob-outcome / Charlie-state table of proposal 1 or 2 against
    the corrections derived for the printed run after Alice's first
    outcome.
    '''
    first = {'qss1': 'Φ+', 'qss2': 'Ψ0'}[name]
    section = _art()[name]['table']
    table = correction_table(name, 'printed', tol)
    paper, derived = OrderedDict(), OrderedDict()
    for row in section['rows']:
        for sign in ('+', '-'):
            key = (first, row['outcome'].replace('±', sign))
            paper[key] = _charlie_word(printed.expand_pm(row['charlie'], sign))
            if key in table.rows:
                derived[key] = table.rows[key]
    diffs = compare_tables(CorrectionTable(paper, anchor=section['anchor']),
                           CorrectionTable(derived, table.notes))
    return OrderedDict([('anchor', section['anchor']), ('diffs', [d.to_dict() for d in diffs])])


QSS3_WORKED_STATE = 'BC8'


def qss3_charlie_check():
    '''
    Printed C1..C4 against the Charlie state left by the worked joint state
    after Bob's printed outcomes B1..B4, on the winning reading; a row
    agrees only when the Pauli letters match up to phase. Every BC state is
    reported, with the Bell relabelings of that reading under which the
    worked state reproduces the printed table.
    '''
    art = _art()['qss3']
    search = qss3_ordering_search()
    if search.ordering is None:
        raise ProtocolError('No reading of the Bob-Charlie states is Pauli-correctable')
    bob = qss3_printed_bob()
    paper = CorrectionTable(
        OrderedDict(((b,), _charlie_word(raw))
                    for b, raw in zip(bob.labels, art['charlie']['states'].values())),
        anchor=art['charlie']['anchor'])

    def diffs(m):
        fits = _charlie_fits(m, bob.elements)
        return compare_tables(paper, CorrectionTable(
            OrderedDict(((label,), f.word) for label, f in fits.items())))

    every = []
    for name, m in bc_maps(search.ordering, search.relabel):
        rows = diffs(m)
        every.append(OrderedDict([('state', name),
                                  ('charlie', [d.derived for d in rows]),
                                  ('agrees', all(d.agrees for d in rows))]))
    worked = dict(bc_maps(search.ordering, search.relabel))[QSS3_WORKED_STATE]
    reproducing = []
    for perm in itertools.permutations(BELL_LABELS):
        relabel = OrderedDict(zip(BELL_LABELS, perm))
        maps = bc_maps(search.ordering, relabel)
        if all(d.agrees for d in diffs(dict(maps)[QSS3_WORKED_STATE])):
            reproducing.append(OrderedDict([
                ('bell_labels', dict(relabel)),
                ('bell_correctable', _charlie_maps(maps, bell_basis((5, 6)).elements) is not None),
            ]))
    return OrderedDict([
        ('anchor', art['charlie']['anchor']),
        ('reading', search.to_dict()),
        ('worked_state', QSS3_WORKED_STATE),
        ('diffs', [d.to_dict() for d in diffs(worked)]),
        ('every_state', every),
        ('reproducing_relabelings', reproducing),
    ])


def appendix3_check():
    ''' Printed operator matrices against the stored letters '''
    section = _art()['appendix3']
    rows = []
    for name, entries in section['matrices'].items():
        m = printed.parse_matrix(entries)
        stored = LETTERS[name]
        if np.allclose(m, stored):
            status, note = 'match', ''
        elif np.allclose(m, -stored):
            status = 'negated'
            note = 'printed matrix is the negative of the standard convention; a global phase'
        else:
            status, note = DIFF_MISMATCH, ''
        rows.append(OrderedDict([('letter', name), ('printed', entries), ('status', status),
                                 ('note', note)]))
    return OrderedDict([('anchor', section['anchor']), ('rows', rows)])


# suites

def _letters(table):
    return sorted('⊗'.join(l) for l in table.letter_set())


def _checks_teleport1(tol):
    family = family_diff(printed.pm_family(_art()['teleport1']),
                         spec_teleport1('derived').stages[0].basis, tol)
    table = correction_table('teleport1', 'printed', tol)
    claim = OrderedDict([
        ('anchor', _art()['teleport1']['anchor']),
        ('claimed', _art()['teleport1']['claim']),
        ('derived_letters', _letters(table)),
        ('holds', table.correctable and table.letter_set() == {('I',), ('σ1',), ('σ2',), ('σ3',)}),
    ])
    checks = OrderedDict([
        ('basis', check_orthonormal(basis_teleport1(), tol).to_dict()),
        ('family', family),
        ('terms', teleport1_term_check(tol)),
        ('claim', claim),
    ])
    return checks, _flagged(family) + (0 if claim['holds'] else 1)


def _checks_teleport2(tol):
    blocks = teleport2_block_check(tol)
    table = teleport2_table_check(tol)
    expansion = teleport2_expansion_check()
    checks = OrderedDict([('blocks', blocks), ('table', table), ('expansion', expansion)])
    flagged = (_flagged(blocks) + sum(1 for r in table['rows'] if r['status'] not in
                                      ('match', 'phase-only'))
               + len(expansion['duplicate_groups']))
    return checks, flagged


def _checks_teleport3(tol):
    _, family_report = appendix1_family(tol)
    derived = spec_teleport3('derived').stages[0].basis
    family = family_diff(teleport3_family(printed.appendix1_lines()), derived, tol)
    section = _art()['teleport3']
    checks = OrderedDict([
        ('partition', OrderedDict([('anchor', section['anchor']),
                                   ('printed', section['printed_partition']),
                                   ('used', section['partition']),
                                   ('note', section['note'])])),
        ('appendix1', family_report),
        ('derived_basis', check_orthonormal(derived, tol).to_dict()),
        ('family', family),
    ])
    flagged = 1 + len(family_report['prefix_violations']) + _flagged(family)
    return checks, flagged


def _checks_qss1(tol):
    derived = derived_qss_bob('qss1')
    family = family_diff(printed.pm_family(_art()['qss1']['bob_basis']), derived.merged, tol)
    expansion = qss1_expansion_check(tol)
    table = qss_table_check('qss1', tol)
    checks = OrderedDict([('derived_bob', derived.to_dict()), ('family', family),
                          ('phi_plus', expansion), ('table', table)])
    flagged = (_flagged(family) + len(expansion['repeated_kets'])
               + sum(1 for d in table['diffs'] if d['status'] not in ('match', 'phase-only')))
    return checks, flagged


def _checks_qss2(tol):
    derived = derived_qss_bob('qss2')
    family = family_diff(printed.pm_family(_art()['qss2']['bob_basis']), derived.merged, tol)
    table = qss_table_check('qss2', tol)
    checks = OrderedDict([('derived_bob', derived.to_dict()), ('family', family), ('table', table)])
    flagged = _flagged(family) + sum(1 for d in table['diffs']
                                     if d['status'] not in ('match', 'phase-only'))
    return checks, flagged


def _checks_qss3(tol):
    family = family_diff(printed.plain_family(_art()['qss3']['alice_basis']),
                         derived_qss3_alice(), tol)
    charlie = qss3_charlie_check()
    checks = OrderedDict([('derived_bob', derived_qss3_bob().to_dict()), ('family', family),
                          ('charlie', charlie)])
    flagged = (_flagged(family)
               + sum(1 for d in charlie['diffs'] if d['status'] not in ('match', 'phase-only'))
               + (0 if any(r['bell_correctable'] for r in charlie['reproducing_relabelings'])
                  else 1))
    return checks, flagged


_CHECKS = {
    'teleport1': _checks_teleport1,
    'teleport2': _checks_teleport2,
    'teleport3': _checks_teleport3,
    'qss1': _checks_qss1,
    'qss2': _checks_qss2,
    'qss3': _checks_qss3,
}


def verify_protocol(name, trials=100, seed=7, variants=VARIANTS, tol=DEFAULT_TOLERANCES):
    '''
    Run a protocol in the requested variants and the printed-data checks.

    The exit code is 2 when the derived run fails, 1 when only printed data
    disagrees and 0 otherwise.
    '''
    derived_spec = get_spec(name, 'derived')
    inputs = trial_inputs(derived_spec.n_unknown, trials, seed)
    result = OrderedDict([('protocol', name), ('anchor', derived_spec.anchor)])
    runs = OrderedDict()
    for variant in variants:
        spec = get_spec(name, variant)
        runs[variant] = run_protocol(spec, inputs, correction_table(name, variant, tol), tol)
        result[variant] = runs[variant].to_dict()
    checks, flagged = _CHECKS[name](tol)
    if 'printed' in runs:
        printed_run = runs['printed']
        flagged += 0 if printed_run.passed else 1
        flagged += sum(1 for d in printed_run.diffs if not d.agrees)
    result['checks'] = checks
    result['discrepancies'] = flagged
    if 'derived' in runs and not runs['derived'].passed:
        code = 2
    else:
        code = 1 if flagged else 0
    result['exit_code'] = code
    logger.info('%s: %d printed discrepancies, exit code %d', name, flagged, code)
    return result


def named_bases():
    ''' Every basis that ``check basis`` knows, by name '''
    return OrderedDict([
        ('ghz', lambda: ghz_basis((0, 1, 2))),
        ('bell', lambda: bell_basis((0, 1))),
        ('teleport1', basis_teleport1),
        ('teleport1-derived', lambda: spec_teleport1('derived').stages[0].basis),
        ('teleport2', lambda: spec_teleport2('printed').stages[0].basis),
        ('teleport2-derived', lambda: spec_teleport2('derived').stages[0].basis),
        ('teleport3', lambda: spec_teleport3('printed').stages[0].basis),
        ('teleport3-derived', lambda: spec_teleport3('derived').stages[0].basis),
        ('qss1-bob', lambda: _printed_bob('qss1', (2, 3, 4, 5, 6))),
        ('qss1-bob-derived', lambda: derived_qss_bob('qss1').merged),
        ('qss2-bob', lambda: _printed_bob('qss2', (3, 4, 5, 6))),
        ('qss2-bob-derived', lambda: derived_qss_bob('qss2').merged),
        ('qss3-alice', lambda: spec_qss3('printed').stages[0].basis),
        ('qss3-alice-derived', derived_qss3_alice),
        ('qss3-bob', qss3_printed_bob),
        ('qss3-bob-derived', lambda: derived_qss3_bob().merged),
    ])


def check_basis(name, tol=DEFAULT_TOLERANCES):
    bases = named_bases()
    if name not in bases:
        raise ProtocolError('Unknown basis {!r}, expected one of {}'.format(name, list(bases)))
    return check_orthonormal(bases[name](), tol).to_dict()
