import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

import xwz_protocols as xwz
from protocol import (
    DIFF_MATCH,
    DIFF_MISMATCH,
    DIFF_PHASE,
    STATUS_UNCORRECTABLE,
    ProtocolError,
    check_orthonormal,
    run_protocol,
)
from statevector import StateError

AGREES = (DIFF_MATCH, DIFF_PHASE)


@pytest.mark.parametrize('name, trials', [
    ('teleport1', 100), ('teleport2', 100), ('teleport3', 50),
    ('qss1', 50), ('qss2', 50), ('qss3', 50),
])
def test_derived_runs_verify(name, trials):
    spec = xwz.get_spec(name, 'derived')
    report = run_protocol(spec, xwz.trial_inputs(spec.n_unknown, trials, 7),
                          xwz.correction_table(name, 'derived'))
    assert report.passed
    assert_allclose(report.coverage, 1.0, atol=1e-9)
    assert report.min_fidelity > 1 - 1e-9


@pytest.mark.parametrize('n', [1, 2, 3])
def test_derived_teleport_outcomes_are_equiprobable(n, inputs):
    spec = xwz.get_spec('teleport{}'.format(n))
    report = run_protocol(spec, inputs(n, 3), xwz.correction_table('teleport{}'.format(n)))
    assert len(report.outcomes) == 4 ** n
    assert_allclose([o.probability for o in report.outcomes], [4.0 ** -n] * 4 ** n, atol=1e-9)


def test_derived_teleport1_corrections_undo_the_label():
    table = xwz.correction_table('teleport1')
    assert {k[0]: w.letters for k, w in table.rows.items()} == {
        'I': ('I',), 'σ1': ('σ1',), 'iσ2': ('σ2',), 'σ3': ('σ3',)}


def test_printed_teleport1_run_is_not_correctable():
    spec = xwz.get_spec('teleport1', 'printed')
    report = run_protocol(spec, xwz.trial_inputs(1, 20, 7),
                          xwz.correction_table('teleport1', 'printed'))
    assert not report.passed
    assert_allclose(report.coverage, 0.78125, atol=1e-9)
    assert_allclose(report.coverage_range, [0.78125, 0.78125], atol=1e-9)
    assert [o.labels[0] for o in report.outcomes] == ['ξ+', 'ξ-', 'ν+', 'ν-']
    assert report.count(STATUS_UNCORRECTABLE) == 4


def test_teleport1_printed_family_has_one_sign_slip():
    rows = xwz.family_diff(xwz.printed.pm_family(xwz.printed.load_artifacts()['teleport1']),
                           xwz.get_spec('teleport1').stages[0].basis)
    assert [r['best_match'] for r in rows] == ['I', 'σ3', 'σ1', 'iσ2']
    assert_allclose([r['fidelity'] for r in rows], [0.765625] * 4, atol=1e-9)
    terms = xwz.teleport1_term_check()
    assert [t['opposite_terms'] for t in terms] == [
        ['-|1001⟩|Ψ1⟩'], ['+|1001⟩|Ψ1⟩'], ['-|0001⟩|Ψ1⟩'], ['+|0001⟩|Ψ1⟩']]
    assert_allclose([t['corrected_fidelity'] for t in terms], [1.0] * 4, atol=1e-9)
    result = xwz.verify_protocol('teleport1', trials=3)
    assert result['checks']['claim']['holds'] is False
    assert result['discrepancies'] == 6
    assert result['exit_code'] == 1


def test_unknown_names_are_rejected():
    with pytest.raises(ProtocolError):
        xwz.get_spec('teleport4')
    with pytest.raises(ProtocolError):
        xwz.get_spec('teleport1', 'paper')
    with pytest.raises(ProtocolError):
        xwz.check_basis('nothing')
    with pytest.raises(ProtocolError):
        xwz.derived_qss_bob('qss3')
    with pytest.raises(ValueError):
        xwz.trial_inputs(1, 0, 7)


def test_channel_report():
    report = xwz.channel_report()
    assert report['n_kets'] == 32
    assert report['norm'] == 1.0
    assert [d['line'] for d in report['discrepancies']] == ['E010', 'E010', 'G111', 'G111']
    json.dumps(report)


def test_appendix1_family():
    data, report = xwz.appendix1_family()
    assert len(data) == report['size'] == 64
    assert report['raw_norms'] == [2.0]
    assert report['max_overlap'] == 0.5
    assert report['block_max_overlap']['A'] == 0.0
    assert [v['line'] for v in report['prefix_violations']] == ['E010', 'E010', 'G111', 'G111']
    assert report['prefix_violations'][0]['ket'] == '+|0001001⟩'
    assert report['overlapping_pairs']


def test_teleport2_blocks():
    rows = xwz.teleport2_block_check()
    assert len(rows) == 16
    flagged = sorted(r['label'] for r in rows if r['status'] != 'match')
    assert flagged == ['A00', 'A11', 'B11', 'C00', 'C01', 'C10', 'D10']


def test_teleport2_expansion_repeats_groups():
    check = xwz.teleport2_expansion_check()
    assert check['duplicate_groups'] == [[9, 13], [10, 14], [11, 15], [12, 16]]
    assert len(xwz.teleport2_group_data()) == 16


def test_teleport2_printed_table():
    table, column = xwz.paper_table_teleport2()
    assert len(table.rows) == 16
    assert [c['row'] for c in column if not c['well_formed']] == [1, 2, 3, 4]
    assert set(table.notes) == {('G01',), ('G02',), ('G03',), ('G04',)}


def test_teleport2_table_check():
    check = xwz.teleport2_table_check()
    assert check['malformed'] == 4
    rows = {r['row']: r for r in check['rows']}
    for i in (1, 2, 3, 4):
        assert not rows[i]['well_formed']
        assert rows[i]['implied'] == 'malformed'
    for i in (5, 8, 9, 12):
        assert rows[i]['consistent']
        assert rows[i]['status'] in AGREES
    for i in (6, 7, 10, 11):
        assert not rows[i]['consistent']
        assert rows[i]['consistent_reversed']
        assert rows[i]['status'] not in AGREES
    for i in list(range(1, 5)) + list(range(13, 17)):
        assert rows[i]['derived'] is None
        assert rows[i]['status'] not in AGREES


def test_appendix2_reconstructs_the_joint_state():
    check = xwz.appendix2_check(trials=3)
    assert check['draws'] == 3
    assert check['outcomes'] == 64
    assert check['max_residual'] < 1e-9


def test_appendix2_with_fixed_coefficients():
    coefficients = np.ones(8) / np.sqrt(8)
    check = xwz.appendix2_check(coefficients=coefficients)
    assert check['draws'] == 1
    assert check['max_residual'] < 1e-9
    with pytest.raises(StateError):
        xwz.appendix2_check(coefficients=np.ones(8))


def test_appendix2_dropped_outcome_leaves_a_residual():
    label = xwz.get_spec('teleport3').stages[0].basis.labels[5]
    check = xwz.appendix2_check(trials=2, drop=label)
    assert check['outcomes'] == 63
    assert check['dropped'] == label
    assert_allclose(check['max_residual'], 0.125, atol=1e-9)
    with pytest.raises(ProtocolError):
        xwz.appendix2_check(trials=1, drop='nothing')


def test_teleport3_printed_family_is_hit_by_the_misplaced_lines():
    derived = xwz.get_spec('teleport3').stages[0].basis
    assert check_orthonormal(derived).orthonormal
    assert len(derived) == 64
    rows = xwz.family_diff(xwz.teleport3_family(xwz.printed.appendix1_lines()), derived)
    assert sum(1 for r in rows if r['status'] != 'match') == 16


def test_qss1_expansion_repeats_a_ket():
    check = xwz.qss1_expansion_check()
    assert check['repeated_kets'] == ['β|000000⟩']
    assert [p['symbol'] for p in check['parts']] == ['α', 'β']


def test_qss_derived_bob_stages():
    assert xwz.derived_qss_bob('qss1').conflicts == 0
    for name in ('qss1', 'qss2'):
        derived = xwz.derived_qss_bob(name)
        assert check_orthonormal(derived.merged).orthonormal
        assert derived.to_dict()['merged_size'] == len(derived.merged)


def test_qss_tables_cover_both_branches():
    for name, first in (('qss1', 'Φ+'), ('qss2', 'Ψ0')):
        diffs = xwz.qss_table_check(name)['diffs']
        assert len(diffs) >= 4
        assert all(d['labels'][0] == first for d in diffs)


def test_qss3_bell_search_keeps_bob_single():
    search = xwz.qss3_ordering_search()
    assert search.correctable == {'charlie-single': 0, 'bob-single': 4}
    assert search.ordering == 'bob-single'
    assert dict(search.relabel) == {'Φ+': 'Φ+', 'Φ-': 'Φ-', 'Ψ+': 'Ψ-', 'Ψ-': 'Ψ+'}
    assert search.bob_basis.name == 'Bell'
    assert search.attempts == 48
    worked = search.corrections['BC8']
    assert worked['Φ+'] is None and worked['Ψ-'] is None
    assert worked['Φ-'].letters == ('σ3',)
    assert worked['Ψ+'].letters == ('σ2',)
    first = search.corrections['BC1']
    assert first['Φ-'].letters == ('σ1',)
    assert first['Ψ+'].letters == ('I',)
    assert search.to_dict()['correctable_relabelings'] == {'charlie-single': 0, 'bob-single': 4}


def test_qss3_charlie_table_against_the_worked_state():
    check = xwz.qss3_charlie_check()
    assert check['worked_state'] == 'BC8'
    assert [d['paper'] for d in check['diffs']] == ['I', 'σ3', 'σ1', 'σ2']
    assert [d['status'] for d in check['diffs']] == [DIFF_MISMATCH] * 4
    assert [r['state'] for r in check['every_state']] == ['BC{}'.format(i) for i in range(1, 9)]
    assert not any(r['agrees'] for r in check['every_state'])
    assert [r['bell_labels'] for r in check['reproducing_relabelings']] == [
        {'Φ+': 'Ψ+', 'Φ-': 'Ψ-', 'Ψ+': 'Φ+', 'Ψ-': 'Φ-'},
        {'Φ+': 'Ψ-', 'Φ-': 'Ψ+', 'Ψ+': 'Φ-', 'Ψ-': 'Φ+'},
    ]
    assert not any(r['bell_correctable'] for r in check['reproducing_relabelings'])


def test_qss3_derived_alice_basis():
    alice = xwz.derived_qss3_alice()
    assert len(alice) == 16
    assert check_orthonormal(alice).orthonormal
    with pytest.raises(ProtocolError):
        xwz.bc_maps('sideways')


def test_appendix3_sigma2_is_negated():
    rows = {r['letter']: r['status'] for r in xwz.appendix3_check()['rows']}
    assert rows['σ2'] == 'negated'
    assert rows['σ1'] == 'match'
    assert rows['σ3'] == 'match'


def test_verify_protocol_report_shape():
    result = xwz.verify_protocol('teleport2', trials=3)
    assert result['derived']['pass'] is True
    assert 'printed' in result
    assert result['discrepancies'] > 0
    assert result['exit_code'] == 1
    json.dumps(result)


def test_verify_protocol_derived_only():
    result = xwz.verify_protocol('teleport1', trials=3, variants=('derived',))
    assert 'printed' not in result
    assert result['exit_code'] in (0, 1)


@pytest.mark.parametrize('name', ['ghz', 'bell', 'teleport1', 'teleport2-derived',
                                  'teleport3-derived', 'qss3-alice-derived'])
def test_named_bases_are_orthonormal(name):
    report = xwz.check_basis(name)
    assert report['orthonormal']
