import json

import pandas as pd
import pytest

import qtv_verify
import xwz_protocols as xwz
from channels import bell
from statevector import fidelity, read_state_file, write_state_file
from synthesis import read_circuit


def test_load_config_defaults_and_overrides(tmp_path):
    config = qtv_verify.load_config()
    assert config.seed == 7
    assert config.format == 'json'
    config = qtv_verify.load_config(trials=3, seed=None, tol_fidelity=1e-6)
    assert config.trials == 3
    assert config.seed == 7
    assert config.tolerances.fidelity == 1e-6

    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'seed': 1, 'bogus': True}), encoding='utf-8')
    with pytest.raises(ValueError):
        qtv_verify.load_config(str(bad))
    bad.write_text(json.dumps({'tolerances': {'bogus': 1.0}}), encoding='utf-8')
    with pytest.raises(ValueError):
        qtv_verify.load_config(str(bad))
    with pytest.raises(ValueError):
        qtv_verify.load_config(format='yaml')


def test_channel_reconstruct_writes_a_state_file(tmp_path, channel):
    out = tmp_path / 'channel.txt'
    report = tmp_path / 'report.json'
    code = qtv_verify.main(['channel', 'reconstruct', '--out', str(out), '--report', str(report)])
    assert code == 1
    lines = out.read_text(encoding='utf-8').splitlines()
    assert sum(1 for l in lines if l.startswith('#')) == 5
    assert sum(1 for l in lines if not l.startswith('#')) == 32
    assert fidelity(read_state_file(str(out)), channel) > 1 - 1e-12
    body = json.loads(report.read_text(encoding='utf-8'))
    assert len(body['discrepancies']) == 4


def test_check_basis_csv(tmp_path):
    report = tmp_path / 'bell.csv'
    assert qtv_verify.main(['check', 'basis', 'bell', '--format', 'csv',
                            '--report', str(report)]) == 0
    df = pd.read_csv(str(report))
    assert df.loc[0, 'section'] == 'report'
    assert bool(df.loc[0, 'orthonormal'])


def test_appendix3_text(capsys):
    assert qtv_verify.main(['appendix3', '--format', 'text']) == 1
    out = capsys.readouterr().out
    assert 'negated' in out
    assert out.startswith('anchor: ')


def test_appendix2_drop(capsys):
    label = xwz.get_spec('teleport3').stages[0].basis.labels[0]
    assert qtv_verify.main(['appendix2', '--draws', '1', '--drop', label]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body['dropped'] == label
    assert body['outcomes'] == 63


def test_derive_corrections(capsys):
    assert qtv_verify.main(['derive', 'corrections', 'teleport1']) == 0
    body = json.loads(capsys.readouterr().out)
    assert body['variant'] == 'derived'
    assert body['correctable'] is True


def test_verify_records_parameters(tmp_path):
    report = tmp_path / 'teleport1.json'
    code = qtv_verify.main(['verify', 'teleport1', '--trials', '2', '--variant', 'derived',
                            '--report', str(report), '--record', '--test'])
    assert code in (0, 1)
    body = json.loads(report.read_text(encoding='utf-8'))
    assert body['derived']['pass'] is True
    assert '_git_sha' not in body
    params = json.loads((tmp_path / 'teleport1.json.parameters.json').read_text(encoding='utf-8'))
    assert params['trials'] == 2
    assert params['target'] == 'teleport1'
    assert '_git_sha' in params and '_date' in params


def test_entanglement_and_synth_from_a_state_file(tmp_path, capsys):
    state = tmp_path / 'bell.txt'
    write_state_file(bell('Ψ-'), str(state))
    assert qtv_verify.main(['entanglement', '--state', str(state)]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body['n_qubits'] == 2
    assert body['cut_sizes']['1']['maximally_mixed_count'] == 2

    circuit = tmp_path / 'bell.circuit'
    assert qtv_verify.main(['synth', str(state), '--out', str(circuit)]) == 0
    body = json.loads(capsys.readouterr().out)
    assert body['fidelity'] == 1.0
    assert body['gate_bound'] == 10
    assert read_circuit(str(circuit)).n_qubits == 2


@pytest.mark.parametrize('argv', [
    [],
    ['verify', 'teleport4'],
    ['verify', 'teleport1', '--trials', '0'],
    ['entanglement', '--state', '/nonexistent/state.txt'],
])
def test_errors_exit_with_2(argv):
    assert qtv_verify.main(argv) == 2


def test_report_rows_flatten_nested_lists():
    rows = qtv_verify.report_rows({'a': 1, 'b': {'rows': [{'x': 1}, {'x': 2}]}})
    assert rows[0] == {'section': 'report', 'index': None, 'a': 1}
    assert [r['section'] for r in rows[1:]] == ['b.rows', 'b.rows']


def test_dispatch_reports_are_byte_identical(tmp_path):
    paths = [tmp_path / 'a.json', tmp_path / 'b.json']
    for p in paths:
        config = qtv_verify.load_config(command='verify', target='teleport1', trials=2,
                                        report=str(p))
        assert qtv_verify.dispatch(config) in (0, 1)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_all_reports_discrepancies_and_is_byte_identical(tmp_path):
    paths = [tmp_path / 'first.json', tmp_path / 'second.json']
    for p in paths:
        assert qtv_verify.main(['all', '--report', str(p)]) == 1
    assert paths[0].read_bytes() == paths[1].read_bytes()
    body = json.loads(paths[0].read_text(encoding='utf-8'))
    assert body['summary']['exit_code'] == 1
    assert body['summary']['exit_codes']['appendix3'] == 1
    assert all(code < 2 for code in body['summary']['exit_codes'].values())
