import hashlib

import numpy as np
import pytest
from numpy.testing import assert_allclose

import printed
from statevector import StateError

# update together with any edit of the transcription
ARTIFACTS_SHA256 = 'e3c93ea71213953f0d9ac959b2725395246e1a08f2af288faf1677c92d659035'


def test_transcription_checksum():
    with open(printed.ARTIFACTS_FILE, 'rb') as f:
        assert hashlib.sha256(f.read()).hexdigest() == ARTIFACTS_SHA256


def test_parse_terms():
    terms = printed.parse_terms('α|1⟩|Φ-⟩ - β|0000⟩|Ψ3⟩')
    assert len(terms) == 2
    assert terms[0] == printed.Term(1, 'α', ('1', 'Φ-'))
    assert terms[1] == printed.Term(-1, 'β', ('0000', 'Ψ3'))


@pytest.mark.parametrize('text', ['', '|01⟩ junk', '2|0⟩'])
def test_parse_terms_rejects_leftovers(text):
    with pytest.raises(StateError):
        printed.parse_terms(text)


def test_evaluate():
    assert_allclose(printed.evaluate('|0⟩ + |1⟩').amps, [1, 1])
    s = printed.evaluate('α|0⟩ - β|1⟩', {'α': 0.6, 'β': 0.8})
    assert_allclose(s.amps, [0.6, -0.8])
    assert_allclose(printed.evaluate('|0⟩|Φ+⟩').amplitude('011'), 1 / np.sqrt(2))
    with pytest.raises(StateError):
        printed.evaluate('α|0⟩', {'β': 1})
    with pytest.raises(StateError):
        printed.evaluate('|0⟩ + |01⟩')
    with pytest.raises(StateError):
        printed.ket_vector('Ψ9')


def test_linear_map():
    assert_allclose(printed.linear_map('α|0⟩ - β|1⟩', ('α', 'β')), np.diag([1, -1]))
    assert_allclose(printed.linear_map('β|0⟩ + α|1⟩', ('α', 'β')), [[0, 1], [1, 0]])
    with pytest.raises(StateError):
        printed.linear_map('|0⟩', ('α', 'β'))


def test_duplicated_kets():
    assert printed.duplicated_kets('|00⟩ + |01⟩ - |00⟩') == ['|00⟩']
    assert printed.duplicated_kets('α|0⟩ + β|0⟩') == ['|0⟩']
    assert printed.duplicated_kets('α|0⟩ + β|0⟩', per_symbol=True) == []


def test_pm_expansion():
    assert printed.expand_pm('α|0⟩±β|1⟩', '-') == 'α|0⟩-β|1⟩'
    assert printed.expand_pm('α|0⟩∓β|1⟩', '-') == 'α|0⟩+β|1⟩'
    entry = {'base': '|00⟩', 'pm': '|01⟩ - |10⟩'}
    assert printed.pm_expression(entry, '-') == '|00⟩ - |01⟩ + |10⟩'
    with pytest.raises(ValueError):
        printed.expand_pm('|0⟩', '0')


def test_vanishing_datum_is_noted():
    d = printed.make_datum('Z', 'nowhere', '|0⟩ - |0⟩')
    assert d.normalized is None
    assert d.constant is None
    assert 'expression vanishes' in d.notes
    assert any(n.startswith('repeated ket') for n in d.notes)


def test_teleport1_family_constants():
    data = printed.pm_family(printed.load_artifacts()['teleport1'])
    assert [d.label for d in data] == ['ξ+', 'ξ-', 'ν+', 'ν-']
    for d in data:
        assert len(printed.parse_terms(d.raw)) == 16
        assert_allclose(d.constant, 0.25)
        assert d.notes == ()


def test_qss1_printed_b_is_malformed():
    data = printed.pm_family(printed.load_artifacts()['qss1']['bob_basis'])
    notes = {d.label: d.notes for d in data}
    assert notes['A+'] == ()
    assert any('|00000⟩' in n for n in notes['B+'])
    assert any('|00000⟩' in n for n in notes['B-'])


def test_group_terms():
    assert printed.group_terms('A01-B11+C00-D01') == [
        (1, 'A', '01'), (-1, 'B', '11'), (1, 'C', '00'), (-1, 'D', '01')]
    with pytest.raises(StateError):
        printed.group_terms('A01*B11')


def test_parse_matrix():
    rows = printed.load_artifacts()['appendix3']['matrices']['σ2']
    assert_allclose(printed.parse_matrix(rows), [[0, 1j], [-1j, 0]])


def test_appendix1_transcription_shape():
    lines = printed.appendix1_lines()
    assert len(lines) == 64
    assert sorted(printed.appendix1_prefixes()) == list('ABCDEFGH')
    assert all(len(printed.parse_terms(raw)) == 4 for raw in lines.values())
