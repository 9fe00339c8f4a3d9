import numpy as np
import pytest
from numpy.testing import assert_allclose

import printed
from channels import (
    MAJORITY,
    N_CHANNEL_KETS,
    ReconstructionError,
    bell,
    bell_family,
    ghz,
    ghz_family,
    reconstruct_channel,
    xwz_channel,
)
from protocol import MeasurementBasis, channel_slices, check_orthonormal
from statevector import StateError, reduced_density


def test_ghz_family_layout():
    assert ghz(0).support() == ['000', '111']
    assert ghz(6).support() == ['011', '100']
    assert_allclose(ghz(7).amplitude('011'), -1 / np.sqrt(2))
    assert_allclose(ghz(3).amplitude('110'), -1 / np.sqrt(2))
    assert [s.label for s in ghz_family()] == ['Ψ{}'.format(i) for i in range(8)]
    with pytest.raises(StateError):
        ghz(8)


def test_bell_family_and_aliases():
    assert bell('psi-').label == 'Ψ-'
    assert_allclose(bell('Ψ-').amplitude('10'), -1 / np.sqrt(2))
    assert bell('Φ+').support() == ['00', '11']
    with pytest.raises(StateError):
        bell('Ω')


@pytest.mark.parametrize('family,n', [(ghz_family(), 3), (bell_family(), 2)])
def test_named_families_are_orthonormal(family, n):
    basis = MeasurementBasis.from_states('family', range(n), [(s.label, s) for s in family])
    report = check_orthonormal(basis)
    assert report.orthonormal
    assert report.complete
    assert report.completeness_defect < 1e-12


def test_channel_has_32_equal_kets(channel):
    assert channel.n_qubits == 7
    assert len(channel.support()) == N_CHANNEL_KETS
    nonzero = channel.amps[np.abs(channel.amps) > 0]
    assert_allclose(np.abs(nonzero), 1 / np.sqrt(32), atol=1e-12)
    assert_allclose(channel.amplitude('0000000'), 1 / np.sqrt(32))
    assert channel.is_normalized()


def test_channel_is_cached():
    assert xwz_channel() is xwz_channel()


def test_channel_single_qubit_reductions_are_maximally_mixed(channel):
    for q in range(7):
        assert_allclose(reduced_density(channel, [q]).entries, np.eye(2) / 2, atol=1e-10)


def test_channel_receiver_slices_are_orthogonal(channel):
    c = channel_slices(channel, range(4), (4, 5, 6))
    assert_allclose(c.conj().T @ c, np.eye(8) / 8, atol=1e-12)


def test_discrepancies_cite_misplaced_lines(reconstruction):
    found = reconstruction.discrepancies
    assert [d.line for d in found] == ['E010', 'E010', 'G111', 'G111']
    assert {d.kind for d in found} == {'prefix'}
    assert found[0].printed == '+|0001001⟩'
    assert all(d.anchor.endswith('line ' + d.line) for d in found)
    assert 'E010 [prefix]' in str(found[0])


def test_corrected_lines_reproduce_the_channel(reconstruction, channel):
    again = reconstruct_channel(reconstruction.corrected_lines)
    assert again.discrepancies == ()
    assert_allclose(again.channel.amps, channel.amps)


def _flip_first_ket(lines, prefixes, blocks):
    out = dict(lines)
    for b in blocks:
        ket = '+|{}0000⟩'.format(prefixes[b])
        assert ket in out[b + '000']
        out[b + '000'] = out[b + '000'].replace(ket, '-|{}0000⟩'.format(prefixes[b]))
    return out


def test_single_sign_typo_is_outvoted(reconstruction, channel):
    prefixes = printed.appendix1_prefixes()
    lines = _flip_first_ket(reconstruction.corrected_lines, prefixes, ['C'])
    rec = reconstruct_channel(lines)
    assert [(d.line, d.kind) for d in rec.discrepancies] == [('C000', 'sign')]
    assert_allclose(rec.channel.amps, channel.amps)
    assert rec.block_votes['0000000'] == {'+': 7, '-': 1, 'absent': 0}


def test_tied_vote_fails_loudly(reconstruction):
    prefixes = printed.appendix1_prefixes()
    blocks = sorted(prefixes)[:8 - MAJORITY + 1]
    lines = _flip_first_ket(reconstruction.corrected_lines, prefixes, blocks)
    with pytest.raises(ReconstructionError):
        reconstruct_channel(lines)
