import numpy as np
import pytest
from numpy.testing import assert_allclose

from statevector import (
    DEFAULT_TOLERANCES,
    CapacityError,
    DensityMatrix,
    LocalOperatorWord,
    StateError,
    StateFileError,
    StateVector,
    Tolerances,
    apply_matrix,
    apply_word,
    basis_state,
    configure,
    entropy_bits,
    fidelity,
    from_amplitudes,
    pauli_words,
    project_subset,
    random_state,
    read_state_file,
    reduced_density,
    tensor,
    uniform_state,
    write_state_file,
)
from synthesis import CX_MATRIX


def phi_plus():
    return from_amplitudes([(1 / np.sqrt(2), '00'), (1 / np.sqrt(2), '11')])


def test_basis_state_is_big_endian():
    s = basis_state('0101')
    assert s.n_qubits == 4
    assert s.amps[5] == 1
    assert s.amplitude('0101') == 1
    assert s.support() == ['0101']


@pytest.mark.parametrize('amps', [np.ones(3), [np.nan, 0], []])
def test_state_vector_rejects_bad_amplitudes(amps):
    with pytest.raises(StateError):
        StateVector(amps)


def test_tensor_puts_first_factor_first():
    s = tensor(basis_state('1'), basis_state('0'))
    assert s.support() == ['10']


def test_from_amplitudes_adds_repeated_kets():
    s = from_amplitudes([(0.5, '01'), (0.5, '01')])
    assert s.amplitude('01') == 1
    with pytest.raises(StateError):
        from_amplitudes([(1, '0'), (1, '01')])


def test_apply_word_and_matrix_targets():
    x0 = apply_word(basis_state('00'), LocalOperatorWord(('σ1', 'I')), [0, 1])
    assert x0.support() == ['10']
    assert apply_matrix(basis_state('10'), CX_MATRIX, [0, 1]).support() == ['11']
    assert apply_matrix(basis_state('01'), CX_MATRIX, [1, 0]).support() == ['11']
    with pytest.raises(StateError):
        apply_word(basis_state('00'), LocalOperatorWord(('σ1', 'σ1')), [0, 0])
    with pytest.raises(StateError):
        apply_word(basis_state('00'), LocalOperatorWord(('σ1',)), [2])


def test_sigma2_convention():
    s = apply_word(basis_state('0'), LocalOperatorWord(('σ2',)), [0])
    assert_allclose(s.amps, [0, 1j])


def test_word_parse_printed_notation():
    w = LocalOperatorWord.parse('iσ2⊗iσ2')
    assert w.letters == ('σ2', 'σ2')
    assert w.phase == -1
    assert str(w) == '-σ2⊗σ2'
    assert LocalOperatorWord.parse('σx').letters == ('σ1',)
    assert str(LocalOperatorWord.parse('iσ2⊗σ1')) == 'iσ2⊗σ1'
    assert LocalOperatorWord.parse('I⊗σ3').same_letters(LocalOperatorWord(('I', 'σ3'), -1))


def test_word_phase_and_dagger():
    w = LocalOperatorWord(('σ1', 'F1'), 1j)
    d = w.dagger()
    assert d.letters == ('σ1', 'F2')
    assert d.phase == -1j
    assert not w.is_unitary
    assert_allclose(d.matrix(), w.matrix().conj().T)
    with pytest.raises(StateError):
        LocalOperatorWord(('σ1',), 0.5)
    with pytest.raises(StateError):
        LocalOperatorWord(('Q',))


def test_pauli_words_order():
    words = pauli_words(2)
    assert len(words) == 16
    assert str(words[0]) == 'I⊗I'
    assert str(words[1]) == 'I⊗σ1'
    assert str(words[-1]) == 'σ3⊗σ3'


def test_project_subset():
    p, residual = project_subset(phi_plus(), basis_state('0'), [0])
    assert_allclose(p, 0.5)
    assert residual.support() == ['0']
    assert residual.is_normalized()

    p, residual = project_subset(phi_plus(), phi_plus(), [0, 1])
    assert_allclose(p, 1.0)
    assert residual.n_qubits == 0

    p, residual = project_subset(basis_state('00'), basis_state('1'), [1])
    assert p == 0
    assert residual.placeholder

    with pytest.raises(StateError):
        project_subset(phi_plus(), StateVector([1, 1]), [0])


def test_fidelity_ignores_global_phase():
    a = random_state(3, 11)
    b = StateVector(1j * a.amps)
    assert_allclose(fidelity(a, b), 1.0)
    with pytest.raises(StateError):
        fidelity(a, random_state(2, 11))
    with pytest.raises(StateError):
        fidelity(a, StateVector(2 * a.amps))


def test_random_state_is_seeded():
    a, b = random_state(4, 3), random_state(4, 3)
    assert_allclose(a.amps, b.amps)
    assert a.is_normalized()
    assert not np.allclose(a.amps, random_state(4, 4).amps)


def test_reduced_density_and_entropy():
    rho = reduced_density(phi_plus(), [0])
    assert_allclose(rho.entries, np.eye(2) / 2)
    assert_allclose(entropy_bits(rho), 1.0)
    assert entropy_bits(reduced_density(basis_state('01'), [1])) == 0.0
    assert_allclose(entropy_bits(reduced_density(uniform_state(3), [0, 2])), 0.0, atol=1e-12)
    defects = rho.defects()
    assert defects['hermiticity'] == 0
    assert_allclose(defects['trace'], 0, atol=1e-15)


def test_density_matrix_shape_checks():
    with pytest.raises(StateError):
        DensityMatrix(np.eye(3))
    with pytest.raises(StateError):
        DensityMatrix(np.ones((2, 4)))


def test_capacity_cap(monkeypatch):
    monkeypatch.setenv('QTV_MAX_QUBITS', '3')
    with pytest.raises(CapacityError):
        random_state(4, 0)
    with pytest.raises(CapacityError):
        tensor(basis_state('00'), basis_state('00'))
    monkeypatch.setenv('QTV_MAX_QUBITS', 'many')
    with pytest.raises(CapacityError):
        basis_state('0')
    with pytest.raises(ValueError):
        configure(0)


def test_tolerances_validation():
    with pytest.raises(ValueError):
        Tolerances(fidelity=0)
    tol = DEFAULT_TOLERANCES.replace(fidelity=1e-6, rank=None)
    assert tol.fidelity == 1e-6
    assert tol.rank == DEFAULT_TOLERANCES.rank


def test_state_file(tmp_path):
    state = random_state(3, 5)
    filename = str(tmp_path / 'state.txt')
    write_state_file(state, filename, header=['three qubits'])
    with open(filename, encoding='utf-8') as f:
        lines = f.read().splitlines()
    assert lines[0] == '# three qubits'
    assert len(lines) == 9
    back = read_state_file(filename)
    assert_allclose(back.amps, state.amps)
    assert back.label == 'state.txt'


@pytest.mark.parametrize('content', [
    '00 1 0\n00 0 1\n',
    '0a 1 0\n',
    '00 1\n',
    '00 1 0\n1 0 0\n',
    '# nothing\n',
])
def test_state_file_errors(tmp_path, content):
    filename = tmp_path / 'bad.txt'
    filename.write_text(content, encoding='utf-8')
    with pytest.raises(StateFileError):
        read_state_file(str(filename))
