'''
Named states and the seven-qubit channel
========================================

GHZ and Bell families, and the seven-qubit channel rebuilt by majority
vote over the 64 printed decomposition states.

Every printed line ``L_jkl`` of block ``L`` reads ``|m(L)⟩|c⟩`` with the
block prefix ``m(L)`` on the three unknown qubits and a 4-qubit channel ket
``c``. Stripping the prefix and appending the Bob ket ``|jkl⟩`` gives one
signed channel ket per term, so each of the eight blocks proposes the whole
32-ket channel independently. A ket (with its sign) is accepted when at
least 5 of the 8 blocks agree on it.
'''
import logging
import threading
from collections import Counter, OrderedDict
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from statevector import QtvError, StateError, StateVector, from_amplitudes

logger = logging.getLogger(__name__)

MAJORITY = 5
N_CHANNEL_KETS = 32
CHANNEL_QUBITS = 7

_GHZ_PAIRS = ('000', '001', '010', '100')

BELL_LABELS = ('Φ+', 'Φ-', 'Ψ+', 'Ψ-')
_BELL_ALIASES = {
    'phi+': 'Φ+', 'phi-': 'Φ-', 'psi+': 'Ψ+', 'psi-': 'Ψ-',
    'Φ−': 'Φ-', 'Ψ−': 'Ψ-', 'Φ_+': 'Φ+', 'Φ_-': 'Φ-', 'Ψ_+': 'Ψ+', 'Ψ_-': 'Ψ-',
}


class ReconstructionError(QtvError):
    ''' The printed decomposition does not determine a channel '''


def _flip(bits):
    return ''.join('1' if b == '0' else '0' for b in bits)


def ghz(index):
    '''
    GHZ state ``(|xyz⟩ ± |x̄ȳz̄⟩)/√2``; even indices take the plus sign.
    Pairs (0,1), (2,3), (4,5), (6,7) start from 000, 001, 010, 100.
    '''
    index = int(index)
    if not 0 <= index < 8:
        raise StateError('GHZ index {} outside 0..7'.format(index))
    head = _GHZ_PAIRS[index // 2]
    sign = 1 if index % 2 == 0 else -1
    s = 1 / np.sqrt(2)
    return from_amplitudes([(s, head), (sign * s, _flip(head))], 3, label='Ψ{}'.format(index))


def bell(label):
    ''' Φ± = (|00⟩ ± |11⟩)/√2 and Ψ± = (|01⟩ ± |10⟩)/√2 '''
    label = _BELL_ALIASES.get(label, label)
    if label not in BELL_LABELS:
        raise StateError('Unknown Bell label {!r}'.format(label))
    head = '00' if label[0] == 'Φ' else '01'
    sign = 1 if label[1] == '+' else -1
    s = 1 / np.sqrt(2)
    return from_amplitudes([(s, head), (sign * s, _flip(head))], 2, label=label)


def ghz_family():
    return [ghz(i) for i in range(8)]


def bell_family():
    return [bell(l) for l in BELL_LABELS]


@dataclass(frozen=True)
class Discrepancy:
    '''
    One printed decomposition line that disagrees with the majority.

    ``kind`` is ``prefix`` (ket printed under the wrong block prefix),
    ``sign`` (sign outvoted), ``missing`` (ket absent from the line) or
    ``extra`` (ket the majority does not contain).
    '''
    block: str
    line: str
    anchor: str
    kind: str
    expected: str
    printed: str

    def to_dict(self):
        return {
            'block': self.block,
            'line': self.line,
            'anchor': self.anchor,
            'kind': self.kind,
            'expected': self.expected,
            'printed': self.printed,
        }

    def __str__(self):
        return '{} [{}]: expected {}, printed {}'.format(
            self.line, self.kind, self.expected or '(nothing)', self.printed or '(nothing)')


@dataclass(frozen=True, eq=False)
class ChannelReconstruction:
    channel: StateVector
    block_votes: Dict[str, Dict[str, int]]
    discrepancies: Tuple[Discrepancy, ...]
    corrected_lines: Dict[str, str]

    @property
    def n_kets(self):
        return len(self.channel.support())


def _signed_ket(sign, bits):
    return '{}|{}⟩'.format('+' if sign > 0 else '-', bits)


def _parse_line(raw):
    from printed import parse_terms

    out = []
    for term in parse_terms(raw):
        if term.symbol is not None or len(term.kets) != 1:
            raise ReconstructionError('Unexpected term in decomposition line {!r}'.format(raw))
        bits = term.kets[0]
        if len(bits) != CHANNEL_QUBITS:
            raise ReconstructionError('Ket {} is not a 7-qubit ket'.format(bits))
        out.append((term.sign, bits))
    return out


def reconstruct_channel(lines=None, prefixes=None, anchor=None):
    '''
    Rebuild the channel from the printed decomposition by 5-of-8 voting.

    Parameters
    ----------
    lines: dict, optional
        ``{"A000": raw, ...}``, defaults to the printed transcription
    prefixes: dict, optional
        ``{"A": "000", ...}`` block prefixes
    anchor: str, optional
        Citation prefix used in the discrepancy records

    Returns
    -------
    ChannelReconstruction
        The normalized channel, the per-ket tallies and every line that
        disagrees with the majority. The input data is never edited.
    '''
    import printed

    if lines is None:
        lines = printed.appendix1_lines()
    if prefixes is None:
        prefixes = printed.appendix1_prefixes()
    if anchor is None:
        anchor = printed.load_artifacts()['appendix1']['anchor']

    blocks = sorted(prefixes)
    # proposals[block][key] = sign
    proposals = {b: {} for b in blocks}
    # misplaced[block][key] = (sign, printed bits, line)
    misplaced = {b: {} for b in blocks}

    for name, raw in lines.items():
        block, jkl = name[0], name[1:]
        prefix = prefixes[block]
        for sign, bits in _parse_line(raw):
            key = bits[3:] + jkl
            if bits[:3] != prefix:
                misplaced[block][key] = (sign, bits, name)
                continue
            if key in proposals[block]:
                raise ReconstructionError('{} proposes ket {} twice'.format(name, key))
            proposals[block][key] = sign

    all_keys = sorted(set().union(*[set(p) for p in proposals.values()],
                                  *[set(m) for m in misplaced.values()]))

    votes = OrderedDict()
    majority = {}
    for key in all_keys:
        tally = Counter({'+': 0, '-': 0, 'absent': 0})
        for b in blocks:
            s = proposals[b].get(key)
            tally['absent' if s is None else ('+' if s > 0 else '-')] += 1
        votes[key] = dict(tally)
        winner, count = tally.most_common(1)[0]
        if count < MAJORITY:
            raise ReconstructionError(
                'No {}-of-{} majority for ket {}: {}'.format(MAJORITY, len(blocks), key, dict(tally)))
        if winner != 'absent':
            majority[key] = 1 if winner == '+' else -1

    if len(majority) != N_CHANNEL_KETS:
        raise ReconstructionError('Majority channel has {} kets, expected {}'.format(
            len(majority), N_CHANNEL_KETS))

    discrepancies = []
    for b in blocks:
        prefix = prefixes[b]
        for key in all_keys:
            line = b + key[4:]
            line_anchor = '{}, line {}'.format(anchor, line)
            want = majority.get(key)
            got = proposals[b].get(key)
            expected = _signed_ket(want, prefix + key[:4]) if want else ''
            if key in misplaced[b]:
                sign, bits, _ = misplaced[b][key]
                discrepancies.append(Discrepancy(
                    b, line, line_anchor, 'prefix', expected, _signed_ket(sign, bits)))
                continue
            if got == want:
                continue
            if got is None:
                kind, shown = 'missing', ''
            elif want is None:
                kind, shown = 'extra', _signed_ket(got, prefix + key[:4])
            else:
                kind, shown = 'sign', _signed_ket(got, prefix + key[:4])
            discrepancies.append(Discrepancy(b, line, line_anchor, kind, expected, shown))

    for d in discrepancies:
        logger.info('Decomposition discrepancy %s', d)

    amp = 1 / np.sqrt(N_CHANNEL_KETS)
    channel = from_amplitudes([(s * amp, key) for key, s in majority.items()],
                              CHANNEL_QUBITS, label='Γ7')

    corrected = {}
    for name in lines:
        block, jkl = name[0], name[1:]
        terms = [(s, prefixes[block] + key[:4]) for key, s in majority.items() if key[4:] == jkl]
        corrected[name] = ' '.join(_signed_ket(s, bits) for s, bits in terms)

    return ChannelReconstruction(channel, votes, tuple(discrepancies), corrected)


_channel_lock = threading.Lock()
_channel_cache = {}


def xwz_channel():
    ''' The majority-vote channel, computed once per process '''
    with _channel_lock:
        if 'reconstruction' not in _channel_cache:
            _channel_cache['reconstruction'] = reconstruct_channel()
        return _channel_cache['reconstruction'].channel


def cached_reconstruction():
    xwz_channel()
    return _channel_cache['reconstruction']
