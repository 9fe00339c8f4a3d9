'''
Bipartition entropies of a pure state.

For every subset of up to half the qubits, the von Neumann entropy of the
reduced state in bits, and whether that reduction is maximally mixed.
'''
import itertools
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from protocol import round_sig
from statevector import DEFAULT_TOLERANCES, CapacityError, StateError, entropy_bits, reduced_density

logger = logging.getLogger(__name__)

MAX_AUDIT_QUBITS = 12


@dataclass(frozen=True)
class CutReport:
    subset: Tuple[int, ...]
    entropy_bits: float
    maximally_mixed: bool

    def to_dict(self):
        return {
            'subset': list(self.subset),
            'entropy_bits': round_sig(self.entropy_bits),
            'maximally_mixed': self.maximally_mixed,
        }


def bipartition_report(state, tol=DEFAULT_TOLERANCES):
    '''
    One CutReport per subset of size 1 .. n//2, by size then
    lexicographically.
    '''
    n = state.n_qubits
    if n > MAX_AUDIT_QUBITS:
        raise CapacityError('Entanglement audit is limited to {} qubits, got {}'.format(
            MAX_AUDIT_QUBITS, n))
    if not state.is_normalized(tol.normalization):
        raise StateError('State {} is not normalized'.format(state.label))
    out = []
    for size in range(1, n // 2 + 1):
        for subset in itertools.combinations(range(n), size):
            s = entropy_bits(reduced_density(state, subset, tol), tol)
            out.append(CutReport(subset, s, abs(s - size) <= tol.fidelity))
    logger.debug('%d cuts of a %d-qubit state', len(out), n)
    return out


def entanglement_summary(state, tol=DEFAULT_TOLERANCES):
    '''
    Aggregate of ``bipartition_report`` per cut size.

    Returns
    -------
    dict
        ``{cut_size: {min, mean, max, cuts, maximally_mixed_count}}`` with
        string keys, plus the minimum cuts of each size
    '''
    cuts = bipartition_report(state, tol)
    sizes = OrderedDict()
    for size in sorted({len(c.subset) for c in cuts}):
        group = [c for c in cuts if len(c.subset) == size]
        values = np.array([c.entropy_bits for c in group])
        lowest = min(values)
        sizes[str(size)] = OrderedDict([
            ('min', round_sig(lowest)),
            ('mean', round_sig(np.mean(values))),
            ('max', round_sig(np.max(values))),
            ('cuts', len(group)),
            ('maximally_mixed_count', sum(1 for c in group if c.maximally_mixed)),
            ('min_cuts', [list(c.subset) for c in group
                          if c.entropy_bits <= lowest + tol.fidelity]),
        ])
        if sizes[str(size)]['maximally_mixed_count'] < len(group):
            logger.info('%s: %d of %d size-%d cuts are not maximally mixed', state.label,
                        len(group) - sizes[str(size)]['maximally_mixed_count'], len(group), size)
    return OrderedDict([('n_qubits', state.n_qubits), ('label', state.label),
                        ('cut_sizes', sizes)])
