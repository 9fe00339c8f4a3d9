'''
Printed artifacts
=================

Loader and ket-expression parser for ``printed_artifacts.json``, the
verbatim transcription of every printed ket family, table and operator
that the protocol checks compare against.

The canonical ket syntax is a signed sum of terms, each term an optional
coefficient symbol (α, β, μ, γ) followed by one or more adjacent kets that
are tensored left to right::

    α|1⟩|Φ-⟩ + α|0⟩|Ψ-⟩ - β|0000⟩|Ψ3⟩

A ket holds a bit string, a GHZ label ``Ψ0`` .. ``Ψ7`` or a Bell label
``Φ+``, ``Φ-``, ``Ψ+``, ``Ψ-``. Printed data is never corrected here;
typos are carried into the parsed values on purpose.
'''
import functools
import json
import logging
import os
import re
from collections import Counter, namedtuple
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from channels import bell, ghz
from statevector import StateError, StateVector, basis_state, tensor_all

logger = logging.getLogger(__name__)

base_dir = os.path.abspath(os.path.split(__file__)[0])
ARTIFACTS_FILE = os.path.join(base_dir, 'printed_artifacts.json')

SYMBOLS = ('α', 'β', 'μ', 'γ')

_TERM_RE = re.compile(r'([+-])?\s*([αβμγ])?\s*((?:\|[^|⟩\s]+⟩)+)')
_KET_RE = re.compile(r'\|([^|⟩\s]+)⟩')
_GROUP_RE = re.compile(r'([+-]?)\s*([A-D])([01]{2})')

Term = namedtuple('Term', ['sign', 'symbol', 'kets'])


@functools.lru_cache(maxsize=None)
def _load(filename):
    with open(filename, 'r', encoding='utf-8') as f:
        return json.load(f)


def load_artifacts(filename=None):
    ''' The parsed JSON document (cached, do not mutate) '''
    return _load(filename or ARTIFACTS_FILE)


def parse_terms(text):
    '''
    Split a printed expression into ``Term(sign, symbol, kets)`` tuples.

    Raises StateError when part of the text is not a term, so that a
    transcription slip cannot silently drop kets.
    '''
    terms = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TERM_RE.match(text, pos)
        if m is None:
            raise StateError('Cannot parse {!r} at position {}'.format(text, pos))
        sign = -1 if m.group(1) == '-' else 1
        kets = tuple(_KET_RE.findall(m.group(3)))
        terms.append(Term(sign, m.group(2), kets))
        pos = m.end()
    if not terms:
        raise StateError('Empty ket expression')
    return terms


def ket_vector(token):
    ''' State for one ket token: bits, GHZ label or Bell label '''
    if set(token) <= {'0', '1'}:
        return basis_state(token)
    if re.fullmatch(r'Ψ[0-7]', token):
        return ghz(int(token[1]))
    if token in ('Φ+', 'Φ-', 'Ψ+', 'Ψ-'):
        return bell(token)
    raise StateError('Unknown ket {!r}'.format(token))


def _term_amps(term):
    return tensor_all([ket_vector(k) for k in term.kets]).amps


def evaluate(text, coefficients=None, label=None):
    '''
    Unnormalized state of a printed expression.

    Parameters
    ----------
    text: str
        Expression in the canonical ket syntax
    coefficients: dict, optional
        Value of each coefficient symbol. Symbols default to 1 when the
        dict is omitted, which is the coefficient-stripped reading.
    '''
    amps = None
    for term in parse_terms(text):
        value = 1.0
        if term.symbol is not None and coefficients is not None:
            if term.symbol not in coefficients:
                raise StateError('No value for coefficient {}'.format(term.symbol))
            value = coefficients[term.symbol]
        a = term.sign * value * _term_amps(term)
        if amps is None:
            amps = a
        elif a.shape != amps.shape:
            raise StateError('Terms of {!r} have different qubit counts'.format(text))
        else:
            amps = amps + a
    return StateVector(amps, label=label)


def linear_map(text, symbols):
    '''
    Matrix whose column ``i`` collects the kets multiplying ``symbols[i]``.
    Terms without a symbol are rejected.
    '''
    columns = {}
    dim = None
    for term in parse_terms(text):
        if term.symbol not in symbols:
            raise StateError('Term without a known coefficient in {!r}'.format(text))
        a = term.sign * _term_amps(term)
        dim = a.shape[0] if dim is None else dim
        if a.shape[0] != dim:
            raise StateError('Terms of {!r} have different qubit counts'.format(text))
        columns[term.symbol] = columns.get(term.symbol, 0) + a
    return np.stack([np.asarray(columns.get(s, np.zeros(dim)), dtype=complex)
                     for s in symbols], axis=1)


def render_term(term, sign=1):
    ''' One term back in the canonical syntax, its sign multiplied by ``sign`` '''
    return '{} {}{}'.format('-' if term.sign * sign < 0 else '+', term.symbol or '',
                            ''.join('|{}⟩'.format(k) for k in term.kets))


def duplicated_kets(text, per_symbol=False):
    '''
    Kets that appear in more than one term, in first-seen order. With
    ``per_symbol`` the same ket under two different coefficients is allowed.
    '''
    counts = Counter()
    for t in parse_terms(text):
        ket = ''.join('|{}⟩'.format(k) for k in t.kets)
        counts[((t.symbol or '') if per_symbol else '') + ket] += 1
    return [k for k, c in counts.items() if c > 1]


def expand_pm(text, sign):
    ''' Resolve a printed ``±``/``∓`` to one branch '''
    if sign not in ('+', '-'):
        raise ValueError('sign must be "+" or "-"')
    other = '-' if sign == '+' else '+'
    return text.replace('±', sign).replace('∓', other)


def pm_expression(entry, sign):
    ''' Raw text of one branch of a ``base ± (pm)`` family member '''
    s = 1 if sign == '+' else -1
    return ' '.join([entry['base'].strip()] + [render_term(t, s) for t in parse_terms(entry['pm'])])


@dataclass(frozen=True, eq=False)
class PaperDatum:
    '''
    One printed state: the raw transcription, its anchor and the
    normalized vector (absent when the raw expression vanishes).
    '''
    label: str
    anchor: str
    raw: str
    norm: float
    normalized: Optional[StateVector]
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def constant(self):
        ''' Normalization constant applied on ingest '''
        return 1.0 / self.norm if self.norm > 0 else None


def make_datum(label, anchor, raw, coefficients=None, notes=()):
    state = evaluate(raw, coefficients=coefficients, label=label)
    nrm = state.norm()
    notes = list(notes)
    dups = duplicated_kets(raw, per_symbol=True)
    if dups:
        notes.append('repeated ket(s) ' + ', '.join(dups))
    normalized = state.normalized().with_label(label) if nrm > 0 else None
    if normalized is None:
        notes.append('expression vanishes')
    for n in notes:
        logger.info('%s (%s): %s', label, anchor, n)
    return PaperDatum(label, anchor, raw, nrm, normalized, tuple(notes))


def pm_family(section, coefficients=None):
    '''
    Expand a section whose states are ``{name: {"base", "pm"}}`` into the
    ``name+``/``name-`` data, in printed order.
    '''
    out = []
    for name, entry in section['states'].items():
        for sign in ('+', '-'):
            label = name + sign
            out.append(make_datum(label, '{}: {}'.format(section['anchor'], label),
                                  pm_expression(entry, sign), coefficients=coefficients))
    return out


def plain_family(section, coefficients=None):
    return [make_datum(name, '{}: {}'.format(section['anchor'], name), raw,
                       coefficients=coefficients)
            for name, raw in section['states'].items()]


def appendix1_lines():
    ''' ``{line label: raw text}`` for the 64 printed decomposition states '''
    return dict(load_artifacts()['appendix1']['states'])


def appendix1_prefixes():
    return dict(load_artifacts()['appendix1']['prefixes'])


def group_terms(coefficients):
    '''
    Parse a coefficient group such as ``A01-B11+C00-D01`` into
    ``[(sign, letter, kl), ...]``.
    '''
    out = []
    pos = 0
    text = coefficients.replace(' ', '')
    while pos < len(text):
        m = _GROUP_RE.match(text, pos)
        if m is None:
            raise StateError('Cannot parse coefficient group {!r}'.format(coefficients))
        out.append((-1 if m.group(1) == '-' else 1, m.group(2), m.group(3)))
        pos = m.end()
    return out


def parse_matrix(rows):
    ''' Printed 2x2 matrix of strings such as ``[["0", "i"], ["-i", "0"]]`` '''
    return np.array([[complex(v.replace('i', 'j')) for v in row] for row in rows], dtype=complex)
