'''
Verification harness for the seven-qubit channel protocols.

Runs one suite (or all of them), writes a deterministic report in JSON, CSV
or text, and exits with

    0  everything verified and the printed data agrees
    1  the protocols verify but printed-data discrepancies were found
    2  a verification failure or an error

Examples
--------

    python qtv_verify.py verify teleport1 --trials 100 --seed 7
    python qtv_verify.py channel reconstruct --out channel.txt
    python qtv_verify.py entanglement --state channel.txt
    python qtv_verify.py all --report report.json --record
'''
import argparse
import dataclasses
import json
import logging
import os
import sys
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

import pandas as pd

import rrtools
import xwz_protocols as xwz
from channels import xwz_channel
from entanglement import entanglement_summary
from protocol import round_sig
from statevector import (
    DEFAULT_TOLERANCES,
    QtvError,
    Tolerances,
    configure,
    fidelity,
    read_state_file,
    write_state_file,
)
from synthesis import simulate, synth_prep_circuit

logger = logging.getLogger(__name__)

base_dir = os.path.abspath(os.path.split(__file__)[0])
CONFIG_FILE = os.path.join(base_dir, 'qtv_config.json')

FORMATS = ('json', 'csv', 'text')
CONFIG_KEYS = {'name', 'seed', 'trials', 'appendix2_draws', 'format', 'max_qubits', 'tolerances'}
PROTOCOLS = tuple(xwz.SPECS)
TOL_FIELDS = tuple(f.name for f in dataclasses.fields(Tolerances))


@dataclass(frozen=True)
class RunConfig:
    command: str = 'all'
    target: Optional[str] = None
    seed: int = 7
    trials: int = 100
    appendix2_draws: int = 10
    format: str = 'json'
    max_qubits: int = 16
    tolerances: Tolerances = DEFAULT_TOLERANCES
    variant: str = 'both'
    report: Optional[str] = None
    out: Optional[str] = None
    state: Optional[str] = None
    drop: Optional[str] = None
    profile: Optional[str] = None
    record: bool = False
    test: bool = False
    name: str = 'qtv_verify'

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError('trials must be at least 1')
        if self.appendix2_draws < 1:
            raise ValueError('appendix2_draws must be at least 1')
        if self.format not in FORMATS:
            raise ValueError('format must be one of {}'.format(FORMATS))

    def variants(self):
        return xwz.VARIANTS if self.variant == 'both' else (self.variant,)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d['tolerances'] = dataclasses.asdict(self.tolerances)
        return d


def load_config(path=None, **overrides):
    '''
    Merge the JSON defaults with command-line overrides.

    Parameters
    ----------
    path: str, optional
        Configuration file, ``qtv_config.json`` next to this script by default
    overrides:
        RunConfig fields; ``None`` keeps the file value. ``tol_<name>``
        overrides one tolerance.
    '''
    with open(path or CONFIG_FILE, 'r', encoding='utf-8') as f:
        parameters = json.load(f)
    unknown = set(parameters) - CONFIG_KEYS
    if unknown:
        raise ValueError('Unknown configuration keys: {}'.format(', '.join(sorted(unknown))))

    tol = dict(parameters.pop('tolerances', {}))
    bad = set(tol) - set(TOL_FIELDS)
    if bad:
        raise ValueError('Unknown tolerances: {}'.format(', '.join(sorted(bad))))
    for name in TOL_FIELDS:
        value = overrides.pop('tol_' + name, None)
        if value is not None:
            tol[name] = value
    parameters['tolerances'] = DEFAULT_TOLERANCES.replace(**tol)

    for key, value in overrides.items():
        if value is not None:
            parameters[key] = value
    return RunConfig(**parameters)


# suites

def _channel_suite(config):
    report = xwz.channel_report()
    if config.out is not None:
        header = ['reconstructed seven-qubit channel, {} kets'.format(report['n_kets'])]
        header += ['discrepancy {line} [{kind}]: expected {expected}, printed {printed}'.format(**d)
                   for d in report['discrepancies']]
        write_state_file(xwz_channel(), config.out, header=header)
        report['out'] = config.out
    return report, 1 if report['discrepancies'] else 0


def _verify_suite(config):
    result = xwz.verify_protocol(config.target, trials=config.trials, seed=config.seed,
                                 variants=config.variants(), tol=config.tolerances)
    return result, result['exit_code']


def _corrections_suite(config):
    variant = 'derived' if config.variant == 'both' else config.variant
    table = xwz.correction_table(config.target, variant, config.tolerances)
    report = OrderedDict([('protocol', config.target), ('variant', variant)])
    report.update(table.to_dict())
    report['correctable'] = table.correctable
    if table.correctable:
        code = 0
    else:
        code = 2 if variant == 'derived' else 1
    return report, code


def _basis_suite(config):
    report = xwz.check_basis(config.target, config.tolerances)
    return report, 0 if report['orthonormal'] else 1


def _appendix2_suite(config):
    report = xwz.appendix2_check(trials=config.appendix2_draws, seed=config.seed,
                                 drop=config.drop, tol=config.tolerances)
    if config.drop is not None:
        ok = report['max_residual'] > 0.1
    else:
        ok = report['max_residual'] <= config.tolerances.fidelity
    return report, 0 if ok else 2


def _appendix3_suite(config):
    report = xwz.appendix3_check()
    return report, 0 if all(r['status'] == 'match' for r in report['rows']) else 1


def _entanglement_suite(config):
    state = read_state_file(config.state) if config.state else xwz_channel()
    return entanglement_summary(state, config.tolerances), 0


def _synth_suite(config):
    target = read_state_file(config.state) if config.state else xwz_channel()
    circuit = synth_prep_circuit(target, config.tolerances)
    if config.out is not None:
        with open(config.out, 'w', encoding='utf-8') as f:
            f.write(circuit.to_text())
    bound = (1 << (circuit.n_qubits + 2)) - 6
    report = OrderedDict([
        ('state', target.label),
        ('fidelity', round_sig(fidelity(simulate(circuit), target, config.tolerances))),
        ('gate_bound', bound),
    ])
    report.update(circuit.to_dict())
    if config.out is not None:
        report['out'] = config.out
    return report, 0 if circuit.gate_count <= bound else 2


SUITES = {
    'channel': _channel_suite,
    'verify': _verify_suite,
    'corrections': _corrections_suite,
    'basis': _basis_suite,
    'appendix2': _appendix2_suite,
    'appendix3': _appendix3_suite,
    'entanglement': _entanglement_suite,
    'synth': _synth_suite,
}


def run_suite(config):
    '''
    Run the suite selected by ``config.command``; top-level so that cluster
    workers can import it.

    Returns
    -------
    (report dict, exit code)
    '''
    configure(max_qubits=config.max_qubits)
    return SUITES[config.command](config)


def all_tasks(config):
    ''' The ``all`` suites in report order '''
    tasks = [('channel', dataclasses.replace(config, command='channel', out=None))]
    for name in PROTOCOLS:
        tasks.append(('verify ' + name, dataclasses.replace(config, command='verify', target=name)))
    tasks.append(('appendix2', dataclasses.replace(config, command='appendix2', drop=None)))
    tasks.append(('appendix3', dataclasses.replace(config, command='appendix3')))
    tasks.append(('entanglement', dataclasses.replace(config, command='entanglement', state=None)))
    tasks.append(('synth', dataclasses.replace(config, command='synth', state=None, out=None)))
    return tasks


def run_all(config):
    tasks = all_tasks(config)
    results = rrtools.map_tasks(run_suite, [c for _, c in tasks], profile=config.profile,
                                status=config.profile is not None)
    report = OrderedDict()
    codes = OrderedDict()
    for (name, _), (body, code) in zip(tasks, results):
        report[name] = body
        codes[name] = code
    code = max(codes.values())
    summary = OrderedDict([('exit_codes', codes), ('exit_code', code)])
    out = OrderedDict([('summary', summary)])
    out.update(report)
    return out, code


# report rendering

def _jsonable(o):
    if hasattr(o, 'item'):
        return o.item()
    raise TypeError('{} is not JSON serializable'.format(type(o).__name__))


def to_json(report):
    return json.dumps(report, indent=2, ensure_ascii=False, default=_jsonable) + '\n'


def report_rows(report, section=''):
    '''
    Flatten a report: each list of dicts gives one row per entry, scalars
    are collected in a row of their section.
    '''
    rows, scalars = [], OrderedDict()
    for key, value in report.items():
        path = '{}.{}'.format(section, key) if section else str(key)
        if isinstance(value, dict):
            rows.extend(report_rows(value, path))
        elif isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            for i, entry in enumerate(value):
                row = OrderedDict([('section', path), ('index', i)])
                for k, v in entry.items():
                    row[k] = json.dumps(v, ensure_ascii=False, default=_jsonable) \
                        if isinstance(v, (dict, list)) else v
                rows.append(row)
        else:
            scalars[key] = json.dumps(value, ensure_ascii=False, default=_jsonable) \
                if isinstance(value, list) else value
    if scalars:
        head = OrderedDict([('section', section or 'report'), ('index', None)])
        head.update(scalars)
        rows.insert(0, head)
    return rows


def to_csv(report):
    return pd.DataFrame(report_rows(report)).to_csv(index=False)


def to_text(report, indent=0):
    lines = []
    pad = '  ' * indent
    for key, value in report.items():
        if isinstance(value, dict):
            lines.append('{}{}:'.format(pad, key))
            lines.append(to_text(value, indent + 1).rstrip('\n'))
        elif isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            lines.append('{}{}: {} row(s)'.format(pad, key, len(value)))
            for entry in value:
                lines.append('{}  - {}'.format(pad, ', '.join(
                    '{}={}'.format(k, v) for k, v in entry.items())))
        else:
            lines.append('{}{}: {}'.format(pad, key, value))
    return '\n'.join(l for l in lines if l) + '\n'


RENDERERS = {'json': to_json, 'csv': to_csv, 'text': to_text}


# command line

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='JSON configuration file')
    common.add_argument('--seed', type=int, help='seed of the random inputs')
    common.add_argument('--trials', type=int, help='random inputs per protocol run')
    common.add_argument('--format', choices=FORMATS, help='report format')
    common.add_argument('--report', type=str, help='write the report to this file')
    common.add_argument('--record', action='store_true',
                        help='save the run parameters and commit tag next to the report')
    common.add_argument('--test', action='store_true',
                        help='test mode, accept a dirty git tree when recording')
    common.add_argument('-p', '--profile', type=str, help='ipython profile of cluster')
    common.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    for name in TOL_FIELDS:
        common.add_argument('--tol-' + name.replace('_', '-'), dest='tol_' + name, type=float,
                            help='{} tolerance'.format(name.replace('_', ' ')))

    parser = argparse.ArgumentParser(
        description='Verify teleportation and state sharing over the seven-qubit channel')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    channel = sub.add_parser('channel', parents=[common], help='reconstruct the channel')
    channel.add_argument('action', choices=['reconstruct'])
    channel.add_argument('--out', type=str, help='write the channel as a state file')

    verify = sub.add_parser('verify', parents=[common], help='run one protocol')
    verify.add_argument('target', choices=PROTOCOLS)
    verify.add_argument('--variant', choices=xwz.VARIANTS + ('both',))

    derive = sub.add_parser('derive', parents=[common], help='derive a correction table')
    derive.add_argument('action', choices=['corrections'])
    derive.add_argument('target', choices=PROTOCOLS)
    derive.add_argument('--variant', choices=xwz.VARIANTS)

    check = sub.add_parser('check', parents=[common], help='check a measurement basis')
    check.add_argument('action', choices=['basis'])
    check.add_argument('target', choices=list(xwz.named_bases()))

    appendix2 = sub.add_parser('appendix2', parents=[common],
                               help='rebuild input and channel from the 64 outcomes')
    appendix2.add_argument('--drop', type=str, help='outcome label left out of the sum')
    appendix2.add_argument('--draws', dest='appendix2_draws', type=int,
                           help='number of random inputs')

    sub.add_parser('appendix3', parents=[common], help='printed operator matrices')

    ent =sub.add_parser('entanglement', parents=[common], help='bipartition entropies')
    ent.add_argument('--state', type=str, help='state file, the channel by default')

    synth = sub.add_parser('synth', parents=[common], help='preparation circuit')
    synth.add_argument('state', type=str, help='state file')
    synth.add_argument('--out', type=str, help='write the circuit here')

    sub.add_parser('all', parents=[common], help='every suite')
    return parser


_COMMANDS = {'derive': 'corrections', 'check': 'basis'}


def config_from_args(args):
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ('config', 'verbose', 'action', 'command')}
    overrides['command'] = _COMMANDS.get(args.command, args.command)
    return load_config(args.config, **overrides)


def emit(report, config):
    text = RENDERERS[config.format](report)
    if config.report is None:
        sys.stdout.write(text)
        return
    with open(config.report, 'w', encoding='utf-8') as f:
        f.write(text)
    if config.record:
        rrtools.write_parameters(config.report + '.parameters.json', config.to_dict(),
                                 base_dir, test=config.test)


def dispatch(config):
    ''' Run the configured command, write its report and return the exit code '''
    configure(max_qubits=config.max_qubits)
    if config.command == 'all':
        report, code = run_all(config)
    else:
        report, code = run_suite(config)
    emit(report, config)
    logger.info('%s finished with exit code %d', config.command, code)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)

    try:
        return dispatch(config_from_args(args))
    except (QtvError, OSError, ValueError, rrtools.DirtyGitRepositoryError) as e:
        print('error: {}'.format(e), file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
