import json

import pytest

import rrtools


def _square(x):
    return x * x


def test_map_tasks_serial_keeps_order(capsys):
    assert rrtools.map_tasks(_square, [3, 1, 2]) == [9, 1, 4]
    assert rrtools.map_tasks(_square, []) == []
    assert capsys.readouterr().err == ''


def test_map_tasks_status_line_goes_to_stderr(capsys):
    rrtools.map_tasks(_square, range(4), status=True)
    captured = capsys.readouterr()
    assert captured.out == ''
    assert 'tasks done' in captured.err


def test_map_tasks_propagates_errors():
    with pytest.raises(ZeroDivisionError):
        rrtools.map_tasks(lambda x: 1 / x, [1, 0])


def test_run_tag_outside_a_repository(tmp_path):
    assert rrtools.run_tag(str(tmp_path)) == ''


def test_write_parameters(tmp_path):
    filename = str(tmp_path / 'params.json')
    record = rrtools.write_parameters(filename, {'seed': 7}, str(tmp_path))
    with open(filename, 'r', encoding='utf-8') as f:
        saved = json.load(f)
    assert saved == record
    assert saved['seed'] == 7
    assert saved['_git_sha'] == ''
    assert saved['_base_dir'] == str(tmp_path)
