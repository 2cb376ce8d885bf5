import json

import pytest

from app.cli import EXIT_OK, EXIT_USAGE, main

CONFIG = {
    'arena': [400, 400],
    'targets': [1, 1, 1, 1],
    'zone_radius': 50,
    'iterations': 200,
    'roster': [{'modality': 'EU', 'knowledge': 'I', 'count': 3},
               {'modality': 'EU', 'knowledge': 'M', 'count': 1}],
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / 'world.json'
    path.write_text(json.dumps(CONFIG))
    return path


def test_validate_ok(config_file, capsys):
    assert main(['--env', 'testing', 'validate', str(config_file)]) == EXIT_OK
    assert '4 robots, 4 targets' in capsys.readouterr().out


def test_validate_reports_bad_key(tmp_path, capsys):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({**CONFIG, 'zone_radus': 5}))
    assert main(['--env', 'testing', 'validate', str(path)]) == EXIT_USAGE
    assert 'zone_radus' in capsys.readouterr().err


def test_missing_file_is_a_usage_error(tmp_path):
    assert main(['--env', 'testing', 'validate', str(tmp_path / 'nope.json')]) == EXIT_USAGE


def test_run_writes_ledger(config_file, tmp_path):
    out = tmp_path / 'out'
    assert main(['--env', 'testing', 'run', str(config_file), '--seed', '4', '--out', str(out)]) == EXIT_OK
    assert (out / 'run' / 'seed-4.csv').exists()
    document = json.loads((out / 'run' / 'seed-4.json').read_text())
    assert document['config']['seed'] == 4
    assert not (out / 'run' / 'trace.jsonl').exists()


def test_trace_writes_json_lines(config_file, tmp_path):
    out = tmp_path / 'out'
    assert main(['--env', 'testing', 'trace', str(config_file), '--out', str(out)]) == EXIT_OK
    lines = (out / 'run' / 'trace.jsonl').read_text().splitlines()
    for line in lines:
        record = json.loads(line)
        assert record['kind'] in ('query', 'response')


def test_unknown_study_is_a_usage_error(tmp_path):
    assert main(['--env', 'testing', 'study', 'nonsense', '--out', str(tmp_path)]) == EXIT_USAGE
