import json
from io import StringIO
from pathlib import Path

import numpy as np
import pytest
import yaml
from django.core.management import call_command
from django.core.management.base import CommandError

FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'


def run(command, fixture, tmp_path, **options):
    output = tmp_path / f'{command}-{fixture}.{options.get("format", "json")}'
    stdout = StringIO()
    call_command(command, str(FIXTURES / fixture), output=str(output), stdout=stdout, **options)
    assert 'Report:' in stdout.getvalue()
    text = output.read_text()
    return yaml.safe_load(text) if options.get('format') == 'yaml' else json.loads(text)


def returncode(command, fixture, tmp_path, **options):
    with pytest.raises(CommandError) as excinfo:
        call_command(command, str(FIXTURES / fixture), output=str(tmp_path / 'report.json'), stdout=StringIO(),
                     **options)
    return excinfo.value.returncode


def test_validate(tmp_path):
    report = run('validate', 'xz.json', tmp_path)
    assert report['valid'] is True
    assert report['object_class'] == 'measurement-assemblage'
    assert report['shape'] == [2, 2, 2]
    assert report['input'] == 'xz.json'


def test_validation_errors(tmp_path):
    assert returncode('validate', 'bad_povm.json', tmp_path) == 1
    assert returncode('robustness', 'xz.json', tmp_path, free_set='lhs') == 1
    assert returncode('robustness', 'xz.json', tmp_path, phases=2) == 1


def test_io_errors(tmp_path):
    assert returncode('validate', 'malformed.json', tmp_path) == 3
    assert returncode('robustness', 'missing.json', tmp_path) == 3


def test_robustness_xz(tmp_path):
    report = run('robustness', 'xz.json', tmp_path)
    assert abs(report['t'] - (3 - 2 * np.sqrt(2))) < 1e-6
    assert report['free_set'] == 'jm'
    assert report['status'] == 'Optimal'
    assert report['free'] is False
    assert abs(report['gap']) < 1e-6


def test_robustness_werner(tmp_path):
    report = run('robustness', 'werner_09.json', tmp_path)
    assert report['free_set'] == 'lhs'
    assert abs(report['t'] - 0.112994) < 1e-5
    assert run('robustness', 'werner_05.json', tmp_path)['free'] is True


def test_robustness_with_generators(tmp_path):
    report = run('robustness', 'trine.json', tmp_path, free_set=f'generated:{FIXTURES / "pauli_generators.json"}')
    assert report['free_set'] == 'generated'
    assert report['shape'] == [2, 3, 1]
    assert report['t'] > 1e-3


def test_phase_ensemble(tmp_path):
    report = run('robustness', 'plus_state.json', tmp_path, phases=2)
    assert report['object_class'] == 'state-ensemble'
    assert report['free_set'] == 'incoherent'
    assert abs(report['t'] - 1) < 1e-6
    from_file = run('robustness', 'plus_state.json', tmp_path, instrument=str(FIXTURES / 'phase_instrument.json'))
    assert abs(from_file['t'] - report['t']) < 1e-6


def test_witness(tmp_path):
    report = run('witness', 'werner_09.json', tmp_path)
    witness = report['witness']
    assert witness['object_class'] == 'state-assemblage'
    assert len(witness['blocks']) == 2 and len(witness['blocks'][0]) == 2
    assert abs(witness['normalization']) > 0


def test_game_yaml(tmp_path):
    report = run('game', 'xz.json', tmp_path, format='yaml')
    assert report['game']['type'] == 'discrimination'
    assert abs(report['ratio'] - report['one_plus_r']) < 1e-5


def test_verify_is_deterministic(tmp_path):
    first, second = tmp_path / 'first.json', tmp_path / 'second.json'
    for path in (first, second):
        call_command('verify', str(FIXTURES / 'xz.json'), output=str(path), samples=20, stdout=StringIO())
    assert first.read_bytes() == second.read_bytes()
    report = json.loads(first.read_text())
    assert report['passed'] is True
    assert report['witness_bound'] <= 1 + 1e-7
    assert report['samples'] == 20 and report['seed'] == 0


def test_verify_jointly_measurable(tmp_path):
    report = run('verify', 'jm.json', tmp_path, samples=10)
    assert report['t'] < 1e-6
    assert abs(report['ratio'] - 1) < 1e-5
    assert report['free'] is True


def test_verify_from_config(tmp_path):
    config = tmp_path / 'run.yaml'
    config.write_text(f'input: {FIXTURES / "xz.json"}\nfree_set: coexistence\nsamples: 5\nformat: yaml\n')
    output = tmp_path / 'report.yaml'
    call_command('verify', config=str(config), output=str(output), stdout=StringIO())
    report = yaml.safe_load(output.read_text())
    assert report['free_set'] == 'coexistence'
    assert report['samples'] == 5
    assert report['passed'] is True


def test_maxfree_replays_a_game(tmp_path):
    played = run('game', 'xz.json', tmp_path)
    game_file = tmp_path / 'game.json'
    game_file.write_text(json.dumps(played['game']))
    output = tmp_path / 'maxfree.json'
    call_command('maxfree', str(game_file), output=str(output), stdout=StringIO())
    replayed = json.loads(output.read_text())
    assert replayed['free_set'] == 'jm'
    assert replayed['shape'] == [2, 2, 2]
    assert abs(replayed['max_free_success_probability'] - played['max_free_success_probability']) < 1e-7
