import json

import pytest
import yaml

from core.pipeline import (
    EXIT_IO, EXIT_SOLVER, EXIT_VALIDATION, ConfigurationError, RunConfig, exit_code_for, render_report,
)
from core.serializers import ParseError
from robustness.errors import InvalidObject, SlaterFailure
from robustness.free_sets import FreeSetKind


def test_defaults():
    config = RunConfig.from_options('robustness', {'input': 'xz.json', 'verbosity': 1})
    assert config.seed == 0 and config.samples == 200 and config.format == 'json'
    assert config.selector == (None, None)
    assert config.output_path.endswith('robustness-xz.json')


def test_selector():
    config = RunConfig.from_options('robustness', {'input': 'a.json', 'free_set': 'generated:gens.json'})
    assert config.selector == (FreeSetKind.FINITELY_GENERATED, 'gens.json')
    config = RunConfig.from_options('robustness', {'input': 'a.json', 'generators': 'gens.json'})
    assert config.selector == (FreeSetKind.FINITELY_GENERATED, 'gens.json')


@pytest.mark.parametrize('options', [
    {'free_set': 'nonsense'},
    {'free_set': 'generated'},
    {'free_set': 'jm', 'generators': 'gens.json'},
    {'tol_feas': 0.0},
    {'phases': 1},
    {'phases': 2, 'instrument': 'inst.json'},
    {'samples': -1},
])
def test_rejected_options(options):
    with pytest.raises(ConfigurationError):
        RunConfig.from_options('robustness', {'input': 'a.json', **options})


def test_missing_input():
    with pytest.raises(ConfigurationError):
        RunConfig.from_options('validate', {})


def test_config_file_is_overridden_by_flags(tmp_path):
    path = tmp_path / 'run.yaml'
    path.write_text('input: xz.json\nfree_set: coexistence\nseed: 7\nformat: yaml\n')
    config = RunConfig.from_options('verify', {'config': str(path), 'seed': 3, 'free_set': None})
    assert config.input == 'xz.json'
    assert config.free_set == 'coexistence'
    assert config.seed == 3
    assert config.format == 'yaml'


def test_config_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / 'run.yaml'
    path.write_text('input: xz.json\nsolver: mosek\n')
    with pytest.raises(ConfigurationError):
        RunConfig.from_options('verify', {'config': str(path)})


def test_exit_codes():
    assert exit_code_for(InvalidObject('bad', 'effects')) == EXIT_VALIDATION
    assert exit_code_for(ConfigurationError('bad')) == EXIT_VALIDATION
    assert exit_code_for(SlaterFailure('none')) == EXIT_SOLVER
    assert exit_code_for(ParseError({'x': ['bad']})) == EXIT_IO
    assert exit_code_for(FileNotFoundError('gone')) == EXIT_IO
    assert exit_code_for(RuntimeError('other')) is None


def test_render_report_is_canonical():
    report = {'b': float('nan'), 'a': [1.5, {'d': True, 'c': None}]}
    text = render_report(report)
    assert text.endswith('\n')
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {'a': [1.5, {'c': None, 'd': True}], 'b': None}
    assert yaml.safe_load(render_report(report, 'yaml')) == json.loads(text)


def test_render_report_writes_17_digits():
    text = render_report({'third': 1 / 3, 'one': 1.0, 'tiny': 2.0 ** -70, 'count': 3, 'empty': []})
    assert '"third": 0.33333333333333331' in text
    assert '"one": 1.0' in text
    assert '"tiny": 8.4703294725430034e-22' in text
    assert '"count": 3,' in text
    assert '"empty": []' in text
    assert json.loads(text)['third'] == 1 / 3
    assert render_report(json.loads(text)) == text
