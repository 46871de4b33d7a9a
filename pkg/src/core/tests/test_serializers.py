import json
from pathlib import Path

import numpy as np
import pytest

from core.pipeline import _plain, read_file, render_report
from core.serializers import (
    GeneratorSetSerializer, InstrumentSerializer, ParseError, build, dump_game, dump_object, flatten_errors,
    load_game, load_object,
)
from robustness.errors import InvalidObject
from robustness.free_sets import FreeSetSpec
from robustness.games import DiscriminationGame, build_game
from robustness.objects import MeasurementAssemblage, StateAssemblage
from robustness.programs import robustness

FIXTURES = Path(__file__).resolve().parent.parent / 'fixtures'


def test_flatten_errors():
    detail = {
        'settings': [{}, {'effects': {1: ['Bad matrix.']}}],
        'non_field_errors': ['Top level.'],
    }
    assert list(flatten_errors(detail)) == [
        ('settings[1].effects[1]', 'Bad matrix.'),
        ('', 'Top level.'),
    ]


def test_malformed_matrix_is_a_parse_error():
    with pytest.raises(ParseError) as excinfo:
        load_object(read_file(FIXTURES / 'malformed.json'))
    assert any(message.startswith('settings[0].effects[1]') for message in excinfo.value.messages)


def test_unknown_object():
    with pytest.raises(ParseError) as excinfo:
        load_object({'foo': 1})
    assert excinfo.value.messages[0].startswith('<root>')


def test_physics_errors_carry_the_field_path():
    with pytest.raises(InvalidObject) as excinfo:
        load_object(read_file(FIXTURES / 'bad_povm.json'))
    assert excinfo.value.field == 'settings[0].effects'


def test_dimension_mismatch_inside_a_povm():
    data = {'settings': [{'dim': 3, 'effects': [{'re': [[1.0, 0.0], [0.0, 1.0]]}]}]}
    with pytest.raises(ParseError) as excinfo:
        load_object(data)
    assert 'settings[0].effects[0]' in str(excinfo.value)


def test_load_kinds():
    assert isinstance(load_object(read_file(FIXTURES / 'xz.json')), MeasurementAssemblage)
    assert isinstance(load_object(read_file(FIXTURES / 'werner_09.json')), StateAssemblage)
    trine = load_object(read_file(FIXTURES / 'trine.json'))
    assert trine.shape == (2, 3, 1)
    state = load_object(read_file(FIXTURES / 'plus_state.json'))
    assert np.abs(state - 0.5).max() < 1e-12


def test_dump_object_reloads():
    xz = load_object(read_file(FIXTURES / 'xz.json'))
    again = load_object(json.loads(json.dumps(dump_object(xz))))
    assert np.abs(again.effects - xz.effects).max() == 0


@pytest.mark.parametrize('name', ['xz.json', 'trine.json', 'werner_09.json', 'plus_state.json'])
def test_canonical_text_is_stable(name):
    canonical = render_report(dump_object(load_object(read_file(FIXTURES / name))))
    assert render_report(dump_object(load_object(json.loads(canonical)))) == canonical


def test_generator_file():
    generators = build(GeneratorSetSerializer, read_file(FIXTURES / 'pauli_generators.json'))
    assert generators.shape == (27, 1, 3, 2, 2)


def test_generator_file_needs_one_kind():
    with pytest.raises(ParseError):
        build(GeneratorSetSerializer, {})
    with pytest.raises(ParseError) as excinfo:
        build(GeneratorSetSerializer, {
            'states': [{'re': [[1.0, 0.0], [0.0, 0.0]]}],
            'expand_relabelings': True,
        })
    assert 'expand_relabelings' in str(excinfo.value)


def test_instrument_file():
    instrument = build(InstrumentSerializer, read_file(FIXTURES / 'phase_instrument.json'))
    assert instrument.num_subchannels == 2
    assert (instrument.dim_in, instrument.dim_out) == (2, 2)


def test_game_reloads():
    xz = load_object(read_file(FIXTURES / 'xz.json'))
    game = build_game(robustness(xz, FreeSetSpec.for_object(xz, 'jm')))
    data = json.loads(json.dumps(_plain(dump_game(game))))
    assert data['type'] == 'discrimination'
    loaded = load_game(data)
    assert isinstance(loaded, DiscriminationGame)
    assert abs(loaded.trY - game.trY) < 1e-12
    assert np.abs(loaded.ensemble.blocks - game.ensemble.blocks).max() < 1e-12


def test_load_game_needs_a_type():
    with pytest.raises(ParseError) as excinfo:
        load_game({'trY': 1.0})
    assert excinfo.value.messages[0].startswith('type')
