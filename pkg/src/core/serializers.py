"""
File format of the command-line tools.

Every object is a JSON-compatible structure; complex matrices are written
as {"re": [[...]], "im": [[...]]}. Serializers check the structure, the
library constructors check the physics.
"""
import numpy as np
from rest_framework import serializers
from rest_framework.settings import api_settings

from robustness.channels import Instrument
from robustness.free_sets import ObjectClass, expand_generators_postprocessing
from robustness.games import DiscriminationGame, SubchannelGame
from robustness.objects import (
    MeasurementAssemblage, PartitionedEnsemble, Povm, StateAssemblage, density_matrix
)
from robustness.programs import Witness


class ParseError(Exception):
    """A file does not have the expected structure"""

    def __init__(self, detail):
        self.messages = [f'{path or "<root>"}: {message}' for path, message in flatten_errors(detail)]
        super().__init__('; '.join(self.messages))


def flatten_errors(detail, path=''):
    """Turn nested serializer errors into (path.to[index].field, message) pairs"""
    if isinstance(detail, dict):
        for key, value in detail.items():
            if key == api_settings.NON_FIELD_ERRORS_KEY:
                child = path
            elif isinstance(key, int):
                child = f'{path}[{key}]'
            else:
                child = f'{path}.{key}' if path else str(key)
            yield from flatten_errors(value, child)
    elif isinstance(detail, list):
        if all(isinstance(item, str) for item in detail):
            for item in detail:
                yield path, str(item)
        else:
            for index, item in enumerate(detail):
                yield from flatten_errors(item, f'{path}[{index}]')
    else:
        yield path, str(detail)


class MatrixField(serializers.Field):
    """Square complex matrix; "im" defaults to zero"""
    default_error_messages = {
        'invalid': 'Expected an object with a "re" list and an optional "im" list.',
        'not_numeric': 'Matrix entries must be numbers in rectangular rows.',
        'not_square': 'Expected a non-empty square matrix, got shape {shape}.',
        'mismatch': '"re" has shape {re} but "im" has shape {im}.',
    }

    def to_internal_value(self, data):
        if not isinstance(data, dict) or 're' not in data:
            self.fail('invalid')
        try:
            re = np.asarray(data['re'], dtype=float)
            im = np.asarray(data['im'], dtype=float) if 'im' in data else np.zeros_like(re)
        except (TypeError, ValueError):
            self.fail('not_numeric')
        if re.ndim != 2 or re.shape[0] != re.shape[1] or re.shape[0] < 1:
            self.fail('not_square', shape=re.shape)
        if im.shape != re.shape:
            self.fail('mismatch', re=re.shape, im=im.shape)
        return re + 1j * im

    def to_representation(self, value):
        matrix = np.asarray(value, dtype=complex)
        return {'re': matrix.real.tolist(), 'im': matrix.imag.tolist()}


class EnumChoiceField(serializers.ChoiceField):
    """Choice among the values of an Enum, read back as members"""

    def __init__(self, enum, members=None, **kwargs):
        self.enum = enum
        super().__init__(choices=[member.value for member in (members or enum)], **kwargs)

    def to_internal_value(self, data):
        return self.enum(super().to_internal_value(data))

    def to_representation(self, value):
        return self.enum(value).value


def _matrix_rows():
    return serializers.ListField(child=serializers.ListField(child=MatrixField(), min_length=1), min_length=1)


def _check_dims(matrices, dim, field):
    for index, matrix in enumerate(matrices):
        if matrix.shape != (dim, dim):
            raise serializers.ValidationError(
                {field: {index: [f'Expected a {dim}x{dim} matrix, got {matrix.shape[0]}x{matrix.shape[1]}.']}}
            )


def _check_rectangular(rows, field):
    """Same number of entries in every row and one matrix size throughout"""
    width = len(rows[0])
    dim = rows[0][0].shape[0]
    for x, row in enumerate(rows):
        if len(row) != width:
            raise serializers.ValidationError({field: {x: [f'Expected {width} entries, got {len(row)}.']}})
        try:
            _check_dims(row, dim, x)
        except serializers.ValidationError as e:
            raise serializers.ValidationError({field: e.detail})
    return width, dim


class PovmSerializer(serializers.Serializer):
    """Serializer for a single POVM"""
    dim = serializers.IntegerField(min_value=1)
    effects = serializers.ListField(child=MatrixField(), min_length=1)

    def validate(self, attrs):
        _check_dims(attrs['effects'], attrs['dim'], 'effects')
        return attrs

    def create(self, validated_data, field='effects'):
        return Povm.from_effects(np.stack(validated_data['effects']), field=field)


class MeasurementAssemblageSerializer(serializers.Serializer):
    """Serializer for a collection of POVMs, one per setting"""
    settings = PovmSerializer(many=True, allow_empty=False)

    def validate(self, attrs):
        dims = {povm['dim'] for povm in attrs['settings']}
        if len(dims) != 1:
            raise serializers.ValidationError({'settings': [f'Settings act on different dimensions {sorted(dims)}.']})
        return attrs

    def create(self, validated_data, field='settings'):
        child = self.fields['settings'].child
        return MeasurementAssemblage.from_povms(
            child.create(povm, field=f'{field}[{x}].effects') for x, povm in enumerate(validated_data['settings'])
        )


class StateAssemblageSerializer(serializers.Serializer):
    """Serializer for subnormalized states sigma_{a|x}"""
    blocks = _matrix_rows()

    def validate(self, attrs):
        _check_rectangular(attrs['blocks'], 'blocks')
        return attrs

    def create(self, validated_data, field='blocks'):
        return StateAssemblage.from_blocks(np.array(validated_data['blocks']), field=field)


class EnsembleSerializer(serializers.Serializer):
    """Serializer for ensembles with prior information"""
    priors = serializers.ListField(child=serializers.FloatField(), min_length=1)
    conditionals = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    states = _matrix_rows()

    def validate(self, attrs):
        width, _ = _check_rectangular(attrs['states'], 'states')
        if len(attrs['priors']) != len(attrs['states']):
            raise serializers.ValidationError(
                {'priors': [f"Expected {len(attrs['states'])} priors, got {len(attrs['priors'])}."]}
            )
        if len(attrs['conditionals']) != len(attrs['states']):
            raise serializers.ValidationError(
                {'conditionals': [f"Expected {len(attrs['states'])} rows, got {len(attrs['conditionals'])}."]}
            )
        for x, row in enumerate(attrs['conditionals']):
            if len(row) != width:
                raise serializers.ValidationError({'conditionals': {x: [f'Expected {width} entries, got {len(row)}.']}})
        return attrs

    def create(self, validated_data):
        return PartitionedEnsemble.create(
            validated_data['priors'], validated_data['conditionals'], np.array(validated_data['states'])
        )


class StateSerializer(serializers.Serializer):
    """Serializer for a single density matrix"""
    state = MatrixField()

    def create(self, validated_data):
        return density_matrix(validated_data['state'])

    def to_representation(self, instance):
        return {'state': MatrixField().to_representation(instance)}


class InstrumentSerializer(serializers.Serializer):
    """Serializer for instruments given by Choi matrices"""
    choi = serializers.ListField(child=MatrixField(), min_length=1, source='chois')
    dim_in = serializers.IntegerField(min_value=1)
    dim_out = serializers.IntegerField(min_value=1)

    def validate(self, attrs):
        _check_dims(attrs['chois'], attrs['dim_in'] * attrs['dim_out'], 'choi')
        return attrs

    def create(self, validated_data):
        return Instrument.from_chois(
            np.stack(validated_data['chois']), validated_data['dim_in'], validated_data['dim_out']
        )


class GeneratorSetSerializer(serializers.Serializer):
    """
    Serializer for the generators of a finitely generated free set.

    Exactly one of ``measurements``, ``assemblages`` or ``states`` is given.
    ``expand_relabelings`` closes measurement generators under outcome
    relabelings.
    """
    measurements = MeasurementAssemblageSerializer(many=True, required=False, allow_empty=False)
    assemblages = StateAssemblageSerializer(many=True, required=False, allow_empty=False)
    states = serializers.ListField(child=MatrixField(), required=False, min_length=1)
    expand_relabelings = serializers.BooleanField(default=False)

    def validate(self, attrs):
        given = [name for name in ('measurements', 'assemblages', 'states') if name in attrs]
        if len(given) != 1:
            raise serializers.ValidationError('Give exactly one of "measurements", "assemblages" or "states".')
        if attrs['expand_relabelings'] and given[0] != 'measurements':
            raise serializers.ValidationError(
                {'expand_relabelings': ['Relabelings only apply to measurement generators.']}
            )
        return attrs

    def create(self, validated_data):
        if 'measurements' in validated_data:
            child = self.fields['measurements'].child
            generators = [
                child.create(item, field=f'measurements[{i}].settings')
                for i, item in enumerate(validated_data['measurements'])
            ]
            if validated_data['expand_relabelings']:
                generators = expand_generators_postprocessing(generators)
            return np.stack([g.effects for g in generators])
        if 'assemblages' in validated_data:
            child = self.fields['assemblages'].child
            return np.stack([
                child.create(item, field=f'assemblages[{i}].blocks').blocks
                for i, item in enumerate(validated_data['assemblages'])
            ])
        return np.stack([
            density_matrix(state, field=f'states[{i}]') for i, state in enumerate(validated_data['states'])
        ])


class WitnessSerializer(serializers.Serializer):
    """Serializer for robustness witnesses"""
    object_class = EnumChoiceField(ObjectClass)
    blocks = _matrix_rows()
    normalization = serializers.FloatField(read_only=True)

    def validate(self, attrs):
        _check_rectangular(attrs['blocks'], 'blocks')
        return attrs

    def create(self, validated_data):
        return Witness(np.array(validated_data['blocks']), validated_data['object_class'])


class DiscriminationGameSerializer(serializers.Serializer):
    """Serializer for state discrimination games with prior information"""
    ensemble = EnsembleSerializer()
    trY = serializers.FloatField()

    def create(self, validated_data):
        ensemble = self.fields['ensemble'].create(validated_data['ensemble'])
        return DiscriminationGame(ensemble, validated_data['trY'])


class SubchannelGameSerializer(serializers.Serializer):
    """Serializer for subchannel discrimination games"""
    instrument = InstrumentSerializer()
    povm = PovmSerializer()
    alpha = serializers.FloatField()
    input_class = EnumChoiceField(ObjectClass, [ObjectClass.STATE_ASSEMBLAGE, ObjectClass.STATE_ENSEMBLE])

    def create(self, validated_data):
        return SubchannelGame(
            instrument=self.fields['instrument'].create(validated_data['instrument']),
            povm=self.fields['povm'].create(validated_data['povm'], field='povm.effects'),
            alpha=validated_data['alpha'],
            input_class=validated_data['input_class'],
        )


GAME_SERIALIZERS = {
    'discrimination': (DiscriminationGame, DiscriminationGameSerializer),
    'subchannel': (SubchannelGame, SubchannelGameSerializer),
}

# top-level key of a file -> the serializer that reads it
OBJECT_SERIALIZERS = (
    ('settings', MeasurementAssemblageSerializer),
    ('blocks', StateAssemblageSerializer),
    ('priors', EnsembleSerializer),
    ('effects', PovmSerializer),
    ('state', StateSerializer),
)


def build(serializer_class, data):
    """Validate ``data`` and construct the library object it describes"""
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise ParseError(serializer.errors)
    return serializer.save()


def load_object(data):
    """Measurement assemblage, state assemblage, ensemble or single state from file data"""
    if isinstance(data, dict):
        for key, serializer_class in OBJECT_SERIALIZERS:
            if key in data:
                obj = build(serializer_class, data)
                if isinstance(obj, Povm):
                    return MeasurementAssemblage.from_povms([obj])
                return obj
    raise ParseError({api_settings.NON_FIELD_ERRORS_KEY: [
        'Unrecognized object: expected one of the keys ' + ', '.join(f'"{key}"' for key, _ in OBJECT_SERIALIZERS) + '.'
    ]})


def load_game(data):
    if not isinstance(data, dict) or data.get('type') not in GAME_SERIALIZERS:
        raise ParseError({'type': [f'Expected one of {sorted(GAME_SERIALIZERS)}.']})
    _, serializer_class = GAME_SERIALIZERS[data['type']]
    return build(serializer_class, {key: value for key, value in data.items() if key != 'type'})


def dump_object(obj):
    if isinstance(obj, MeasurementAssemblage):
        return dict(MeasurementAssemblageSerializer(obj).data)
    if isinstance(obj, StateAssemblage):
        return dict(StateAssemblageSerializer(obj).data)
    if isinstance(obj, PartitionedEnsemble):
        return dict(EnsembleSerializer(obj).data)
    if isinstance(obj, Povm):
        return dict(PovmSerializer(obj).data)
    return StateSerializer(obj).data


def dump_game(game):
    for name, (game_class, serializer_class) in GAME_SERIALIZERS.items():
        if isinstance(game, game_class):
            return {'type': name, **serializer_class(game).data}
    raise TypeError(f"cannot serialize {type(game).__name__}")


def dump_witness(witness):
    return dict(WitnessSerializer(witness).data)
