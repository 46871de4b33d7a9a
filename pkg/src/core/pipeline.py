"""
Command pipelines: read input files, run the library, write reports.
"""
import json
import logging
import os
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path

import numpy as np
import yaml
from django.conf import settings

from robustness.channels import ensemble_from_instrument, identity_instrument, phase_instrument
from robustness.conf import setting
from robustness.errors import (
    DimensionMismatch, InvalidObject, InvalidSize, KindMismatch, NotInImage, ShapeMismatch, SizeOverflow,
    SlaterFailure, SolverFailure, UnsupportedForm, ZeroWitness,
)
from robustness.free_sets import FreeSetKind, FreeSetSpec, ObjectClass, object_class_of
from robustness.games import DiscriminationGame, build_game, game_weights, max_psucc_free, success_probability, verify_ratio
from robustness.objects import PartitionedEnsemble
from robustness.programs import robustness

from .serializers import (
    GeneratorSetSerializer, InstrumentSerializer, ParseError, build, dump_game, dump_object, dump_witness,
    load_game, load_object,
)

logger = logging.getLogger('robustness')

COMMANDS = ('validate', 'robustness', 'witness', 'game', 'verify', 'maxfree')
FORMATS = ('json', 'yaml')

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_IO = 3

DEFAULT_FREE_SETS = {
    ObjectClass.MEASUREMENT: FreeSetKind.JOINTLY_MEASURABLE,
    ObjectClass.STATE_ASSEMBLAGE: FreeSetKind.LOCAL_HIDDEN_STATE,
    ObjectClass.STATE_ENSEMBLE: FreeSetKind.INCOHERENT_DIAGONAL,
}


class ConfigurationError(ValueError):
    """A run configuration is inconsistent"""


IO_ERRORS = (OSError, ParseError, json.JSONDecodeError, yaml.YAMLError)
VALIDATION_ERRORS = (
    InvalidObject, DimensionMismatch, ShapeMismatch, InvalidSize, KindMismatch, NotInImage, SizeOverflow,
    ConfigurationError,
)
SOLVER_ERRORS = (SlaterFailure, SolverFailure, UnsupportedForm, ZeroWitness)


def exit_code_for(error):
    if isinstance(error, IO_ERRORS):
        return EXIT_IO
    if isinstance(error, VALIDATION_ERRORS):
        return EXIT_VALIDATION
    if isinstance(error, SOLVER_ERRORS):
        return EXIT_SOLVER
    return None


def read_file(path):
    """JSON or YAML document, chosen by suffix"""
    with open(path, 'r') as f:
        if Path(path).suffix in ('.yaml', '.yml'):
            return yaml.safe_load(f)
        return json.load(f)


@dataclass
class RunConfig:
    command: str
    input: str
    free_set: str = None
    generators: str = None
    instrument: str = None
    phases: int = None
    tol_feas: float = None
    tol_gap: float = None
    tol_membership: float = None
    output: str = None
    seed: int = 0
    samples: int = 200
    format: str = 'json'
    debug_solver: bool = False

    @classmethod
    def from_options(cls, command, options):
        """
        Merge a YAML run configuration with command-line options.

        Options that were given override the file, the file overrides the
        defaults.
        """
        names = {f.name for f in fields(cls)} - {'command'}
        values = {}
        if options.get('config'):
            loaded = read_file(options['config']) or {}
            if not isinstance(loaded, dict):
                raise ConfigurationError(f"run configuration {options['config']} is not a mapping")
            for key, value in loaded.items():
                key = str(key).replace('-', '_')
                if key not in names:
                    raise ConfigurationError(f"unknown run configuration key {key!r}")
                values[key] = value
        values.update({key: value for key, value in options.items() if key in names and value is not None})
        if 'input' not in values:
            raise ConfigurationError("no input file given")

        config = cls(command=command, **values)
        config.validate()
        return config

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        for name in ('tol_feas', 'tol_gap', 'tol_membership'):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if self.format not in FORMATS:
            raise ConfigurationError(f"unknown report format {self.format!r}")
        if self.samples < 0:
            raise ConfigurationError(f"samples must be nonnegative, got {self.samples}")
        if self.phases is not None and self.phases < 2:
            raise ConfigurationError(f"phases must be at least 2, got {self.phases}")
        if self.instrument and self.phases:
            raise ConfigurationError("give either an instrument file or a phase count, not both")
        kind, path = self.selector
        if kind == FreeSetKind.FINITELY_GENERATED and not path:
            raise ConfigurationError("the generated free set needs a generator file")
        if path and kind != FreeSetKind.FINITELY_GENERATED:
            raise ConfigurationError(f"generators were given for the {kind.value} free set")

    @property
    def selector(self):
        """(FreeSetKind or None, generator path or None)"""
        if not self.free_set:
            return (FreeSetKind.FINITELY_GENERATED if self.generators else None), self.generators
        name, _, path = self.free_set.partition(':')
        try:
            kind = FreeSetKind(name)
        except ValueError:
            choices = ', '.join(k.value for k in FreeSetKind)
            raise ConfigurationError(f"unknown free set {name!r} (expected one of {choices})")
        return kind, (path or self.generators)

    @property
    def solver_options(self):
        return {'tol_feas': self.tol_feas, 'tol_gap': self.tol_gap, 'verbose': bool(self.debug_solver)}

    @property
    def tolerances(self):
        return {
            'feas': self.tol_feas or setting('ROBUSTNESS_TOL_FEAS'),
            'gap': self.tol_gap or setting('ROBUSTNESS_TOL_GAP'),
            'membership': self.tol_membership or setting('ROBUSTNESS_TOL_MEMBERSHIP'),
        }

    @property
    def output_path(self):
        if self.output:
            return self.output
        return os.path.join(settings.REPORT_DIR, f'{self.command}-{Path(self.input).stem}.{self.format}')


def _plain(value):
    """Built-in types only; non-finite floats become null"""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def format_float(value):
    """17 significant digits, always with a fraction or exponent"""
    text = '%.17g' % value
    return text if any(c in text for c in '.e') else text + '.0'


def _json_text(value, level=0):
    indent = '  ' * (level + 1)
    if isinstance(value, dict):
        if not value:
            return '{}'
        items = [f'{indent}{json.dumps(key)}: {_json_text(value[key], level + 1)}' for key in sorted(value)]
        return '{\n' + ',\n'.join(items) + '\n' + '  ' * level + '}'
    if isinstance(value, list):
        if not value:
            return '[]'
        items = [indent + _json_text(item, level + 1) for item in value]
        return '[\n' + ',\n'.join(items) + '\n' + '  ' * level + ']'
    if isinstance(value, float):
        return format_float(value)
    return json.dumps(value)


def render_report(report, fmt='json'):
    """Canonical text of a report: sorted keys, two-space indent, floats to 17 significant digits"""
    plain = _plain(report)
    if fmt == 'yaml':
        return yaml.safe_dump(plain, sort_keys=True, default_flow_style=False)
    return _json_text(plain) + '\n'


def write_report(report, path, fmt='json'):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        f.write(render_report(report, fmt))
    logger.info(f"Report written to {path}")


class PipelineExecutor:
    """Runs one command of the front end and returns its report"""

    def run(self, config):
        if config.debug_solver:
            logging.getLogger('robustness').setLevel(logging.DEBUG)
        logger.info(f"Running {config.command} on {config.input}")

        report = {'command': config.command, 'input': Path(config.input).name, 'tolerances': config.tolerances}
        data = read_file(config.input)
        if config.command == 'maxfree' and isinstance(data, dict) and 'type' in data:
            report.update(self._replay(config, load_game(data)))
            return report

        raw = load_object(data)
        instrument = self._load_instrument(config, raw)
        if config.command == 'validate':
            report.update(self._validate(config, raw))
            return report

        obj, instrument = self._prepare(raw, instrument)
        handler = getattr(self, f'_{config.command}')
        report.update(handler(config, obj, instrument))
        return report

    def _prepare(self, obj, instrument):
        """States and ensembles always travel with the instrument that prepares them"""
        if isinstance(obj, np.ndarray):
            instrument = instrument or identity_instrument(obj.shape[0])
            return ensemble_from_instrument(instrument, obj), instrument
        if isinstance(obj, PartitionedEnsemble) and instrument is None:
            if obj.num_settings != 1 or obj.num_outcomes != 1:
                raise ConfigurationError("an ensemble of several states needs --instrument or --phases")
            instrument = identity_instrument(obj.dim)
        return obj, instrument

    def _load_instrument(self, config, obj):
        if not (config.instrument or config.phases):
            return None
        if not isinstance(obj, (np.ndarray, PartitionedEnsemble)):
            raise ConfigurationError("instruments apply to states and ensembles only")
        if config.instrument:
            instrument = build(InstrumentSerializer, read_file(config.instrument))
            logger.info(f"Loaded instrument with {instrument.num_subchannels} subchannels from {config.instrument}")
            return instrument
        dim = obj.shape[0] if isinstance(obj, np.ndarray) else obj.dim
        return phase_instrument(dim, config.phases)

    def _free_set(self, config, obj):
        kind, path = config.selector
        if kind is None:
            kind = DEFAULT_FREE_SETS[object_class_of(obj)]
        generators = None
        if path:
            generators = build(GeneratorSetSerializer, read_file(path))
            logger.info(f"Loaded {len(generators)} generators from {path}")
        return FreeSetSpec.for_object(obj, kind, generators)

    def _solve(self, config, obj, instrument):
        spec = self._free_set(config, obj)
        result = robustness(obj, spec, instrument=instrument, **config.solver_options)
        return spec, result

    def _summary(self, config, spec, result):
        diagnostics = result.diagnostics
        summary = {
            'object_class': result.object_class.value,
            'free_set': spec.kind.value,
            'shape': list(spec.shape),
            't': result.t,
            'one_plus_r': result.one_plus_r,
            'primal_value': result.primal_value,
            'dual_value': result.dual_value,
            'gap': diagnostics['gap'],
            'residuals': diagnostics['residuals'],
            'status': diagnostics['status'],
            'solver': diagnostics['solver'],
            'iterations': diagnostics['iterations'],
            'slater': {'margin': diagnostics['slater_margin'], 'scale': diagnostics['slater_scale']},
            'free': result.t <= config.tolerances['membership'],
        }
        for key in ('proportionality_residual', 'noise_input_psd'):
            if key in diagnostics:
                summary[key] = diagnostics[key]
        return summary

    def _validate(self, config, obj):
        report = {
            'object_class': object_class_of(obj).value,
            'shape': list(obj.shape) if not isinstance(obj, np.ndarray) else [obj.shape[0], 1, 1],
            'valid': True,
            'object': dump_object(obj),
        }
        if config.free_set or config.generators:
            spec = self._free_set(config, obj)
            report['free_set'] = spec.kind.value
        logger.info(f"Validated {report['object_class']} of shape {report['shape']}")
        return report

    def _robustness(self, config, obj, instrument):
        spec, result = self._solve(config, obj, instrument)
        return self._summary(config, spec, result)

    def _witness(self, config, obj, instrument):
        spec, result = self._solve(config, obj, instrument)
        report = self._summary(config, spec, result)
        report['witness'] = dump_witness(result.witness)
        return report

    def _game(self, config, obj, instrument):
        spec, result = self._solve(config, obj, instrument)
        game = build_game(result, instrument)
        numerator = success_probability(game, obj)
        denominator = max_psucc_free(game, spec, instrument)
        report = self._summary(config, spec, result)
        report.update({
            'game': dump_game(game),
            'success_probability': numerator,
            'max_free_success_probability': denominator,
            'ratio': numerator / denominator,
        })
        return report

    def _verify(self, config, obj, instrument):
        spec = self._free_set(config, obj)
        rng = np.random.default_rng(config.seed)
        verification = verify_ratio(
            obj, spec, instrument=instrument, rng=rng, samples=config.samples, **config.solver_options
        )
        report = self._summary(config, spec, verification.result)
        report.update({
            'ratio': verification.ratio,
            'discrepancy': verification.discrepancy,
            'success_probability': verification.numerator,
            'max_free_success_probability': verification.denominator,
            'witness_bound': verification.witness_bound,
            'samples': config.samples,
            'seed': config.seed,
            'passed': verification.passed,
        })
        return report

    def _maxfree(self, config, obj, instrument):
        spec, result = self._solve(config, obj, instrument)
        game = build_game(result, instrument)
        report = self._summary(config, spec, result)
        report['max_free_success_probability'] = max_psucc_free(game, spec, instrument)
        return report

    def _replay(self, config, game):
        """Free maximum of a game read from a file"""
        weights = game_weights(game)
        shape = (weights.shape[-1], weights.shape[1], weights.shape[0])
        object_class = ObjectClass.MEASUREMENT if isinstance(game, DiscriminationGame) else game.input_class
        kind, path = config.selector
        kind = kind or DEFAULT_FREE_SETS[object_class]
        generators = build(GeneratorSetSerializer, read_file(path)) if path else None
        spec = FreeSetSpec(kind, object_class, shape, generators)
        instrument = None if isinstance(game, DiscriminationGame) else game.instrument
        value = max_psucc_free(game, spec, instrument)
        logger.info(f"Free maximum {value:.12g} for a replayed {object_class.value} game")
        return {
            'object_class': object_class.value,
            'free_set': kind.value,
            'shape': list(shape),
            'max_free_success_probability': value,
        }
