"""
Robustness programs and their witnesses.

Every program minimizes the normalized trace of an element of the free cone
that dominates the object blockwise. The optimum is 1 + t and the
multipliers of the domination rows form the witness Y.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .channels import ensemble_from_instrument, identity_instrument
from .conf import setting
from .conic import ConicProgram, ConeSpec, LinearMap, PsdBlock, Row, Status, check_slater, solve
from .errors import (
    KindMismatch, NotInImage, ShapeMismatch, SlaterFailure, SolverFailure
)
from .free_sets import FreeSetKind, ObjectClass, cone_constraints
from .hermitian import hermitian_basis, hvec, unhvec, is_psd, min_eigenvalue, project_psd
from .objects import (
    MeasurementAssemblage, PartitionedEnsemble, StateAssemblage, enumerate_postprocessings
)

logger = logging.getLogger('robustness')

# Below this the noise part is not reconstructed
NOISE_THRESHOLD = 1e-9


@dataclass(frozen=True, eq=False)
class Witness:
    """Dual blocks Y^{a|x}, shape (|x|, |a|, d, d)"""
    blocks: np.ndarray
    object_class: ObjectClass

    @property
    def normalization(self):
        """trY = sum_{a,x} tr Y^{a|x}"""
        return float(np.real(np.einsum('xaii->', self.blocks)))

    def pairing(self, blocks):
        """sum_{a,x} tr[T_{a|x} Y^{a|x}]"""
        return float(np.real(np.einsum('xaij,xaji->', np.asarray(blocks), self.blocks)))

    def scaled(self, factor):
        return Witness(factor * self.blocks, self.object_class)


@dataclass(frozen=True, eq=False)
class RobustnessResult:
    t: float
    free_part: np.ndarray
    noise_part: np.ndarray
    witness: Witness
    primal_value: float
    dual_value: float
    object_class: ObjectClass
    diagnostics: dict = field(default_factory=dict)

    @property
    def one_plus_r(self):
        return 1.0 + self.t


def _object_rows(blocks, encoding):
    rows = []
    for x, a in np.ndindex(blocks.shape[0], blocks.shape[1]):
        rows.append(Row(
            maps=tuple((k, -linear_map) for k, linear_map in encoding.identification[x][a]),
            bound=-np.asarray(blocks[x, a], dtype=complex),
            label=f'object[{x}][{a}]',
        ))
    return rows


def robustness_program(blocks, encoding):
    """min norm * sum tr[blocks(X)] s.t. blocks(X) >= object blockwise, X in C_F"""
    return ConicProgram(
        objective=tuple(encoding.trace_weights()),
        cone=encoding.cone,
        rows=tuple(_object_rows(blocks, encoding)) + encoding.equalities,
        sense='min',
        seed=encoding.seed,
    )


def _solve_checked(program, tol_feas=None, tol_gap=None, verbose=False):
    diagnosis = check_slater(program, tol_feas)
    if not diagnosis.strictly_feasible:
        logger.error(f"No strictly feasible point: {diagnosis.reason}")
        raise SlaterFailure(f"Slater's condition could not be verified: {diagnosis.reason}", diagnosis)

    solution = solve(program, tol_feas=tol_feas, tol_gap=tol_gap, verbose=verbose)
    if solution.status != Status.OPTIMAL:
        logger.error(f"Robustness program ended with status {solution.status.value}")
        raise SolverFailure(f"robustness program ended with status {solution.status.value}", solution)
    return solution, diagnosis


def _package(blocks, completed, solution, diagnosis, object_class, extra=None):
    """Split the optimum into t, free part, noise part and witness"""
    raw = solution.value - 1.0
    tol = setting('ROBUSTNESS_TOL_GAP') * (1.0 + abs(solution.value))
    if raw < -tol:
        logger.warning(f"Robustness optimum {solution.value:.12g} is below 1 beyond tolerance")
    t = max(raw, 0.0)

    free_part = completed / (1.0 + t)
    noise_part = None
    if t > NOISE_THRESHOLD:
        noise_part = (completed - blocks) / t
        noise_part = (noise_part + np.conj(np.swapaxes(noise_part, -1, -2))) / 2

    count = blocks.shape[0] * blocks.shape[1]
    # multipliers of the domination rows, clipped to the PSD cone
    dual_blocks = project_psd(np.stack(solution.dual[:count]).reshape(blocks.shape))
    diagnostics = {
        'status': solution.status.value,
        'gap': solution.gap,
        'residuals': dict(solution.residuals),
        'iterations': solution.iterations,
        'solver': solution.solver,
        'slater_margin': diagnosis.margin,
        'slater_scale': diagnosis.scale,
    }
    diagnostics.update(extra or {})
    logger.info(f"Robustness {t:.12g} ({object_class.value})")
    return RobustnessResult(
        t=t,
        free_part=free_part,
        noise_part=noise_part,
        witness=Witness(dual_blocks, object_class),
        primal_value=solution.value,
        dual_value=solution.dual_value,
        object_class=object_class,
        diagnostics=diagnostics,
    )


def _representation(encoding, solution, scale):
    """The defining representation of the free part"""
    kind = encoding.spec.kind
    if kind == FreeSetKind.FINITELY_GENERATED or encoding.spec.object_class == ObjectClass.STATE_ENSEMBLE:
        coefficients = solution.coefficients.get(0, np.zeros(0))
        return {'coefficients': coefficients / scale}
    if kind == FreeSetKind.LOCAL_HIDDEN_STATE:
        return {'hidden_states': np.stack(solution.primal) / scale, 'labels': list(encoding.labels)}
    return {'joint_observable': np.stack(solution.primal) / scale, 'labels': list(encoding.labels)}


def incompatibility_robustness(meas, tol_feas=None, tol_gap=None, verbose=False):
    """
    Incompatibility robustness with the parent POVM written explicitly.

    Variables are X_lambda = G~_lambda / d; the program is
    min tr[sum X] s.t. d sum_lambda D(a|x,lambda) X_lambda >= M_{a|x} and
    1 tr[sum X] - d sum_lambda X_lambda = 0.
    """
    dim, num_outcomes, num_settings = meas.shape
    postprocessings = enumerate_postprocessings(num_outcomes, num_settings)
    count = len(postprocessings)
    logger.debug(f"Incompatibility program with {count} parent effects of dimension {dim}")

    scaled = LinearMap.identity(dim, -float(dim))
    rows = []
    for x, a in np.ndindex(num_settings, num_outcomes):
        rows.append(Row(
            maps=tuple((k, scaled) for k, pp in enumerate(postprocessings) if pp(x) == a),
            bound=-np.asarray(meas.effects[x, a], dtype=complex),
            label=f'object[{x}][{a}]',
        ))
    proportionality = LinearMap.trace_to_identity(dim, dim) + LinearMap.identity(dim, -float(dim))
    rows.append(Row(
        maps=tuple((k, proportionality) for k in range(count)),
        bound=np.zeros((dim, dim), dtype=complex),
        equality=True,
        label='proportionality',
    ))
    program = ConicProgram(
        objective=tuple(np.eye(dim, dtype=complex) for _ in range(count)),
        cone=ConeSpec(tuple(PsdBlock(dim) for _ in range(count))),
        rows=tuple(rows),
        sense='min',
        seed=tuple(np.eye(dim, dtype=complex) / count for _ in range(count)),
    )
    solution, diagnosis = _solve_checked(program, tol_feas, tol_gap, verbose)

    scale = max(solution.value, 1.0)
    joint = dim * np.stack(solution.primal)
    completed = np.zeros(meas.effects.shape, dtype=complex)
    for k, pp in enumerate(postprocessings):
        for x, a in enumerate(pp.assignment):
            completed[x, a] += joint[k]
    total = joint.sum(axis=0)
    extra = {
        'joint_observable': joint / scale,
        'labels': [pp.assignment for pp in postprocessings],
        'proportionality_residual': float(np.max(np.abs(total - np.trace(total).real / dim * np.eye(dim)))),
    }
    return _package(
        np.asarray(meas.effects), completed, solution, diagnosis, ObjectClass.MEASUREMENT, extra
    )


def _generalized(obj, blocks, spec, object_class, instrument=None, tol_feas=None, tol_gap=None, verbose=False):
    if spec.object_class != object_class:
        raise KindMismatch(f"free set for {spec.object_class.value} applied to a {object_class.value}")
    if tuple(spec.shape) != tuple(obj.shape):
        raise ShapeMismatch(f"free set of shape {spec.shape} for an object of shape {obj.shape}")
    encoding = cone_constraints(spec, instrument)
    program = robustness_program(blocks, encoding)
    logger.debug(f"{spec.kind.value} program with {len(encoding.cone.factors)} cone factors")
    solution, diagnosis = _solve_checked(program, tol_feas, tol_gap, verbose)
    completed = encoding.blocks(solution.primal)
    extra = _representation(encoding, solution, max(solution.value, 1.0))
    return _package(np.asarray(blocks), completed, solution, diagnosis, object_class, extra), encoding, solution


def generalized_measurement_robustness(meas, spec, **options):
    result, _, _ = _generalized(meas, meas.effects, spec, ObjectClass.MEASUREMENT, **options)
    return result


def assemblage_robustness(asm, spec, **options):
    result, _, _ = _generalized(asm, asm.blocks, spec, ObjectClass.STATE_ASSEMBLAGE, **options)
    return result


def _preimage(instrument, blocks, tol):
    """The input state rho with Lambda_a(rho) = blocks[a], or NotInImage"""
    basis = hermitian_basis(instrument.dim_in)
    columns = np.stack([
        hvec(np.stack([instrument.apply(a, element) for a in range(instrument.num_subchannels)])).reshape(-1)
        for element in basis
    ], axis=1)
    target = hvec(np.asarray(blocks)).reshape(-1)
    coordinates, _, _, _ = scipy.linalg.lstsq(columns, target)
    residual = np.linalg.norm(columns @ coordinates - target)
    if residual > tol * (1.0 + np.linalg.norm(target)):
        raise NotInImage(f"ensemble is not prepared by the instrument (residual {residual:.3e})")
    rho = unhvec(coordinates, instrument.dim_in)
    if not is_psd(rho, tol) or abs(np.trace(rho).real - 1.0) > tol:
        raise NotInImage("the only preimage under the instrument is not a state")
    return rho


def ensemble_robustness(ens, instrument, spec, **options):
    """
    Robustness of an ensemble {Lambda_a(rho)} prepared by an instrument.

    The free cone is restricted to the instrument's image: one free input
    ṽ with Lambda_a(ṽ) >= rho_a for every a. The noise is the ensemble
    prepared from the single input w = (ṽ - rho) / t.
    """
    if ens.num_settings != 1:
        raise ShapeMismatch(f"ensemble robustness needs a single setting, got {ens.num_settings}")
    if instrument.num_subchannels != ens.num_outcomes or instrument.dim_out != ens.dim:
        raise ShapeMismatch(
            f"instrument with {instrument.num_subchannels} subchannels into dimension {instrument.dim_out} "
            f"for an ensemble of {ens.num_outcomes} states of dimension {ens.dim}"
        )
    rho = _preimage(instrument, ens.blocks[0], setting('ROBUSTNESS_TOL_MEMBERSHIP'))

    result, encoding, solution = _generalized(
        ens, ens.blocks, spec, ObjectClass.STATE_ENSEMBLE, instrument=instrument, **options
    )
    dominating = solution.primal[0]
    extra = {'preimage': rho}
    if result.t > NOISE_THRESHOLD:
        noise_input = (dominating - rho) / result.t
        extra['noise_input'] = noise_input
        extra['noise_input_psd'] = bool(is_psd(noise_input, 1e-6))
        if not extra['noise_input_psd']:
            logger.warning(f"Noise input has eigenvalue {min_eigenvalue(noise_input):.3e}")
    result.diagnostics.update(extra)
    return result


def state_robustness(rho, spec, **options):
    """Robustness of a single state: the ensemble under the identity instrument"""
    rho = np.asarray(rho, dtype=complex)
    instrument = identity_instrument(rho.shape[0])
    return ensemble_robustness(ensemble_from_instrument(instrument, rho), instrument, spec, **options)


def robustness(obj, spec, instrument=None, **options):
    """Dispatch on the object class"""
    if isinstance(obj, MeasurementAssemblage):
        if spec.kind == FreeSetKind.JOINTLY_MEASURABLE and spec.object_class == ObjectClass.MEASUREMENT:
            if tuple(spec.shape) != tuple(obj.shape):
                raise ShapeMismatch(f"free set of shape {spec.shape} for an object of shape {obj.shape}")
            return incompatibility_robustness(obj, **options)
        return generalized_measurement_robustness(obj, spec, **options)
    if isinstance(obj, StateAssemblage):
        return assemblage_robustness(obj, spec, **options)
    if isinstance(obj, PartitionedEnsemble):
        if instrument is None:
            if obj.num_outcomes != 1:
                raise ShapeMismatch("an ensemble with several states needs the instrument that prepared it")
            instrument = identity_instrument(obj.dim)
        return ensemble_robustness(obj, instrument, spec, **options)
    if isinstance(obj, np.ndarray):
        return state_robustness(obj, spec, **options)
    raise KindMismatch(f"no robustness is defined for {type(obj).__name__}")


