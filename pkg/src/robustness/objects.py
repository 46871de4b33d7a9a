"""
Measurements, assemblages, ensembles and their success probabilities.

Array layout is setting-major everywhere: a measurement assemblage, a state
assemblage and a partitioned ensemble all store their operators as an array
of shape (|x|, |a|, d, d), indexed [x, a].
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .conf import setting
from .errors import (
    InvalidObject, InvalidJoint, ShapeMismatch, SizeOverflow
)
from .hermitian import validate_hermitian, is_psd, eigvalsh, partial_trace, projector

logger = logging.getLogger('robustness')

# Probabilities below this are treated as exact zeros when normalizing
PROBABILITY_FLOOR = 1e-12


def _readonly(array):
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def _check_stack(operators, field, tol):
    """Validate a stack of operators as Hermitian and PSD"""
    operators = np.asarray(operators, dtype=complex)
    checked = np.empty_like(operators)
    for index in np.ndindex(operators.shape[:-2]):
        path = field + ''.join(f'[{i}]' for i in index)
        matrix = validate_hermitian(operators[index], tol, field=path)
        if not is_psd(matrix):
            raise InvalidObject(
                f"operator is not positive semidefinite (min eigenvalue {eigvalsh(matrix)[0]:.3e})",
                path
            )
        checked[index] = matrix
    return checked


def _close_to(matrix, target, tol):
    scale = 1.0 + np.max(np.abs(target))
    return np.max(np.abs(matrix - target)) <= tol * scale


@dataclass(frozen=True, eq=False)
class Povm:
    """Effects M_a summing to the identity, shape (|a|, d, d)"""
    effects: np.ndarray

    @property
    def dim(self):
        return self.effects.shape[-1]

    @property
    def num_outcomes(self):
        return self.effects.shape[0]

    @classmethod
    def from_effects(cls, effects, tol=None, field='effects'):
        tol = setting('ROBUSTNESS_TOL_HERMITIAN') * 10 if tol is None else tol
        effects = np.asarray(effects, dtype=complex)
        if effects.ndim != 3 or effects.shape[0] < 1:
            raise InvalidObject(f"expected a stack of effects, got shape {effects.shape}", field)
        effects = _check_stack(effects, field, tol)
        total = effects.sum(axis=0)
        if not _close_to(total, np.eye(effects.shape[-1]), tol):
            raise InvalidObject("effects do not sum to the identity", field)
        return cls(_readonly(effects))

    def padded(self, num_outcomes):
        """Append zero effects up to ``num_outcomes``"""
        if num_outcomes < self.num_outcomes:
            raise ShapeMismatch(f"cannot pad {self.num_outcomes} outcomes down to {num_outcomes}")
        padding = np.zeros((num_outcomes - self.num_outcomes, self.dim, self.dim), dtype=complex)
        return Povm(_readonly(np.concatenate([self.effects, padding])))


@dataclass(frozen=True, eq=False)
class MeasurementAssemblage:
    """A collection of POVMs M_{a|x}, shape (|x|, |a|, d, d)"""
    effects: np.ndarray

    @property
    def blocks(self):
        return self.effects

    @property
    def dim(self):
        return self.effects.shape[-1]

    @property
    def num_settings(self):
        return self.effects.shape[0]

    @property
    def num_outcomes(self):
        return self.effects.shape[1]

    @property
    def shape(self):
        return (self.dim, self.num_outcomes, self.num_settings)

    @property
    def settings(self):
        return [Povm(effects) for effects in self.effects]

    @classmethod
    def from_povms(cls, povms):
        """Stack POVMs into an assemblage, padding ragged outcome counts with zero effects"""
        povms = list(povms)
        if not povms:
            raise InvalidObject("an assemblage needs at least one setting", 'settings')
        dims = {povm.dim for povm in povms}
        if len(dims) != 1:
            raise InvalidObject(f"settings act on different dimensions {sorted(dims)}", 'settings')
        num_outcomes = max(povm.num_outcomes for povm in povms)
        return cls(_readonly(np.stack([povm.padded(num_outcomes).effects for povm in povms])))

    @classmethod
    def from_effects(cls, effects, tol=None, field='settings'):
        effects = np.asarray(effects, dtype=complex)
        if effects.ndim != 4:
            raise InvalidObject(f"expected shape (|x|, |a|, d, d), got {effects.shape}", field)
        return cls.from_povms(
            Povm.from_effects(effects[x], tol, field=f'{field}[{x}].effects')
            for x in range(effects.shape[0])
        )


@dataclass(frozen=True)
class DeterministicPostprocessing:
    """D(a|x, lambda) = 1 iff assignment[x] == a"""
    assignment: tuple

    def __call__(self, setting_index):
        return self.assignment[setting_index]

    def value(self, outcome, setting_index):
        return 1 if self.assignment[setting_index] == outcome else 0


def enumerate_postprocessings(num_outcomes, num_settings, cap=None):
    """All |a|^|x| deterministic assignments in lexicographic order"""
    cap = setting('ROBUSTNESS_POSTPROCESSING_CAP') if cap is None else cap
    if num_outcomes < 1 or num_settings < 1:
        raise ShapeMismatch(f"need at least one outcome and one setting, got ({num_outcomes}, {num_settings})")
    count = num_outcomes ** num_settings
    if count > cap:
        raise SizeOverflow(f"{num_outcomes}^{num_settings} = {count} post-processings exceed the cap {cap}")
    return [
        DeterministicPostprocessing(assignment)
        for assignment in itertools.product(range(num_outcomes), repeat=num_settings)
    ]


def postprocess_joint(joint, postprocessings, num_outcomes=None, tol=None):
    """Coarse-grain a joint POVM G_lambda into O_{a|x} = sum_lambda D(a|x,lambda) G_lambda"""
    tol = setting('ROBUSTNESS_TOL_HERMITIAN') * 10 if tol is None else tol
    joint = np.asarray(joint, dtype=complex)
    if len(joint) != len(postprocessings):
        raise InvalidJoint(f"{len(joint)} joint effects for {len(postprocessings)} post-processings", 'joint')
    try:
        joint = _check_stack(joint, 'joint', tol)
    except InvalidObject as e:
        raise InvalidJoint(str(e)) from e
    if not _close_to(joint.sum(axis=0), np.eye(joint.shape[-1]), tol):
        raise InvalidJoint("joint effects do not sum to the identity", 'joint')

    num_settings = len(postprocessings[0].assignment)
    if num_outcomes is None:
        num_outcomes = 1 + max(max(pp.assignment) for pp in postprocessings)

    dim = joint.shape[-1]
    effects = np.zeros((num_settings, num_outcomes, dim, dim), dtype=complex)
    for effect, pp in zip(joint, postprocessings):
        for x, a in enumerate(pp.assignment):
            effects[x, a] += effect
    return MeasurementAssemblage(_readonly(effects))


@dataclass(frozen=True, eq=False)
class PartitionedEnsemble:
    """
    States rho_{a|x} drawn with probability p(x) p(a|x).

    A plain ensemble is the single-setting case.
    """
    priors: np.ndarray
    conditionals: np.ndarray
    states: np.ndarray

    @property
    def dim(self):
        return self.states.shape[-1]

    @property
    def num_settings(self):
        return self.states.shape[0]

    @property
    def num_outcomes(self):
        return self.states.shape[1]

    @property
    def shape(self):
        return (self.dim, self.num_outcomes, self.num_settings)

    @property
    def blocks(self):
        """Subnormalized operators p(x) p(a|x) rho_{a|x}"""
        weights = self.priors[:, None] * self.conditionals
        return weights[:, :, None, None] * self.states

    @classmethod
    def create(cls, priors, conditionals, states, tol=None):
        tol = setting('ROBUSTNESS_TOL_HERMITIAN') * 10 if tol is None else tol
        priors = np.asarray(priors, dtype=float)
        conditionals = np.asarray(conditionals, dtype=float)
        states = np.asarray(states, dtype=complex)
        if states.ndim != 4 or conditionals.shape != states.shape[:2] or priors.shape != states.shape[:1]:
            raise InvalidObject(
                f"inconsistent shapes: priors {priors.shape}, conditionals {conditionals.shape}, states {states.shape}",
                'states'
            )
        if np.any(priors < -tol) or abs(priors.sum() - 1.0) > tol:
            raise InvalidObject("priors are not a probability vector", 'priors')
        for x, row in enumerate(conditionals):
            if np.any(row < -tol) or abs(row.sum() - 1.0) > tol:
                raise InvalidObject("conditionals are not a probability vector", f'conditionals[{x}]')
        states = _check_stack(states, 'states', tol)
        for index in np.ndindex(states.shape[:2]):
            trace = np.trace(states[index]).real
            if abs(trace - 1.0) > tol:
                path = 'states' + ''.join(f'[{i}]' for i in index)
                raise InvalidObject(f"state has trace {trace:.6g}, expected 1", path)
        return cls(
            np.clip(priors, 0.0, None),
            np.clip(conditionals, 0.0, None),
            _readonly(states),
        )

    @classmethod
    def from_blocks(cls, blocks):
        """
        Split subnormalized PSD blocks into p(x), p(a|x) and unit-trace states.

        Branches with probability below PROBABILITY_FLOOR get probability zero
        and carry the maximally mixed state.
        """
        blocks = np.asarray(blocks, dtype=complex)
        num_settings, num_outcomes, dim = blocks.shape[0], blocks.shape[1], blocks.shape[-1]
        traces = np.clip(np.einsum('xaii->xa', blocks).real, 0.0, None)
        traces[traces < PROBABILITY_FLOOR] = 0.0
        total = traces.sum()
        if total <= 0:
            raise InvalidObject("all blocks vanish", 'blocks')

        per_setting = traces.sum(axis=1)
        priors = per_setting / total
        conditionals = np.zeros_like(traces)
        states = np.empty_like(blocks)
        for x in range(num_settings):
            if per_setting[x] > 0:
                conditionals[x] = traces[x] / per_setting[x]
            else:
                conditionals[x] = 1.0 / num_outcomes
            for a in range(num_outcomes):
                if traces[x, a] > 0:
                    state = blocks[x, a] / traces[x, a]
                    states[x, a] = (state + state.conj().T) / 2
                else:
                    states[x, a] = np.eye(dim) / dim
        return cls(priors, conditionals, _readonly(states))


@dataclass(frozen=True, eq=False)
class StateAssemblage:
    """Subnormalized states sigma_{a|x} with a common marginal, shape (|x|, |a|, d, d)"""
    blocks: np.ndarray

    @property
    def dim(self):
        return self.blocks.shape[-1]

    @property
    def num_settings(self):
        return self.blocks.shape[0]

    @property
    def num_outcomes(self):
        return self.blocks.shape[1]

    @property
    def shape(self):
        return (self.dim, self.num_outcomes, self.num_settings)

    @property
    def marginal(self):
        return self.blocks[0].sum(axis=0)

    @classmethod
    def from_blocks(cls, blocks, tol=None, field='blocks'):
        tol = setting('ROBUSTNESS_TOL_HERMITIAN') * 10 if tol is None else tol
        blocks = np.asarray(blocks, dtype=complex)
        if blocks.ndim != 4:
            raise InvalidObject(f"expected shape (|x|, |a|, d, d), got {blocks.shape}", field)
        blocks = _check_stack(blocks, field, tol)
        marginal = blocks[0].sum(axis=0)
        trace = np.trace(marginal).real
        if abs(trace - 1.0) > tol:
            raise InvalidObject(f"marginal has trace {trace:.6g}, expected 1", f'{field}[0]')
        for x in range(1, blocks.shape[0]):
            if not _close_to(blocks[x].sum(axis=0), marginal, tol):
                raise InvalidObject("marginal differs from setting 0 (signalling)", f'{field}[{x}]')
        return cls(_readonly(blocks))


def density_matrix(rho, tol=None, field='state'):
    """Validate a unit-trace positive semidefinite matrix"""
    tol = setting('ROBUSTNESS_TOL_HERMITIAN') * 10 if tol is None else tol
    rho = validate_hermitian(rho, tol, field=field)
    if not is_psd(rho):
        raise InvalidObject(f"state is not positive semidefinite (min eigenvalue {eigvalsh(rho)[0]:.3e})", field)
    trace = np.trace(rho).real
    if abs(trace - 1.0) > tol:
        raise InvalidObject(f"state has trace {trace:.6g}, expected 1", field)
    return _readonly(rho)


def p_guess_prior(game, meas):
    """Success probability sum_{a,x} p(x) p(a|x) tr[M_{a|x} rho_{a|x}]"""
    blocks = game.blocks
    effects = meas.effects
    if blocks.shape != effects.shape:
        raise ShapeMismatch(f"ensemble of shape {blocks.shape} against measurements of shape {effects.shape}")
    # outcome a is the guess for label a
    return float(np.real(np.einsum('xaij,xaji->', blocks, effects)))


def optimal_guessing_probability(game):
    """
    Best success probability over all measurement assemblages.

    With prior information every setting gets its own POVM, so this is one
    minimum-error discrimination program per setting, solved jointly.
    """
    from .conic import ConicProgram, ConeSpec, PsdBlock, Row, LinearMap, solve, Status

    blocks = game.blocks
    num_settings, num_outcomes, dim = blocks.shape[0], blocks.shape[1], blocks.shape[-1]
    factors = [PsdBlock(dim) for _ in range(num_settings * num_outcomes)]
    objective = [blocks[x, a] for x in range(num_settings) for a in range(num_outcomes)]
    rows = [
        Row(
            maps=tuple((x * num_outcomes + a, LinearMap.identity(dim)) for a in range(num_outcomes)),
            bound=np.eye(dim),
            equality=True,
            label=f'normalization[{x}]',
        )
        for x in range(num_settings)
    ]
    program = ConicProgram(
        objective=tuple(objective), cone=ConeSpec(tuple(factors)), rows=tuple(rows), sense='max'
    )
    solution = solve(program)
    if solution.status != Status.OPTIMAL:
        from .errors import SolverFailure
        raise SolverFailure(f"guessing program ended with status {solution.status.value}", solution)
    return solution.value


def assemblage_from_state(state, meas):
    """Bob's assemblage sigma_{a|x} = tr_A[(M_{a|x} x 1) rho_AB] for Alice's measurements"""
    state = np.asarray(state, dtype=complex)
    dim_a = meas.dim
    if state.shape[0] % dim_a:
        raise ShapeMismatch(f"state of dimension {state.shape[0]} does not factor with d_A = {dim_a}")
    dim_b = state.shape[0] // dim_a
    blocks = np.empty((meas.num_settings, meas.num_outcomes, dim_b, dim_b), dtype=complex)
    for x, a in np.ndindex(meas.num_settings, meas.num_outcomes):
        local = np.kron(meas.effects[x, a], np.eye(dim_b)) @ state
        reduced = partial_trace(local, (dim_a, dim_b), keep=1)
        blocks[x, a] = (reduced + reduced.conj().T) / 2
    return StateAssemblage(_readonly(blocks))


def lhs_assemblage(hidden_states, postprocessings, num_outcomes=None):
    """Unsteerable assemblage sigma_{a|x} = sum_lambda D(a|x,lambda) sigma_lambda"""
    hidden_states = np.asarray(hidden_states, dtype=complex)
    num_settings = len(postprocessings[0].assignment)
    if num_outcomes is None:
        num_outcomes = 1 + max(max(pp.assignment) for pp in postprocessings)
    dim = hidden_states.shape[-1]
    blocks = np.zeros((num_settings, num_outcomes, dim, dim), dtype=complex)
    for sigma, pp in zip(hidden_states, postprocessings):
        for x, a in enumerate(pp.assignment):
            blocks[x, a] += sigma
    return StateAssemblage(_readonly(blocks))


# Standard objects

PAULI = {
    'i': np.eye(2, dtype=complex),
    'x': np.array([[0, 1], [1, 0]], dtype=complex),
    'y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'z': np.array([[1, 0], [0, -1]], dtype=complex),
}


def pvm_from_basis(unitary):
    """Rank-one projective measurement onto the columns of a unitary"""
    unitary = np.asarray(unitary, dtype=complex)
    return Povm(_readonly(np.stack([projector(column) for column in unitary.T])))


def pauli_pvm(label):
    """Eigenprojectors (1 + P)/2, (1 - P)/2 of a Pauli observable"""
    pauli = PAULI[label.lower()]
    return Povm(_readonly(np.stack([(np.eye(2) + pauli) / 2, (np.eye(2) - pauli) / 2])))


def trine_povm():
    """Three symmetric real qubit effects (2/3)|psi_k><psi_k|"""
    angles = np.pi * np.arange(3) / 3
    vectors = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return Povm(_readonly(np.stack([2 / 3 * np.outer(v, v) for v in vectors])))


def maximally_entangled_state(dim):
    vector = np.eye(dim).reshape(-1) / np.sqrt(dim)
    return np.outer(vector, vector).astype(complex)


def werner_state(visibility, dim=2):
    """Isotropic mixture v |Phi+><Phi+| + (1 - v) 1/d^2"""
    return visibility * maximally_entangled_state(dim) + (1 - visibility) * np.eye(dim * dim) / dim ** 2
