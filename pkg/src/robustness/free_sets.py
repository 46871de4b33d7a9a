"""
Free sets and their cone encodings.

A free set F is encoded by the cone C_F of its nonnegative multiples: a
product of cone factors together with a linear identification of every
object block (Õ_{a|x}, σ̃_{a|x} or Λ_a(ṽ)) with a sum of maps applied to
the factors, plus homogeneous equality rows among the factors.
"""
import itertools
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channels import identity_instrument
from .conf import setting
from .conic import (
    ConeSpec, ConicProgram, FinitelyGenerated, LinearMap, PsdBlock, Row, Status,
    block_diagonal, solve,
)
from .errors import InvalidObject, KindMismatch, ShapeMismatch, SizeOverflow, SolverFailure
from .hermitian import is_psd
from .objects import (
    MeasurementAssemblage, PartitionedEnsemble, StateAssemblage, enumerate_postprocessings,
)
from . import sampling

logger = logging.getLogger('robustness')


class FreeSetKind(str, Enum):
    JOINTLY_MEASURABLE = 'jm'
    COEXISTENT = 'coexistence'
    FINITELY_GENERATED = 'generated'
    LOCAL_HIDDEN_STATE = 'lhs'
    INCOHERENT_DIAGONAL = 'incoherent'


class ObjectClass(str, Enum):
    MEASUREMENT = 'measurement-assemblage'
    STATE_ASSEMBLAGE = 'state-assemblage'
    STATE_ENSEMBLE = 'state-ensemble'


COMPATIBLE_KINDS = {
    ObjectClass.MEASUREMENT: {
        FreeSetKind.JOINTLY_MEASURABLE, FreeSetKind.COEXISTENT, FreeSetKind.FINITELY_GENERATED,
    },
    ObjectClass.STATE_ASSEMBLAGE: {FreeSetKind.LOCAL_HIDDEN_STATE, FreeSetKind.FINITELY_GENERATED},
    ObjectClass.STATE_ENSEMBLE: {FreeSetKind.INCOHERENT_DIAGONAL, FreeSetKind.FINITELY_GENERATED},
}


def object_class_of(obj):
    if isinstance(obj, MeasurementAssemblage):
        return ObjectClass.MEASUREMENT
    if isinstance(obj, StateAssemblage):
        return ObjectClass.STATE_ASSEMBLAGE
    if isinstance(obj, PartitionedEnsemble) or isinstance(obj, np.ndarray):
        return ObjectClass.STATE_ENSEMBLE
    raise KindMismatch(f"no free sets are defined for {type(obj).__name__}")


@dataclass(frozen=True, eq=False)
class FreeSetSpec:
    """
    Which free set, for which object class and shape (d, |a|, |x|).

    Generators of a finitely generated set are arrays of object blocks
    (n, |x|, |a|, d, d) for assemblages and unit-trace states (n, d, d) for
    ensembles, where they are pushed through the instrument.
    """
    kind: FreeSetKind
    object_class: ObjectClass
    shape: tuple
    generators: np.ndarray = None

    def __post_init__(self):
        if self.kind not in COMPATIBLE_KINDS[self.object_class]:
            raise KindMismatch(f"free set {self.kind.value} does not apply to {self.object_class.value}")
        if self.kind == FreeSetKind.FINITELY_GENERATED:
            if self.generators is None:
                raise KindMismatch("a finitely generated free set needs a generator list")
            _validate_generators(self.object_class, self.shape, self.generators)

    @property
    def dim(self):
        return self.shape[0]

    @property
    def num_outcomes(self):
        return self.shape[1]

    @property
    def num_settings(self):
        return self.shape[2]

    @classmethod
    def for_object(cls, obj, kind, generators=None):
        object_class = object_class_of(obj)
        if isinstance(obj, np.ndarray):
            shape = (obj.shape[0], 1, 1)
        else:
            shape = obj.shape
        if generators is not None:
            generators = np.asarray(generators, dtype=complex)
        return cls(FreeSetKind(kind), object_class, tuple(shape), generators)


def _validate_generators(object_class, shape, generators):
    generators = np.asarray(generators)
    if object_class == ObjectClass.STATE_ENSEMBLE:
        if generators.ndim != 3 or (len(generators) and generators.shape[1] != generators.shape[2]):
            raise ShapeMismatch(f"ensemble generators must be states, got shape {generators.shape}")
        for i, state in enumerate(generators):
            if not is_psd(state) or abs(np.trace(state).real - 1.0) > 1e-8:
                raise InvalidObject("generator is not a unit-trace state", f'generators[{i}]')
        return

    dim, num_outcomes, num_settings = shape
    expected = (num_settings, num_outcomes, dim, dim)
    if generators.ndim != 5 or (len(generators) and generators.shape[1:] != expected):
        raise ShapeMismatch(f"generators must have shape (n, {', '.join(map(str, expected))}), got {generators.shape}")
    for i, blocks in enumerate(generators):
        if object_class == ObjectClass.MEASUREMENT:
            MeasurementAssemblage.from_effects(blocks, field=f'generators[{i}]')
        else:
            StateAssemblage.from_blocks(blocks, field=f'generators[{i}]')


@dataclass(frozen=True, eq=False)
class FreeSetEncoding:
    """Cone C_F plus the identification of object blocks with cone variables"""
    spec: FreeSetSpec
    cone: ConeSpec
    # identification[x][a] is a tuple of (factor index, LinearMap)
    identification: tuple
    equalities: tuple
    seed: tuple
    # weight of sum_{a,x} tr[block] in the robustness objective
    normalization: float
    labels: tuple = ()

    def blocks(self, values):
        """Object blocks (|x|, |a|, d, d) of a cone point"""
        num_settings = len(self.identification)
        num_outcomes = len(self.identification[0])
        dim = self.block_dim
        blocks = np.zeros((num_settings, num_outcomes, dim, dim), dtype=complex)
        for x, a in np.ndindex(num_settings, num_outcomes):
            for k, linear_map in self.identification[x][a]:
                blocks[x, a] += linear_map.apply(values[k])
        return blocks

    @property
    def block_dim(self):
        for row in self.identification:
            for pairs in row:
                for _, linear_map in pairs:
                    return linear_map.dim_out
        return self.spec.dim

    def trace_weights(self):
        """Per-factor G_k with norm * sum tr[blocks] = sum_k tr[G_k X_k]"""
        weights = [np.zeros((d, d), dtype=complex) for d in self.cone.dims]
        for row in self.identification:
            for pairs in row:
                for k, linear_map in pairs:
                    weights[k] = weights[k] + self.normalization * linear_map.adjoint(
                        np.eye(linear_map.dim_out)
                    )
        return weights

    def pullback(self, block_weights):
        """Per-factor A_k with sum <blocks, W> = sum_k tr[A_k X_k]"""
        weights = [np.zeros((d, d), dtype=complex) for d in self.cone.dims]
        for x, row in enumerate(self.identification):
            for a, pairs in enumerate(row):
                for k, linear_map in pairs:
                    weights[k] = weights[k] + linear_map.adjoint(block_weights[x, a])
        return weights


def _normalization(spec):
    if spec.object_class == ObjectClass.MEASUREMENT:
        return 1.0 / (spec.num_settings * spec.dim)
    if spec.object_class == ObjectClass.STATE_ASSEMBLAGE:
        return 1.0 / spec.num_settings
    return 1.0


def _deterministic_encoding(spec, proportional):
    """Blocks X_lambda with O_{a|x} = sum_lambda D(a|x,lambda) X_lambda"""
    dim, num_outcomes, num_settings = spec.shape
    postprocessings = enumerate_postprocessings(num_outcomes, num_settings)
    identity = LinearMap.identity(dim)
    identification = [[[] for _ in range(num_outcomes)] for _ in range(num_settings)]
    for k, pp in enumerate(postprocessings):
        for x, a in enumerate(pp.assignment):
            identification[x][a].append((k, identity))

    equalities = ()
    if proportional:
        # sum_lambda X_lambda = (1/d) tr[sum_lambda X_lambda] 1
        proportionality = identity + LinearMap.trace_to_identity(dim, dim, -1.0 / dim)
        equalities = (Row(
            maps=tuple((k, proportionality) for k in range(len(postprocessings))),
            bound=np.zeros((dim, dim), dtype=complex),
            equality=True,
            label='proportionality',
        ),)

    return FreeSetEncoding(
        spec=spec,
        cone=ConeSpec(tuple(PsdBlock(dim) for _ in postprocessings)),
        identification=tuple(tuple(tuple(pairs) for pairs in row) for row in identification),
        equalities=equalities,
        seed=tuple(np.eye(dim, dtype=complex) for _ in postprocessings),
        normalization=_normalization(spec),
        labels=tuple(pp.assignment for pp in postprocessings),
    )


def _coexistence_encoding(spec):
    """
    Joint measurability of every binarization {M_{a|x}, 1 - M_{a|x}}.

    Blocks G_mu are indexed by mu in {0,1}^(|x||a|); O_{a|x} collects the
    blocks with mu_{(x,a)} = 0. Besides proportionality to the identity,
    every setting must sum to the same total sum_mu G_mu.
    """
    dim, num_outcomes, num_settings = spec.shape
    pairs = num_settings * num_outcomes
    count = 2 ** pairs
    cap = setting('ROBUSTNESS_POSTPROCESSING_CAP')
    if count > cap:
        raise SizeOverflow(f"2^{pairs} = {count} binarization outcomes exceed the cap {cap}")

    identity = LinearMap.identity(dim)
    labels = list(itertools.product((0, 1), repeat=pairs))
    identification = [[[] for _ in range(num_outcomes)] for _ in range(num_settings)]
    for k, mu in enumerate(labels):
        for x, a in np.ndindex(num_settings, num_outcomes):
            if mu[x * num_outcomes + a] == 0:
                identification[x][a].append((k, identity))

    zero = np.zeros((dim, dim), dtype=complex)
    proportionality = identity + LinearMap.trace_to_identity(dim, dim, -1.0 / dim)
    equalities = [Row(
        maps=tuple((k, proportionality) for k in range(count)),
        bound=zero, equality=True, label='proportionality',
    )]
    for x in range(num_settings):
        maps = []
        for k, mu in enumerate(labels):
            coefficient = sum(1 for a in range(num_outcomes) if mu[x * num_outcomes + a] == 0) - 1
            if coefficient:
                maps.append((k, LinearMap.identity(dim, float(coefficient))))
        equalities.append(Row(maps=tuple(maps), bound=zero, equality=True, label=f'normalization[{x}]'))

    # product distribution with p(mu = 0) = 1/|a| satisfies every row
    p_zero = 1.0 / num_outcomes
    seed = tuple(
        np.prod([p_zero if bit == 0 else 1.0 - p_zero for bit in mu]) * np.eye(dim, dtype=complex)
        for mu in labels
    )
    return FreeSetEncoding(
        spec=spec,
        cone=ConeSpec(tuple(PsdBlock(dim) for _ in labels)),
        identification=tuple(tuple(tuple(p) for p in row) for row in identification),
        equalities=tuple(equalities),
        seed=seed,
        normalization=_normalization(spec),
        labels=tuple(labels),
    )


def _generated_encoding(spec):
    """One nonnegative coefficient per generator; generators sit block-diagonally"""
    dim, num_outcomes, num_settings = spec.shape
    count = num_settings * num_outcomes
    generators = np.asarray(spec.generators, dtype=complex)
    stacked = np.stack([block_diagonal(g.reshape(count, dim, dim)) for g in generators]) \
        if len(generators) else np.zeros((0, count * dim, count * dim), dtype=complex)
    factor = FinitelyGenerated(stacked)
    identification = tuple(
        tuple(((0, LinearMap.block_selector(x * num_outcomes + a, dim, count)),) for a in range(num_outcomes))
        for x in range(num_settings)
    )
    return FreeSetEncoding(
        spec=spec,
        cone=ConeSpec((factor,)),
        identification=identification,
        equalities=(),
        seed=(stacked.sum(axis=0),),
        normalization=_normalization(spec),
    )


def _state_generators(spec, dim_in):
    if spec.kind == FreeSetKind.INCOHERENT_DIAGONAL:
        return np.stack([np.diag(row) for row in np.eye(dim_in, dtype=complex)])
    generators = np.asarray(spec.generators, dtype=complex)
    if len(generators) and generators.shape[-1] != dim_in:
        raise ShapeMismatch(f"generator states of dimension {generators.shape[-1]} into an instrument on {dim_in}")
    return generators


def _ensemble_encoding(spec, instrument):
    """A single free input state pushed through every subchannel"""
    generators = _state_generators(spec, instrument.dim_in)
    factor = FinitelyGenerated.from_list(generators, instrument.dim_in)
    identification = (tuple(((0, instrument.linear_map(a)),) for a in range(instrument.num_subchannels)),)
    return FreeSetEncoding(
        spec=spec,
        cone=ConeSpec((factor,)),
        identification=identification,
        equalities=(),
        seed=(factor.generators.sum(axis=0),),
        normalization=1.0,
    )


def cone_constraints(spec, instrument=None):
    """Cone encoding of ``spec``; ensembles need the instrument that prepares them"""
    if spec.object_class == ObjectClass.STATE_ENSEMBLE:
        if instrument is None:
            instrument = identity_instrument(spec.dim)
        if instrument.num_subchannels != spec.num_outcomes:
            raise ShapeMismatch(
                f"instrument with {instrument.num_subchannels} subchannels for {spec.num_outcomes} outcomes"
            )
        return _ensemble_encoding(spec, instrument)
    if spec.kind == FreeSetKind.JOINTLY_MEASURABLE:
        return _deterministic_encoding(spec, proportional=True)
    if spec.kind == FreeSetKind.LOCAL_HIDDEN_STATE:
        return _deterministic_encoding(spec, proportional=False)
    if spec.kind == FreeSetKind.COEXISTENT:
        return _coexistence_encoding(spec)
    if spec.kind == FreeSetKind.FINITELY_GENERATED:
        return _generated_encoding(spec)
    raise KindMismatch(f"no encoding for {spec.kind.value} on {spec.object_class.value}")


def expand_generators_postprocessing(generators, cap=None):
    """
    Close a generator list under deterministic outcome relabelings.

    Every setting is relabeled independently by a map f: a -> f(a), merging
    the effects that land on the same outcome. Duplicates are removed within
    the orbit of each generator.
    """
    cap = setting('ROBUSTNESS_POSTPROCESSING_CAP') if cap is None else cap
    generators = [g if isinstance(g, MeasurementAssemblage) else MeasurementAssemblage.from_effects(g)
                  for g in generators]
    if not generators:
        return []
    shapes = {g.shape for g in generators}
    if len(shapes) != 1:
        raise ShapeMismatch(f"generators of mixed shapes {sorted(shapes)}")

    dim, num_outcomes, num_settings = generators[0].shape
    per_setting = list(itertools.product(range(num_outcomes), repeat=num_outcomes))
    total = len(per_setting) ** num_settings * len(generators)
    if total > cap:
        raise SizeOverflow(f"{total} relabeled generators exceed the cap {cap}")

    expanded = []
    for generator in generators:
        orbit = []
        for relabeling in itertools.product(per_setting, repeat=num_settings):
            effects = np.zeros_like(generator.effects)
            for x, mapping in enumerate(relabeling):
                for a, b in enumerate(mapping):
                    effects[x, b] += generator.effects[x, a]
            if any(np.max(np.abs(effects - seen)) <= 1e-12 for seen in orbit):
                continue
            orbit.append(effects)
        expanded.extend(MeasurementAssemblage(effects) for effects in orbit)
    logger.debug(f"Expanded {len(generators)} generators into {len(expanded)}")
    return expanded


def sample_free(spec, rng, count, instrument=None):
    """
    Random members of F, shape (count, |x|, |a|, d, d).

    Drawn through the defining representation. Coexistent sets are sampled
    through their jointly measurable subset.
    """
    dim, num_outcomes, num_settings = spec.shape
    samples = []
    for _ in range(count):
        if spec.object_class == ObjectClass.STATE_ENSEMBLE:
            if instrument is None:
                instrument = identity_instrument(spec.dim)
            generators = _state_generators(spec, instrument.dim_in)
            state = np.einsum('i,ijk->jk', rng.dirichlet(np.ones(len(generators))), generators)
            samples.append(np.stack([instrument.apply(a, state) for a in range(instrument.num_subchannels)])[None])
        elif spec.kind in (FreeSetKind.JOINTLY_MEASURABLE, FreeSetKind.COEXISTENT):
            samples.append(sampling.random_jm_assemblage(dim, num_outcomes, num_settings, rng).effects)
        elif spec.kind == FreeSetKind.LOCAL_HIDDEN_STATE:
            samples.append(sampling.random_lhs_assemblage(dim, num_outcomes, num_settings, rng).blocks)
        else:
            weights = rng.dirichlet(np.ones(len(spec.generators)))
            samples.append(np.einsum('i,i...->...', weights, spec.generators))
    return np.stack(samples)


def free_maximum(spec, weights, instrument=None):
    """
    max over T in F of sum_{a,x} tr[T_{a|x} W^{a|x}].

    Finitely generated sets are enumerated exactly; the others take one conic
    solve over C_F with the normalization row fixing T to F itself.
    """
    weights = np.asarray(weights, dtype=complex)
    encoding = cone_constraints(spec, instrument)
    if len(weights) != len(encoding.identification) or weights.shape[1] != len(encoding.identification[0]):
        raise ShapeMismatch(f"weights of shape {weights.shape} for a free set of shape {spec.shape}")
    pulled = encoding.pullback(weights)

    if spec.object_class == ObjectClass.STATE_ENSEMBLE or spec.kind == FreeSetKind.FINITELY_GENERATED:
        factor = encoding.cone.factors[0]
        if factor.count == 0:
            raise ShapeMismatch("the generator list is empty")
        # a linear functional peaks at an extreme point
        values = np.real(np.einsum('ijk,jk->i', factor.generators.conj(), pulled[0]))
        best = int(np.argmax(values))
        logger.debug(f"Free maximum {values[best]:.12g} attained by generator {best}")
        return float(values[best])

    normalization = Row(
        maps=tuple((k, LinearMap.functional(g)) for k, g in enumerate(encoding.trace_weights())),
        bound=np.ones((1, 1), dtype=complex),
        equality=True,
        label='normalization',
    )
    program = ConicProgram(
        objective=tuple(pulled),
        cone=encoding.cone,
        rows=encoding.equalities + (normalization,),
        sense='max',
    )
    solution = solve(program)
    if solution.status != Status.OPTIMAL:
        logger.error(f"Free maximum ended with status {solution.status.value}")
        raise SolverFailure(f"free maximum program ended with status {solution.status.value}", solution)
    return solution.value


@dataclass(frozen=True, eq=False)
class MembershipResult:
    inside: bool
    robustness: float
    # witness when outside, robustness result (free decomposition) when inside
    certificate: object


def membership(spec, obj, instrument=None, tol=None):
    from .programs import robustness

    tol = setting('ROBUSTNESS_TOL_MEMBERSHIP') if tol is None else tol
    result = robustness(obj, spec, instrument=instrument)
    inside = result.t <= tol
    return MembershipResult(inside, result.t, result if inside else result.witness)
