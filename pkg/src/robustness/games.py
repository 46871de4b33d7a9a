"""
Discrimination games built from robustness witnesses.

A witness Y with sum <T, Y> <= 1 on the free set becomes a game in which
the object beats every free object by exactly the factor 1 + R.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .channels import (
    Instrument, complete_instrument, computational_povm, ensemble_from_instrument, identity_instrument,
    p_succ_subchannel,
)
from .errors import KindMismatch, ZeroWitness, ShapeMismatch
from .free_sets import ObjectClass, free_maximum, sample_free
from .hermitian import operator_norm_inf
from .objects import MeasurementAssemblage, PartitionedEnsemble, Povm, StateAssemblage, p_guess_prior
from .programs import robustness

logger = logging.getLogger('robustness')

# Upper bound on the discrepancy |ratio - (1 + R)| relative to 1 + R
RATIO_TOLERANCE = 1e-5


@dataclass(frozen=True, eq=False)
class DiscriminationGame:
    """State discrimination with prior information about the setting x"""
    ensemble: PartitionedEnsemble
    trY: float


@dataclass(frozen=True, eq=False)
class SubchannelGame:
    """
    Guess a subchannel of ``instrument`` by measuring its output with ``povm``.

    ``input_class`` tells which objects play: state assemblages are scored
    on (setting, subchannel) pairs, ensembles on the subchannel alone.
    """
    instrument: Instrument
    povm: Povm
    alpha: float
    input_class: ObjectClass


def _check_witness(witness):
    trace = witness.normalization
    if trace <= 1e-12:
        raise ZeroWitness(f"witness has trace {trace:.3e}")
    return witness.blocks


def game_from_witness(witness):
    """p(x) p(a|x) rho_{a|x} = Y^{a|x} / trY"""
    blocks = _check_witness(witness)
    trace = witness.normalization
    ensemble = PartitionedEnsemble.from_blocks(blocks)
    logger.debug(f"Game from witness with trY = {trace:.12g}")
    return DiscriminationGame(ensemble, trace)


def subchannel_game_from_witness(witness, filler=None):
    """
    Subchannels Lambda_a(rho) = sum_x tr[alpha Y^{a|x} rho] |x><x| and the POVM {|x><x|}.

    alpha = 1 / ||sum_{a,x} Y^{a|x}|| keeps the subchannels trace
    non-increasing; the completion prepares ``filler`` (maximally mixed by
    default).
    """
    blocks = _check_witness(witness)
    num_settings, num_outcomes, dim = blocks.shape[0], blocks.shape[1], blocks.shape[-1]
    total = blocks.sum(axis=(0, 1))
    norm = operator_norm_inf(total)
    if norm <= 1e-12:
        raise ZeroWitness("witness blocks sum to zero")
    alpha = 1.0 / norm

    chois = []
    for a in range(num_outcomes):
        choi = np.zeros((dim * num_settings, dim * num_settings), dtype=complex)
        for x in range(num_settings):
            marker = np.zeros((num_settings, num_settings))
            marker[x, x] = 1.0
            # Lambda_a^dagger(|x><x|) = alpha Y^{a|x}
            choi += alpha * np.kron(blocks[x, a].T, marker)
        chois.append(choi)

    if filler is None:
        filler = np.eye(num_settings, dtype=complex) / num_settings
    instrument = complete_instrument(np.stack(chois), filler)
    return SubchannelGame(instrument, computational_povm(num_settings), alpha, ObjectClass.STATE_ASSEMBLAGE)


def ensemble_game_from_witness(witness, instrument):
    """
    Measure the instrument's output with N_a = alpha Y_a plus one completing effect.

    The completing effect 1 - sum_a N_a carries zero success weight.
    """
    blocks = _check_witness(witness)
    if blocks.shape[0] != 1:
        raise ShapeMismatch(f"an ensemble witness has a single setting, got {blocks.shape[0]}")
    total = blocks[0].sum(axis=0)
    alpha = 1.0 / operator_norm_inf(total)
    effects = alpha * blocks[0]
    remainder = np.eye(total.shape[0]) - alpha * total
    remainder = (remainder + remainder.conj().T) / 2
    povm = Povm(np.concatenate([effects, remainder[None]]))
    return SubchannelGame(instrument, povm, alpha, ObjectClass.STATE_ENSEMBLE)


def success_probability(game, obj):
    """Success probability of an object in a game it can play"""
    if isinstance(game, DiscriminationGame):
        if not isinstance(obj, MeasurementAssemblage):
            raise KindMismatch("state discrimination games are played by measurement assemblages")
        return p_guess_prior(game.ensemble, obj)
    if game.input_class == ObjectClass.STATE_ASSEMBLAGE:
        if not isinstance(obj, StateAssemblage):
            raise KindMismatch("this subchannel game is played by state assemblages")
        return p_succ_subchannel(obj, game.instrument, game.povm)
    if not isinstance(obj, PartitionedEnsemble):
        raise KindMismatch("this subchannel game is played by ensembles")
    # Lambda_a(rho) is the ensemble's block a
    count = min(obj.num_outcomes, game.povm.num_outcomes)
    return float(np.real(np.einsum('aij,aji->', obj.blocks[0, :count], game.povm.effects[:count])))


def game_weights(game):
    """W^{a|x} with p_succ(T) = sum <T_{a|x}, W^{a|x}> for objects T of the game's class"""
    if isinstance(game, DiscriminationGame):
        return game.ensemble.blocks
    if game.input_class == ObjectClass.STATE_ASSEMBLAGE:
        num_settings = game.povm.num_outcomes
        num_outcomes = game.instrument.num_subchannels - 1
        dim = game.instrument.dim_in
        weights = np.zeros((num_settings, num_outcomes, dim, dim), dtype=complex)
        for x, a in np.ndindex(num_settings, num_outcomes):
            weights[x, a] = game.instrument.adjoint(a, game.povm.effects[x])
        return weights
    count = game.instrument.num_subchannels
    effects = game.povm.effects
    weights = np.zeros((1, count) + effects.shape[1:], dtype=complex)
    usable = min(count, effects.shape[0] - 1)
    weights[0, :usable] = effects[:usable]
    return weights


def max_psucc_free(game, spec, instrument=None):
    """Largest success probability any free object reaches in ``game``"""
    if isinstance(game, DiscriminationGame):
        expected = ObjectClass.MEASUREMENT
    else:
        expected = game.input_class
    if spec.object_class != expected:
        raise KindMismatch(f"free set for {spec.object_class.value} in a game for {expected.value}")
    if expected == ObjectClass.STATE_ENSEMBLE:
        instrument = game.instrument
    weights = game_weights(game)
    return free_maximum(spec, weights, instrument)


@dataclass(frozen=True, eq=False)
class VerificationReport:
    ratio: float
    one_plus_r: float
    discrepancy: float
    numerator: float
    denominator: float
    witness_bound: float
    game: object
    result: object

    @property
    def passed(self):
        return self.discrepancy <= RATIO_TOLERANCE * self.one_plus_r


def witness_bound(witness, spec, rng, count, instrument=None):
    """Largest sampled <Y, T> over free objects T"""
    samples = sample_free(spec, rng, count, instrument)
    return max(witness.pairing(sample) for sample in samples)


def build_game(result, instrument=None, filler=None):
    """The game a robustness witness defines for its object class"""
    if result.object_class == ObjectClass.MEASUREMENT:
        return game_from_witness(result.witness)
    if result.object_class == ObjectClass.STATE_ASSEMBLAGE:
        return subchannel_game_from_witness(result.witness, filler)
    return ensemble_game_from_witness(result.witness, instrument)


def verify_ratio(obj, spec, instrument=None, filler=None, rng=None, samples=200, **options):
    """
    Solve for R and its witness, build the game and compare
    p_succ(object) / max_F p_succ with 1 + R.
    """
    if isinstance(obj, np.ndarray):
        instrument = identity_instrument(obj.shape[0])
        obj = ensemble_from_instrument(instrument, obj)
    if isinstance(obj, PartitionedEnsemble) and instrument is None:
        instrument = identity_instrument(obj.dim)

    result = robustness(obj, spec, instrument=instrument, **options)
    game = build_game(result, instrument, filler)
    numerator = success_probability(game, obj)
    denominator = max_psucc_free(game, spec, instrument)
    ratio = numerator / denominator
    discrepancy = abs(ratio - result.one_plus_r)

    bound = float('nan')
    if rng is not None and samples:
        bound = witness_bound(result.witness, spec, rng, samples, instrument)

    logger.info(f"Ratio {ratio:.12g} against 1 + R = {result.one_plus_r:.12g} (discrepancy {discrepancy:.3e})")
    if discrepancy > RATIO_TOLERANCE * result.one_plus_r:
        logger.warning(f"Ratio discrepancy {discrepancy:.3e} exceeds tolerance")
    return VerificationReport(
        ratio=ratio,
        one_plus_r=result.one_plus_r,
        discrepancy=discrepancy,
        numerator=numerator,
        denominator=denominator,
        witness_bound=bound,
        game=game,
        result=result,
    )
