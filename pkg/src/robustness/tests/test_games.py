import numpy as np
import pytest

from robustness.channels import ensemble_from_instrument, phase_instrument
from robustness.errors import KindMismatch, ZeroWitness
from robustness.free_sets import FreeSetKind, FreeSetSpec, ObjectClass, expand_generators_postprocessing
from robustness.games import (
    DiscriminationGame, SubchannelGame, build_game, game_from_witness, max_psucc_free, success_probability,
    verify_ratio, witness_bound,
)
from robustness.objects import (
    MeasurementAssemblage, PartitionedEnsemble, assemblage_from_state, optimal_guessing_probability, pauli_pvm,
    trine_povm, werner_state,
)
from robustness.programs import Witness, robustness
from robustness.sampling import (
    conjugate_blocks, haar_unitary, random_assemblage, random_effects, random_state, random_state_assemblage,
)

XZ = MeasurementAssemblage.from_povms([pauli_pvm('x'), pauli_pvm('z')])


def test_xz_game_ratio():
    rng = np.random.default_rng(0)
    report = verify_ratio(XZ, FreeSetSpec.for_object(XZ, 'jm'), rng=rng, samples=50)
    assert report.passed
    assert abs(report.ratio - (4 - 2 * np.sqrt(2))) < 1e-5
    assert report.witness_bound <= 1 + 1e-7
    assert isinstance(report.game, DiscriminationGame)
    assert abs(report.denominator - 1 / report.game.trY) < 1e-6


def test_trine_game_ratio():
    paulis = [MeasurementAssemblage.from_povms([pauli_pvm(label).padded(3)]) for label in 'xyz']
    generators = np.stack([g.effects for g in expand_generators_postprocessing(paulis)])
    trine = MeasurementAssemblage.from_povms([trine_povm()])
    report = verify_ratio(trine, FreeSetSpec.for_object(trine, 'generated', generators))
    assert report.passed
    assert np.isnan(report.witness_bound)


def test_werner_subchannel_game():
    rng = np.random.default_rng(1)
    asm = assemblage_from_state(werner_state(0.9), XZ)
    report = verify_ratio(asm, FreeSetSpec.for_object(asm, 'lhs'), rng=rng, samples=50)
    assert report.passed
    assert isinstance(report.game, SubchannelGame)
    assert report.game.input_class == ObjectClass.STATE_ASSEMBLAGE
    assert report.game.instrument.num_subchannels == 3
    assert report.witness_bound <= 1 + 1e-7


def test_ensemble_game():
    rng = np.random.default_rng(2)
    instrument = phase_instrument(2, 2)
    ensemble = ensemble_from_instrument(instrument, random_state(2, rng))
    spec = FreeSetSpec(FreeSetKind.INCOHERENT_DIAGONAL, ObjectClass.STATE_ENSEMBLE, (2, 2, 1))
    report = verify_ratio(ensemble, spec, instrument=instrument, rng=rng, samples=50)
    assert report.passed
    assert report.game.povm.num_outcomes == 3
    assert report.witness_bound <= 1 + 1e-7


def test_state_game_uses_identity_instrument():
    spec = FreeSetSpec(FreeSetKind.INCOHERENT_DIAGONAL, ObjectClass.STATE_ENSEMBLE, (2, 1, 1))
    report = verify_ratio(np.full((2, 2), 0.5, dtype=complex), spec)
    assert report.passed
    assert abs(report.ratio - 2) < 1e-5


def test_unitary_and_relabeling_invariance():
    rng = np.random.default_rng(3)
    spec = FreeSetSpec.for_object(XZ, 'jm')
    t = robustness(XZ, spec).t
    rotated = MeasurementAssemblage(conjugate_blocks(XZ.effects, haar_unitary(2, rng)))
    assert abs(robustness(rotated, spec).t - t) < 1e-6
    swapped = MeasurementAssemblage(XZ.effects[:, ::-1].copy())
    assert abs(robustness(swapped, spec).t - t) < 1e-6


def test_witness_rescaling_leaves_the_game():
    witness = robustness(XZ, FreeSetSpec.for_object(XZ, 'jm')).witness
    game = game_from_witness(witness)
    scaled = game_from_witness(witness.scaled(3.0))
    assert abs(scaled.trY - 3 * game.trY) < 1e-9
    assert np.abs(scaled.ensemble.blocks - game.ensemble.blocks).max() < 1e-9


def test_zero_witness():
    with pytest.raises(ZeroWitness):
        game_from_witness(Witness(np.zeros((2, 2, 2, 2), dtype=complex), ObjectClass.MEASUREMENT))


def test_game_checks_players():
    result = robustness(XZ, FreeSetSpec.for_object(XZ, 'jm'))
    game = build_game(result)
    asm = assemblage_from_state(werner_state(0.9), XZ)
    with pytest.raises(KindMismatch):
        success_probability(game, asm)
    with pytest.raises(KindMismatch):
        max_psucc_free(game, FreeSetSpec.for_object(asm, 'lhs'))


def test_witness_bound_on_free_samples():
    rng = np.random.default_rng(4)
    spec = FreeSetSpec.for_object(XZ, 'jm')
    witness = robustness(XZ, spec).witness
    assert witness_bound(witness, spec, rng, 100) <= 1 + 1e-7
    assert witness.pairing(XZ.effects) > 1


def test_success_probability_is_the_pairing():
    rng = np.random.default_rng(5)
    witness = robustness(XZ, FreeSetSpec.for_object(XZ, 'jm')).witness
    game = game_from_witness(witness)
    for meas in (XZ, MeasurementAssemblage.from_povms([pauli_pvm('y'), pauli_pvm('x')])):
        assert abs(success_probability(game, meas) * game.trY - witness.pairing(meas.effects)) < 1e-10
    rotated = MeasurementAssemblage(conjugate_blocks(XZ.effects, haar_unitary(2, rng)))
    assert abs(success_probability(game, rotated) * game.trY - witness.pairing(rotated.effects)) < 1e-10


def test_random_pairs():
    rng = np.random.default_rng(6)
    for _ in range(20):
        meas = random_assemblage(2, 2, 2, rng)
        report = verify_ratio(meas, FreeSetSpec.for_object(meas, 'jm'))
        assert report.passed


def test_single_setting_game_is_plain_discrimination():
    rng = np.random.default_rng(7)
    for num_outcomes in (2, 3):
        ensemble = PartitionedEnsemble.from_blocks(random_effects(2, num_outcomes, rng)[None] / 2)
        game = DiscriminationGame(ensemble, 1.0)
        spec = FreeSetSpec(FreeSetKind.JOINTLY_MEASURABLE, ObjectClass.MEASUREMENT, (2, num_outcomes, 1))
        assert abs(max_psucc_free(game, spec) - optimal_guessing_probability(ensemble)) < 1e-6


def test_subchannel_success_is_the_scaled_pairing():
    rng = np.random.default_rng(8)
    asm = assemblage_from_state(werner_state(0.9), XZ)
    spec = FreeSetSpec.for_object(asm, 'lhs')
    result = robustness(asm, spec)
    game = build_game(result)
    witness = result.witness
    for player in [asm] + [random_state_assemblage(2, 2, 2, rng) for _ in range(5)]:
        expected = game.alpha * witness.pairing(player.blocks)
        assert abs(success_probability(game, player) - expected) < 1e-10
