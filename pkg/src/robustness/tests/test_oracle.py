import numpy as np
import pytest

from robustness.errors import KindMismatch, ShapeMismatch
from robustness.free_sets import FreeSetSpec, expand_generators_postprocessing
from robustness.objects import (
    MeasurementAssemblage, StateAssemblage, assemblage_from_state, pauli_pvm, trine_povm, werner_state,
)
from robustness.oracle import AlternatingProjectionOracle, coherence_robustness, dominating_scale
from robustness.programs import robustness
from robustness.sampling import (
    random_assemblage, random_jm_assemblage, random_lhs_assemblage, random_state_assemblage,
)

XZ = MeasurementAssemblage.from_povms([pauli_pvm('x'), pauli_pvm('z')])


def _check(obj, spec, tol=1e-5):
    t = robustness(obj, spec).t
    ret = AlternatingProjectionOracle().robustness(obj, spec)
    # the upper bound comes from an exactly feasible point
    assert ret.upper >= t - 1e-6
    assert abs(ret.upper - t) < tol
    assert ret.iterations > 0
    return t, ret


def _werner(visibility):
    return assemblage_from_state(werner_state(visibility), XZ)


def test_oracle_jm():
    t, ret = _check(XZ, FreeSetSpec.for_object(XZ, 'jm'))
    assert abs(ret.estimate - t) < 1e-4


def test_oracle_lhs():
    asm = _werner(0.9)
    t, ret = _check(asm, FreeSetSpec.for_object(asm, 'lhs'))
    assert abs(ret.estimate - t) < 1e-4


def test_oracle_trine_against_relabeled_paulis():
    paulis = [MeasurementAssemblage.from_povms([pauli_pvm(label).padded(3)]) for label in 'xyz']
    generators = np.stack([g.effects for g in expand_generators_postprocessing(paulis)])
    trine = MeasurementAssemblage.from_povms([trine_povm()])
    t, ret = _check(trine, FreeSetSpec.for_object(trine, 'generated', generators))
    # the LP value bounds the robustness from below
    assert ret.estimate <= t + 1e-6
    assert abs(ret.estimate - t) < 1e-5


def test_oracle_agrees_on_random_instances():
    rng = np.random.default_rng(6)
    for _ in range(7):
        meas = random_assemblage(2, 2, 2, rng)
        _check(meas, FreeSetSpec.for_object(meas, 'jm'))
    for _ in range(7):
        asm = random_state_assemblage(2, 2, 2, rng)
        _check(asm, FreeSetSpec.for_object(asm, 'lhs'))
    for _ in range(3):
        meas = random_assemblage(2, 2, 2, rng)
        generators = np.stack([random_jm_assemblage(2, 2, 2, rng).effects for _ in range(6)])
        t, ret = _check(meas, FreeSetSpec.for_object(meas, 'generated', generators))
        assert ret.estimate <= t + 1e-6
    for _ in range(3):
        asm = random_state_assemblage(2, 2, 2, rng)
        generators = np.stack([random_lhs_assemblage(2, 2, 2, rng).blocks for _ in range(6)])
        t, ret = _check(asm, FreeSetSpec.for_object(asm, 'generated', generators))
        assert ret.estimate <= t + 1e-6


def test_oracle_locates_werner_steering_threshold():
    oracle = AlternatingProjectionOracle()
    inside = _werner(0.7)
    assert oracle.robustness(inside, FreeSetSpec.for_object(inside, 'lhs')).upper < 1e-5
    # t grows linearly above the threshold
    values = []
    for visibility in (0.8, 0.9):
        asm = _werner(visibility)
        values.append(oracle.robustness(asm, FreeSetSpec.for_object(asm, 'lhs')).upper)
    slope = (values[1] - values[0]) / 0.1
    threshold = 0.8 - values[0] / slope
    assert abs(threshold - 1 / np.sqrt(2)) < 1e-3


def test_dominating_scale():
    blocks = np.stack([np.diag([1.0, 0.5]), np.diag([0.0, 0.5])]).astype(complex)[None]
    assert dominating_scale(blocks, np.stack([np.eye(2) / 2] * 2)[None]) == pytest.approx(2.0)
    assert dominating_scale(blocks, np.stack([np.eye(2)] * 2)[None]) == 1.0


def test_oracle_rejects_unsupported_sets():
    oracle = AlternatingProjectionOracle()
    with pytest.raises(KindMismatch):
        oracle.robustness(XZ, FreeSetSpec.for_object(XZ, 'coexistence'))
    other = StateAssemblage.from_blocks(_werner(0.9).blocks[:1])
    with pytest.raises(ShapeMismatch):
        oracle.robustness(other, FreeSetSpec.for_object(_werner(0.9), 'lhs'))


def test_coherence_robustness_of_qubits():
    for rho01 in [0.0, 0.1, 0.3 - 0.2j]:
        rho = np.array([[0.6, rho01], [np.conj(rho01), 0.4]], dtype=complex)
        assert abs(coherence_robustness(rho) - 2 * abs(rho01)) < 1e-6
