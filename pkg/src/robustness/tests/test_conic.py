import numpy as np
import pytest
from django.test import override_settings

from robustness.conic import (
    ConeSpec, ConicProgram, FinitelyGenerated, FreeBlock, LinearMap, PsdBlock, Row, Status, block_diagonal,
    _attempts, certify, check_slater, dualize, solve,
)
from robustness.errors import DimensionMismatch, UnsupportedForm
from robustness.sampling import haar_unitary, random_state


def _max_eigenvalue_program(weight):
    dim = weight.shape[0]
    return ConicProgram(
        objective=(np.asarray(weight, dtype=complex),),
        cone=ConeSpec((PsdBlock(dim),)),
        rows=(Row(
            maps=((0, LinearMap.trace_functional(dim)),),
            bound=np.ones((1, 1), dtype=complex),
            equality=True,
            label='trace',
        ),),
        sense='max',
    )


def test_linear_map_adjoint():
    rng = np.random.default_rng(0)
    kraus = haar_unitary(3, rng)[:, :2]
    linear_map = LinearMap(((0.7, kraus), (-0.2, np.eye(3, 2))), 2, 3)
    x = random_state(2, rng)
    y = random_state(3, rng)
    lhs = np.trace(linear_map.apply(x) @ y).real
    rhs = np.trace(x @ linear_map.adjoint(y)).real
    assert abs(lhs - rhs) < 1e-12
    assert np.abs(linear_map.adjoint_map().apply(y) - linear_map.adjoint(y)).max() < 1e-12


def test_linear_map_constructors():
    rng = np.random.default_rng(1)
    x = random_state(3, rng)
    weight = random_state(3, rng)
    assert abs(LinearMap.trace_functional(3).apply(x)[0, 0] - 1.0) < 1e-12
    assert abs(LinearMap.functional(weight).apply(x)[0, 0] - np.trace(weight @ x)) < 1e-12
    assert np.abs(LinearMap.trace_to_identity(3, 2, 2.0).apply(x) - 2 * np.eye(2)).max() < 1e-12
    blocks = np.stack([random_state(2, rng) for _ in range(3)])
    selector = LinearMap.block_selector(1, 2, 3)
    assert np.abs(selector.apply(block_diagonal(blocks)) - blocks[1]).max() < 1e-12
    composed = LinearMap.identity(2, 3.0).compose(selector)
    assert np.abs(composed.apply(block_diagonal(blocks)) - 3 * blocks[1]).max() < 1e-12
    with pytest.raises(DimensionMismatch):
        LinearMap.identity(2) + LinearMap.identity(3)


def test_solve_max_eigenvalue():
    weight = np.diag([1.0, 3.0, -2.0]).astype(complex)
    solution = solve(_max_eigenvalue_program(weight))
    assert solution.status == Status.OPTIMAL
    assert abs(solution.value - 3.0) < 1e-6
    assert abs(solution.dual_value - 3.0) < 1e-6
    assert abs(solution.primal[0][1, 1] - 1.0) < 1e-5
    assert max(solution.residuals.values()) < 1e-7


def test_dualize_shapes():
    program = _max_eigenvalue_program(np.eye(2))
    dual = dualize(program)
    assert dual.sense == 'min'
    assert isinstance(dual.cone.factors[0], FreeBlock)
    assert len(dual.rows) == 1 and not dual.rows[0].equality
    # closed under dualization
    dualize(dual).validate()


def test_finitely_generated_factor():
    generators = np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), np.eye(2) / 2]).astype(complex)
    program = ConicProgram(
        objective=(np.diag([2.0, 1.0]).astype(complex),),
        cone=ConeSpec((FinitelyGenerated(generators),)),
        rows=(Row(
            maps=((0, LinearMap.trace_functional(2)),),
            bound=np.ones((1, 1), dtype=complex),
            equality=True,
        ),),
        sense='max',
    )
    solution = solve(program)
    assert solution.status == Status.OPTIMAL
    assert abs(solution.value - 2.0) < 1e-6
    assert solution.coefficients[0].shape == (3,)
    assert abs(solution.coefficients[0][0] - 1.0) < 1e-5


def test_infeasible_program():
    program = ConicProgram(
        objective=(np.eye(2, dtype=complex),),
        cone=ConeSpec((PsdBlock(2),)),
        rows=(Row(maps=((0, LinearMap.identity(2)),), bound=-np.eye(2, dtype=complex)),),
        sense='min',
    )
    assert solve(program).status == Status.INFEASIBLE
    diagnosis = check_slater(program)
    assert not diagnosis.strictly_feasible


def test_check_slater_scales_the_seed():
    program = ConicProgram(
        objective=(np.eye(2, dtype=complex),),
        cone=ConeSpec((PsdBlock(2),)),
        rows=(Row(maps=((0, LinearMap.identity(2, -1.0)),), bound=-np.diag([4.0, 1.0]).astype(complex)),),
        sense='min',
    )
    diagnosis = check_slater(program)
    assert diagnosis.strictly_feasible
    assert diagnosis.scale > 4.0
    assert diagnosis.margin > 0


def test_certify_reports_violations():
    program = _max_eigenvalue_program(np.diag([1.0, 2.0]))
    primal = (np.eye(2, dtype=complex),)
    dual = (np.full((1, 1), 2.0, dtype=complex),)
    value, dual_value, gap, residuals = certify(program, primal, dual)
    assert abs(value - 3.0) < 1e-12
    assert abs(dual_value - 2.0) < 1e-12
    assert residuals['primal_feasibility'] > 0.4


def test_validate_rejects_malformed_programs():
    program = ConicProgram(
        objective=(np.eye(2), np.eye(2)),
        cone=ConeSpec((PsdBlock(2),)),
        rows=(),
    )
    with pytest.raises(UnsupportedForm):
        program.validate()
    with pytest.raises(DimensionMismatch):
        ConeSpec((PsdBlock(0),))


def _random_weight(dim, rng):
    return random_state(dim, rng) - random_state(dim, rng)


def test_solve_is_deterministic():
    rng = np.random.default_rng(2)
    program = _max_eigenvalue_program(_random_weight(3, rng))
    first, second = solve(program), solve(program)
    assert first.value == second.value
    assert first.dual_value == second.dual_value
    assert all(np.array_equal(a, b) for a, b in zip(first.primal, second.primal))
    assert all(np.array_equal(a, b) for a, b in zip(first.dual, second.dual))


def test_solve_scales_with_the_objective():
    rng = np.random.default_rng(3)
    for _ in range(5):
        weight = _random_weight(3, rng)
        value = solve(_max_eigenvalue_program(weight)).value
        for factor in (0.1, 7.0):
            scaled = solve(_max_eigenvalue_program(factor * weight)).value
            assert abs(scaled - factor * value) < 1e-6 * (1 + factor)


def test_weak_duality_on_returned_pairs():
    rng = np.random.default_rng(4)
    for _ in range(10):
        weight = _random_weight(3, rng)
        solution = solve(_max_eigenvalue_program(weight))
        assert solution.status == Status.OPTIMAL
        # a maximization is bounded by its dual value
        assert solution.dual_value >= solution.value - 1e-7 * (1 + abs(solution.value))
        assert abs(solution.value - np.linalg.eigvalsh(weight)[-1]) < 1e-6


def test_attempts_tighten_then_switch_backend():
    attempts = _attempts('CLARABEL', 1e-8, 1e-7, 200)
    assert [backend for backend, _ in attempts] == ['CLARABEL', 'CLARABEL', 'SCS']
    assert attempts[1][1]['tol_feas'] < attempts[0][1]['tol_feas']
    assert attempts[1][1]['max_iter'] > attempts[0][1]['max_iter']
    assert [backend for backend, _ in _attempts('SCS', 1e-8, 1e-7, 200)] == ['SCS', 'SCS', 'CLARABEL']


@override_settings(ROBUSTNESS_SOLVER='NO_SUCH_BACKEND')
def test_solve_falls_back_when_the_backend_fails():
    solution = solve(_max_eigenvalue_program(np.diag([1.0, 3.0, -2.0]).astype(complex)))
    assert solution.status == Status.OPTIMAL
    assert solution.solver == 'CLARABEL'
    assert abs(solution.value - 3.0) < 1e-6
