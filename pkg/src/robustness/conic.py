"""
Conic programs over products of PSD, finitely generated and free blocks.

A program reads

    max/min  sum_k tr[A_k X_k]
    s.t.     sum_k L_rk(X_k) <= B_r     (inequality rows, multiplier Y_r >= 0)
             sum_k L_ek(X_k)  = B_e     (equality rows, free multiplier Z_e)
             X_k in C_k

where every C_k is a PSD cone, a cone generated by finitely many PSD
matrices, or the whole Hermitian space. Programs and their duals are
lowered to cvxpy and solved separately; the returned pair is certified here
with our own residuals, so nothing depends on how a backend reports
multipliers.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import product

import cvxpy as cp
import numpy as np

from .conf import setting
from .errors import DimensionMismatch, UnsupportedForm
from .hermitian import min_eigenvalue, max_eigenvalue, project_psd

logger = logging.getLogger('robustness')


class Status(str, Enum):
    OPTIMAL = 'Optimal'
    INFEASIBLE = 'Infeasible'
    UNBOUNDED = 'Unbounded'
    NUMERICAL_FAILURE = 'NumericalFailure'


# Cone factors

@dataclass(frozen=True)
class PsdBlock:
    dim: int


@dataclass(frozen=True)
class FreeBlock:
    """Unconstrained Hermitian block; its dual cone is {0}"""
    dim: int


@dataclass(frozen=True, eq=False)
class FinitelyGenerated:
    """Cone of nonnegative combinations sum_i c_i T_i"""
    generators: np.ndarray

    @property
    def dim(self):
        return self.generators.shape[-1]

    @property
    def count(self):
        return self.generators.shape[0]

    @classmethod
    def from_list(cls, generators, dim):
        if len(generators) == 0:
            return cls(np.zeros((0, dim, dim), dtype=complex))
        return cls(np.asarray(generators, dtype=complex))


@dataclass(frozen=True)
class ConeSpec:
    factors: tuple

    def __post_init__(self):
        for index, factor in enumerate(self.factors):
            if factor.dim < 1:
                raise DimensionMismatch(f"cone factor {index} has dimension {factor.dim}")

    @property
    def dims(self):
        return [factor.dim for factor in self.factors]


# Linear maps

@dataclass(frozen=True, eq=False)
class LinearMap:
    """Hermitian-preserving map X -> sum_m c_m K_m X K_m^dagger"""
    terms: tuple
    dim_in: int
    dim_out: int

    def apply(self, matrix):
        if not self.terms:
            return np.zeros((self.dim_out, self.dim_out), dtype=complex)
        return sum(coef * (kraus @ matrix @ kraus.conj().T) for coef, kraus in self.terms)

    def adjoint(self, matrix):
        if not self.terms:
            return np.zeros((self.dim_in, self.dim_in), dtype=complex)
        return sum(coef * (kraus.conj().T @ matrix @ kraus) for coef, kraus in self.terms)

    def adjoint_map(self):
        return LinearMap(
            tuple((coef, kraus.conj().T) for coef, kraus in self.terms), self.dim_out, self.dim_in
        )

    def scaled(self, factor):
        return LinearMap(tuple((factor * coef, kraus) for coef, kraus in self.terms), self.dim_in, self.dim_out)

    def __neg__(self):
        return self.scaled(-1.0)

    def __add__(self, other):
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise DimensionMismatch(
                f"cannot add maps {self.dim_in}->{self.dim_out} and {other.dim_in}->{other.dim_out}"
            )
        return LinearMap(self.terms + other.terms, self.dim_in, self.dim_out)

    def compose(self, inner):
        """self after inner"""
        if inner.dim_out != self.dim_in:
            raise DimensionMismatch(f"cannot compose {inner.dim_out} into {self.dim_in}")
        return LinearMap(
            tuple((c1 * c2, k1 @ k2) for c1, k1 in self.terms for c2, k2 in inner.terms),
            inner.dim_in, self.dim_out
        )

    @classmethod
    def identity(cls, dim, coef=1.0):
        return cls(((coef, np.eye(dim, dtype=complex)),), dim, dim)

    @classmethod
    def trace_to_identity(cls, dim_in, dim_out, coef=1.0):
        """X -> coef tr[X] 1"""
        terms = []
        for i in range(dim_in):
            for o in range(dim_out):
                kraus = np.zeros((dim_out, dim_in), dtype=complex)
                kraus[o, i] = 1.0
                terms.append((coef, kraus))
        return cls(tuple(terms), dim_in, dim_out)

    @classmethod
    def trace_functional(cls, dim, coef=1.0):
        """X -> coef tr[X] as a 1 x 1 matrix"""
        return cls.trace_to_identity(dim, 1, coef)

    @classmethod
    def functional(cls, weight):
        """X -> tr[G X] as a 1 x 1 matrix, for Hermitian G"""
        weight = np.asarray(weight, dtype=complex)
        eigenvalues, vectors = np.linalg.eigh((weight + weight.conj().T) / 2)
        cutoff = 1e-14 * max(1.0, np.max(np.abs(eigenvalues)))
        terms = tuple(
            (float(value), vectors[:, j].conj()[None, :])
            for j, value in enumerate(eigenvalues) if abs(value) > cutoff
        )
        return cls(terms, weight.shape[0], 1)

    @classmethod
    def from_choi(cls, choi, dim_in, dim_out):
        """Congruence form of the map whose Choi matrix is sum_ij |i><j| (x) L(|i><j|)"""
        choi = np.asarray(choi, dtype=complex)
        eigenvalues, vectors = np.linalg.eigh((choi + choi.conj().T) / 2)
        cutoff = 1e-14 * max(1.0, np.max(np.abs(eigenvalues)))
        terms = tuple(
            (float(value), vectors[:, j].reshape(dim_in, dim_out).T)
            for j, value in enumerate(eigenvalues) if abs(value) > cutoff
        )
        return cls(terms, dim_in, dim_out)

    @classmethod
    def block_selector(cls, index, dim, count):
        """Extract diagonal block ``index`` of a block-diagonal (count*dim) matrix"""
        kraus = np.zeros((dim, dim * count), dtype=complex)
        kraus[:, index * dim:(index + 1) * dim] = np.eye(dim)
        return cls(((1.0, kraus),), dim * count, dim)


def block_diagonal(blocks):
    """Place a stack of d x d blocks on the diagonal of one matrix"""
    blocks = np.asarray(blocks)
    count, dim = blocks.shape[0], blocks.shape[-1]
    matrix = np.zeros((count * dim, count * dim), dtype=complex)
    for index, block in enumerate(blocks):
        matrix[index * dim:(index + 1) * dim, index * dim:(index + 1) * dim] = block
    return matrix


# Programs

@dataclass(frozen=True, eq=False)
class Row:
    """One constraint block: sum over (factor, map) pairs compared with ``bound``"""
    maps: tuple
    bound: np.ndarray
    equality: bool = False
    label: str = ''

    @property
    def dim(self):
        return self.bound.shape[0]

    def evaluate(self, values):
        return sum(linear_map.apply(values[k]) for k, linear_map in self.maps) if self.maps \
            else np.zeros_like(self.bound, dtype=complex)


@dataclass(frozen=True, eq=False)
class ConicProgram:
    objective: tuple
    cone: ConeSpec
    rows: tuple
    sense: str = 'max'
    # optional interior point hint, one matrix per factor
    seed: tuple = None

    @property
    def sign(self):
        return 1.0 if self.sense == 'min' else -1.0

    def objective_block(self, index):
        block = self.objective[index]
        dim = self.cone.factors[index].dim
        return np.zeros((dim, dim), dtype=complex) if block is None else np.asarray(block, dtype=complex)

    def value(self, values):
        return float(sum(
            np.real(np.vdot(self.objective_block(k), values[k])) for k in range(len(self.cone.factors))
        ))

    def validate(self):
        if self.sense not in ('max', 'min'):
            raise UnsupportedForm(f"unknown sense {self.sense!r}")
        if len(self.objective) != len(self.cone.factors):
            raise UnsupportedForm(
                f"{len(self.objective)} objective blocks for {len(self.cone.factors)} cone factors"
            )
        for index, row in enumerate(self.rows):
            if row.bound.ndim != 2 or row.bound.shape[0] != row.bound.shape[1]:
                raise DimensionMismatch(f"row {index} ({row.label}) has a non-square bound")
            for k, linear_map in row.maps:
                if not 0 <= k < len(self.cone.factors):
                    raise UnsupportedForm(f"row {index} ({row.label}) refers to missing factor {k}")
                if linear_map.dim_in != self.cone.factors[k].dim or linear_map.dim_out != row.dim:
                    raise DimensionMismatch(
                        f"row {index} ({row.label}): map {linear_map.dim_in}->{linear_map.dim_out} "
                        f"between factor of dim {self.cone.factors[k].dim} and row of dim {row.dim}"
                    )


def dualize(program):
    """
    The Lagrange dual as another ConicProgram.

    With s = +1 for minimization and -1 for maximization the dual optimizes
    -s sum_r tr[B_r W_r] in the opposite sense, over W_r >= 0 for inequality
    rows and free W_e for equality rows, subject to
    sum_r L_rk^dagger(W_r) + s A_k in C_k^* for every factor.
    """
    program.validate()
    sign = program.sign

    factors = tuple(FreeBlock(row.dim) if row.equality else PsdBlock(row.dim) for row in program.rows)
    objective = tuple(-sign * np.asarray(row.bound, dtype=complex) for row in program.rows)

    incoming = [[] for _ in program.cone.factors]
    for j, row in enumerate(program.rows):
        for k, linear_map in row.maps:
            incoming[k].append((j, linear_map))

    rows = []
    for k, factor in enumerate(program.cone.factors):
        target = sign * program.objective_block(k)
        adjoints = tuple((j, linear_map.adjoint_map()) for j, linear_map in incoming[k])
        if isinstance(factor, PsdBlock):
            rows.append(Row(
                maps=tuple((j, -adjoint) for j, adjoint in adjoints),
                bound=target, label=f'dual[{k}]'
            ))
        elif isinstance(factor, FreeBlock):
            rows.append(Row(maps=adjoints, bound=-target, equality=True, label=f'dual[{k}]'))
        elif isinstance(factor, FinitelyGenerated):
            for i, generator in enumerate(factor.generators):
                # <L^dagger(W), T> = tr[L(T) W]
                maps = tuple(
                    (j, LinearMap.functional(linear_map.apply(generator)).scaled(-1.0))
                    for j, linear_map in incoming[k]
                )
                bound = np.array([[np.real(np.vdot(target, generator))]], dtype=complex)
                rows.append(Row(maps=maps, bound=bound, label=f'dual[{k}][{i}]'))
        else:
            raise UnsupportedForm(f"unknown cone factor {factor!r}")

    seed = None
    if program.rows:
        seed = tuple(
            np.zeros((row.dim, row.dim), dtype=complex) if row.equality else np.eye(row.dim, dtype=complex)
            for row in program.rows
        )
    return ConicProgram(
        objective=objective,
        cone=ConeSpec(factors),
        rows=tuple(rows),
        sense='max' if program.sense == 'min' else 'min',
        seed=seed,
    )


# Solutions

@dataclass(frozen=True, eq=False)
class ConicSolution:
    status: Status
    value: float = float('nan')
    primal: tuple = ()
    dual: tuple = ()
    dual_value: float = float('nan')
    gap: float = float('nan')
    residuals: dict = field(default_factory=dict)
    coefficients: dict = field(default_factory=dict)
    iterations: int = 0
    solver: str = ''


@dataclass(frozen=True)
class SlaterDiagnosis:
    strictly_feasible: bool
    point: tuple = None
    margin: float = float('nan')
    scale: float = float('nan')
    reason: str = ''


def _default_seed(factor):
    if isinstance(factor, PsdBlock):
        return np.eye(factor.dim, dtype=complex)
    if isinstance(factor, FinitelyGenerated):
        return factor.generators.sum(axis=0)
    return np.zeros((factor.dim, factor.dim), dtype=complex)


def _interior_margin(factor, point):
    if isinstance(factor, PsdBlock):
        return min_eigenvalue(point)
    if isinstance(factor, FinitelyGenerated):
        # seeds are positive combinations of the generators
        return 1.0 if factor.count else -np.inf
    return np.inf


def check_slater(program, tol=None):
    """
    Look for a strictly feasible point by scaling a seed.

    The seed is the program's interior hint or, per factor, the identity,
    the sum of the generators, or zero. It is scaled by powers of two in
    both directions until every inequality row holds strictly; equality
    rows must hold at the scaled point within ``tol``.
    """
    tol = setting('ROBUSTNESS_TOL_FEAS') if tol is None else tol
    program.validate()
    factors = program.cone.factors

    for k, factor in enumerate(factors):
        if isinstance(factor, FinitelyGenerated) and factor.count == 0:
            return SlaterDiagnosis(False, reason=f'factor {k} is an empty generator cone')

    seed = program.seed or tuple(_default_seed(factor) for factor in factors)
    seed = tuple(np.asarray(point, dtype=complex) for point in seed)
    interior = min((_interior_margin(f, p) for f, p in zip(factors, seed)), default=np.inf)
    if interior <= 0:
        return SlaterDiagnosis(False, reason='seed is not in the interior of the cone')

    scales = [1.0]
    for power in range(1, 41):
        scales.extend([2.0 ** power, 2.0 ** -power])

    best = (-np.inf, None, '')
    for scale in scales:
        point = tuple(scale * p for p in seed)
        margin = np.inf
        worst = ''
        feasible = True
        for row in program.rows:
            residual = row.bound - row.evaluate(point)
            size = 1.0 + np.max(np.abs(row.bound))
            if row.equality:
                if np.max(np.abs(residual)) > tol * size:
                    feasible = False
                    worst = row.label
                    break
                continue
            row_margin = min_eigenvalue((residual + residual.conj().T) / 2) / size
            if row_margin < margin:
                margin, worst = row_margin, row.label
        if not feasible:
            continue
        if margin > tol:
            logger.debug(f"Strictly feasible point at scale {scale:g} with margin {margin:.3e}")
            return SlaterDiagnosis(True, point=point, margin=float(margin), scale=scale)
        if margin > best[0]:
            best = (margin, scale, worst)

    margin, scale, worst = best
    if scale is None:
        return SlaterDiagnosis(False, reason='seed violates the equality rows at every scale')
    return SlaterDiagnosis(
        False, margin=float(margin), scale=scale, reason=f'row {worst or "?"} is never strict'
    )


# Lowering to cvxpy

_ACCEPTED = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
_INFEASIBLE = (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE)
_UNBOUNDED = (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE)


def _solver_options(solver, tol_feas, tol_gap, max_iter):
    if solver == 'CLARABEL':
        return {
            'tol_feas': tol_feas * 0.01,
            'tol_gap_abs': tol_gap * 0.01,
            'tol_gap_rel': tol_gap * 0.01,
            'max_iter': max_iter,
        }
    if solver == 'SCS':
        return {'eps_abs': tol_feas * 0.01, 'eps_rel': tol_feas * 0.01, 'max_iters': max_iter * 1000}
    return {}


def _attempts(solver, tol_feas, tol_gap, max_iter):
    """Backend runs in order: as configured, tightened, then the other backend"""
    alternate = 'SCS' if solver == 'CLARABEL' else 'CLARABEL'
    return (
        (solver, _solver_options(solver, tol_feas, tol_gap, max_iter)),
        (solver, _solver_options(solver, tol_feas * 0.01, tol_gap * 0.01, 4 * max_iter)),
        (alternate, _solver_options(alternate, tol_feas, tol_gap, max_iter)),
    )


def _lower(program):
    """Build cvxpy variables, constraints and objective for a program"""
    constraints = []
    expressions = []
    handles = []
    for factor in program.cone.factors:
        if isinstance(factor, FinitelyGenerated):
            if factor.count == 0:
                expressions.append(np.zeros((factor.dim, factor.dim), dtype=complex))
                handles.append(None)
                continue
            coefficients = cp.Variable(factor.count, nonneg=True)
            basis = factor.generators.reshape(factor.count, -1).T
            expressions.append(cp.reshape(basis @ coefficients, (factor.dim, factor.dim), order='C'))
            handles.append(coefficients)
        else:
            variable = cp.Variable((factor.dim, factor.dim), hermitian=True)
            if isinstance(factor, PsdBlock):
                constraints.append(variable >> 0)
            expressions.append(variable)
            handles.append(variable)

    terms = [
        cp.real(cp.sum(cp.multiply(program.objective_block(k).T, expressions[k])))
        for k in range(len(expressions)) if program.objective[k] is not None
    ]
    objective = sum(terms) if terms else cp.Constant(0.0)

    for row in program.rows:
        if not row.maps:
            continue
        value = sum(linear_map.apply(expressions[k]) for k, linear_map in row.maps)
        if not isinstance(value, cp.Expression):
            value = cp.Constant(value)
        if row.equality:
            difference = value - row.bound
            if row.dim == 1:
                constraints.append(cp.real(difference) == 0)
            else:
                constraints.append(cp.diag(cp.real(difference)) == 0)
                constraints.append(cp.upper_tri(cp.real(difference)) == 0)
                constraints.append(cp.upper_tri(cp.imag(difference)) == 0)
        else:
            slack = row.bound - value
            if row.dim == 1:
                constraints.append(cp.real(slack) >= 0)
            else:
                constraints.append((slack + slack.H) / 2 >> 0)

    sense = cp.Maximize if program.sense == 'max' else cp.Minimize
    return cp.Problem(sense(objective), constraints), handles


def _run(program, solver, options, verbose):
    """Solve one lowered program; returns (status, values, coefficients, iterations)"""
    problem, handles = _lower(program)
    logger.debug(
        f"Solving {program.sense} program with {len(program.cone.factors)} factors, "
        f"{len(program.rows)} rows, {len(problem.constraints)} cvxpy constraints"
    )
    try:
        problem.solve(solver=solver, verbose=verbose, **options)
    except (cp.error.SolverError, ValueError) as e:
        logger.error(f"Backend {solver} failed: {str(e)}")
        return Status.NUMERICAL_FAILURE, (), {}, 0

    stats = problem.solver_stats
    iterations = int(stats.num_iters) if stats is not None and stats.num_iters is not None else 0
    if problem.status in _INFEASIBLE:
        return Status.INFEASIBLE, (), {}, iterations
    if problem.status in _UNBOUNDED:
        return Status.UNBOUNDED, (), {}, iterations
    if problem.status not in _ACCEPTED:
        return Status.NUMERICAL_FAILURE, (), {}, iterations

    values = []
    coefficients = {}
    for k, (factor, handle) in enumerate(zip(program.cone.factors, handles)):
        if isinstance(factor, FinitelyGenerated):
            if handle is None:
                values.append(np.zeros((factor.dim, factor.dim), dtype=complex))
                continue
            weights = np.asarray(handle.value, dtype=float).reshape(-1)
            coefficients[k] = weights
            values.append(np.einsum('i,ijk->jk', weights, factor.generators))
        else:
            matrix = np.asarray(handle.value, dtype=complex)
            values.append((matrix + matrix.conj().T) / 2)
    return Status.OPTIMAL, tuple(values), coefficients, iterations


def _cone_distance(factor, value, coefficients=None):
    if isinstance(factor, PsdBlock):
        return max(0.0, -min_eigenvalue(value))
    if isinstance(factor, FinitelyGenerated) and coefficients is not None and len(coefficients):
        return max(0.0, -float(np.min(coefficients)))
    return 0.0


def _dual_cone_violation(factor, matrix):
    if isinstance(factor, PsdBlock):
        return max(0.0, -min_eigenvalue(matrix))
    if isinstance(factor, FreeBlock):
        return float(np.max(np.abs(matrix)))
    if factor.count == 0:
        return 0.0
    inner = np.real(np.einsum('ijk,jk->i', factor.generators.conj(), matrix))
    return max(0.0, -float(np.min(inner)))


def certify(program, primal, dual, coefficients=None):
    """Residuals, values and gap of a primal point and row multipliers"""
    coefficients = coefficients or {}
    sign = program.sign
    residuals = {'primal_feasibility': 0.0, 'dual_feasibility': 0.0, 'cone_distance': 0.0}

    for row in program.rows:
        excess = row.evaluate(primal) - row.bound
        scale = 1.0 + np.max(np.abs(row.bound))
        if row.equality:
            violation = float(np.max(np.abs(excess)))
        else:
            violation = max(0.0, max_eigenvalue((excess + excess.conj().T) / 2))
        residuals['primal_feasibility'] = max(residuals['primal_feasibility'], violation / scale)

    for k, factor in enumerate(program.cone.factors):
        residuals['cone_distance'] = max(
            residuals['cone_distance'], _cone_distance(factor, primal[k], coefficients.get(k))
        )
    for row, multiplier in zip(program.rows, dual):
        if not row.equality:
            residuals['cone_distance'] = max(residuals['cone_distance'], max(0.0, -min_eigenvalue(multiplier)))

    gradients = [sign * program.objective_block(k) for k in range(len(program.cone.factors))]
    for row, multiplier in zip(program.rows, dual):
        for k, linear_map in row.maps:
            gradients[k] = gradients[k] + linear_map.adjoint(multiplier)
    for k, factor in enumerate(program.cone.factors):
        scale = 1.0 + np.max(np.abs(program.objective_block(k)))
        residuals['dual_feasibility'] = max(
            residuals['dual_feasibility'], _dual_cone_violation(factor, gradients[k]) / scale
        )

    primal_value = program.value(primal)
    dual_value = float(-sign * sum(np.real(np.vdot(row.bound, w)) for row, w in zip(program.rows, dual)))
    # nonnegative up to tolerance by weak duality
    gap = (dual_value - primal_value) if program.sense == 'max' else (primal_value - dual_value)
    return primal_value, dual_value, gap, residuals


def _polished_primal(program, primal, coefficients):
    """Round a backend primal point onto the cone"""
    values, clipped = [], {}
    for k, (factor, value) in enumerate(zip(program.cone.factors, primal)):
        if isinstance(factor, PsdBlock):
            value = project_psd(value)
        elif k in coefficients:
            clipped[k] = np.clip(coefficients[k], 0.0, None)
            value = np.einsum('i,ijk->jk', clipped[k], factor.generators)
        values.append(value)
    return tuple(values), clipped


def _polished_dual(program, dual):
    """Round row multipliers of inequality rows onto the PSD cone"""
    return tuple(value if row.equality else project_psd(value) for row, value in zip(program.rows, dual))


def _excess(certificate, tol_feas, tol_gap):
    """Largest violation of the acceptance test, as a multiple of its tolerance"""
    primal_value, _, gap, residuals = certificate
    worst = abs(gap) / (tol_gap * (1.0 + abs(primal_value)))
    return max([worst] + [value / tol_feas for value in residuals.values()])


def solve(program, tol_feas=None, tol_gap=None, max_iter=None, verbose=False):
    """
    Solve a program and its dual and certify the pair.

    Backend runs are tried in the order given by ``_attempts`` until some
    primal point and some dual point, taken from any run so far, pass the
    acceptance test. Never raises on a well-formed program; the outcome is
    in ``status``.
    """
    tol_feas = setting('ROBUSTNESS_TOL_FEAS') if tol_feas is None else tol_feas
    tol_gap = setting('ROBUSTNESS_TOL_GAP') if tol_gap is None else tol_gap
    max_iter = setting('ROBUSTNESS_MAX_ITER') if max_iter is None else max_iter
    solver = setting('ROBUSTNESS_SOLVER')

    program.validate()
    dual_program = dualize(program)
    primals, duals = [], []
    best = None
    iterations = 0
    for attempt, (backend, options) in enumerate(_attempts(solver, tol_feas, tol_gap, max_iter)):
        status, primal, coefficients, count = _run(program, backend, options, verbose)
        iterations += count
        if status in (Status.INFEASIBLE, Status.UNBOUNDED):
            logger.warning(f"Primal program ended with status {status.value}")
            return ConicSolution(status=status, iterations=iterations, solver=backend)
        if status != Status.OPTIMAL:
            logger.warning(f"Primal program ended with status {status.value} on {backend}")
            continue
        primals.append((primal, coefficients, backend))
        primals.append((*_polished_primal(program, primal, coefficients), backend))

        dual_status, dual, _, count = _run(dual_program, backend, options, verbose)
        iterations += count
        if dual_status != Status.OPTIMAL:
            logger.warning(f"Dual program ended with status {dual_status.value} on {backend}")
        else:
            duals.extend([(dual, backend), (_polished_dual(program, dual), backend)])

        for (primal, coefficients, primal_backend), (dual, dual_backend) in product(primals, duals):
            certificate = certify(program, primal, dual, coefficients)
            excess = _excess(certificate, tol_feas, tol_gap)
            if best is None or excess < best[0]:
                best = (excess, primal, dual, coefficients, certificate, primal_backend, dual_backend)
        if best is not None and best[0] <= 1.0:
            break
        if best is not None:
            logger.info(f"Attempt {attempt + 1} on {backend} misses the tolerances by a factor {best[0]:.3g}")

    if not primals:
        return ConicSolution(status=Status.NUMERICAL_FAILURE, iterations=iterations, solver=solver)
    if best is None:
        # a finite primal optimum with a failing dual means the pair cannot be certified
        primal, coefficients, backend = primals[0]
        return ConicSolution(
            status=Status.NUMERICAL_FAILURE, value=program.value(primal), primal=primal,
            coefficients=coefficients, iterations=iterations, solver=backend
        )

    excess, primal, dual, coefficients, certificate, primal_backend, dual_backend = best
    primal_value, dual_value, gap, residuals = certificate
    if gap < -tol_gap * (1.0 + abs(primal_value)):
        logger.warning(f"Weak duality violated: primal {primal_value:.12g}, dual {dual_value:.12g}")

    certified = excess <= 1.0
    status = Status.OPTIMAL if certified else Status.NUMERICAL_FAILURE
    if certified:
        logger.info(f"Solved: value {primal_value:.12g}, gap {gap:.3e}")
    else:
        logger.warning(f"Uncertified pair: value {primal_value:.12g}, gap {gap:.3e}, residuals {residuals}")

    return ConicSolution(
        status=status,
        value=primal_value,
        primal=primal,
        dual=dual,
        dual_value=dual_value,
        gap=gap,
        residuals=residuals,
        coefficients=coefficients,
        iterations=iterations,
        solver=primal_backend if primal_backend == dual_backend else f'{primal_backend}/{dual_backend}',
    )
