"""
Robustness oracle, independent of the conic solver and of the cone encodings.

Joint measurability and local hidden states are written out from their
definitions: for a trial value s = 1 + t,

    sum_{lambda: lambda(x) = a} G_lambda - S_{a|x} = M_{a|x},
    sum_lambda G_lambda = s 1       (joint measurability)
    tr sum_lambda G_lambda = s      (local hidden states)
    G_lambda >= 0,  S_{a|x} >= 0

is attacked by alternating projections in real Hilbert-Schmidt
coordinates, and bisection on s locates the threshold. Every iterate is
rounded to an exactly feasible point, so the smallest rounded value is a
certified upper bound on 1 + t.

A finitely generated set is handled by the linear program over generator
mixtures, min sum_i w_i c_i over c >= 0, where blockwise domination is
imposed through cuts <v| sum_i c_i T_i - M |v> >= 0 at the eigenvectors
of violated blocks. The LP value is a lower bound on 1 + t and the
rounded mixture an upper bound.
"""
import logging
from dataclasses import dataclass

import cvxpy as cp
import numpy as np
import scipy.linalg
import scipy.optimize

from .conf import setting
from .errors import KindMismatch, ShapeMismatch, SolverFailure
from .free_sets import FreeSetKind, ObjectClass
from .hermitian import hvec, unhvec, max_eigenvalue, project_psd
from .objects import MeasurementAssemblage, enumerate_postprocessings

logger = logging.getLogger('robustness')

_OBJECT_CLASS = {
    FreeSetKind.JOINTLY_MEASURABLE: ObjectClass.MEASUREMENT,
    FreeSetKind.LOCAL_HIDDEN_STATE: ObjectClass.STATE_ASSEMBLAGE,
}


@dataclass(frozen=True)
class OracleResult:
    # certified: the true robustness never exceeds ``upper``
    upper: float
    estimate: float
    iterations: int


def dominating_scale(blocks, completed):
    """Smallest kappa >= 1 with kappa * completed >= blocks blockwise, or inf"""
    kappa = 1.0
    for x, a in np.ndindex(blocks.shape[:2]):
        try:
            top = scipy.linalg.eigh(blocks[x, a], completed[x, a], eigvals_only=True)[-1]
        except np.linalg.LinAlgError:
            return np.inf
        kappa = max(kappa, float(top))
    return kappa


class AlternatingProjectionOracle:
    SUPPORTED = (FreeSetKind.JOINTLY_MEASURABLE, FreeSetKind.LOCAL_HIDDEN_STATE, FreeSetKind.FINITELY_GENERATED)

    def __init__(self, iterations=800, bisection_steps=25, tolerance=1e-6, mixing=1e-7,
                 cut_rounds=500, cut_tolerance=1e-9):
        self.iterations = iterations
        self.bisection_steps = bisection_steps
        self.tolerance = tolerance
        self.mixing = mixing
        self.cut_rounds = cut_rounds
        self.cut_tolerance = cut_tolerance

    def robustness(self, obj, spec):
        if spec.kind not in self.SUPPORTED or spec.object_class == ObjectClass.STATE_ENSEMBLE:
            raise KindMismatch(f"the oracle does not handle {spec.kind.value} on {spec.object_class.value}")
        if spec.kind in _OBJECT_CLASS and spec.object_class != _OBJECT_CLASS[spec.kind]:
            raise KindMismatch(f"{spec.kind.value} is not defined for {spec.object_class.value}")
        if tuple(spec.shape) != tuple(obj.shape):
            raise ShapeMismatch(f"free set of shape {spec.shape} for an object of shape {obj.shape}")
        blocks = np.asarray(obj.effects if isinstance(obj, MeasurementAssemblage) else obj.blocks)
        if spec.kind == FreeSetKind.FINITELY_GENERATED:
            return self._generated(blocks, spec)
        return self._projected(blocks, spec)

    def _projected(self, blocks, spec):
        run = _ProjectionRun(blocks, spec.kind == FreeSetKind.JOINTLY_MEASURABLE, self.mixing)

        lo, hi = 1.0, run.round(run.seed_point(1.0))
        best = hi
        z = run.seed_point(hi)
        total = 0
        for _ in range(self.bisection_steps):
            s = (lo + hi) / 2
            z, distance = run.project(z, s, self.iterations)
            total += self.iterations
            best = min(best, run.round(z))
            if distance <= self.tolerance * (1.0 + s):
                hi = s
            else:
                lo = s
            hi = max(lo, min(hi, best))
            logger.debug(f"Oracle s={s:.8f} distance={distance:.3e} best={best:.10f}")

        return OracleResult(upper=best - 1.0, estimate=(lo + hi) / 2 - 1.0, iterations=total)

    def _generated(self, blocks, spec):
        generators = np.asarray(spec.generators, dtype=complex)
        num_settings, num_outcomes, dim = blocks.shape[0], blocks.shape[1], blocks.shape[-1]
        size = dim * num_settings if spec.object_class == ObjectClass.MEASUREMENT else num_settings
        weights = np.einsum('nxaii->n', generators).real / size
        mixture = np.einsum('nxaij->xaij', generators) / weights.sum()

        def cut(x, a, vector):
            row = np.real(np.einsum('i,nij,j->n', vector.conj(), generators[:, x, a], vector))
            return -row, -float(np.real(vector.conj() @ blocks[x, a] @ vector))

        cuts = [cut(x, a, v) for x, a in np.ndindex(num_settings, num_outcomes) for v in np.eye(dim, dtype=complex)]
        cuts += [
            cut(x, a, v) for x, a in np.ndindex(num_settings, num_outcomes)
            for v in np.linalg.eigh(blocks[x, a])[1].T
        ]

        upper, lower = np.inf, 0.0
        for rounds in range(1, self.cut_rounds + 1):
            rows, bounds = zip(*cuts)
            ret = scipy.optimize.linprog(
                weights, A_ub=np.array(rows), b_ub=np.array(bounds), bounds=(0, None), method='highs',
                options={'primal_feasibility_tolerance': 1e-10, 'dual_feasibility_tolerance': 1e-10},
            )
            if ret.status != 0:
                logger.error(f"Generator LP failed: {ret.message}")
                raise SolverFailure(f"generator LP ended with status {ret.status}: {ret.message}")
            lower = max(lower, float(ret.fun))
            value = float(weights @ ret.x)
            completed = np.einsum('n,nxaij->xaij', ret.x, generators)
            extra = self.mixing * max(value, 1.0)
            upper = min(upper, dominating_scale(blocks, completed + extra * mixture) * (value + extra))
            if upper - lower <= self.cut_tolerance * (1.0 + lower):
                break

            added = 0
            for x, a in np.ndindex(num_settings, num_outcomes):
                eigenvalues, vectors = np.linalg.eigh(completed[x, a] - blocks[x, a])
                for eigenvalue, vector in zip(eigenvalues, vectors.T):
                    if eigenvalue < -1e-14:
                        cuts.append(cut(x, a, vector))
                        added += 1
            if not added:
                break
            logger.debug(f"Oracle round {rounds}: lower={lower:.12f} upper={upper:.12f} cuts={len(cuts)}")

        return OracleResult(upper=upper - 1.0, estimate=lower - 1.0, iterations=rounds)


class _ProjectionRun:
    """Affine data and cone projections of one joint-measurability or hidden-state problem"""

    def __init__(self, blocks, proportional, mixing):
        self.blocks = blocks
        self.proportional = proportional
        self.mixing = mixing
        num_settings, num_outcomes, dim = blocks.shape[0], blocks.shape[1], blocks.shape[-1]
        self.dim = dim
        self.postprocessings = enumerate_postprocessings(num_outcomes, num_settings)
        self.count = len(self.postprocessings)
        # JM: value is tr[sum G] / d, hidden states: tr[sum G]
        self.normalization = 1.0 / dim if proportional else 1.0
        self.seed = np.eye(dim, dtype=complex) / (self.count * dim * self.normalization)
        self.size = (self.count + num_settings * num_outcomes) * dim ** 2
        self._build_affine()

    def _build_affine(self):
        square = self.dim ** 2
        unit = np.eye(square)
        identity = hvec(np.eye(self.dim))
        rows, offsets, directions = [], [], []
        for slack, (x, a) in enumerate(np.ndindex(self.blocks.shape[:2]), start=self.count):
            row = np.zeros((square, self.size))
            for k, pp in enumerate(self.postprocessings):
                if pp(x) == a:
                    row[:, k * square:(k + 1) * square] = unit
            row[:, slack * square:(slack + 1) * square] = -unit
            rows.append(row)
            offsets.append(hvec(self.blocks[x, a]))
            directions.append(np.zeros(square))

        if self.proportional:
            row = np.zeros((square, self.size))
            row[:, :self.count * square] = np.tile(unit, self.count)
            rows.append(row)
            offsets.append(np.zeros(square))
            directions.append(identity)
        else:
            row = np.zeros((1, self.size))
            row[0, :self.count * square] = np.tile(identity, self.count)
            rows.append(row)
            offsets.append(np.zeros(1))
            directions.append(np.ones(1))

        self.matrix = np.vstack(rows)
        self.offset = np.concatenate(offsets)
        self.direction = np.concatenate(directions)
        self.inverse = scipy.linalg.pinv(self.matrix)

    def hidden(self, z):
        return unhvec(z[:self.count * self.dim ** 2].reshape(self.count, -1), self.dim)

    def coarse_grain(self, hidden):
        completed = np.zeros(self.blocks.shape, dtype=complex)
        for k, pp in enumerate(self.postprocessings):
            for x, a in enumerate(pp.assignment):
                completed[x, a] += hidden[k]
        return completed

    def value(self, hidden):
        return float(self.normalization * np.real(np.einsum('kii->', hidden)))

    def seed_point(self, s):
        """Hidden blocks s * seed, with zero slack"""
        z = np.zeros(self.size)
        z[:self.count * self.dim ** 2] = np.tile(hvec(s * self.seed), self.count)
        return z

    def project_cone(self, z):
        stack = unhvec(z.reshape(-1, self.dim ** 2), self.dim)
        return hvec(project_psd(stack)).reshape(-1)

    def project(self, z, s, iterations):
        target = self.offset + s * self.direction
        affine = z
        for _ in range(iterations):
            affine = z - self.inverse @ (self.matrix @ z - target)
            z = self.project_cone(affine)
        return z, float(np.linalg.norm(affine - z))

    def round(self, z):
        """Value of an exactly feasible point built from a cone iterate"""
        hidden = self.hidden(z)
        if self.proportional:
            total = hidden.sum(axis=0)
            hidden[0] = hidden[0] + max_eigenvalue(total) * np.eye(self.dim) - total
        # a little of the seed keeps every block invertible
        hidden = hidden + self.mixing * max(self.value(hidden), 1.0) * self.seed
        return dominating_scale(self.blocks, self.coarse_grain(hidden)) * self.value(hidden)


def coherence_robustness(rho):
    """
    Robustness of coherence of a state as its own program:
    min tr[delta] - 1 over diagonal delta >= rho.
    """
    rho = np.asarray(rho, dtype=complex)
    weights = cp.Variable(rho.shape[0], nonneg=True)
    slack = cp.diag(weights) - rho
    problem = cp.Problem(cp.Minimize(cp.sum(weights) - 1), [(slack + slack.H) / 2 >> 0])
    problem.solve(solver=setting('ROBUSTNESS_SOLVER'))
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverFailure(f"coherence program ended with status {problem.status}")
    return max(float(problem.value), 0.0)
