"""
Random quantum objects for property checks.

Every function takes a ``numpy.random.Generator`` so that runs are
reproducible from a seed.
"""
import numpy as np

from .objects import (
    MeasurementAssemblage, Povm, StateAssemblage, assemblage_from_state, enumerate_postprocessings,
    postprocess_joint, lhs_assemblage,
)


def _ginibre(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def _inverse_sqrt(matrix):
    eigenvalues, vectors = np.linalg.eigh(matrix)
    return (vectors / np.sqrt(eigenvalues)) @ vectors.conj().T


def haar_unitary(dim, rng):
    q, r = np.linalg.qr(_ginibre(rng, dim, dim))
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_state(dim, rng, rank=None):
    """Density matrix from the induced measure (full rank by default)"""
    rank = dim if rank is None else rank
    g = _ginibre(rng, dim, rank)
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return (rho + rho.conj().T) / 2


def random_effects(dim, count, rng):
    """Full-rank effects S^{-1/2} A_i S^{-1/2} with S = sum_i A_i"""
    raw = []
    for _ in range(count):
        g = _ginibre(rng, dim, dim)
        raw.append(g @ g.conj().T)
    normalizer = _inverse_sqrt(sum(raw))
    effects = np.stack([normalizer @ a @ normalizer for a in raw])
    return (effects + np.conj(np.swapaxes(effects, -1, -2))) / 2


def random_povm(dim, num_outcomes, rng):
    return Povm(random_effects(dim, num_outcomes, rng))


def random_assemblage(dim, num_outcomes, num_settings, rng):
    return MeasurementAssemblage.from_povms(
        random_povm(dim, num_outcomes, rng) for _ in range(num_settings)
    )


def random_jm_assemblage(dim, num_outcomes, num_settings, rng):
    """Jointly measurable by construction: a random parent POVM coarse-grained"""
    postprocessings = enumerate_postprocessings(num_outcomes, num_settings)
    joint = random_effects(dim, len(postprocessings), rng)
    return postprocess_joint(joint, postprocessings, num_outcomes)


def random_hidden_states(dim, count, rng):
    """Subnormalized states summing to a unit-trace state"""
    weights = rng.dirichlet(np.ones(count))
    return np.stack([w * random_state(dim, rng) for w in weights])


def random_lhs_assemblage(dim, num_outcomes, num_settings, rng):
    postprocessings = enumerate_postprocessings(num_outcomes, num_settings)
    hidden = random_hidden_states(dim, len(postprocessings), rng)
    return lhs_assemblage(hidden, postprocessings, num_outcomes)


def random_state_assemblage(dim, num_outcomes, num_settings, rng):
    """Steering assemblage of a random pure bipartite state under random measurements"""
    vector = _ginibre(rng, dim * dim, 1)[:, 0]
    vector = vector / np.linalg.norm(vector)
    state = np.outer(vector, vector.conj())
    meas = random_assemblage(dim, num_outcomes, num_settings, rng)
    blocks = assemblage_from_state(state, meas).blocks
    return StateAssemblage(blocks)


def conjugate_blocks(blocks, unitary):
    """U B U^dagger for every block of a (|x|, |a|, d, d) array"""
    return np.einsum('ij,xajk,lk->xail', unitary, np.asarray(blocks), unitary.conj())
