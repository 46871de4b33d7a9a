"""
Instruments given by the Choi matrices of their subchannels.

The Choi matrix of a map Lambda from d_in to d_out is
J = sum_ij |i><j| (x) Lambda(|i><j|), input factor first, so that
Lambda(rho) = tr_in[(rho^T (x) 1) J].
"""
import logging
from dataclasses import dataclass

import numpy as np

from .conf import setting
from .errors import InvalidObject, InvalidSize, NotSubnormalized, ShapeMismatch
from .hermitian import validate_hermitian, is_psd, min_eigenvalue, eigvalsh
from .objects import PartitionedEnsemble, StateAssemblage, Povm

logger = logging.getLogger('robustness')


def _tensor(choi, dim_in, dim_out):
    # J[i, o, j, p] = Lambda(|i><j|)[o, p]
    return np.asarray(choi).reshape(dim_in, dim_out, dim_in, dim_out)


def apply_choi(choi, dim_in, dim_out, rho):
    return np.einsum('ij,iojp->op', rho, _tensor(choi, dim_in, dim_out))


def adjoint_choi(choi, dim_in, dim_out, effect):
    """Heisenberg picture: tr[Lambda(rho) N] = tr[rho Lambda^dagger(N)]"""
    return np.einsum('iojp,po->ji', _tensor(choi, dim_in, dim_out), effect)


def unitary_choi(unitary):
    # |U>> = sum_i |i> (x) U|i>
    vector = np.asarray(unitary, dtype=complex).T.reshape(-1)
    return np.outer(vector, vector.conj())


@dataclass(frozen=True, eq=False)
class Instrument:
    """Completely positive subchannels summing to a trace-preserving map"""
    chois: np.ndarray
    dim_in: int
    dim_out: int

    @property
    def num_subchannels(self):
        return self.chois.shape[0]

    @classmethod
    def from_chois(cls, chois, dim_in, dim_out, tol=None, field='choi'):
        tol = setting('ROBUSTNESS_TOL_HERMITIAN') * 10 if tol is None else tol
        chois = np.asarray(chois, dtype=complex)
        size = dim_in * dim_out
        if chois.ndim != 3 or chois.shape[1:] != (size, size) or chois.shape[0] < 1:
            raise InvalidObject(
                f"expected Choi matrices of shape (n, {size}, {size}), got {chois.shape}", field
            )
        checked = np.empty_like(chois)
        for k, choi in enumerate(chois):
            choi = validate_hermitian(choi, tol, field=f'{field}[{k}]')
            if not is_psd(choi):
                raise InvalidObject(
                    f"subchannel is not completely positive (min eigenvalue {eigvalsh(choi)[0]:.3e})",
                    f'{field}[{k}]'
                )
            checked[k] = choi
        reduced = np.einsum('iojo->ij', _tensor(checked.sum(axis=0), dim_in, dim_out))
        if np.max(np.abs(reduced - np.eye(dim_in))) > tol * (1.0 + dim_out):
            raise InvalidObject("subchannels do not sum to a trace-preserving map", field)
        checked.setflags(write=False)
        return cls(checked, dim_in, dim_out)

    def apply(self, index, rho):
        return apply_choi(self.chois[index], self.dim_in, self.dim_out, rho)

    def adjoint(self, index, effect):
        return adjoint_choi(self.chois[index], self.dim_in, self.dim_out, effect)

    def linear_map(self, index):
        from .conic import LinearMap
        return LinearMap.from_choi(self.chois[index], self.dim_in, self.dim_out)


def identity_instrument(dim):
    return Instrument(unitary_choi(np.eye(dim))[None], dim, dim)


def phase_instrument(dim, num_phases):
    """
    Uniform mixture of the unitaries U_k = diag(exp(2 pi i k j / K)).

    Each subchannel rho -> U_k rho U_k^dagger / K; together they dephase in
    the computational basis whenever K >= d.
    """
    if dim < 2 or num_phases < 2:
        raise InvalidSize(f"phase instrument needs d >= 2 and K >= 2, got d={dim}, K={num_phases}")
    phases = np.arange(dim)
    chois = np.stack([
        unitary_choi(np.diag(np.exp(2j * np.pi * k * phases / num_phases))) / num_phases
        for k in range(num_phases)
    ])
    return Instrument(chois, dim, dim)


def complete_instrument(chois, filler, tol=None):
    """
    Append the subchannel rho -> tr[(1 - sum_a Lambda_a^dagger(1)) rho] filler.

    ``chois`` are completely positive subchannels whose sum is trace
    non-increasing; the result is a valid instrument.
    """
    tol = setting('ROBUSTNESS_TOL_PSD') if tol is None else tol
    chois = np.asarray(chois, dtype=complex)
    filler = np.asarray(filler, dtype=complex)
    dim_out = filler.shape[0]
    if chois.shape[-1] % dim_out:
        raise ShapeMismatch(f"filler of dimension {dim_out} does not match Choi size {chois.shape[-1]}")
    dim_in = chois.shape[-1] // dim_out

    used = sum(adjoint_choi(choi, dim_in, dim_out, np.eye(dim_out)) for choi in chois)
    deficit = np.eye(dim_in) - used
    deficit = (deficit + deficit.conj().T) / 2
    lowest = min_eigenvalue(deficit)
    if lowest < -tol * (1.0 + np.max(np.abs(used))):
        raise NotSubnormalized(f"subchannels exceed trace preservation by {-lowest:.3e}", 'choi')

    completion = np.kron(deficit.T, filler)
    logger.debug(f"Completed instrument with deficit trace {np.trace(deficit).real:.6g}")
    return Instrument(np.concatenate([chois, completion[None]]), dim_in, dim_out)


def p_succ_subchannel(source, instrument, povm):
    """
    Success probability of guessing the subchannel.

    For a state assemblage the guess x is scored against the setting and the
    subchannel a against the outcome: sum_{a,x} tr[sigma_{a|x} Lambda_a^dagger(N_x)].
    For a single state the guess must name the subchannel:
    sum_a tr[Lambda_a(rho) N_a]. Subchannels or effects without a partner
    contribute nothing.
    """
    if povm.dim != instrument.dim_out:
        raise ShapeMismatch(f"POVM of dimension {povm.dim} after a channel into dimension {instrument.dim_out}")

    if isinstance(source, StateAssemblage):
        if source.dim != instrument.dim_in:
            raise ShapeMismatch(f"assemblage of dimension {source.dim} into an instrument on {instrument.dim_in}")
        if povm.num_outcomes != source.num_settings or instrument.num_subchannels < source.num_outcomes:
            raise ShapeMismatch(
                f"{povm.num_outcomes} guesses and {instrument.num_subchannels} subchannels "
                f"for {source.num_settings} settings and {source.num_outcomes} outcomes"
            )
        total = 0.0
        for x, a in np.ndindex(source.num_settings, source.num_outcomes):
            effect = instrument.adjoint(a, povm.effects[x])
            total += np.real(np.einsum('ij,ji->', source.blocks[x, a], effect))
        return float(total)

    rho = np.asarray(source, dtype=complex)
    if rho.shape != (instrument.dim_in, instrument.dim_in):
        raise ShapeMismatch(f"state of shape {rho.shape} into an instrument on {instrument.dim_in}")
    total = 0.0
    for a in range(min(instrument.num_subchannels, povm.num_outcomes)):
        total += np.real(np.einsum('ij,ji->', instrument.apply(a, rho), povm.effects[a]))
    return float(total)


def ensemble_from_instrument(instrument, rho):
    """The ensemble {Lambda_a(rho)} prepared by running an instrument on a state"""
    blocks = np.stack([instrument.apply(a, rho) for a in range(instrument.num_subchannels)])[None]
    blocks = (blocks + np.conj(np.swapaxes(blocks, -1, -2))) / 2
    return PartitionedEnsemble.from_blocks(blocks)


def computational_povm(dim):
    """Projective measurement {|x><x|}"""
    return Povm(np.eye(dim, dtype=complex)[:, :, None] * np.eye(dim)[:, None, :])
