import logging

import numpy as np
from scipy.special import gammaln

from src.fock_ir import FockSpace, FockState, fock_gaussian_op
from src.gaussian_ir import GaussianOp


def seeded_rng(seed):
    """Counter-based 64-bit generator; the same seed replays the same stream."""
    return np.random.Generator(np.random.Philox(seed))


class ToyStateCreator:
    """
    A utility class for building the small states the tests and experiments feed
    into protocols.

    Single-mode states live on FockSpace(1, cutoff); dual-rail qubits on
    FockSpace(2, cutoff) with alpha|0,1> + beta|1,0>; polarization registers on
    six rails (1H, 1V, 2H, 2V, 3H, 3V).

    Attributes:
        cutoff (int): default per-mode cutoff.
        rng (np.random.Generator): Philox stream for random states.

    Methods:
        vacuum, fock, coherent, squeezed, superposition: single-mode states.
        dual_rail_qubit: time-bin qubit on two rails.
        haar_qubit: random qubit amplitudes.
        polarization_register: qubit photon plus an EPR pair on six rails.
    """

    def __init__(self, cutoff=12, seed=0):
        self.cutoff = cutoff
        self.seed = seed
        self.rng = seeded_rng(seed)

    def _space(self, cutoff, modes=1):
        return FockSpace(modes, cutoff or self.cutoff)

    def vacuum(self, cutoff=None, modes=1):
        return FockState.vacuum(self._space(cutoff, modes))

    def fock(self, n, cutoff=None):
        return FockState.basis(self._space(cutoff), (n,))

    def coherent(self, alpha, cutoff=None):
        """Truncated coherent state, renormalized; the dropped tail is logged."""
        space = self._space(cutoff)
        n = np.arange(space.cutoff)
        alpha = complex(alpha)
        if alpha == 0:
            return FockState.vacuum(space)
        log_mag = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - abs(alpha) ** 2 / 2
        amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
        state = FockState(space, amps)
        logging.debug('======= coherent tail =======: \n%s', 1 - state.norm() ** 2)
        return state.normalize()

    def squeezed(self, r, angle=0.0, cutoff=None):
        return fock_gaussian_op(self.vacuum(cutoff), GaussianOp.squeeze(0, r, angle))

    def superposition(self, coefficients, cutoff=None):
        """sum_n c_n |n>, normalized."""
        space = self._space(cutoff)
        amps = np.zeros(space.cutoff, dtype=complex)
        amps[:len(coefficients)] = coefficients
        return FockState(space, amps).normalize()

    def dual_rail_qubit(self, alpha, beta, cutoff=None):
        """alpha|0,1> + beta|1,0>."""
        space = self._space(cutoff, modes=2)
        amps = np.zeros(space.dim, dtype=complex)
        amps[space.index((0, 1))] = alpha
        amps[space.index((1, 0))] = beta
        return FockState(space, amps).normalize()

    def haar_qubit(self):
        """Haar-random (alpha, beta) from a normalized complex Gaussian pair."""
        v = self.rng.normal(size=2) + 1j * self.rng.normal(size=2)
        v = v / np.linalg.norm(v)
        return complex(v[0]), complex(v[1])

    def random_pure_state(self, space):
        v = self.rng.normal(size=space.dim) + 1j * self.rng.normal(size=space.dim)
        return FockState(space, v).normalize()

    def polarization_register(self, alpha, beta, epr=None, cutoff=3):
        """
        Qubit photon alpha|H>_1 + beta|V>_1 on rails (1H, 1V) times a two-photon
        resource on rails (2H, 2V, 3H, 3V).

        epr maps (polarization of photon 2, polarization of photon 3) to an
        amplitude; the default is the singlet (|H>_2|V>_3 - |V>_2|H>_3)/sqrt(2).
        """
        if epr is None:
            epr = {('H', 'V'): 1 / np.sqrt(2), ('V', 'H'): -1 / np.sqrt(2)}
        rail = {'H': 0, 'V': 1}
        space = FockSpace(6, cutoff)
        amps = np.zeros(space.dim, dtype=complex)
        for pol1, c1 in (('H', alpha), ('V', beta)):
            for (pol2, pol3), c23 in epr.items():
                digits = [0] * 6
                digits[rail[pol1]] = 1
                digits[2 + rail[pol2]] = 1
                digits[4 + rail[pol3]] = 1
                amps[space.index(tuple(digits))] += c1 * c23
        return FockState(space, amps)
