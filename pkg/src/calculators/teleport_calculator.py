import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from src.calculators.measurement_calculator import DEFAULT_POINTS, QuadratureGrid, bell_dv_coincidence
from src.calculators.metrics_calculator import fidelity, qubit_population
from src.errors import ParameterRangeError, SpaceMismatchError, UnknownKindError
from src.fock_ir import Channel, FockSpace, FockState, apply_channel, moments, partial_trace
from src.gaussian_ir import (
    GaussianOp,
    GaussianState,
    VACUUM_VARIANCE,
    gaussian_feedforward,
    gaussian_ops,
    product,
)
from src.util.fock_util import beamsplitter_amplitudes, displacement_matrices, hermite_functions, quadrature_table
from src.util.toy_states import ToyStateCreator

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)

BACKENDS = ('fock', 'gaussian')
EPR_TAIL_TOLERANCE = 1e-6
CHUNK = 4


@dataclass(frozen=True)
class TeleportSpec:
    """
    Parameters of one CV teleporter.

    Attributes:
        r (float): EPR squeezing, r >= 0.
        g (float): classical gain, g >= 0.
        grid (QuadratureGrid, optional): Bell-outcome grid; chosen from the
            input moments when omitted.
        backend (str): 'fock' or 'gaussian'.
    """
    r: float
    g: float
    grid: QuadratureGrid = None
    backend: str = 'fock'

    def __post_init__(self):
        if self.r < 0:
            raise ParameterRangeError(f"squeezing must be non-negative, got {self.r}")
        if self.g < 0:
            raise ParameterRangeError(f"gain must be non-negative, got {self.g}")
        if self.backend not in BACKENDS:
            raise UnknownKindError(f"unknown backend {self.backend!r}")

    @classmethod
    def tuned(cls, r, grid=None, backend='fock'):
        """g = tanh r, the gain at which the teleporter is a pure loss channel."""
        return cls(r, float(np.tanh(r)), grid, backend)

    @property
    def loss_equivalent(self):
        """Transmissivity tanh^2 r of the matching loss channel."""
        return float(np.tanh(self.r) ** 2)


def loss_kraus(eta, cutoff):
    """
    Kraus operators of the pure loss channel on a truncated mode.

    K_k = sum_n sqrt(C(n, k)) eta^((n-k)/2) (1-eta)^(k/2) |n-k><n|.
    """
    if not 0.0 <= eta <= 1.0:
        raise ParameterRangeError(f"transmissivity {eta} outside [0, 1]")
    kraus = np.zeros((cutoff, cutoff, cutoff))
    for k in range(cutoff):
        n = np.arange(k, cutoff)
        log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        amps = np.exp(0.5 * log_binom) * np.power(eta, (n - k) / 2.0) * np.power(1.0 - eta, k / 2.0)
        kraus[k, n - k, n] = amps
    return kraus


@dataclass(frozen=True)
class LossChannel:
    """Pure loss of transmissivity eta in [0, 1]."""
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterRangeError(f"transmissivity {self.eta} outside [0, 1]")

    def kraus(self, cutoff):
        return loss_kraus(self.eta, cutoff)

    def channel(self, cutoff):
        return loss_channel(self.eta, cutoff)

    def is_trace_preserving(self, cutoff, tol=1e-8):
        K = self.kraus(cutoff)
        total = np.einsum('kab,kac->bc', K, K)
        return bool(np.max(np.abs(total - np.eye(cutoff))) < tol)

    def apply_gaussian(self, state):
        """mean -> sqrt(eta) mean, cov -> eta cov + (1 - eta) I / 2 on every mode."""
        eta = self.eta
        return GaussianState(np.sqrt(eta) * state.mean,
                             eta * state.cov + (1 - eta) * VACUUM_VARIANCE * np.eye(state.mean.size))


@lru_cache(maxsize=32)
def loss_channel(eta, cutoff):
    return Channel.from_kraus(loss_kraus(eta, cutoff), label=f"loss(eta={eta:.6g})")


def apply_loss(state, eta, modes=None):
    """
    Pure loss on the listed modes (all modes by default).

    Fock inputs come back as a FockDensity; GaussianState inputs stay Gaussian.
    """
    channel = LossChannel(eta)
    if isinstance(state, GaussianState):
        if modes is not None and len(modes) != state.modes:
            raise SpaceMismatchError("Gaussian loss is applied to every mode")
        return channel.apply_gaussian(state)
    modes = range(state.space.modes) if modes is None else modes
    rho = state.to_density() if isinstance(state, FockState) else state
    tensor = channel.channel(state.space.cutoff)
    for m in modes:
        rho = apply_channel(rho, tensor, m)
    return rho


def epr_amplitudes(r, count):
    """Schmidt coefficients sqrt(1 - lambda^2) lambda^k of the EPR pair, lambda = tanh r."""
    lam = np.tanh(r)
    k = np.arange(count)
    return np.sqrt(1.0 - lam ** 2) * np.power(lam, k)


def make_epr(r, backend='gaussian', cutoff=16):
    """
    EPR resource: a p-squeezed and an x-squeezed vacuum mixed on a 50:50 beam splitter.

    Var(x1 - x2) = Var(p1 + p2) = e^{-2r}. The Gaussian backend builds it
    from the op-specs; the Fock backend writes the same pure state through
    its Schmidt form sum_k sqrt(1 - lambda^2) lambda^k |k, k>, truncated to
    the cutoff and renormalized.
    """
    if r < 0:
        raise ParameterRangeError(f"squeezing must be non-negative, got {r}")
    if backend == 'gaussian':
        pair = product(GaussianState.squeezed(r, np.pi / 2), GaussianState.squeezed(r, 0.0))
        return gaussian_ops(pair, GaussianOp.beamsplit(0, 1, 0.5))
    if backend != 'fock':
        raise UnknownKindError(f"unknown backend {backend!r}")
    space = FockSpace(2, cutoff)
    amps = np.zeros((cutoff, cutoff), dtype=complex)
    amps[np.arange(cutoff), np.arange(cutoff)] = epr_amplitudes(r, cutoff)
    state = FockState(space, amps.reshape(-1))
    logging.debug('======= make_epr truncation =======: \n%s', 1 - state.norm() ** 2)
    return state.normalize()


def epr_cutoff(r, cutoff, tol=EPR_TAIL_TOLERANCE):
    """Smallest Schmidt rank with lambda^{2k} < tol, clamped to [cutoff, 4 cutoff]."""
    lam2 = np.tanh(r) ** 2
    if lam2 <= 0:
        return cutoff
    k = int(np.ceil(np.log(tol) / np.log(lam2)))
    return int(min(max(k, cutoff), 4 * cutoff))


def default_grid(input_variances, r, points=DEFAULT_POINTS):
    """
    Bell-outcome grid covering six standard deviations of both outcomes.

    Var u = (Var x_in + cosh(2r)/2) / 2 and Var v = (Var p_in + cosh(2r)/2) / 2.
    """
    var_x, var_p = input_variances
    epr = np.cosh(2 * r) / 2
    largest = max((var_x + epr) / 2, (var_p + epr) / 2)
    return QuadratureGrid.default_for(np.sqrt(largest), points)


def _input_variances(rho, modes):
    out = []
    for m in modes:
        cov = moments(partial_trace(rho, [m])).cov
        out.append((cov[0, 0], cov[1, 1]))
    return max(v[0] for v in out), max(v[1] for v in out)


@lru_cache(maxsize=16)
def teleport_channel(r, g, cutoff, half_width, points=DEFAULT_POINTS):
    """
    Fock transfer tensor of the CV teleporter, integrated over the Bell outcomes.

    For input |n1> and Bell outcomes (u, v) the unnormalized output is
    K(u, v)|n1> = D(g (u + i v)) A(u, v)|n1> where

        A(u, v)[k, n1] = c_k sum_i B(n1, k)_i psi_i(u) (-i)^j psi_j(v),  j = n1 + k - i

    with c_k the EPR Schmidt coefficients and B(n1, k) the 50:50 amplitudes of
    |n1, k> -> |i, j>. The EPR pair is kept to an internal rank wider than the
    cutoff and the displacement elements are exact for that rank.

    Args:
        r (float): EPR squeezing.
        g (float): gain.
        cutoff (int): per-mode cutoff of input and output.
        half_width (float): Bell grid half-width L.
        points (int): grid points per outcome.

    Returns:
        Channel: transfer tensor E[m, n, m', n'].
    """
    grid = QuadratureGrid(half_width, points)
    N = cutoff
    Ni = epr_cutoff(r, N)
    Nb = N + Ni - 1
    coeffs = epr_amplitudes(r, Ni)

    T = np.zeros((N, Nb, Nb, Ni))
    for n1 in range(N):
        for k in range(Ni):
            amps = beamsplitter_amplitudes(n1, k, 0.5) * coeffs[k]
            i = np.arange(amps.size)
            T[n1, i, n1 + k - i, k] = amps

    values = grid.values
    H = hermite_functions(Nb, values).T
    P = quadrature_table(Nb, values, np.pi / 2)
    acc = np.zeros((N * N, N * N), dtype=complex)
    for start in range(0, points, CHUNK):
        u = values[start:start + CHUNK]
        Tu = np.tensordot(H[start:start + CHUNK], T, axes=([1], [1]))   # (c, n1, j, k)
        A = np.tensordot(P, Tu, axes=([1], [2]))                        # (v, c, n1, k)
        A = np.transpose(A, (1, 0, 3, 2))                               # (c, v, k, n1)
        betas = g * (u[:, None] + 1j * values[None, :])
        D = displacement_matrices(betas, N, Ni)                         # (c, v, m, k)
        K = D @ A                                                       # (c, v, m, n1)
        Kf = K.reshape(-1, N * N)
        acc += Kf.T @ Kf.conj()
    E = acc.reshape(N, N, N, N).transpose(0, 2, 1, 3) * grid.spacing ** 2
    channel = Channel(E, label=f"teleport(r={r:.6g}, g={g:.6g})")
    logging.debug('======= teleport_channel worst trace deficit =======: \n%s',
                  float(np.max(np.abs(channel.trace_deficits()))))
    return channel


def resolve_grid(spec, rho, modes):
    if spec.grid is not None:
        return spec.grid
    return default_grid(_input_variances(rho, modes), spec.r)


def cv_teleport(state, spec, mode=0):
    """
    Teleport one mode through an EPR pair of squeezing r with gain g.

    Steps: attach EPR(r), 50:50 Bell measurement of the input and the near EPR
    half, displacement of the far half by x -> x + g sqrt(2) u, p -> p + g sqrt(2) v,
    and integration over all outcomes.

    Args:
        state: FockState/FockDensity (fock backend) or single-mode GaussianState.
        spec (TeleportSpec): r, g, grid and backend.
        mode (int): teleported mode of a Fock register.

    Returns:
        FockDensity or GaussianState: the output, trace 1.
    """
    if spec.backend == 'gaussian' or isinstance(state, GaussianState):
        if not isinstance(state, GaussianState):
            raise SpaceMismatchError("the gaussian backend teleports a GaussianState")
        if state.modes != 1:
            raise SpaceMismatchError("the gaussian teleporter takes a single-mode input")
        full = gaussian_ops(product(state, make_epr(spec.r)), GaussianOp.beamsplit(0, 1, 0.5))
        gain = spec.g * np.sqrt(2.0) * np.eye(2)
        return gaussian_feedforward(full, [(0, 0.0), (1, np.pi / 2)], gain)

    rho = state.to_density() if isinstance(state, FockState) else state
    rho.space.check_mode(mode)
    grid = resolve_grid(spec, rho, [mode])
    channel = teleport_channel(float(spec.r), float(spec.g), rho.space.cutoff,
                               float(grid.half_width), int(grid.points))
    logging.debug('======= cv_teleport grid =======: \n%s', grid)
    return apply_channel(rho, channel, mode)


def timebin_teleport(state, spec):
    """
    Teleport a two-rail time-bin qubit rail by rail.

    Population outside {|0,0>, |0,1>, |1,0>, |1,1>} is reported as a warning.
    Both rails share one grid so a single cached channel serves them.
    """
    if spec.backend != 'fock':
        raise UnknownKindError("time-bin qubits are teleported on the fock backend")
    if state.space.modes != 2:
        raise SpaceMismatchError(f"time-bin qubits live on two rails, got {state.space.modes}")
    rho = state.to_density() if isinstance(state, FockState) else state
    N = rho.space.cutoff
    diag = np.real(np.diag(rho.matrix)).reshape(N, N)
    outside = float(diag.sum() - diag[:2, :2].sum())
    if outside > 1e-10:
        logging.warning('timebin_teleport: %.3e of the input lies outside the qubit sector', outside)
    grid = resolve_grid(spec, rho, [0, 1])
    channel = teleport_channel(float(spec.r), float(spec.g), N, float(grid.half_width), int(grid.points))
    for rail in (0, 1):
        rho = apply_channel(rho, channel, rail)
    return rho


def degrade_input(state, population):
    """Per-rail loss that lowers a single-photon qubit's population to the target."""
    return apply_loss(state, population)


def fidelity_estimators(output, target):
    """
    Candidate transfer-fidelity estimators for a time-bin output; informational only.

    Returns:
        dict: two_mode_fidelity <psi|rho|psi>, qubit_population, and the
        qubit-conditioned fidelity <psi|rho|psi> / qubit_population.
    """
    full = fidelity(target, output)
    pop = qubit_population(output)
    return {
        "two_mode_fidelity": full,
        "qubit_population": pop,
        "qubit_conditioned_fidelity": full / pop if pop > 0 else 0.0,
    }


def teleport_dv(alpha, beta, epr=None):
    """
    Polarization-qubit teleportation with a singlet resource and a coincidence
    Bell measurement; no feedforward is applied.

    Args:
        alpha, beta (complex): input qubit alpha|H> + beta|V>.
        epr (dict, optional): resource amplitudes; the singlet by default.

    Returns:
        tuple: (FockDensity of photon 3 on rails (H, V), success probability).
    """
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-10:
        raise ParameterRangeError(f"qubit amplitudes are not normalized: {alpha}, {beta}")
    register = ToyStateCreator(cutoff=3).polarization_register(alpha, beta, epr=epr)
    rho, probability = bell_dv_coincidence(register)
    logging.debug('======= teleport_dv success probability =======: \n%s', probability)
    return rho, probability


def polarization_target(alpha, beta, cutoff=3):
    """alpha|H> + beta|V> on rails (H, V), i.e. alpha|1,0> + beta|0,1>."""
    return ToyStateCreator(cutoff=cutoff).dual_rail_qubit(beta, alpha)
