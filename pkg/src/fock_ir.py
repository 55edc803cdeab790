import json
import logging
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm

from src.errors import (
    LeakageError,
    ModeIndexError,
    NonHermitianError,
    ParameterRangeError,
    SpaceMismatchError,
    UnknownKindError,
)
from src.gaussian_ir import GaussianOp, GaussianState
from src.util.fock_util import beamsplitter_matrix, displacement_matrix

HERMITIAN_TOL = 1e-10
LEAKAGE_THRESHOLD = 1e-6
DEFAULT_PAD = 10

OPERATOR_KINDS = ('a', 'adag', 'n', 'x', 'p', 'custom')


@dataclass(frozen=True)
class FockSpace:
    """
    M bosonic modes, each truncated to the Fock levels |0> .. |N-1>.

    Basis vectors are indexed by the mode-major digit expansion of the
    occupation numbers: mode 0 is the most significant digit, which is the
    ordering np.kron produces.
    """
    modes: int
    cutoff: int

    def __post_init__(self):
        if self.modes < 1 or self.cutoff < 1:
            raise ParameterRangeError(f"need modes >= 1 and cutoff >= 1, got {self.modes}, {self.cutoff}")

    @property
    def dim(self):
        return self.cutoff ** self.modes

    @property
    def shape(self):
        return (self.cutoff,) * self.modes

    def check_mode(self, mode):
        if not 0 <= mode < self.modes:
            raise ModeIndexError(f"mode {mode} outside register of {self.modes} modes")

    def require_same(self, other):
        if self != other:
            raise SpaceMismatchError(f"space mismatch: {self} vs {other}")

    def index(self, digits):
        """Flat basis index of an occupation-number tuple."""
        if len(digits) != self.modes or any(not 0 <= d < self.cutoff for d in digits):
            raise ModeIndexError(f"occupation {digits} outside {self}")
        return int(np.ravel_multi_index(tuple(digits), self.shape))


def _frozen(array, dtype=complex):
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


def _contract(tensor, op, axes, cutoff):
    """Apply a k-mode matrix to the given axes of a state or density tensor."""
    k = len(axes)
    op_t = op.reshape((cutoff,) * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


class FockState:
    """
    Pure state over a FockSpace.

    Attributes:
        space (FockSpace): the register.
        amplitudes (np.ndarray): complex vector of length N^M, read-only.
    """

    def __init__(self, space, amplitudes):
        amplitudes = _frozen(amplitudes).reshape(-1)
        if amplitudes.size != space.dim:
            raise SpaceMismatchError(f"{amplitudes.size} amplitudes for a space of dimension {space.dim}")
        self.space = space
        self.amplitudes = amplitudes

    def __repr__(self):
        return f"FockState(modes={self.space.modes}, cutoff={self.space.cutoff}, norm={self.norm():.6g})"

    @property
    def tensor(self):
        return self.amplitudes.reshape(self.space.shape)

    @classmethod
    def basis(cls, space, digits):
        amps = np.zeros(space.dim, dtype=complex)
        amps[space.index(digits)] = 1.0
        return cls(space, amps)

    @classmethod
    def vacuum(cls, space):
        return cls.basis(space, (0,) * space.modes)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self):
        n = self.norm()
        if n == 0:
            raise ParameterRangeError("cannot normalize the zero vector")
        return FockState(self.space, self.amplitudes / n)

    def populations(self, mode):
        """Photon-number distribution of one mode."""
        self.space.check_mode(mode)
        probs = np.abs(np.moveaxis(self.tensor, mode, 0)) ** 2
        return probs.reshape(self.space.cutoff, -1).sum(axis=1) / max(self.norm() ** 2, 1e-300)

    def leakage(self):
        """Largest top-level population over all modes."""
        return max(float(self.populations(m)[-1]) for m in range(self.space.modes))

    def to_density(self):
        return FockDensity(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))

    def to_json(self):
        return json.dumps({
            "modes": self.space.modes,
            "cutoff": self.space.cutoff,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        })

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        space = FockSpace(data["modes"], data["cutoff"])
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        return cls(space, amps)


class FockDensity:
    """
    Density operator over a FockSpace, stored as a dense N^M x N^M matrix.
    """

    def __init__(self, space, matrix):
        matrix = _frozen(matrix)
        if matrix.shape != (space.dim, space.dim):
            raise SpaceMismatchError(f"matrix of shape {matrix.shape} for a space of dimension {space.dim}")
        self.space = space
        self.matrix = matrix

    def __repr__(self):
        return f"FockDensity(modes={self.space.modes}, cutoff={self.space.cutoff}, trace={self.trace():.6g})"

    @property
    def tensor(self):
        return self.matrix.reshape(self.space.shape * 2)

    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def normalize(self):
        t = self.trace()
        if t <= 0:
            raise ParameterRangeError("cannot normalize a density with non-positive trace")
        return FockDensity(self.space, self.matrix / t)

    def is_valid(self, tol=1e-10, eig_tol=1e-8):
        """Hermitian, unit trace and positive semidefinite within tolerance."""
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T)) < tol
        unit = abs(self.trace() - 1.0) < tol
        psd = np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min() >= -eig_tol
        return bool(herm and unit and psd)

    def populations(self, mode):
        self.space.check_mode(mode)
        reduced = partial_trace(self, [mode]).matrix
        return np.real(np.diag(reduced)) / max(self.trace(), 1e-300)

    def leakage(self):
        return max(float(self.populations(m)[-1]) for m in range(self.space.modes))

    def to_json(self):
        return json.dumps({
            "modes": self.space.modes,
            "cutoff": self.space.cutoff,
            "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in self.matrix],
        })

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        space = FockSpace(data["modes"], data["cutoff"])
        matrix = np.array([[complex(re, im) for re, im in row] for row in data["matrix"]])
        return cls(space, matrix)


class ModeOperator:
    """
    Operator on a FockSpace.

    Attributes:
        space (FockSpace): the register it acts on.
        matrix (np.ndarray): dense N^M x N^M matrix.
        label (str): one of OPERATOR_KINDS.
    """

    def __init__(self, space, matrix, label='custom'):
        if label not in OPERATOR_KINDS:
            raise UnknownKindError(f"unknown operator label {label!r}")
        matrix = _frozen(matrix)
        if matrix.shape != (space.dim, space.dim):
            raise SpaceMismatchError(f"matrix of shape {matrix.shape} for a space of dimension {space.dim}")
        self.space = space
        self.matrix = matrix
        self.label = label

    def __repr__(self):
        return f"ModeOperator({self.label}, modes={self.space.modes}, cutoff={self.space.cutoff})"

    def __matmul__(self, other):
        self.space.require_same(other.space)
        return ModeOperator(self.space, self.matrix @ other.matrix)

    def dagger(self):
        return ModeOperator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol=HERMITIAN_TOL):
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) < tol)

    def is_unitary(self, tol=1e-8):
        eye = np.eye(self.space.dim)
        return bool(np.max(np.abs(self.matrix @ self.matrix.conj().T - eye)) < tol)


def single_mode_matrix(kind, cutoff):
    """The N x N matrix of a, a^dag, n, x or p."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
    if kind == 'a':
        return a
    if kind == 'adag':
        return a.conj().T
    if kind == 'n':
        return np.diag(np.arange(cutoff)).astype(complex)
    if kind == 'x':
        return (a + a.conj().T) / np.sqrt(2.0)
    if kind == 'p':
        return 1j * (a.conj().T - a) / np.sqrt(2.0)
    raise UnknownKindError(f"unknown operator kind {kind!r}")


def make_operator(space, mode, kind, matrix=None):
    """
    Single-mode operator embedded on one mode through identity tensor factors.

    Args:
        space (FockSpace): the register.
        mode (int): target mode.
        kind (str): 'a', 'adag', 'n', 'x', 'p' or 'custom'.
        matrix (array_like, optional): N x N matrix for kind 'custom'.

    Returns:
        ModeOperator: the embedded operator.
    """
    space.check_mode(mode)
    if kind == 'custom':
        if matrix is None:
            raise UnknownKindError("kind 'custom' needs an explicit single-mode matrix")
        local = np.asarray(matrix, dtype=complex)
        if local.shape != (space.cutoff, space.cutoff):
            raise SpaceMismatchError(f"custom matrix of shape {local.shape} for cutoff {space.cutoff}")
    else:
        local = single_mode_matrix(kind, space.cutoff)
    factors = [np.eye(space.cutoff)] * space.modes
    factors[mode] = local
    return ModeOperator(space, reduce(np.kron, factors), kind)


def unitary_from_generator(H, t):
    """
    exp(-i H t) for a Hermitian generator.

    Raises:
        NonHermitianError: when H deviates from Hermitian by more than 1e-10.
    """
    if not H.is_hermitian():
        raise NonHermitianError(f"generator {H.label} is not Hermitian")
    return ModeOperator(H.space, expm(-1j * t * H.matrix), 'custom')


def apply(U, state):
    """|psi> -> U|psi> or rho -> U rho U^dag."""
    U.space.require_same(state.space)
    if isinstance(state, FockState):
        return FockState(state.space, U.matrix @ state.amplitudes)
    if isinstance(state, FockDensity):
        return FockDensity(state.space, U.matrix @ state.matrix @ U.matrix.conj().T)
    raise SpaceMismatchError(f"cannot apply an operator to {type(state).__name__}")


def apply_local(local, state, modes):
    """
    Apply a k-mode matrix (N^k x N^k, mode-major) to the listed modes of a state or density.
    """
    space = state.space
    modes = list(modes)
    for m in modes:
        space.check_mode(m)
    if len(set(modes)) != len(modes):
        raise ModeIndexError(f"repeated modes {modes}")
    local = np.asarray(local, dtype=complex)
    N = space.cutoff
    if local.shape != (N ** len(modes),) * 2:
        raise SpaceMismatchError(f"local matrix of shape {local.shape} for {len(modes)} mode(s) at cutoff {N}")
    if isinstance(state, FockState):
        out = _contract(state.tensor, local, modes, N)
        return FockState(space, out.reshape(-1))
    out = _contract(state.tensor, local, modes, N)
    out = _contract(out, local.conj(), [space.modes + m for m in modes], N)
    return FockDensity(space, out.reshape(space.dim, space.dim))


def partial_trace(rho, keep):
    """
    Reduced density of the modes in keep (in the order given).

    Accepts a FockState as well; the pure case never forms the full density.
    """
    keep = list(keep)
    if not keep:
        raise ModeIndexError("partial trace needs a nonempty set of modes to keep")
    if len(set(keep)) != len(keep):
        raise ModeIndexError(f"repeated modes {keep}")
    space = rho.space
    for m in keep:
        space.check_mode(m)
    traced = [m for m in range(space.modes) if m not in keep]
    N = space.cutoff
    dk, dt = N ** len(keep), N ** len(traced)
    out_space = FockSpace(len(keep), N)
    if isinstance(rho, FockState):
        psi = np.transpose(rho.tensor, keep + traced).reshape(dk, dt)
        return FockDensity(out_space, psi @ psi.conj().T)
    M = space.modes
    t = np.transpose(rho.tensor, keep + traced + [M + m for m in keep] + [M + m for m in traced])
    t = t.reshape(dk, dt, dk, dt)
    return FockDensity(out_space, np.einsum('ijkj->ik', t))


@dataclass(frozen=True)
class Moments:
    """First and second quadrature moments with the truncation diagnostics behind them."""
    mean: np.ndarray
    cov: np.ndarray
    leakage: float
    leakage_warning: bool

    def as_gaussian(self):
        return GaussianState(self.mean, self.cov)


def moments(state, threshold=LEAKAGE_THRESHOLD):
    """
    Mean vector and symmetrized covariance in (x1, p1, ..., xM, pM) ordering.

    Cross-mode terms are read from two-mode reduced densities, so a density
    over several modes never has its quadratures embedded in the full space.
    The warning flag is set when leakage exceeds the threshold.
    """
    space = state.space
    M, N = space.modes, space.cutoff
    quads = [single_mode_matrix('x', N), single_mode_matrix('p', N)]
    norm = state.norm() ** 2 if isinstance(state, FockState) else state.trace()

    mean = np.zeros(2 * M)
    cov = np.zeros((2 * M, 2 * M))
    singles = [partial_trace(state, [m]).matrix / norm for m in range(M)]
    for m in range(M):
        rho = singles[m]
        for i, Ri in enumerate(quads):
            mean[2 * m + i] = np.real(np.trace(rho @ Ri))
        for i, Ri in enumerate(quads):
            for j, Rj in enumerate(quads):
                cov[2 * m + i, 2 * m + j] = np.real(np.trace(rho @ (Ri @ Rj + Rj @ Ri))) / 2
    for m1 in range(M):
        for m2 in range(m1 + 1, M):
            rho = partial_trace(state, [m1, m2]).matrix.reshape(N, N, N, N) / norm
            for i, Ri in enumerate(quads):
                for j, Rj in enumerate(quads):
                    value = np.real(np.einsum('ab,cd,bdac->', Ri, Rj, rho))
                    cov[2 * m1 + i, 2 * m2 + j] = value
                    cov[2 * m2 + j, 2 * m1 + i] = value
    cov -= np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)

    leak = state.leakage()
    warn = leak > threshold
    if warn:
        logging.warning('moments: leakage %.3e above threshold %.1e', leak, threshold)
    return Moments(mean, cov, leak, warn)


def fock_generator(op, cutoff):
    """
    Hermitian generator H and time t with exp(-i H t) equal to the op-spec unitary.

    Single-mode ops return an N x N generator, two-mode ops an N^2 x N^2 one.
    """
    a = single_mode_matrix('a', cutoff)
    ad = a.conj().T
    eye = np.eye(cutoff)
    v = op.value
    if op.kind == 'squeeze':
        e = np.exp(-2j * op.angle)
        H = 1j * (e * a @ a - np.conj(e) * ad @ ad) / 2
        return H, float(np.real(v))
    if op.kind == 'phase':
        return -single_mode_matrix('n', cutoff), float(np.real(v))
    if op.kind == 'displace':
        beta = complex(v)
        return 1j * (beta * ad - np.conj(beta) * a), 1.0
    if op.kind == 'shear':
        x = single_mode_matrix('x', cutoff)
        return -0.5 * float(np.real(v)) * x @ x, 1.0
    a1, a2 = np.kron(a, eye), np.kron(eye, a)
    if op.kind == 'beamsplit':
        theta = np.arccos(np.sqrt(float(np.real(v))))
        return 1j * (a1 @ a2.conj().T - a1.conj().T @ a2), theta
    if op.kind == 'two_mode_squeeze':
        return 1j * (a1.conj().T @ a2.conj().T - a1 @ a2), float(np.real(v))
    # cz
    x = single_mode_matrix('x', cutoff)
    return -float(np.real(v)) * np.kron(x, x), 1.0


def gaussian_unitary(cutoff, op, pad=DEFAULT_PAD):
    """
    Fock matrix of an op-spec on its own modes.

    Phase and displacement use closed forms and beam splitters use exact
    amplitudes; the remaining kinds are exponentiated at cutoff + pad and
    truncated, which keeps the low-photon blocks accurate.
    """
    if op.kind == 'phase':
        return np.diag(np.exp(1j * float(np.real(op.value)) * np.arange(cutoff)))
    if op.kind == 'displace':
        return displacement_matrix(complex(op.value), cutoff)
    if op.kind == 'beamsplit':
        return beamsplitter_matrix(cutoff, float(np.real(op.value)))
    big = cutoff + pad
    H, t = fock_generator(op, big)
    U = expm(-1j * t * H)
    if len(op.modes) == 1:
        return U[:cutoff, :cutoff]
    U = U.reshape(big, big, big, big)[:cutoff, :cutoff, :cutoff, :cutoff]
    return U.reshape(cutoff * cutoff, cutoff * cutoff)


def fock_gaussian_op(state, op, pad=DEFAULT_PAD):
    """Apply an op-spec (or a sequence of them) to a Fock state or density."""
    if isinstance(op, (list, tuple)):
        for o in op:
            state = fock_gaussian_op(state, o, pad)
        return state
    return apply_local(gaussian_unitary(state.space.cutoff, op, pad), state, op.modes)


def gaussian_to_fock(gstate, cutoff, pad=DEFAULT_PAD):
    """
    Fock density of a single-mode Gaussian state.

    Williamson form: cov = nu R diag(e^-2r, e^2r) R^T / 2 with nu = 2 sqrt(det cov);
    a thermal state of nbar = (nu - 1) / 2 is squeezed and then displaced.
    """
    if gstate.modes != 1:
        raise SpaceMismatchError("gaussian_to_fock handles single-mode states")
    nu = 2.0 * np.sqrt(np.linalg.det(gstate.cov))
    nbar = max((nu - 1.0) / 2.0, 0.0)
    evals, evecs = np.linalg.eigh(gstate.cov / (nu / 2.0))
    r = 0.25 * np.log(evals[1] / evals[0])
    small = evecs[:, 0]
    angle = float(np.arctan2(small[1], small[0]))

    big = cutoff + pad
    n = np.arange(big)
    thermal = (nbar ** n) / (nbar + 1.0) ** (n + 1) if nbar > 0 else (n == 0).astype(float)
    rho = np.diag(thermal).astype(complex)
    H, t = fock_generator(GaussianOp.squeeze(0, r, angle), big)
    S = expm(-1j * t * H)
    beta = complex(gstate.mean[0], gstate.mean[1]) / np.sqrt(2.0)
    D = displacement_matrix(beta, big)
    U = D @ S
    rho = (U @ rho @ U.conj().T)[:cutoff, :cutoff]
    out = FockDensity(FockSpace(1, cutoff), rho)
    deficit = 1.0 - out.trace()
    if deficit > 1e-3:
        logging.warning('gaussian_to_fock: %.3e of the trace falls above cutoff %d', deficit, cutoff)
    return out.normalize()


def check_leakage(state, threshold):
    """Raise LeakageError when the top-level population exceeds threshold."""
    leak = state.leakage()
    logging.debug('======= leakage =======: \n%s', leak)
    if leak > threshold:
        raise LeakageError(f"leakage {leak:.3e} exceeds {threshold:.1e} at cutoff {state.space.cutoff}")
    return leak


class Channel:
    """
    Single-mode completely-positive map stored as a transfer tensor.

    rho_out[m, n] = sum_{m', n'} E[m, n, m', n'] rho_in[m', n'].

    Attributes:
        cutoff (int): per-mode cutoff the tensor acts on.
        tensor (np.ndarray): E, shape (N, N, N, N), read-only.
        label (str): short description recorded in logs and manifests.
    """

    def __init__(self, tensor, label='channel'):
        tensor = _frozen(tensor)
        N = tensor.shape[0]
        if tensor.shape != (N, N, N, N):
            raise SpaceMismatchError(f"transfer tensor of shape {tensor.shape} is not (N, N, N, N)")
        self.cutoff = N
        self.tensor = tensor
        self.label = label

    def __repr__(self):
        return f"Channel({self.label}, cutoff={self.cutoff})"

    @classmethod
    def from_kraus(cls, kraus, label='kraus'):
        """E[m, n, m', n'] = sum_k K_k[m, m'] conj(K_k[n, n'])."""
        kraus = np.asarray(kraus, dtype=complex)
        return cls(np.einsum('kab,kcd->acbd', kraus, kraus.conj()), label)

    def trace_deficits(self):
        """1 - Tr(E(|n><n|)) for every input level n."""
        diag = np.einsum('mmnn->n', self.tensor)
        return 1.0 - np.real(diag)

    def then(self, other):
        """Composition: apply self first, then other."""
        if other.cutoff != self.cutoff:
            raise SpaceMismatchError(f"cannot compose channels at cutoffs {self.cutoff} and {other.cutoff}")
        return Channel(np.einsum('abcd,cdef->abef', other.tensor, self.tensor), f"{self.label}|{other.label}")


def apply_channel(rho, channel, mode=0, renormalize=True):
    """
    Apply a single-mode Channel to one mode of a state or density.

    The output is renormalized when renormalize is set; a trace deficit
    above 1e-3 is logged as a warning either way.
    """
    rho = rho.to_density() if isinstance(rho, FockState) else rho
    space = rho.space
    space.check_mode(mode)
    if channel.cutoff != space.cutoff:
        raise SpaceMismatchError(f"channel at cutoff {channel.cutoff} on a register at cutoff {space.cutoff}")
    M = space.modes
    t = np.moveaxis(rho.tensor, [mode, M + mode], [0, 1])
    t = np.tensordot(channel.tensor, t, axes=([2, 3], [0, 1]))
    t = np.moveaxis(t, [0, 1], [mode, M + mode])
    out = FockDensity(space, t.reshape(space.dim, space.dim))
    deficit = rho.trace() - out.trace()
    if deficit > 1e-3:
        logging.warning('apply_channel: %s lost %.3e of the trace on mode %d', channel.label, deficit, mode)
    if renormalize:
        out = out.normalize()
    return out
