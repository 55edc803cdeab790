import json
import logging
from dataclasses import dataclass
from io import StringIO

import numpy as np

from src.errors import (
    ModeIndexError,
    ParameterRangeError,
    SingularMarginalError,
    SpaceMismatchError,
    UnknownKindError,
)

# Quadratures are ordered (x1, p1, x2, p2, ...); vacuum covariance is I/2 (hbar = 1).
VACUUM_VARIANCE = 0.5
SINGULAR_VARIANCE = 1e-14

OP_KINDS = ('squeeze', 'phase', 'beamsplit', 'displace', 'two_mode_squeeze', 'cz', 'shear')


def symplectic_form(modes):
    """Standard symplectic form Omega in (x1, p1, ..., xM, pM) ordering."""
    return np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class GaussianState:
    """
    Gaussian state of M modes given by its first and second quadrature moments.

    Attributes:
        mean (np.ndarray): length 2M, ordering (x1, p1, ..., xM, pM).
        cov (np.ndarray): 2M x 2M real symmetric covariance.
    """
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.size % 2 or cov.shape != (mean.size, mean.size):
            raise SpaceMismatchError(f"mean of length {mean.size} does not fit covariance {cov.shape}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'cov', cov)

    @property
    def modes(self):
        return self.mean.size // 2

    @classmethod
    def vacuum(cls, modes=1):
        return cls(np.zeros(2 * modes), VACUUM_VARIANCE * np.eye(2 * modes))

    @classmethod
    def coherent(cls, alpha):
        alpha = complex(alpha)
        return cls(np.sqrt(2.0) * np.array([alpha.real, alpha.imag]), VACUUM_VARIANCE * np.eye(2))

    @classmethod
    def squeezed(cls, r, angle=0.0):
        """Squeezed vacuum; angle 0 squeezes x, angle pi/2 squeezes p."""
        return gaussian_ops(cls.vacuum(1), GaussianOp.squeeze(0, r, angle))

    @classmethod
    def thermal(cls, nbar):
        return cls(np.zeros(2), (nbar + VACUUM_VARIANCE) * np.eye(2))

    def check_mode(self, mode):
        if not 0 <= mode < self.modes:
            raise ModeIndexError(f"mode {mode} outside register of {self.modes} modes")

    def is_physical(self, tol=1e-9):
        """Symmetric covariance and cov + (i/2) Omega positive semidefinite."""
        if not np.allclose(self.cov, self.cov.T, atol=1e-12):
            return False
        eig = np.linalg.eigvalsh(self.cov + 0.5j * symplectic_form(self.modes))
        return bool(eig.min() >= -tol)

    def purity(self):
        """Tr(rho^2) = 1 / sqrt(det(2 cov))."""
        return float(1.0 / np.sqrt(np.linalg.det(2.0 * self.cov)))

    def quadrature_variance(self, mode, angle=0.0):
        """Variance of x cos(angle) + p sin(angle) on a mode."""
        self.check_mode(mode)
        v = np.array([np.cos(angle), np.sin(angle)])
        block = self.cov[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2]
        return float(v @ block @ v)

    def to_json(self):
        return json.dumps({"mean": self.mean.tolist(), "cov": self.cov.tolist()})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(np.array(data["mean"]), np.array(data["cov"]))

    def covariance_csv(self):
        buf = StringIO()
        print("ROW, COL, COV", file=buf)
        n = self.cov.shape[0]
        for i in range(n):
            for j in range(n):
                print(i, j, format(self.cov[i, j], '.17g'), sep=',', file=buf)
        return buf.getvalue()


def product(*states):
    """Tensor product of Gaussian states; the first argument takes the lowest modes."""
    mean = np.concatenate([s.mean for s in states])
    size = mean.size
    cov = np.zeros((size, size))
    start = 0
    for s in states:
        n = s.mean.size
        cov[start:start + n, start:start + n] = s.cov
        start += n
    return GaussianState(mean, cov)


@dataclass(frozen=True)
class SymplecticTransform:
    """Affine map R -> S R + d on the quadrature vector."""
    S: np.ndarray
    d: np.ndarray

    def is_symplectic(self, tol=1e-10):
        omega = symplectic_form(self.S.shape[0] // 2)
        return bool(np.max(np.abs(self.S @ omega @ self.S.T - omega)) < tol)

    def apply(self, state):
        if self.S.shape[0] != state.mean.size:
            raise SpaceMismatchError(f"transform of size {self.S.shape[0]} on a {state.modes}-mode state")
        return GaussianState(self.S @ state.mean + self.d, self.S @ state.cov @ self.S.T)

    def then(self, other):
        """Composition: apply self first, then other."""
        return SymplecticTransform(other.S @ self.S, other.S @ self.d + other.d)


@dataclass(frozen=True)
class GaussianOp:
    """
    Op-spec shared by both backends.

    kind is one of OP_KINDS; modes holds one or two mode indices; value carries
    r, theta, T, alpha, weight or sigma depending on the kind; angle is only
    used by squeeze.
    """
    kind: str
    modes: tuple
    value: complex = 0.0
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise UnknownKindError(f"unknown op-spec kind {self.kind!r}")
        object.__setattr__(self, 'modes', tuple(int(m) for m in self.modes))
        two_mode = self.kind in ('beamsplit', 'two_mode_squeeze', 'cz')
        if len(self.modes) != (2 if two_mode else 1):
            raise ModeIndexError(f"{self.kind} takes {2 if two_mode else 1} mode(s), got {self.modes}")
        if two_mode and self.modes[0] == self.modes[1]:
            raise ModeIndexError(f"{self.kind} needs two distinct modes, got {self.modes}")
        if self.kind == 'beamsplit' and not 0.0 <= float(np.real(self.value)) <= 1.0:
            raise ParameterRangeError(f"transmissivity {self.value} outside [0, 1]")

    @classmethod
    def squeeze(cls, mode, r, angle=0.0):
        return cls('squeeze', (mode,), float(r), float(angle))

    @classmethod
    def phase(cls, mode, theta):
        return cls('phase', (mode,), float(theta))

    @classmethod
    def beamsplit(cls, m1, m2, transmissivity):
        return cls('beamsplit', (m1, m2), float(transmissivity))

    @classmethod
    def displace(cls, mode, alpha):
        return cls('displace', (mode,), complex(alpha))

    @classmethod
    def two_mode_squeeze(cls, m1, m2, r):
        return cls('two_mode_squeeze', (m1, m2), float(r))

    @classmethod
    def cz(cls, m1, m2, weight=1.0):
        """exp(i weight x1 x2)."""
        return cls('cz', (m1, m2), float(weight))

    @classmethod
    def shear(cls, mode, sigma):
        """exp(i sigma x^2 / 2)."""
        return cls('shear', (mode,), float(sigma))

    def local_symplectic(self):
        """2x2 or 4x4 symplectic matrix and displacement on the op's own modes."""
        v = self.value
        if self.kind == 'squeeze':
            r = float(np.real(v))
            S = rotation(self.angle) @ np.diag([np.exp(-r), np.exp(r)]) @ rotation(-self.angle)
            return S, np.zeros(2)
        if self.kind == 'phase':
            return rotation(float(np.real(v))), np.zeros(2)
        if self.kind == 'displace':
            return np.eye(2), np.sqrt(2.0) * np.array([np.real(v), np.imag(v)])
        if self.kind == 'shear':
            return np.array([[1.0, 0.0], [float(np.real(v)), 1.0]]), np.zeros(2)
        if self.kind == 'beamsplit':
            t = np.sqrt(float(np.real(v)))
            rho = np.sqrt(1.0 - float(np.real(v)))
            return np.kron(np.array([[t, -rho], [rho, t]]), np.eye(2)), np.zeros(4)
        if self.kind == 'two_mode_squeeze':
            r = float(np.real(v))
            ch, sh = np.cosh(r), np.sinh(r)
            S = np.array([
                [ch, 0, sh, 0],
                [0, ch, 0, -sh],
                [sh, 0, ch, 0],
                [0, -sh, 0, ch],
            ])
            return S, np.zeros(4)
        # cz: p1 += w x2, p2 += w x1
        w = float(np.real(v))
        S = np.eye(4)
        S[1, 2] = w
        S[3, 0] = w
        return S, np.zeros(4)

    def symplectic(self, modes):
        """Embed the op into an M-mode SymplecticTransform."""
        for m in self.modes:
            if not 0 <= m < modes:
                raise ModeIndexError(f"mode {m} outside register of {modes} modes")
        local, shift = self.local_symplectic()
        idx = [q for m in self.modes for q in (2 * m, 2 * m + 1)]
        S = np.eye(2 * modes)
        S[np.ix_(idx, idx)] = local
        d = np.zeros(2 * modes)
        d[idx] = shift
        return SymplecticTransform(S, d)


def gaussian_ops(state, op):
    """
    Apply an op-spec (or a sequence of them, in order) to a Gaussian state.

    mean -> S mean + d, cov -> S cov S^T.
    """
    if isinstance(op, (list, tuple)):
        for o in op:
            state = gaussian_ops(state, o)
        return state
    return op.symplectic(state.modes).apply(state)


def _split(state, measured):
    """Index arrays of the measured x-quadratures and of the remaining modes."""
    for m in measured:
        state.check_mode(m)
    keep_modes = [m for m in range(state.modes) if m not in measured]
    rest = [q for m in keep_modes for q in (2 * m, 2 * m + 1)]
    return rest, keep_modes


def homodyne_condition(state, mode, angle, outcome):
    """
    Condition a Gaussian state on the outcome of a rotated homodyne measurement.

    The measured quadrature x_theta = x cos(theta) + p sin(theta) is rotated
    onto x by phase(-theta), then the remaining modes B are conditioned through
    the rank-1 projector Pi = diag(1, 0) on the measured block A:

        cov_B  = V_B - V_BA Pi (Pi V_A Pi)^+ Pi V_AB
        mean_B = mu_B + V_BA Pi (Pi V_A Pi)^+ Pi (r_m - mu_A)

    Args:
        state (GaussianState): state with at least two modes.
        mode (int): measured mode.
        angle (float): homodyne angle theta.
        outcome (float): measured value m.

    Returns:
        tuple: (GaussianState of the remaining modes, probability density of m).
    """
    if state.modes < 2:
        raise ModeIndexError("conditioning needs at least two modes")
    state = gaussian_ops(state, GaussianOp.phase(mode, -angle))
    rest, _ = _split(state, [mode])
    a = [2 * mode, 2 * mode + 1]
    var = state.cov[2 * mode, 2 * mode]
    if var < SINGULAR_VARIANCE:
        raise SingularMarginalError(f"measured variance {var:.3e} is singular")

    proj = np.diag([1.0, 0.0])
    V_A = state.cov[np.ix_(a, a)]
    V_BA = state.cov[np.ix_(rest, a)]
    V_B = state.cov[np.ix_(rest, rest)]
    gain = V_BA @ proj @ np.linalg.pinv(proj @ V_A @ proj) @ proj
    cov = V_B - gain @ V_BA.T
    mean = state.mean[rest] + gain @ (np.array([outcome, 0.0]) - state.mean[a])

    mu = state.mean[2 * mode]
    density = np.exp(-(outcome - mu) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)
    logging.debug('======= homodyne_condition density =======: \n%s', density)
    return GaussianState(mean, cov), float(density)


def gaussian_feedforward(state, measured, gains):
    """
    Outcome-averaged result of homodyning some quadratures and displacing the
    remaining modes by a linear function of the outcomes.

    With q the vector of measured quadratures and R_B the remaining ones,
    R_B -> R_B + G q is an exact affine map, so

        mean = mu_B + G mu_q
        cov  = V_BB + G V_qB + V_Bq G^T + G V_qq G^T

    Args:
        state (GaussianState): full state before measurement.
        measured (list): (mode, angle) pairs, one per measured quadrature.
        gains (array_like): G, shape (2 * remaining modes, len(measured)).

    Returns:
        GaussianState: state of the unmeasured modes.
    """
    modes = [m for m, _ in measured]
    if len(set(modes)) != len(modes):
        raise ModeIndexError(f"each mode may be measured once, got {modes}")
    for m, angle in measured:
        state = gaussian_ops(state, GaussianOp.phase(m, -angle))
    rest, _ = _split(state, modes)
    q = [2 * m for m in modes]
    G = np.asarray(gains, dtype=float).reshape(len(rest), len(q))

    V_BB = state.cov[np.ix_(rest, rest)]
    V_Bq = state.cov[np.ix_(rest, q)]
    V_qq = state.cov[np.ix_(q, q)]
    mean = state.mean[rest] + G @ state.mean[q]
    cov = V_BB + G @ V_Bq.T + V_Bq @ G.T + G @ V_qq @ G.T
    return GaussianState(mean, 0.5 * (cov + cov.T))


def reduce(state, keep):
    """Marginal Gaussian state of the listed modes, in the listed order."""
    for m in keep:
        state.check_mode(m)
    idx = [q for m in keep for q in (2 * m, 2 * m + 1)]
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def quadrature_combination_variance(state, coefficients):
    """Variance of sum_k c_k R_k for a dict {quadrature index: coefficient}."""
    v = np.zeros(state.mean.size)
    for k, c in coefficients.items():
        v[k] += c
    return float(v @ state.cov @ v)


def gaussian_fidelity_coherent(a, b):
    """
    Closed-form fidelity between two single-mode Gaussian states.

    With d the mean difference, Delta = det(V1 + V2) and
    delta = 4 (det V1 - 1/4)(det V2 - 1/4):

        F = exp(-d^T (V1 + V2)^-1 d / 2) / (sqrt(Delta + delta) - sqrt(delta))

    Args:
        a, b: GaussianState or (mean, cov) pairs.
    """
    def unpack(s):
        if isinstance(s, GaussianState):
            return s.mean, s.cov
        return np.asarray(s[0], dtype=float), np.asarray(s[1], dtype=float)

    m1, v1 = unpack(a)
    m2, v2 = unpack(b)
    if m1.size != 2 or m2.size != 2:
        raise SpaceMismatchError("closed-form Gaussian fidelity needs single-mode states")
    total = v1 + v2
    d = m1 - m2
    Delta = np.linalg.det(total)
    delta = max(4.0 * (np.linalg.det(v1) - 0.25) * (np.linalg.det(v2) - 0.25), 0.0)
    value = np.exp(-0.5 * d @ np.linalg.solve(total, d)) / (np.sqrt(Delta + delta) - np.sqrt(delta))
    return float(min(max(value, 0.0), 1.0))
