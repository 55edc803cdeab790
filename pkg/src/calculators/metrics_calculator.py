import json
import logging
from dataclasses import dataclass
from io import StringIO

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from src.errors import GridResolutionError, ModeIndexError, SpaceMismatchError
from src.fock_ir import FockDensity, FockSpace, FockState, moments, partial_trace

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)

CLIP_FLOOR = 1e-9


@dataclass(frozen=True)
class QubitSubspace:
    """
    span{|0,1>, |1,0>} of a two-mode register.

    Attributes:
        cutoff (int): per-mode cutoff of the register.
        modes (tuple): the two rails inside a larger register; (0, 1) by default.
    """
    cutoff: int
    modes: tuple = (0, 1)

    @property
    def space(self):
        return FockSpace(2, self.cutoff)

    def basis(self):
        """Indices of |0,1> and |1,0> in the reduced two-mode register."""
        space = self.space
        return [space.index((0, 1)), space.index((1, 0))]

    def projector(self):
        P = np.zeros((self.space.dim, self.space.dim))
        for i in self.basis():
            P[i, i] = 1.0
        return P

    def reduce(self, state):
        """Reduced two-mode density of the rails this subspace lives on."""
        if state.space.cutoff != self.cutoff:
            raise SpaceMismatchError(f"register cutoff {state.space.cutoff} differs from {self.cutoff}")
        if state.space.modes == 2 and tuple(self.modes) == (0, 1):
            return state.to_density() if isinstance(state, FockState) else state
        return partial_trace(state, list(self.modes))


def _as_density(state):
    return state.to_density() if isinstance(state, FockState) else state


def _psd_sqrt(matrix):
    """Hermitian square root with negative eigenvalues clipped; returns (root, clipped mass)."""
    evals, evecs = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    negative = evals[evals < 0]
    clipped = float(-negative.sum()) if negative.size else 0.0
    evals = np.clip(evals, 0.0, None)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T, clipped


def fidelity(a, b, report=False):
    """
    Fidelity between two states on the same FockSpace.

    Pure-pure gives |<a|b>|^2, pure-mixed gives <a|rho|a>; two densities use
    the Uhlmann form (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 through Hermitian
    eigendecompositions.

    Args:
        a, b (FockState | FockDensity): states to compare.
        report (bool): also return the eigenvalue mass clipped to zero.

    Returns:
        float, or (float, float) when report is set.
    """
    a.space.require_same(b.space)
    clipped = 0.0
    if isinstance(a, FockState) and isinstance(b, FockState):
        value = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    elif isinstance(a, FockState) or isinstance(b, FockState):
        pure, mixed = (a, b) if isinstance(a, FockState) else (b, a)
        value = np.real(np.vdot(pure.amplitudes, mixed.matrix @ pure.amplitudes))
    else:
        root, clip_a = _psd_sqrt(a.matrix)
        inner = root @ b.matrix @ root
        evals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
        clip_b = float(-evals[evals < 0].sum())
        clipped = clip_a + clip_b
        value = np.sum(np.sqrt(np.clip(evals, 0.0, None))) ** 2
    if clipped > CLIP_FLOOR:
        logging.warning('fidelity: clipped %.3e of negative eigenvalue mass', clipped)
    value = float(min(max(value, 0.0), 1.0))
    if report:
        return value, clipped
    return value


def trace_distance(a, b):
    """D = ||rho - sigma||_1 / 2."""
    a.space.require_same(b.space)
    diff = _as_density(a).matrix - _as_density(b).matrix
    evals = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(evals)))


def purity(state):
    if isinstance(state, FockState):
        return 1.0
    return float(np.real(np.trace(state.matrix @ state.matrix)))


def qubit_population(rho, register=None):
    """
    Population of span{|0,1>, |1,0>} on a two-mode register.

    Args:
        rho (FockState | FockDensity): state holding the register.
        register (QubitSubspace, optional): defaults to rails (0, 1).
    """
    register = register or QubitSubspace(rho.space.cutoff)
    if rho.space.modes < 2:
        raise ModeIndexError("qubit population needs a register of at least two modes")
    reduced = register.reduce(rho)
    return float(np.real(np.trace(register.projector() @ reduced.matrix)) / reduced.trace())


def vacuum_population(rho, register=None):
    register = register or QubitSubspace(rho.space.cutoff)
    reduced = register.reduce(rho)
    return float(np.real(reduced.matrix[0, 0]) / reduced.trace())


def higher_population(rho, register=None):
    """Population of the sector with two or more photons across the register."""
    register = register or QubitSubspace(rho.space.cutoff)
    reduced = register.reduce(rho)
    N = reduced.space.cutoff
    digits = np.indices((N, N)).reshape(2, -1)
    mask = digits.sum(axis=0) >= 2
    diag = np.real(np.diag(reduced.matrix))
    return float(diag[mask].sum() / reduced.trace())


def density_elements(rho, indices):
    """
    Matrix elements <k,l|rho|m,n> for a list of ((k, l), (m, n)) index pairs.

    Returns:
        list: complex values in the order requested.
    """
    rho = _as_density(rho)
    space = rho.space
    return [complex(rho.matrix[space.index(row), space.index(col)]) for row, col in indices]


def density_table(rho, max_photons=1):
    """
    Bar-chart data: every element rho_klmn with all occupations <= max_photons,
    as rows of (k, l, m, n, real, imag).
    """
    rho = _as_density(rho)
    levels = range(min(max_photons + 1, rho.space.cutoff))
    keys = [(k, l) for k in levels for l in levels]
    values = density_elements(rho, [(row, col) for row in keys for col in keys])
    rows = []
    for (row, col), value in zip([(row, col) for row in keys for col in keys], values):
        rows.append((row[0], row[1], col[0], col[1], value.real, value.imag))
    return rows


def density_table_json(rho, max_photons=1):
    return json.dumps([
        {"k": k, "l": l, "m": m, "n": n, "real": re, "imag": im}
        for k, l, m, n, re, im in density_table(rho, max_photons)
    ], sort_keys=True)


def _wigner_basis(m, n, X, P):
    """W_mn(x, p) for m >= n; conjugate symmetry covers m < n."""
    if m < n:
        return np.conj(_wigner_basis(n, m, X, P))
    r2 = X ** 2 + P ** 2
    coeff = np.exp(0.5 * ((m - n) * np.log(2.0) + gammaln(n + 1) - gammaln(m + 1)))
    return (np.exp(-r2) / np.pi * (-1) ** n * (X - 1j * P) ** (m - n) * coeff
            * eval_genlaguerre(n, m - n, 2 * r2))


def wigner_grid(state, mode, grid):
    """
    Wigner function of one mode on a square grid, W = sum_mn rho_mn W_mn.

    Args:
        state (FockState | FockDensity): any register; the mode is traced out first.
        mode (int): mode to plot.
        grid (QuadratureGrid): shared x and p axis.

    Returns:
        np.ndarray: real (points, points) array indexed [x, p].

    Raises:
        GridResolutionError: when the spacing exceeds a third of the smallest
            quadrature standard deviation.
    """
    reduced = partial_trace(state, [mode])
    reduced = FockDensity(reduced.space, reduced.matrix / reduced.trace())
    m = moments(reduced)
    smallest = float(np.sqrt(max(np.linalg.eigvalsh(m.cov).min(), 0.0)))
    if grid.spacing > smallest / 3:
        raise GridResolutionError(
            f"grid spacing {grid.spacing:.4g} too coarse for a marginal std of {smallest:.4g}")

    X, P = np.meshgrid(grid.values, grid.values, indexing='ij')
    rho = reduced.matrix
    W = np.zeros(X.shape, dtype=complex)
    N = reduced.space.cutoff
    for i in range(N):
        for j in range(N):
            if abs(rho[i, j]) > 1e-14:
                W += rho[i, j] * _wigner_basis(i, j, X, P)
    logging.debug('======= wigner_grid integral =======: \n%s', np.real(W).sum() * grid.spacing ** 2)
    return np.real(W)


def wigner_csv(state, mode, grid):
    W = wigner_grid(state, mode, grid)
    buf = StringIO()
    print("X, P, W", file=buf)
    for i, x in enumerate(grid.values):
        for j, p in enumerate(grid.values):
            print(format(x, '.17g'), format(p, '.17g'), format(W[i, j], '.17g'), sep=',', file=buf)
    return buf.getvalue()
