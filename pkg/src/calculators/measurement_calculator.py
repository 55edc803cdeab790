import json
import logging
from dataclasses import dataclass, field

import numpy as np

from src.errors import (
    GridCoverageError,
    ModeIndexError,
    ParameterRangeError,
    PhotonSectorError,
    SingularMarginalError,
)
from src.fock_ir import FockDensity, FockSpace, FockState, fock_gaussian_op, moments, partial_trace
from src.gaussian_ir import GaussianOp
from src.util.fock_util import quadrature_table
from src.util.toy_states import seeded_rng

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)

COVERAGE_SIGMAS = 6.0
DEFAULT_POINTS = 512

# Six polarization rails: (1H, 1V, 2H, 2V, 3H, 3V).
DV_RAILS = 6


@dataclass(frozen=True)
class QuadratureGrid:
    """
    Uniform grid of homodyne outcomes on [-L, L].

    Attributes:
        half_width (float): L > 0.
        points (int): power of two, at least 64.
    """
    half_width: float
    points: int = DEFAULT_POINTS

    def __post_init__(self):
        if not self.half_width > 0:
            raise ParameterRangeError(f"grid half-width must be positive, got {self.half_width}")
        p = int(self.points)
        if p < 64 or p & (p - 1):
            raise ParameterRangeError(f"grid points must be a power of two >= 64, got {self.points}")

    @property
    def values(self):
        return np.linspace(-self.half_width, self.half_width, self.points)

    @property
    def spacing(self):
        return 2.0 * self.half_width / (self.points - 1)

    @classmethod
    def default_for(cls, std, points=DEFAULT_POINTS):
        """Grid covering COVERAGE_SIGMAS standard deviations of a marginal."""
        return cls(COVERAGE_SIGMAS * float(std), points)

    def check_coverage(self, std):
        if self.half_width < COVERAGE_SIGMAS * std * (1 - 1e-12):
            raise GridCoverageError(
                f"grid half-width {self.half_width:.4g} covers fewer than {COVERAGE_SIGMAS:g} "
                f"standard deviations of a marginal with std {std:.4g}")

    def contains(self, value):
        return abs(value) <= self.half_width * (1 + 1e-12)


@dataclass
class MeasurementRecord:
    """
    Ordered (mode, observable, outcome, density-or-probability) entries of a run.
    """
    entries: list = field(default_factory=list)

    def add(self, mode, observable, outcome, density):
        if density < -1e-12:
            raise SingularMarginalError(f"negative density {density} recorded for {observable}")
        self.entries.append((mode, observable, float(outcome), float(max(density, 0.0))))

    def __len__(self):
        return len(self.entries)

    def outcomes(self):
        return [e[2] for e in self.entries]

    def to_json_lines(self):
        return "\n".join(
            json.dumps({"mode": m, "observable": o, "outcome": x, "density": d}, sort_keys=True)
            for m, o, x, d in self.entries
        )


def _remaining(space, mode):
    return FockSpace(space.modes - 1, space.cutoff) if space.modes > 1 else None


def _project(state, mode, row):
    """Contract one mode of a state or density with a bra row vector."""
    space = state.space
    rest = _remaining(space, mode)
    if isinstance(state, FockState):
        amps = np.tensordot(row, state.tensor, axes=([0], [mode]))
        density = float(np.sum(np.abs(amps) ** 2))
        return (FockState(rest, amps.reshape(-1)) if rest else None), density
    M = space.modes
    t = np.tensordot(row, state.tensor, axes=([0], [mode]))
    t = np.tensordot(row.conj(), t, axes=([0], [M - 1 + mode]))
    if rest is None:
        return None, float(np.real(t))
    matrix = t.reshape(rest.dim, rest.dim)
    return FockDensity(rest, matrix), float(np.real(np.trace(matrix)))


def homodyne_project(state, mode, angle, outcome, grid=None):
    """
    Project one mode onto the rotated-quadrature eigenbra <x_theta = outcome|.

    Args:
        state (FockState | FockDensity): input.
        mode (int): measured mode, removed from the result.
        angle (float): theta in [0, 2 pi); pi/2 measures p.
        outcome (float): x.
        grid (QuadratureGrid, optional): when given, |x| must lie within it.

    Returns:
        tuple: (unnormalized conditioned state or None when no mode remains, density).
    """
    state.space.check_mode(mode)
    if grid is not None and not grid.contains(outcome):
        raise GridCoverageError(f"outcome {outcome} outside grid [-{grid.half_width}, {grid.half_width}]")
    row = quadrature_table(state.space.cutoff, [outcome], angle)[0]
    return _project(state, mode, row)


def homodyne_marginal(state, mode, angle, grid):
    """Outcome density of a homodyne measurement at every grid point."""
    state.space.check_mode(mode)
    table = quadrature_table(state.space.cutoff, grid.values, angle)
    rho = partial_trace(state, [mode]).matrix
    densities = np.real(np.einsum('jn,nm,jm->j', table, rho, table.conj()))
    return np.clip(densities, 0.0, None)


def quadrature_std(state, mode, angle):
    """Standard deviation of x_theta on one mode, from the reduced moments."""
    reduced = partial_trace(state, [mode])
    m = moments(reduced)
    v = np.array([np.cos(angle), np.sin(angle)])
    return float(np.sqrt(max(v @ m.cov @ v, 0.0)))


def homodyne_samples(state, mode, angle, grid, seed, count):
    """Draw outcomes from the discretized marginal with the Philox generator."""
    grid.check_coverage(quadrature_std(state, mode, angle))
    weights = homodyne_marginal(state, mode, angle, grid) * grid.spacing
    total = weights.sum()
    if total <= 0:
        raise SingularMarginalError("homodyne marginal vanishes on the whole grid")
    rng = seeded_rng(seed)
    idx = rng.choice(grid.points, size=count, p=weights / total)
    return grid.values[idx]


def homodyne_sample(state, mode, angle, grid, seed):
    """
    Sample one homodyne outcome and return it with the normalized conditioned state.
    """
    outcome = float(homodyne_samples(state, mode, angle, grid, seed, 1)[0])
    conditioned, density = homodyne_project(state, mode, angle, outcome, grid)
    logging.debug('======= homodyne_sample outcome =======: \n%s', outcome)
    if conditioned is not None:
        conditioned = conditioned.normalize()
    return outcome, conditioned


def photon_count_distribution(state, mode):
    state.space.check_mode(mode)
    return state.populations(mode)


def photon_count_project(state, mode, n):
    """
    Project one mode onto |n>; the measured mode is removed.

    Returns:
        tuple: (normalized conditioned state, or None when nothing remains or
        the probability vanishes; probability).
    """
    space = state.space
    space.check_mode(mode)
    if not 0 <= n < space.cutoff:
        raise PhotonSectorError(f"photon number {n} outside cutoff {space.cutoff}")
    row = np.zeros(space.cutoff, dtype=complex)
    row[n] = 1.0
    conditioned, weight = _project(state, mode, row)
    norm = state.norm() ** 2 if isinstance(state, FockState) else state.trace()
    probability = weight / norm
    if conditioned is None or weight <= 0:
        return None, probability
    return conditioned.normalize(), probability


def bell_cv(state, mode1, mode2, u, v, grid=None):
    """
    CV Bell measurement: 50:50 beam splitter on (mode1, mode2), x on the first
    output (outcome u = (x1 - x2)/sqrt 2) and p on the second (v = (p1 + p2)/sqrt 2).

    Returns:
        tuple: (unnormalized conditioned state of the other modes, joint density).
    """
    if mode1 == mode2:
        raise ModeIndexError("Bell measurement needs two distinct modes")
    mixed = fock_gaussian_op(state, GaussianOp.beamsplit(mode1, mode2, 0.5))
    after_u, _ = homodyne_project(mixed, mode1, 0.0, u, grid)
    if after_u is None:
        raise ModeIndexError("Bell measurement needs two modes")
    second = mode2 - 1 if mode2 > mode1 else mode2
    return homodyne_project(after_u, second, np.pi / 2, v, grid)


def bell_dv_coincidence(state):
    """
    Polarization Bell measurement of photons 1 and 2 by beam splitter and coincidence.

    Rails are (1H, 1V, 2H, 2V, 3H, 3V). Beam splitters mix 1H with 2H and 1V
    with 2V; the ideal non-number-resolving, polarization-blind detectors fire
    a coincidence when each spatial output holds at least one photon. Only the
    singlet component of photons 1 and 2 survives.

    Returns:
        tuple: (FockDensity of rails (3H, 3V), success probability).
    """
    space = state.space
    if space.modes != DV_RAILS:
        raise PhotonSectorError(f"expected {DV_RAILS} polarization rails, got {space.modes}")
    occupation = np.indices(space.shape).reshape(DV_RAILS, -1)
    photon1 = occupation[0] + occupation[1]
    resource = occupation[2:].sum(axis=0)
    weights = np.abs(state.amplitudes) ** 2
    outside = weights[(photon1 != 1) | (resource != 2)].sum()
    if outside > 1e-10:
        raise PhotonSectorError(f"{outside:.3e} of the population lies outside the one-plus-two photon sector")

    mixed = fock_gaussian_op(state, [GaussianOp.beamsplit(0, 2, 0.5), GaussianOp.beamsplit(1, 3, 0.5)])
    tensor = mixed.tensor
    N = space.cutoff
    out = np.zeros((N * N, N * N), dtype=complex)
    success = 0.0
    # every fine-grained detector outcome that registers a coincidence
    for digits in np.ndindex(N, N, N, N):
        port_a = digits[0] + digits[1]
        port_b = digits[2] + digits[3]
        if port_a < 1 or port_b < 1:
            continue
        amps = tensor[digits].reshape(-1)
        out += np.outer(amps, amps.conj())
        success += float(np.sum(np.abs(amps) ** 2))
    success /= state.norm() ** 2
    logging.debug('======= bell_dv_coincidence success =======: \n%s', success)
    if success <= 0:
        return None, 0.0
    return FockDensity(FockSpace(2, N), out).normalize(), success
