import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from src.calculators.cluster_calculator import (
    ESCALATION_FACTOR,
    ESCALATION_THRESHOLD,
    MAX_CUTOFF,
    S_STEP,
    X_STEP,
    BasisSpec,
    forced_teleport,
    p_squeezed_ancilla,
    phi_rows,
    position_teleport,
    project_mixture,
    support_half_width,
)
from src.calculators.measurement_calculator import MeasurementRecord, QuadratureGrid, homodyne_project, quadrature_std
from src.calculators.metrics_calculator import fidelity
from src.errors import LeakageError, MissingOutcomeError, ParameterRangeError, SpaceMismatchError
from src.fock_ir import FockDensity, FockSpace, FockState, fock_gaussian_op, gaussian_unitary, single_mode_matrix
from src.gaussian_ir import GaussianOp, GaussianState, gaussian_feedforward, gaussian_ops, product
from src.util.fock_util import displacement_matrices
from src.util.toy_states import ToyStateCreator, seeded_rng
from src.util.wavefunction_util import (
    fock_wavefunction_fn,
    fourier_kernel,
    outcome_densities,
    power_of_two_points,
    pure_components,
    shifted_rows,
)

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)

ANCILLA_KINDS = ('exact', 'gkp', 'marek3')
ANCILLA_LEAKAGE = 1e-4
MAREK_PHOTONS = 3
ANCILLA_PAD = 24
OPERATOR_TOL = 1e-8


@dataclass(frozen=True)
class CubicAncillaSpec:
    """
    Recipe for an approximate cubic phase state exp(i chi x^3)|p=0>.

    Attributes:
        kind (str): 'exact', 'gkp' or 'marek3'.
        chi (float): cubic strength; for 'gkp' the target strength after the
            optional rescaling squeeze (0 keeps the native strength).
        r (float): squeezing of the |p=0> proxy, or of the two-mode squeezer for 'gkp'.
        t (float, optional): displacement X(t) of the counted mode; 4 e^r by default.
        n (int): photon count observed on the counted mode ('gkp' only).
    """
    kind: str
    chi: float = 0.0
    r: float = 1.0
    t: float = None
    n: int = 0

    def __post_init__(self):
        if self.kind not in ANCILLA_KINDS:
            raise ParameterRangeError(f"unknown ancilla kind {self.kind!r}; expected one of {ANCILLA_KINDS}")
        if self.r < 0:
            raise ParameterRangeError(f"negative squeezing {self.r}")
        if self.n < 0:
            raise ParameterRangeError(f"negative photon count {self.n}")

    @property
    def displacement(self):
        return float(self.t) if self.t is not None else 4.0 * np.exp(self.r)


def _check_transmissivity(T):
    if not 0 < T < 1:
        raise ParameterRangeError(f"transmissivity must lie in (0, 1), got {T}")


def squeezer_gain(T):
    """Gain that cancels the ancilla's anti-squeezed quadrature, sqrt((1 - T) / T)."""
    _check_transmissivity(T)
    return float(np.sqrt((1.0 - T) / T))


def universal_squeezer(state, T, r, g=None, grid=None):
    """
    Squeeze by mixing with an x-squeezed ancilla, measuring one port and feeding forward.

    The input and the ancilla meet on a beam splitter of transmissivity T; p is
    measured on the ancilla port and g times the outcome is added to the
    output p. In the ideal limit the map is x -> sqrt(T) x, p -> p / sqrt(T),
    with excess x noise (1 - T) e^{-2r} / 2 left at finite r.

    Args:
        state (GaussianState | FockState | FockDensity): single-mode input.
        T (float): transmissivity in (0, 1).
        r (float): ancilla squeezing.
        g (float, optional): feedforward gain; sqrt((1 - T) / T) by default.
        grid (QuadratureGrid, optional): outcome grid of the Fock path.

    Returns:
        the output state, of the input's kind.
    """
    _check_transmissivity(T)
    g = squeezer_gain(T) if g is None else float(g)
    ops = [GaussianOp.beamsplit(0, 1, T)]
    if isinstance(state, GaussianState):
        if state.modes != 1:
            raise SpaceMismatchError("the squeezer takes a single-mode input")
        full = gaussian_ops(product(state, GaussianState.squeezed(r, 0.0)), ops)
        return gaussian_feedforward(full, [(1, np.pi / 2)], [[0.0], [g]])

    cutoff = state.space.cutoff
    ancilla = ToyStateCreator(cutoff).squeezed(r, 0.0)
    joint = _joint(state, ancilla)
    mixed = fock_gaussian_op(joint, ops)
    grid = grid or QuadratureGrid.default_for(quadrature_std(mixed, 1, np.pi / 2))
    rho = np.zeros((cutoff, cutoff), dtype=complex)
    for s in grid.values:
        conditioned, density = homodyne_project(mixed, 1, np.pi / 2, s)
        if density <= 0:
            continue
        D = gaussian_unitary(cutoff, GaussianOp.displace(0, 1j * g * s / np.sqrt(2.0)))
        conditioned = conditioned if isinstance(conditioned, FockDensity) else conditioned.to_density()
        rho += D @ conditioned.matrix @ D.conj().T * grid.spacing
    out = FockDensity(FockSpace(1, cutoff), rho)
    deficit = 1.0 - out.trace()
    if deficit > 1e-3:
        logging.warning('universal_squeezer: trace deficit %.3e at cutoff %d', deficit, cutoff)
    return out.normalize()


def _joint(state, ancilla):
    if state.space.modes != 1:
        raise SpaceMismatchError("the squeezer takes a single-mode input")
    if isinstance(state, FockState):
        return FockState(FockSpace(2, state.space.cutoff), np.kron(state.amplitudes, ancilla.amplitudes))
    anc = ancilla.to_density().matrix
    return FockDensity(FockSpace(2, state.space.cutoff), np.kron(state.matrix, anc))


def squeezer_channel(T, r, g=None):
    """
    Affine action (X, Y) of the Gaussian squeezer: mean -> X mean, cov -> X cov X^T + Y.
    """
    inputs = [GaussianState(np.array(v, dtype=float), 0.5 * np.eye(2)) for v in ([0, 0], [1, 0], [0, 1])]
    outs = [universal_squeezer(s, T, r, g) for s in inputs]
    X = np.column_stack([outs[1].mean - outs[0].mean, outs[2].mean - outs[0].mean])
    Y = outs[0].cov - 0.5 * X @ X.T
    return X, Y


def excess_noise(T, r, g=None):
    """Trace of the noise the squeezer adds on top of its ideal symplectic action."""
    _, Y = squeezer_channel(T, r, g)
    return float(np.trace(Y))


def optimal_squeezer_gain(T, r):
    """Gain minimising the squeezer's added noise at finite ancilla squeezing."""
    _check_transmissivity(T)
    upper = 2.0 * squeezer_gain(T) + 1.0
    result = minimize_scalar(lambda g: excess_noise(T, r, g), bounds=(0.0, upper),
                             method='bounded', options={'xatol': 1e-10})
    logging.debug('======= optimal_squeezer_gain =======: \n%s', result.x)
    return float(result.x)


def _x_function(cutoff, function):
    """function(X) for the truncated position matrix, through its eigendecomposition."""
    evals, evecs = np.linalg.eigh(single_mode_matrix('x', cutoff))
    return (evecs * function(evals)) @ evecs.conj().T


def cubic_unitary(chi, cutoff, pad=ANCILLA_PAD):
    """exp(i chi x^3) computed at cutoff + pad and truncated."""
    big = cutoff + pad
    return _x_function(big, lambda v: np.exp(1j * chi * v ** 3))[:cutoff, :cutoff]


def _exact_ancilla(chi, r, cutoff, pad):
    big = cutoff + pad
    squeezed = ToyStateCreator(big).squeezed(r, np.pi / 2)
    amps = _x_function(big, lambda v: np.exp(1j * chi * v ** 3)) @ squeezed.amplitudes
    tail = float(np.sum(np.abs(amps[cutoff:]) ** 2))
    if tail > ANCILLA_LEAKAGE:
        raise LeakageError(f"cubic ancilla leaves {tail:.3e} above cutoff {cutoff}; raise the cutoff")
    return FockState(FockSpace(1, cutoff), amps[:cutoff]).normalize()


def fit_cubic_strength(state):
    """
    Least-squares fit of p by c0 + c1 x + c2 x^2 over the state's symmetrised moments.

    Returns:
        tuple: (c0, c1, chi) with chi = c2 / 3, so p - 3 chi x^2 is the fitted nullifier.
    """
    cutoff = state.space.cutoff
    v = np.asarray(state.amplitudes, dtype=complex)
    x = single_mode_matrix('x', cutoff)
    p = single_mode_matrix('p', cutoff)
    powers = [np.eye(cutoff), x, x @ x]

    def mean(op):
        return float(np.real(np.vdot(v, op @ v)))

    gram = np.array([[mean(a @ b) for b in powers] for a in powers])
    target = np.array([mean(0.5 * (a @ p + p @ a)) for a in powers])
    c0, c1, c2 = np.linalg.solve(gram, target)
    return float(c0), float(c1), float(c2) / 3.0


def _heralded_space(spec, cutoff, pad):
    """Fock levels holding the heralded mode before recentring: mean photon number plus eight deviations."""
    lam = np.tanh(spec.r)
    mu = 0.5 * (lam * spec.displacement) ** 2 + spec.n
    return max(cutoff, int(np.ceil(mu + 8.0 * np.sqrt(mu + 1.0)))) + pad


def _gkp_ancilla(spec, cutoff, pad):
    """
    Two-mode squeezed vacuum, X(t) on one mode, photon count n there.

    The heralded mode carries amplitudes c_k <n|D(t / sqrt 2)|k>. It is
    Fourier transformed, centred in x, and the fitted offset and shear of p
    are undone so p - 3 chi x^2 has zero mean. A nonzero target strength
    adds a rescaling squeeze, with a parity flip when the signs differ.

    Returns:
        tuple: (FockState on FockSpace(1, cutoff), count probability, native chi).
    """
    big = _heralded_space(spec, cutoff, pad)
    lam = np.tanh(spec.r)
    k = np.arange(big)
    c = np.sqrt(1.0 - lam ** 2) * lam ** k
    D = displacement_matrices(np.asarray(spec.displacement / np.sqrt(2.0)), spec.n + 1, big)
    amps = c * D[spec.n, :]
    probability = float(np.sum(np.abs(amps) ** 2))
    if probability <= 0:
        raise LeakageError(f"photon count {spec.n} has vanishing probability at t={spec.displacement:.4g}")
    state = fock_gaussian_op(FockState(FockSpace(1, big), amps).normalize(), GaussianOp.phase(0, np.pi / 2))
    x_mean = float(np.real(np.vdot(state.amplitudes, single_mode_matrix('x', big) @ state.amplitudes)))
    state = fock_gaussian_op(state, GaussianOp.displace(0, -x_mean / np.sqrt(2.0)))
    c0, c1, native = fit_cubic_strength(state)
    ops = [GaussianOp.shear(0, -c1), GaussianOp.displace(0, -1j * c0 / np.sqrt(2.0))]
    if spec.chi:
        if abs(native) < 1e-12:
            raise ParameterRangeError(f"photon count {spec.n} gives no cubic feature to rescale")
        if np.sign(spec.chi) != np.sign(native):
            ops.append(GaussianOp.phase(0, np.pi))
        ops.append(GaussianOp.squeeze(0, np.log(abs(spec.chi) / abs(native)) / 3.0, 0.0))
    state = fock_gaussian_op(state, ops)
    tail = float(np.sum(np.abs(state.amplitudes[cutoff:]) ** 2))
    if tail > ANCILLA_LEAKAGE:
        raise LeakageError(f"gkp ancilla leaves {tail:.3e} above cutoff {cutoff}; raise the cutoff")
    logging.debug('======= gkp ancilla (probability, native chi) =======: \n%s', (probability, native))
    return FockState(FockSpace(1, cutoff), state.amplitudes[:cutoff]).normalize(), probability, native


def make_cubic_ancilla(spec, cutoff, pad=ANCILLA_PAD):
    """
    Build a cubic-phase ancilla on FockSpace(1, cutoff).

    'exact' applies exp(i chi x^3) to the p-squeezed vacuum; 'marek3' keeps the
    exact ancilla's |0>..|3> components only (a three-photon stand-in for an
    optimised superposition); 'gkp' runs the photon-counting preparation.

    Raises:
        LeakageError: when more than 1e-4 of the ancilla falls above the cutoff.
    """
    if spec.kind == 'exact':
        return _exact_ancilla(spec.chi, spec.r, cutoff, pad)
    if spec.kind == 'marek3':
        exact = _exact_ancilla(spec.chi, spec.r, cutoff, pad)
        amps = np.zeros(cutoff, dtype=complex)
        amps[:MAREK_PHOTONS + 1] = exact.amplitudes[:MAREK_PHOTONS + 1]
        return FockState(exact.space, amps).normalize()
    return _gkp_ancilla(spec, cutoff, pad)[0]


def gkp_ancilla_table(r, counts, cutoff, t=None, pad=ANCILLA_PAD):
    """
    Rows (n, probability, native chi, Var(p - 3 chi x^2), Var(p), fidelity) of
    the photon-counted ancilla for each count n.

    The fidelity compares against the exact ancilla with the same chi and the
    same Var(x); it is nan when that exact ancilla does not fit the cutoff.
    """
    x = single_mode_matrix('x', cutoff)
    p = single_mode_matrix('p', cutoff)
    rows = []
    for n in counts:
        state, probability, chi = _gkp_ancilla(CubicAncillaSpec('gkp', 0.0, r, t, n), cutoff, pad)
        nullifier = p - 3 * chi * x @ x
        r_match = 0.5 * np.log(2.0 * _variance(state, x))
        try:
            overlap = fidelity(state, _exact_ancilla(chi, r_match, cutoff, pad))
        except LeakageError:
            overlap = float('nan')
        rows.append((n, probability, chi, _variance(state, nullifier), _variance(state, p), overlap))
    return rows


def _variance(state, op):
    v = state.amplitudes
    mean = np.vdot(v, op @ v)
    return float(np.real(np.vdot(op @ v, op @ v) - abs(mean) ** 2))


def ancilla_wavefunction(ancilla):
    """(callable, half-width) of an ancilla given as a FockState or an 'exact' recipe."""
    if isinstance(ancilla, FockState):
        return fock_wavefunction_fn(ancilla.amplitudes), np.sqrt(2 * ancilla.space.cutoff + 1) + 4.0
    if isinstance(ancilla, CubicAncillaSpec) and ancilla.kind == 'exact':
        return p_squeezed_ancilla(ancilla.r, (0.0, 0.0, ancilla.chi))
    raise SpaceMismatchError(f"ancilla must be a FockState or an exact recipe, got {ancilla!r}")


@dataclass(frozen=True)
class CorrectionFactor:
    """exp(i coefficient x^power); power 0 is a global phase."""
    power: int
    coefficient: float

    def to_dict(self):
        return {"power": self.power, "coefficient": self.coefficient}


def cubic_correction_factors(chi, s):
    """exp(i chi (x + s)^3) as commuting factors e^{i chi s^3} e^{i 3 chi s^2 x} e^{i 3 chi s x^2} e^{i chi x^3}."""
    return [
        CorrectionFactor(0, chi * s ** 3),
        CorrectionFactor(1, 3 * chi * s ** 2),
        CorrectionFactor(2, 3 * chi * s),
        CorrectionFactor(3, chi),
    ]


def correction_ops(chi, s, mode=0):
    """Gaussian undo Y(s) = Z(-3 chi s^2) exp(-i 3 chi s x^2) as op-specs, up to a global phase."""
    return [
        GaussianOp.displace(mode, -1j * 3 * chi * s ** 2 / np.sqrt(2.0)),
        GaussianOp.shear(mode, -6 * chi * s),
    ]


def factor_product(factors, cutoff, pad=ANCILLA_PAD):
    """Product of the factor matrices, in the given order, formed at cutoff + pad and truncated."""
    big = cutoff + pad
    out = np.eye(big, dtype=complex)
    for f in factors:
        out = out @ _x_function(big, lambda v, f=f: np.exp(1j * f.coefficient * v ** f.power))
    return out[:cutoff, :cutoff]


def correction_operator(chi, s, cutoff, pad=ANCILLA_PAD):
    """exp(-i (chi (x + s)^3 - chi x^3)): the inverse of the outcome-dependent factors."""
    factors = [CorrectionFactor(f.power, -f.coefficient) for f in cubic_correction_factors(chi, s) if f.power < 3]
    return factor_product(factors, cutoff, pad)


def correction_is_gaussian(chi, s, cutoff, block=None):
    """
    Max-norm gap, on the lowest block levels, between the exact correction
    and its displacement-plus-shear form.

    Returns:
        tuple: (gap, whether it is below 1e-8).
    """
    block = block or cutoff // 2
    exact = correction_operator(chi, s, cutoff)
    gaussian = np.eye(cutoff, dtype=complex)
    for op in correction_ops(chi, s):
        gaussian = gaussian_unitary(cutoff, op, pad=ANCILLA_PAD) @ gaussian
    gaussian = np.exp(-1j * chi * s ** 3) * gaussian
    gap = float(np.max(np.abs(exact[:block, :block] - gaussian[:block, :block])))
    logging.debug('======= correction_is_gaussian gap =======: \n%s', gap)
    return gap, gap < OPERATOR_TOL


def offline_gate(state, basis, r, outcome=None, seed=None, cutoff=None):
    """
    Off-line gate for a homodyne-realisable U: the ancilla U|p=0> is prepared
    first, the input is attached by C_Z and its p is measured. The output
    tends to U F |psi>; the feedforward after outcome s is X(-s) and
    p -> p - sigma s.
    """
    basis.check()
    if isinstance(state, GaussianState):
        if state.modes != 1:
            raise SpaceMismatchError("the off-line gate takes a single-mode input")
        ops = basis.ops(1) + [GaussianOp.cz(0, 1)]
        full = gaussian_ops(product(state, GaussianState.squeezed(r, np.pi / 2)), ops)
        if outcome is None and seed is None:
            return gaussian_feedforward(full, [(0, np.pi / 2)], [[-1.0], [-basis.quadratic]]), MeasurementRecord()
        if outcome is None:
            outcome = float(seeded_rng(seed).normal(full.mean[1], np.sqrt(full.cov[1, 1])))
        record = MeasurementRecord()
        out = forced_teleport(full, outcome, record)
        return gaussian_ops(out, GaussianOp.displace(0, -1j * basis.quadratic * outcome / np.sqrt(2.0))), record
    ancilla, half = p_squeezed_ancilla(r, basis.coefficients())
    return position_teleport(state, ancilla, half, correction=basis.coefficients(),
                             outcome=outcome, seed=seed, cutoff=cutoff)


def cubic_gate_offline(state, chi, ancilla, outcome=None, seed=None, cutoff=None, max_cutoff=MAX_CUTOFF):
    """
    Off-line cubic phase gate: C_Z onto a cubic ancilla, p-measurement with
    outcome s, X(-s) and the Gaussian correction Y(s).

    Because exp(i chi (x + s)^3) splits into commuting factors, undoing the
    outcome-dependent part needs only a displacement and a quadratic phase.
    With an exact ancilla the output tends to exp(i chi x^3) F |psi>.

    Args:
        state (FockState | FockDensity): single-mode input.
        chi (float): strength used for the correction.
        ancilla (FockState | CubicAncillaSpec): Fock ancilla, or an 'exact'
            recipe evaluated analytically in position space.
        outcome (float, optional): forced outcome; 0 gives an identity correction.
        seed (int, optional): sample the outcome.

    Returns:
        tuple: (FockDensity, MeasurementRecord).
    """
    if isinstance(state, GaussianState):
        raise SpaceMismatchError("the cubic gate needs a Fock input")
    fn, half = ancilla_wavefunction(ancilla)
    rho, record = position_teleport(state, fn, half, correction=(0.0, 0.0, chi), outcome=outcome,
                                    seed=seed, cutoff=cutoff, max_cutoff=max_cutoff)
    logging.debug('======= cubic_gate_offline cutoff =======: \n%s', rho.space.cutoff)
    return rho, record


def gkp_correction_ops(chi, s1, s2, mode=0):
    """
    Gaussian undo of the double-homodyne circuit: X(-s2), then Z(-s1), then Y(s2).
    """
    if s1 is None or s2 is None:
        raise MissingOutcomeError(f"both outcomes are needed, got s1={s1}, s2={s2}")
    ops = [GaussianOp.displace(mode, complex(-s2, -s1) / np.sqrt(2.0))]
    return ops + correction_ops(chi, s2, mode)


def gkp_cubic_correction(state, chi, s1, s2):
    """Apply the Gaussian undo of the double-homodyne circuit to a Fock or Gaussian state."""
    ops = gkp_correction_ops(chi, s1, s2)
    if isinstance(state, GaussianState):
        return gaussian_ops(state, ops)
    return fock_gaussian_op(state, ops)


def _uncorrected_cutoff(cutoff, chi, s1, s2):
    """Levels holding the conditioned state before the undo: the output shifted by about (s2, s1 + 3 chi s2^2)."""
    shift = np.sqrt(0.5 * (s2 ** 2 + (abs(s1) + 3.0 * abs(chi) * s2 ** 2) ** 2))
    return int(np.ceil((np.sqrt(cutoff) + shift + 3.0) ** 2))


def _gkp_forced(profiles, weights, envelopes, x, chi, outcomes, cutoff, max_cutoff):
    """
    Condition on forced (s1, s2) with no feedforward, then apply gkp_cubic_correction.

    Before the undo the output is A(x) e^{i s1 (x - s2)} G(x - s2) with
    G = F[Phi(u) phi1(u + s1)], so it is projected on the grid moved by s2.
    """
    s1, s2 = float(outcomes[0]), float(outcomes[1])
    dx = x[1] - x[0]
    profiles = profiles * np.exp(1j * s1 * x)[None, :]
    density = float(sum(w * outcome_densities(p, envelopes, dx)[0] for p, w in zip(profiles, weights)))
    record = MeasurementRecord()
    record.add(0, 'p', s1, density)
    record.add(1, 'p', s2, density)
    work = _uncorrected_cutoff(cutoff, chi, s1, s2)
    raw = project_mixture(profiles, weights / max(density, 1e-300), envelopes, 1.0, x + s2,
                          work, max(work, max_cutoff))
    corrected = gkp_cubic_correction(raw, chi, s1, s2).matrix
    populations = np.real(np.diag(corrected))
    populations = populations / populations.sum()
    limit = min(raw.space.cutoff, max(cutoff, max_cutoff))
    while cutoff < limit and populations[cutoff:].sum() > ESCALATION_THRESHOLD:
        cutoff = min(int(np.ceil(cutoff * ESCALATION_FACTOR)), limit)
    tail = float(populations[cutoff:].sum())
    if tail > ESCALATION_THRESHOLD:
        raise LeakageError(f"corrected output leaves {tail:.3e} above cutoff {cutoff}")
    logging.debug('======= gkp forced (work cutoff, output cutoff) =======: \n%s', (raw.space.cutoff, cutoff))
    return FockDensity(FockSpace(1, cutoff), corrected[:cutoff, :cutoff]).normalize(), record


def gkp_cubic_gate(state, ancilla, chi, r_node, outcomes=None, cutoff=None, max_cutoff=MAX_CUTOFF):
    """
    Double-homodyne cubic gate on the two-node resource (p-squeezed node, cubic ancilla).

    The input is attached by C_Z to the node and p-measured (s1); the node is
    attached by C_Z to the ancilla and p-measured (s2). After the Gaussian undo
    the output tends to exp(i chi x^3) F^2 |psi>. Writing Phi = F psi and
    phi1 for the node, outcome pairs contribute

        out(x) = Y_{s2}(x) A(x + s2) * F[Phi(u) phi1(u + s1)](x)

    so the s1 factor and the s2 factor integrate separately. Forced outcomes
    are conditioned without feedforward and corrected by gkp_cubic_correction.

    Args:
        outcomes (tuple, optional): forced (s1, s2).

    Returns:
        tuple: (FockDensity, MeasurementRecord).
    """
    if isinstance(state, GaussianState):
        raise SpaceMismatchError("the cubic gate needs a Fock input")
    if outcomes is not None and (len(outcomes) != 2 or None in outcomes):
        raise MissingOutcomeError(f"both outcomes are needed, got {outcomes}")
    components, weights = pure_components(state)
    half = support_half_width(components, BasisSpec())
    x = QuadratureGrid(half, power_of_two_points(half, X_STEP)).values
    dx = x[1] - x[0]
    cutoff = cutoff or state.space.cutoff
    phi = phi_rows(components, x)
    node, node_half = p_squeezed_ancilla(r_node)
    fn, ancilla_half = ancilla_wavefunction(ancilla)
    kernel = fourier_kernel(x, x, dx).T

    if outcomes is not None:
        s1_values, ds1 = np.array([float(outcomes[0])]), 1.0
        s2_values, ds2 = np.array([float(outcomes[1])]), 1.0
    else:
        s1_half = half + node_half
        s1 = QuadratureGrid(s1_half, power_of_two_points(s1_half, S_STEP))
        s2_half = half + ancilla_half
        s2 = QuadratureGrid(s2_half, power_of_two_points(s2_half, S_STEP))
        s1_values, ds1 = s1.values, s1.spacing
        s2_values, ds2 = s2.values, s2.spacing

    node_rows = shifted_rows(node, x, s1_values)
    profiles = np.concatenate([(node_rows * row[None, :]) @ kernel for row in phi])
    profile_weights = np.repeat(weights, s1_values.size) * ds1
    envelopes = shifted_rows(fn, x, s2_values)
    if outcomes is not None:
        return _gkp_forced(profiles, profile_weights, envelopes, x, chi, outcomes, cutoff, max_cutoff)

    moved = chi * (x[None, :] + s2_values[:, None]) ** 3 - chi * x[None, :] ** 3
    envelopes = envelopes * np.exp(-1j * moved)
    logging.debug('======= gkp_cubic_gate grid =======: \n%s', (x.size, s1_values.size, s2_values.size))
    rho = project_mixture(profiles, profile_weights, envelopes, ds2, x, cutoff, max_cutoff)
    return rho, MeasurementRecord()
