import json
import logging
from dataclasses import dataclass, field
from functools import reduce as fold

import numpy as np
from scipy.linalg import expm

from src.calculators.measurement_calculator import MeasurementRecord, QuadratureGrid
from src.errors import LeakageError, ParameterRangeError, ProgramError, SpaceMismatchError
from src.fock_ir import FockDensity, FockSpace, FockState, fock_gaussian_op, moments, single_mode_matrix
from src.gaussian_ir import (
    GaussianOp,
    GaussianState,
    gaussian_feedforward,
    gaussian_ops,
    homodyne_condition,
    product,
    quadrature_combination_variance,
    symplectic_form,
)
from src.util.fock_util import hermite_functions, quadrature_table
from src.util.toy_states import ToyStateCreator, seeded_rng
from src.util.wavefunction_util import (
    fourier_kernel,
    mixture_density,
    outcome_densities,
    p_squeezed_wavefunction,
    phase_polynomial,
    power_of_two_points,
    pure_components,
    shifted_rows,
)

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)

INPUT_NODE = -1
FOCK_NODE_LIMIT = 5
GAUSSIAN_NODE_LIMIT = 12

ESCALATION_THRESHOLD = 1e-3
ESCALATION_FACTOR = 1.5
MAX_CUTOFF = 120
X_STEP = 0.05
S_STEP = 0.05
MIXTURE_BUDGET = 4_000_000


@dataclass
class ClusterGraph:
    """
    Simple undirected graph of squeezed nodes joined by C_Z edges.

    Attributes:
        nodes (tuple): node labels (non-negative integers) in mode order.
        edges (tuple): unordered pairs, stored sorted.
        r (float): squeezing of every node unless overridden.
        node_squeezing (dict): per-node overrides of r.
    """
    nodes: tuple
    edges: tuple = ()
    r: float = 1.0
    node_squeezing: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = tuple(int(n) for n in self.nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise ProgramError(f"repeated nodes in {self.nodes}")
        if any(n < 0 for n in self.nodes):
            raise ProgramError("node labels must be non-negative")
        edges = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ProgramError(f"self-loop on node {a}")
            if a not in self.nodes or b not in self.nodes:
                raise ProgramError(f"edge ({a}, {b}) references an unknown node")
            pair = (min(a, b), max(a, b))
            if pair in edges:
                raise ProgramError(f"repeated edge {pair}")
            edges.add(pair)
        self.edges = tuple(sorted(edges))
        for node, r in self.node_squeezing.items():
            if node not in self.nodes:
                raise ProgramError(f"squeezing given for unknown node {node}")
            if r < 0:
                raise ParameterRangeError(f"negative squeezing {r} on node {node}")
        if self.r < 0:
            raise ParameterRangeError(f"negative squeezing {self.r}")

    @classmethod
    def linear(cls, count, r=1.0):
        return cls(tuple(range(count)), tuple((i, i + 1) for i in range(count - 1)), r)

    @classmethod
    def from_json(cls, text):
        """Adjacency-list form {"adjacency": {"0": [1], ...}, "r": 1.0}."""
        data = json.loads(text)
        adjacency = {int(k): [int(v) for v in vs] for k, vs in data["adjacency"].items()}
        nodes = tuple(sorted(adjacency))
        edges = {(min(a, b), max(a, b)) for a, vs in adjacency.items() for b in vs}
        squeezing = {int(k): float(v) for k, v in data.get("node_squeezing", {}).items()}
        return cls(nodes, tuple(sorted(edges)), float(data.get("r", 1.0)), squeezing)

    def to_json(self):
        adjacency = {str(n): sorted(self.neighbours(n)) for n in self.nodes}
        return json.dumps({"adjacency": adjacency, "r": self.r,
                           "node_squeezing": {str(k): v for k, v in self.node_squeezing.items()}},
                          sort_keys=True)

    def neighbours(self, node):
        return [b if a == node else a for a, b in self.edges if node in (a, b)]

    def mode_of(self, node):
        if node not in self.nodes:
            raise ProgramError(f"unknown node {node}")
        return self.nodes.index(node)

    def squeezing_of(self, node):
        return float(self.node_squeezing.get(node, self.r))

    def is_linear_chain(self):
        """True when the edges join consecutive nodes in mode order and nothing else."""
        chain = {tuple(sorted(pair)) for pair in zip(self.nodes, self.nodes[1:])}
        return set(self.edges) == chain


@dataclass(frozen=True)
class BasisSpec:
    """
    Measured quadrature U^dag p U for U = exp(i (a x + sigma x^2 / 2 + chi x^3)).

    Only linear and quadratic terms are realizable by a rotated or sheared
    homodyne; a cubic term belongs to the off-line gates.
    """
    linear: float = 0.0
    quadratic: float = 0.0
    cubic: float = 0.0

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def z(cls, s):
        """U = Z(s) = exp(i s x)."""
        return cls(linear=s)

    @classmethod
    def shear(cls, sigma):
        return cls(quadratic=sigma)

    def check(self):
        if self.cubic != 0:
            raise ProgramError(
                f"basis with cubic coefficient {self.cubic} is not homodyne-implementable; "
                "use the off-line cubic gate")

    def is_identity(self):
        return self.linear == 0 and self.quadratic == 0 and self.cubic == 0

    def coefficients(self):
        """Phase-polynomial coefficients (c1, c2) with f(x) = c1 x + c2 x^2."""
        return (self.linear, self.quadratic / 2.0)

    def ops(self, mode):
        """Gaussian op-specs of U on one mode."""
        self.check()
        out = []
        if self.quadratic:
            out.append(GaussianOp.shear(mode, self.quadratic))
        if self.linear:
            out.append(GaussianOp.displace(mode, 1j * self.linear / np.sqrt(2.0)))
        return out

    def to_dict(self):
        return {"linear": self.linear, "quadratic": self.quadratic, "cubic": self.cubic}


@dataclass(frozen=True)
class ProgramStep:
    """
    Measure p after the basis change on one node, then displace later nodes.

    feedforward holds (target node, 'x' or 'p', coefficient) triples; the
    target quadrature moves by coefficient * outcome.
    """
    node: int
    basis: BasisSpec = BasisSpec()
    feedforward: tuple = ()


@dataclass
class MeasurementProgram:
    steps: list

    def validate(self, graph):
        """Each node measured once, feedforward only onto nodes still unmeasured, one output left."""
        seen = set()
        for step in self.steps:
            if step.node != INPUT_NODE and step.node not in graph.nodes:
                raise ProgramError(f"program measures node {step.node} not in the graph")
            if step.node in seen:
                raise ProgramError(f"node {step.node} measured twice")
            step.basis.check()
            seen.add(step.node)
            for target, quad, _ in step.feedforward:
                if target in seen or target not in graph.nodes:
                    raise ProgramError(f"feedforward of node {step.node} targets measured or unknown node {target}")
                if quad not in ('x', 'p'):
                    raise ProgramError(f"feedforward quadrature must be 'x' or 'p', got {quad!r}")
        if not self.steps or self.steps[0].node != INPUT_NODE:
            raise ProgramError("the first step must measure the input")
        left = [n for n in graph.nodes if n not in seen]
        if len(left) != 1:
            raise ProgramError(f"program must leave exactly one output node, leaves {left}")
        return left[0]

    def to_json(self):
        return json.dumps([
            {"node": s.node, "basis": s.basis.to_dict(),
             "feedforward": [[t, q, c] for t, q, c in s.feedforward]}
            for s in self.steps
        ], sort_keys=True)

    @classmethod
    def from_json(cls, text):
        steps = []
        for item in json.loads(text):
            basis = BasisSpec(**item.get("basis", {}))
            ff = tuple((int(t), str(q), float(c)) for t, q, c in item.get("feedforward", []))
            steps.append(ProgramStep(int(item["node"]), basis, ff))
        return cls(steps)


def build_cluster(graph, backend='gaussian', cutoff=16):
    """
    Canonical cluster: one p-squeezed vacuum per node, then C_Z on every edge.

    Nullifiers p_a - sum_{b in N(a)} x_b have variance e^{-2r}/2.

    Args:
        graph (ClusterGraph): nodes, edges and squeezing.
        backend (str): 'gaussian' (up to 12 nodes) or 'fock' (up to 5).
        cutoff (int): per-mode cutoff of the fock backend.

    Returns:
        GaussianState or FockState over the nodes, in graph.nodes order.
    """
    count = len(graph.nodes)
    edges = [GaussianOp.cz(graph.mode_of(a), graph.mode_of(b)) for a, b in graph.edges]
    if backend == 'gaussian':
        if count > GAUSSIAN_NODE_LIMIT:
            raise ProgramError(f"{count} nodes exceed the gaussian limit of {GAUSSIAN_NODE_LIMIT}")
        nodes = [GaussianState.squeezed(graph.squeezing_of(n), np.pi / 2) for n in graph.nodes]
        return gaussian_ops(product(*nodes), edges)
    if backend != 'fock':
        raise ProgramError(f"unknown backend {backend!r}")
    if count > FOCK_NODE_LIMIT:
        raise ProgramError(f"{count} nodes exceed the fock limit of {FOCK_NODE_LIMIT}")
    creator = ToyStateCreator(cutoff)
    factors = [creator.squeezed(graph.squeezing_of(n), np.pi / 2).amplitudes for n in graph.nodes]
    state = FockState(FockSpace(count, cutoff), fold(np.kron, factors))
    return fock_gaussian_op(state, edges)


def nullifier_variances(state, graph):
    """Var(p_a - sum_{b in N(a)} x_b) for every node, keyed by node."""
    if not isinstance(state, GaussianState):
        state = moments(state).as_gaussian()
    if state.modes != len(graph.nodes):
        raise SpaceMismatchError(f"{state.modes}-mode state for a {len(graph.nodes)}-node graph")
    out = {}
    for node in graph.nodes:
        coeffs = {2 * graph.mode_of(node) + 1: 1.0}
        for b in graph.neighbours(node):
            coeffs[2 * graph.mode_of(b)] = -1.0
        out[node] = quadrature_combination_variance(state, coeffs)
    logging.debug('======= nullifier_variances =======: \n%s', out)
    return out


def nullifier_csv(variances, graph):
    lines = ["NODE, R, NULLIFIER_VARIANCE, IDEAL"]
    for node, value in variances.items():
        r = graph.squeezing_of(node)
        lines.append(f"{node},{format(r, '.17g')},{format(value, '.17g')},{format(np.exp(-2 * r) / 2, '.17g')}")
    return "\n".join(lines) + "\n"


@dataclass
class ClusterNetwork:
    """Squeezers plus passive interferometer that prepare a cluster from vacuum."""
    state: GaussianState
    ops: list
    squeezings: list
    transmissivities: list


def _passive_unitary(O):
    """Complex M x M unitary of an orthogonal symplectic matrix in xpxp ordering."""
    cols = O[:, 0::2]
    return cols[0::2, :] + 1j * cols[1::2, :]


def build_cluster_network(graph, tol=1e-8):
    """
    Alternative constructor: per-mode x-squeezers followed by a beam-splitter network.

    The cluster covariance A = 2 cov of a pure state is diagonalised; its M
    eigenvalues below one give the squeezings r_k = -ln(lambda_k) / 2 and their
    eigenvectors v_k, paired with Omega^T v_k, give the passive part. The
    passive unitary is reduced to a diagonal by Givens rotations on adjacent
    modes, each one realised as beamsplit followed by two phases.

    Returns:
        ClusterNetwork: the prepared state, the op list in application order,
        the squeezings and the transmissivities used.
    """
    target = build_cluster(graph)
    M = target.modes
    A = 2.0 * target.cov
    evals, evecs = np.linalg.eigh(A)
    order = np.argsort(evals)[:M]
    omega_t = symplectic_form(M).T
    O = np.zeros((2 * M, 2 * M))
    squeezings = []
    ops = []
    for k, idx in enumerate(order):
        v = evecs[:, idx]
        O[:, 2 * k] = v
        O[:, 2 * k + 1] = omega_t @ v
        r_k = -0.5 * np.log(evals[idx])
        squeezings.append(float(r_k))
        ops.append(GaussianOp.squeeze(k, r_k, 0.0))
    if np.max(np.abs(O @ O.T - np.eye(2 * M))) > 1e-6:
        raise ProgramError("cluster covariance has no passive factorisation (degenerate squeezing)")

    U = _passive_unitary(O)
    givens = []
    for c in range(M - 1):
        for i in range(M - 1, c, -1):
            a, b = U[i - 1, c], U[i, c]
            norm = np.hypot(abs(a), abs(b))
            if norm < 1e-15 or abs(b) < 1e-15 and abs(np.angle(a)) < 1e-15:
                continue
            phase_a, phase_b = float(np.angle(a)), float(np.angle(b))
            t = abs(a) / norm
            rho = abs(b) / norm
            G = np.array([[t, rho], [-rho, t]]) @ np.diag([np.exp(-1j * phase_a), np.exp(-1j * phase_b)])
            U[[i - 1, i], :] = G @ U[[i - 1, i], :]
            givens.append((i, t * t, phase_a, phase_b))
    deltas = np.angle(np.diag(U))
    for k, delta in enumerate(deltas):
        if abs(delta) > 1e-15:
            ops.append(GaussianOp.phase(k, float(delta)))
    transmissivities = []
    for i, T, phase_a, phase_b in reversed(givens):
        ops.append(GaussianOp.beamsplit(i - 1, i, min(max(T, 0.0), 1.0)))
        ops.append(GaussianOp.phase(i - 1, phase_a))
        ops.append(GaussianOp.phase(i, phase_b))
        transmissivities.append(float(T))

    state = gaussian_ops(GaussianState.vacuum(M), ops)
    error = float(np.max(np.abs(state.cov - target.cov))) / max(1.0, float(np.max(np.abs(target.cov))))
    logging.debug('======= build_cluster_network covariance error =======: \n%s', error)
    if error > tol:
        raise ProgramError(f"network covariance differs from the canonical cluster by {error:.3e}")
    return ClusterNetwork(state, ops, squeezings, transmissivities)


def forced_teleport(state, outcome, record):
    conditioned, density = homodyne_condition(state, 0, np.pi / 2, outcome)
    record.add(0, 'p', outcome, density)
    return gaussian_ops(conditioned, GaussianOp.displace(0, -outcome / np.sqrt(2.0)))


def _gaussian_teleport(state, r, basis, outcome, seed):
    if state.modes != 1:
        raise SpaceMismatchError("the teleport circuit takes a single-mode input")
    full = product(state, GaussianState.squeezed(r, np.pi / 2))
    full = gaussian_ops(full, basis.ops(0) + [GaussianOp.cz(0, 1)])
    record = MeasurementRecord()
    if outcome is None and seed is None:
        return gaussian_feedforward(full, [(0, np.pi / 2)], [[-1.0], [0.0]]), record
    if outcome is None:
        mean, var = full.mean[1], full.cov[1, 1]
        outcome = float(seeded_rng(seed).normal(mean, np.sqrt(var)))
    return forced_teleport(full, outcome, record), record


def support_half_width(components, basis):
    """Half-width of the x support of F U psi for Fock components."""
    cutoff = components.shape[1]
    base = np.sqrt(2 * cutoff + 1)
    return base * (1 + abs(basis.quadratic)) + abs(basis.linear) + 5.0


def phi_rows(components, x, basis=BasisSpec()):
    """(F U psi)(x) for each Fock component; U is applied in position space."""
    cutoff = components.shape[1]
    table = quadrature_table(cutoff, x, 0.0)
    if basis.is_identity():
        phases = 1j ** np.arange(cutoff)
        return (components * phases[None, :]) @ table.T
    psi = components @ table.T
    psi = psi * np.exp(1j * phase_polynomial(x, basis.coefficients()))[None, :]
    dx = x[1] - x[0]
    return psi @ fourier_kernel(x, x, dx).T


def project_mixture(profiles, weights, envelopes, ds, x, cutoff, max_cutoff):
    """Fock density of the outcome mixture with cutoff escalation on leakage."""
    dx = x[1] - x[0]
    chunk = max(1, MIXTURE_BUDGET // max(1, envelopes.size))
    while True:
        hermite = hermite_functions(cutoff, x)
        rho = mixture_density(profiles, weights, envelopes, ds, hermite, dx, chunk=chunk)
        trace = float(np.real(np.trace(rho)))
        leak = float(np.real(rho[-1, -1])) / trace
        if leak <= ESCALATION_THRESHOLD:
            break
        if cutoff >= max_cutoff:
            raise LeakageError(f"output leakage {leak:.3e} above {ESCALATION_THRESHOLD:.0e} at cutoff {cutoff}")
        cutoff = min(int(np.ceil(cutoff * ESCALATION_FACTOR)), max_cutoff)
        logging.warning('position engine: leakage %.3e, escalating cutoff to %d', leak, cutoff)
    deficit = 1.0 - trace
    if deficit > ESCALATION_THRESHOLD:
        logging.warning('position engine: trace deficit %.3e at cutoff %d', deficit, cutoff)
    return FockDensity(FockSpace(1, cutoff), rho).normalize()


def position_teleport(state, ancilla, ancilla_half_width, basis=BasisSpec(), correction=(),
                      outcome=None, seed=None, cutoff=None, max_cutoff=MAX_CUTOFF):
    """
    C_Z teleport of a single-mode Fock input in the position representation.

    With the input psi and ancilla A coupled by C_Z, a p-measurement with
    outcome s followed by X(-s) leaves

        out_s(x) = Y_s(x) A(x + s) (F U psi)(x),
        Y_s(x)   = exp(-i (f(x + s) - f(x)))

    where f is the correction phase polynomial. Outcomes are integrated on a
    grid unless one is forced or sampled.

    Args:
        state (FockState | FockDensity): single-mode input.
        ancilla (callable): A evaluated on an array of positions.
        ancilla_half_width (float): |x| beyond which A is negligible.
        basis (BasisSpec): U applied before the measurement.
        correction (tuple): coefficients (c1, c2, c3, ...) of f.
        outcome (float, optional): forced outcome s.
        seed (int, optional): sample s from its density instead.
        cutoff (int, optional): output cutoff; the input cutoff by default.

    Returns:
        tuple: (normalized FockDensity, MeasurementRecord).
    """
    if state.space.modes != 1:
        raise SpaceMismatchError("the position engine takes a single-mode input")
    basis.check()
    components, weights = pure_components(state)
    half = support_half_width(components, basis)
    x = QuadratureGrid(half, power_of_two_points(half, X_STEP)).values
    dx = x[1] - x[0]
    profiles = phi_rows(components, x, basis)
    cutoff = cutoff or state.space.cutoff
    record = MeasurementRecord()

    def rows(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = shifted_rows(ancilla, x, s)
        if len(correction):
            base = phase_polynomial(x, correction)
            moved = phase_polynomial(x[None, :] + s[:, None], correction)
            out = out * np.exp(-1j * (moved - base[None, :]))
        return out

    s_half = half + ancilla_half_width
    s_grid = QuadratureGrid(s_half, power_of_two_points(s_half, S_STEP))
    if outcome is None and seed is not None:
        envelopes = rows(s_grid.values)
        density = sum(w * outcome_densities(p, envelopes, dx) for p, w in zip(profiles, weights))
        probs = density / density.sum()
        outcome = float(s_grid.values[seeded_rng(seed).choice(s_grid.points, p=probs)])
    if outcome is not None:
        envelope = rows(np.array([outcome]))
        density = float(sum(w * outcome_densities(p, envelope, dx)[0] for p, w in zip(profiles, weights)))
        record.add(0, 'p', outcome, density)
        rho = project_mixture(profiles, weights, envelope, 1.0 / max(density, 1e-300), x, cutoff, max_cutoff)
        return rho, record
    envelopes = rows(s_grid.values)
    logging.debug('======= position_teleport grid =======: \n%s', (x.size, s_grid.points))
    return project_mixture(profiles, weights, envelopes, s_grid.spacing, x, cutoff, max_cutoff), record


def p_squeezed_ancilla(r, coefficients=()):
    """(callable, half-width) of the p-squeezed node, optionally carrying exp(i f(x))."""
    return (lambda z: p_squeezed_wavefunction(z, r, coefficients)), 6.0 * np.exp(r) / np.sqrt(2.0)


def elementary_teleport(state, r, outcome=None, seed=None):
    """
    C_Z teleport onto a p-squeezed ancilla of squeezing r, p-measurement, X(-s).

    The output tends to F|psi> as r grows, with p-noise e^{-2r}/2. Without
    outcome or seed the outcome-averaged state is returned.

    Returns:
        tuple: (output state, MeasurementRecord).
    """
    return gate_by_basis_change(state, BasisSpec.identity(), r, outcome=outcome, seed=seed)


def gate_by_basis_change(state, basis, r, outcome=None, seed=None, cutoff=None):
    """
    Teleport with the measured quadrature changed from p to U^dag p U.

    The basis change is applied to the input mode ahead of the p-measurement,
    so the output tends to F U |psi>.
    """
    basis.check()
    if isinstance(state, GaussianState):
        return _gaussian_teleport(state, r, basis, outcome, seed)
    ancilla, half = p_squeezed_ancilla(r)
    return position_teleport(state, ancilla, half, basis=basis, outcome=outcome, seed=seed, cutoff=cutoff)


def linear_program(graph, bases):
    """
    Program for a linear chain: measure the input and then every node but the last.

    bases[0] is the input's basis and bases[i] that of node i-1. After a
    measurement with outcome s the successor c gets X(-s) and c's other
    unmeasured neighbours get Z(-s).
    """
    if not graph.is_linear_chain():
        raise ProgramError("linear_program needs a linear chain")
    chain = list(graph.nodes)
    if len(bases) != len(chain):
        raise ProgramError(f"{len(bases)} bases for a chain of {len(chain)} nodes")
    measured = [INPUT_NODE] + chain[:-1]
    steps = []
    done = set()
    for i, node in enumerate(measured):
        done.add(node)
        successor = chain[i]
        ff = [(successor, 'x', -1.0)]
        for d in graph.neighbours(successor):
            if d not in done:
                ff.append((d, 'p', -1.0))
        steps.append(ProgramStep(node, bases[i], tuple(ff)))
    return MeasurementProgram(steps)


def run_program(graph, state, program, outcomes=None, seed=None, cutoff=None):
    """
    Attach the input to the first node by C_Z and execute a measurement program.

    Gaussian inputs run on the full multimode state, outcome-averaged unless
    outcomes (one per step) or a seed are given. Fock inputs run linear chains
    by cascading single teleports, one per step, each forced or sampled in
    turn when outcomes or a seed are given.

    Returns:
        tuple: (output state on the remaining node, MeasurementRecord).
    """
    output = program.validate(graph)
    if not isinstance(state, GaussianState):
        return _run_program_fock(graph, state, program, outcomes, seed, cutoff)
    if outcomes is not None and len(outcomes) != len(program.steps):
        raise ProgramError(f"{len(outcomes)} outcomes for {len(program.steps)} steps")

    full = product(state, build_cluster(graph))
    live = [INPUT_NODE] + list(graph.nodes)
    full = gaussian_ops(full, GaussianOp.cz(0, live.index(graph.nodes[0])))
    record = MeasurementRecord()
    rng = seeded_rng(seed) if seed is not None else None
    for k, step in enumerate(program.steps):
        m = live.index(step.node)
        full = gaussian_ops(full, step.basis.ops(m))
        rest = [n for n in live if n != step.node]
        if outcomes is None and rng is None:
            G = np.zeros((2 * len(rest), 1))
            for target, quad, coeff in step.feedforward:
                G[2 * rest.index(target) + (0 if quad == 'x' else 1), 0] += coeff
            full = gaussian_feedforward(full, [(m, np.pi / 2)], G)
        else:
            s = outcomes[k] if outcomes is not None else float(rng.normal(full.mean[2 * m + 1],
                                                                        np.sqrt(full.cov[2 * m + 1, 2 * m + 1])))
            full, density = homodyne_condition(full, m, np.pi / 2, s)
            record.add(step.node, 'p', s, density)
            for target, quad, coeff in step.feedforward:
                shift = coeff * s / np.sqrt(2.0)
                full = gaussian_ops(full, GaussianOp.displace(rest.index(target), shift if quad == 'x' else 1j * shift))
        live = rest
    logging.debug('======= run_program output node =======: \n%s', output)
    return full, record


def _run_program_fock(graph, state, program, outcomes, seed, cutoff):
    if not graph.is_linear_chain():
        raise ProgramError("the fock backend runs linear chains only")
    expected = linear_program(graph, [s.basis for s in program.steps])
    if [s.feedforward for s in expected.steps] != [s.feedforward for s in program.steps]:
        raise ProgramError("the fock backend runs the standard linear-chain feedforward only")
    steps = len(program.steps)
    if outcomes is not None and len(outcomes) != steps:
        raise ProgramError(f"{len(outcomes)} outcomes for {steps} steps")
    seeds = [None] * steps
    if outcomes is None and seed is not None:
        seeds = [int(s) for s in seeded_rng(seed).integers(0, 2 ** 63, size=steps)]
    record = MeasurementRecord()
    chain = list(graph.nodes)
    for i, step in enumerate(program.steps):
        outcome = None if outcomes is None else float(outcomes[i])
        state, single = gate_by_basis_change(state, step.basis, graph.squeezing_of(chain[i]),
                                             outcome=outcome, seed=seeds[i], cutoff=cutoff)
        for _, observable, s, density in single.entries:
            record.add(step.node, observable, s, density)
    return state, record


def composed_target(state, bases):
    """Ideal chain output F U_k ... F U_1 |psi> on a Gaussian input."""
    for basis in bases:
        state = gaussian_ops(state, basis.ops(0) + [GaussianOp.phase(0, np.pi / 2)])
    return state


def commutator_with_cz(coefficients, cutoff):
    """
    Max-norm of [exp(i f(x)) (x) I, C_Z] on the truncated two-mode space.

    Both operators are functions of the commuting pair (x (x) I, I (x) x).
    """
    x = single_mode_matrix('x', cutoff)
    eye = np.eye(cutoff)
    f = sum(c * np.linalg.matrix_power(x, k) for k, c in enumerate(coefficients, start=1))
    U = np.kron(expm(1j * f), eye)
    cz = expm(1j * np.kron(x, x))
    return float(np.max(np.abs(U @ cz - cz @ U)))

