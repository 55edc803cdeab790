"""
Experiment registry behind the command line.

Each experiment takes the resolved parameter dictionary, may write back the
values it resolved (g, grid.L or t = auto), and returns an
ExperimentResult: a flat summary of scalars plus plot-ready CSV rows.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from src.calculators.cluster_calculator import (
    BasisSpec,
    ClusterGraph,
    build_cluster,
    build_cluster_network,
    gate_by_basis_change,
    nullifier_variances,
)
from src.calculators.measurement_calculator import QuadratureGrid
from src.calculators.metrics_calculator import fidelity, higher_population, qubit_population, trace_distance, vacuum_population
from src.calculators.offline_gates_calculator import (
    CubicAncillaSpec,
    correction_is_gaussian,
    cubic_gate_offline,
    cubic_unitary,
    excess_noise,
    gkp_ancilla_table,
    optimal_squeezer_gain,
    squeezer_gain,
    universal_squeezer,
)
from src.calculators.teleport_calculator import (
    TeleportSpec,
    apply_loss,
    cv_teleport,
    degrade_input,
    fidelity_estimators,
    make_epr,
    polarization_target,
    resolve_grid,
    teleport_dv,
    timebin_teleport,
)
from src.errors import ConfigError, ToleranceError
from src.fock_ir import FockState, fock_gaussian_op, moments
from src.gaussian_ir import (
    GaussianOp,
    GaussianState,
    gaussian_fidelity_coherent,
    gaussian_ops,
    quadrature_combination_variance,
)
from src.util.toy_states import ToyStateCreator

DV_TOLERANCE = 1e-10
NULLIFIER_TOLERANCE = 1e-8
COHERENT_TOLERANCE = 1e-6
EPR_TOLERANCE = 1e-10
CHANNEL_TOLERANCE = 1e-2
GAIN_TOLERANCE = 1e-5


@dataclass
class ExperimentResult:
    summary: dict
    header: list
    rows: list = field(default_factory=list)


@dataclass(frozen=True)
class Experiment:
    run: object
    defaults: dict
    columns: tuple
    description: str = ""


def _gain(params, auto):
    if params['g'] == 'auto':
        params['g'] = float(auto)
    return float(params['g'])


def _grid(params):
    """QuadratureGrid from grid.L and grid.points, or None to let the protocol choose."""
    if params.get('grid.L', 'auto') == 'auto':
        return None
    return QuadratureGrid(float(params['grid.L']), int(params['grid.points']))


def _check(name, value, target, tol):
    if abs(value - target) > tol:
        raise ToleranceError(f"{name} = {value:.12g} differs from {target:.12g} by more than {tol:g}")


def epr_correlations(params):
    r, backend = float(params['r']), params['backend']
    state = make_epr(r, backend, int(params['cutoff']))
    if backend == 'fock':
        state = moments(state).as_gaussian()
    var_x = quadrature_combination_variance(state, {0: 1.0, 2: -1.0})
    var_p = quadrature_combination_variance(state, {1: 1.0, 3: 1.0})
    ideal = float(np.exp(-2 * r))
    if backend == 'gaussian':
        _check("Var(x1 - x2)", var_x, ideal, EPR_TOLERANCE)
        _check("Var(p1 + p2)", var_p, ideal, EPR_TOLERANCE)
    summary = {"var_x_minus": var_x, "var_p_plus": var_p, "ideal": ideal}
    return ExperimentResult(summary, ["R", "VAR_X1_MINUS_X2", "VAR_P1_PLUS_P2", "IDEAL"],
                            [[r, var_x, var_p, ideal]])


def teleport_coherent(params):
    r, alpha, backend = float(params['r']), complex(params['alpha']), params['backend']
    g = _gain(params, 1.0)
    ideal = float(1.0 / (1.0 + np.exp(-2 * r))) if g == 1.0 else float('nan')
    if backend == 'gaussian':
        out = cv_teleport(GaussianState.coherent(alpha), TeleportSpec(r, g, backend='gaussian'))
        value = gaussian_fidelity_coherent(out, GaussianState.coherent(alpha))
        if g == 1.0:
            _check("coherent fidelity", value, ideal, COHERENT_TOLERANCE)
    else:
        state = ToyStateCreator(int(params['cutoff'])).coherent(alpha)
        spec = TeleportSpec(r, g, _grid(params), 'fock')
        grid = resolve_grid(spec, state.to_density(), [0])
        params['grid.L'] = grid.half_width
        value = fidelity(state, cv_teleport(state, TeleportSpec(r, g, grid, 'fock')))
    summary = {"fidelity": value, "ideal": ideal, "g": g}
    return ExperimentResult(summary, ["R", "G", "FIDELITY", "IDEAL"], [[r, g, value, ideal]])


def teleport_qubit(params):
    r = float(params['r'])
    g = _gain(params, np.tanh(r))
    a = float(params['alpha'])
    if not 0 <= a <= 1:
        raise ConfigError(f"alpha must lie in [0, 1] for the qubit experiment, got {a}")
    creator = ToyStateCreator(int(params['cutoff']))
    target = creator.dual_rail_qubit(a, np.sqrt(1 - a * a))
    population = float(params['input_population'])
    state = degrade_input(target, population) if population < 1 else target
    spec = TeleportSpec(r, g, _grid(params), 'fock')
    rho = state.to_density() if isinstance(state, FockState) else state
    grid = resolve_grid(spec, rho, [0, 1])
    params['grid.L'] = grid.half_width
    out = timebin_teleport(rho, TeleportSpec(r, g, grid, 'fock'))
    estimators = fidelity_estimators(out, target)
    summary = {
        "qubit_population": qubit_population(out),
        "vacuum_population": vacuum_population(out),
        "higher_population": higher_population(out),
        "loss_prediction": float(np.tanh(r) ** 2 * population),
        **estimators,
    }
    header = ["QUBIT_POPULATION", "VACUUM_POPULATION", "HIGHER_POPULATION", "LOSS_PREDICTION"]
    return ExperimentResult(summary, header, [[summary[k.lower()] for k in header]])


def teleport_dv_experiment(params):
    creator = ToyStateCreator(seed=int(params['seed']))
    rows = []
    for i in range(int(params['samples'])):
        alpha, beta = creator.haar_qubit()
        rho, probability = teleport_dv(alpha, beta)
        value = fidelity(polarization_target(alpha, beta, rho.space.cutoff), rho)
        _check(f"dv fidelity of sample {i}", value, 1.0, DV_TOLERANCE)
        _check(f"dv success probability of sample {i}", probability, 0.25, DV_TOLERANCE)
        rows.append([i, value, probability])
    summary = {
        "min_fidelity": min((row[1] for row in rows), default=float('nan')),
        "mean_success_probability": float(np.mean([row[2] for row in rows])) if rows else float('nan'),
    }
    return ExperimentResult(summary, ["SAMPLE", "FIDELITY", "SUCCESS_PROBABILITY"], rows)


def cluster_nullifiers(params):
    r, count = float(params['r']), int(params['nodes'])
    graph = ClusterGraph.linear(count, r)
    backend = params['backend']
    canonical = nullifier_variances(build_cluster(graph, backend, int(params['cutoff'])), graph)
    network = build_cluster_network(graph) if backend == 'gaussian' else None
    through = nullifier_variances(network.state, graph) if network else {}
    ideal = float(np.exp(-2 * r) / 2)
    if backend == 'gaussian':
        for node, value in list(canonical.items()) + list(through.items()):
            _check(f"nullifier of node {node}", value, ideal, NULLIFIER_TOLERANCE)
    rows = [[node, value, through.get(node, float('nan')), ideal] for node, value in canonical.items()]
    summary = {"max_nullifier": max(canonical.values()), "ideal": ideal,
               "network_transmissivities": network.transmissivities if network else []}
    return ExperimentResult(summary, ["NODE", "NULLIFIER_VARIANCE", "NETWORK_NULLIFIER_VARIANCE", "IDEAL"], rows)


def cluster_gate(params):
    r, alpha, backend = float(params['r']), complex(params['alpha']), params['backend']
    if backend == 'gaussian':
        out, _ = gate_by_basis_change(GaussianState.coherent(alpha), BasisSpec(), r)
        target = gaussian_ops(GaussianState.coherent(alpha), GaussianOp.phase(0, np.pi / 2))
        value = gaussian_fidelity_coherent(out, target)
    else:
        state = ToyStateCreator(int(params['cutoff'])).coherent(alpha)
        out, _ = gate_by_basis_change(state, BasisSpec(), r)
        target = fock_gaussian_op(state, GaussianOp.phase(0, np.pi / 2))
        value = fidelity(FockState(out.space, _pad(target.amplitudes, out.space.cutoff)), out)
    summary = {"fidelity": value}
    return ExperimentResult(summary, ["R", "FIDELITY"], [[r, value]])


def _pad(amplitudes, cutoff):
    out = np.zeros(cutoff, dtype=complex)
    out[:min(cutoff, amplitudes.size)] = amplitudes[:cutoff]
    return out


def squeezer(params):
    T, r, alpha = float(params['T']), float(params['r']), complex(params['alpha'])
    closed = squeezer_gain(T)
    g = _gain(params, closed)
    best = optimal_squeezer_gain(T, r)
    _check("optimal squeezer gain", best, closed, GAIN_TOLERANCE)
    out = universal_squeezer(GaussianState.coherent(alpha), T, r, g)
    summary = {
        "g": g,
        "optimal_g": best,
        "mean_x": float(out.mean[0]),
        "mean_p": float(out.mean[1]),
        "ideal_mean_x": float(np.sqrt(2 * T) * alpha.real),
        "excess_noise": excess_noise(T, r, g),
        "ideal_excess_x": float((1 - T) * np.exp(-2 * r) / 2),
    }
    return ExperimentResult(summary, ["T", "R", "G", "EXCESS_NOISE"], [[T, r, g, summary["excess_noise"]]])


def cubic_gate(params):
    chi, r, cutoff = float(params['chi']), float(params['r']), int(params['cutoff'])
    creator = ToyStateCreator(cutoff)
    state = creator.coherent(complex(params['alpha']))
    out, _ = cubic_gate_offline(state, chi, CubicAncillaSpec('exact', chi, r))
    framed = _pad(fock_gaussian_op(state, GaussianOp.phase(0, np.pi / 2)).amplitudes, out.space.cutoff)
    oracle = FockState(out.space, cubic_unitary(chi, out.space.cutoff) @ framed).normalize()
    gap, gaussian = correction_is_gaussian(chi, 0.5, cutoff)
    if not gaussian:
        raise ToleranceError(f"cubic correction departs from its Gaussian form by {gap:.3e}")
    summary = {"fidelity": fidelity(oracle, out), "correction_gap": gap, "output_cutoff": out.space.cutoff}
    return ExperimentResult(summary, ["CHI", "R", "FIDELITY"], [[chi, r, summary["fidelity"]]])


def gkp_ancilla(params):
    r, cutoff = float(params['r']), int(params['cutoff'])
    t = None if params['t'] == 'auto' else float(params['t'])
    spec = CubicAncillaSpec('gkp', 0.0, r, t)
    params['t'] = spec.displacement
    rows = gkp_ancilla_table(r, range(int(params['counts'])), cutoff, spec.displacement)
    overlaps = [row[5] for row in rows if np.isfinite(row[5])]
    summary = {
        "t": spec.displacement,
        "max_probability": max((row[1] for row in rows), default=float('nan')),
        "best_fidelity": max(overlaps, default=float('nan')),
    }
    header = ["N", "PROBABILITY", "CHI", "NULLIFIER_VARIANCE", "VAR_P", "FIDELITY"]
    return ExperimentResult(summary, header, [list(row) for row in rows])


def channel_equivalence(params):
    r, cutoff = float(params['r']), int(params['cutoff'])
    creator = ToyStateCreator(cutoff)
    inputs = {
        "vacuum": creator.vacuum(),
        "fock1": creator.fock(1),
        "coherent": creator.coherent(0.5),
        "superposition": creator.superposition([1, 1]),
    }
    spec = TeleportSpec.tuned(r, _grid(params))
    params['g'] = spec.g
    rows = []
    for name, state in inputs.items():
        grid = resolve_grid(spec, state.to_density(), [0])
        teleported = cv_teleport(state, TeleportSpec(r, spec.g, grid, 'fock'))
        rows.append([name, grid.half_width, trace_distance(teleported, apply_loss(state, spec.loss_equivalent))])
    params['grid.L'] = max(row[1] for row in rows)
    largest = max(row[2] for row in rows)
    if largest >= CHANNEL_TOLERANCE:
        raise ToleranceError(f"teleporter differs from the loss channel by {largest:.3e}")
    summary = {"max_trace_distance": largest, "grid_L": {row[0]: row[1] for row in rows}}
    return ExperimentResult(summary, ["INPUT", "GRID_L", "TRACE_DISTANCE"], rows)


COMMON = {'grid.L': 'auto', 'grid.points': 512, 'seed': 0}

EXPERIMENTS = {
    "epr-correlations": Experiment(
        epr_correlations, {'r': 1.0, 'backend': 'gaussian', 'cutoff': 16},
        ("var_x_minus", "var_p_plus", "ideal"), "EPR quadrature correlations"),
    "teleport-coherent": Experiment(
        teleport_coherent, {'r': 1.0, 'g': 1.0, 'alpha': 0.5, 'backend': 'gaussian', 'cutoff': 16},
        ("fidelity", "ideal", "g"), "coherent-state teleportation benchmark"),
    "teleport-qubit": Experiment(
        teleport_qubit, {'r': 1.01, 'g': 'auto', 'alpha': float(np.sqrt(0.5)), 'cutoff': 12,
                         'input_population': 1.0},
        ("qubit_population", "vacuum_population", "higher_population", "loss_prediction",
         "two_mode_fidelity", "qubit_conditioned_fidelity"), "time-bin qubit through the CV teleporter"),
    "teleport-dv": Experiment(
        teleport_dv_experiment, {'samples': 20},
        ("min_fidelity", "mean_success_probability"), "polarization-qubit teleportation"),
    "cluster-nullifiers": Experiment(
        cluster_nullifiers, {'r': 1.0, 'nodes': 4, 'backend': 'gaussian', 'cutoff': 8},
        ("max_nullifier", "ideal"), "linear cluster nullifier variances"),
    "cluster-gate": Experiment(
        cluster_gate, {'r': 1.0, 'alpha': 0.5, 'backend': 'gaussian', 'cutoff': 12},
        ("fidelity",), "elementary cluster teleportation"),
    "squeezer": Experiment(
        squeezer, {'T': 0.5, 'r': 1.0, 'g': 'auto', 'alpha': 1.0},
        ("g", "optimal_g", "mean_x", "excess_noise", "ideal_excess_x"), "universal squeezer"),
    "cubic-gate": Experiment(
        cubic_gate, {'chi': 0.05, 'r': 2.0, 'cutoff': 20, 'alpha': 0.0},
        ("fidelity", "correction_gap", "output_cutoff"), "off-line cubic phase gate"),
    "gkp-ancilla": Experiment(
        gkp_ancilla, {'r': 0.5, 't': 'auto', 'cutoff': 30, 'counts': 4},
        ("t", "max_probability", "best_fidelity"), "photon-counted cubic ancilla versus count"),
    "channel-equivalence": Experiment(
        channel_equivalence, {'r': 0.7, 'cutoff': 12},
        ("max_trace_distance",), "teleporter versus pure loss"),
}


def defaults_for(name):
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {sorted(EXPERIMENTS)}")
    return {**COMMON, **EXPERIMENTS[name].defaults}


def run_experiment(name, params):
    """Run one experiment on a resolved parameter dictionary (updated in place)."""
    experiment = EXPERIMENTS[name]
    logging.info('running %s with %s', name, params)
    return experiment.run(params)
