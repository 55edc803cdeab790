import logging

import numpy as np
import pytest

from src.calculators.cluster_calculator import (
    INPUT_NODE,
    BasisSpec,
    ClusterGraph,
    MeasurementProgram,
    ProgramStep,
    build_cluster,
    build_cluster_network,
    commutator_with_cz,
    composed_target,
    elementary_teleport,
    gate_by_basis_change,
    linear_program,
    nullifier_csv,
    nullifier_variances,
    run_program,
)
from src.calculators.metrics_calculator import fidelity
from src.errors import ParameterRangeError, ProgramError
from src.fock_ir import moments
from src.gaussian_ir import GaussianState, gaussian_fidelity_coherent
from src.util.toy_states import ToyStateCreator


@pytest.fixture(scope="function")
def setup_logging():
    logging.basicConfig(
        level=logging.DEBUG,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


SQUARE = ClusterGraph((0, 1, 2, 3), ((0, 1), (1, 2), (2, 3), (3, 0)), 0.8)
STAR = ClusterGraph((0, 1, 2, 3), ((0, 1), (0, 2), (0, 3)), 1.2)


@pytest.mark.parametrize("edges", [((0, 0),), ((0, 1), (1, 0)), ((0, 5),)])
def test_graph_rejects_bad_edges(edges, setup_logging):
    with pytest.raises(ProgramError):
        ClusterGraph((0, 1), edges)


def test_graph_rejects_negative_squeezing(setup_logging):
    with pytest.raises(ParameterRangeError):
        ClusterGraph((0, 1), ((0, 1),), -0.5)
    with pytest.raises(ParameterRangeError):
        ClusterGraph((0, 1), ((0, 1),), 1.0, {1: -0.1})


def test_graph_from_adjacency(setup_logging):
    graph = ClusterGraph.from_json('{"adjacency": {"0": [1], "1": [0, 2], "2": [1]}, "r": 0.5}')
    assert graph.edges == ((0, 1), (1, 2)), "Expected: %s, Actual: %s" % (((0, 1), (1, 2)), graph.edges)
    assert graph.is_linear_chain()
    assert not SQUARE.is_linear_chain()
    assert ClusterGraph.from_json(graph.to_json()) == graph


@pytest.mark.parametrize("graph", [ClusterGraph.linear(4, 1.0), ClusterGraph.linear(4, 0.5), SQUARE, STAR],
                         ids=["linear-r1", "linear-r0.5", "square", "star"])
def test_gaussian_nullifiers(graph, setup_logging):
    """
    Every nullifier p_a - sum_b x_b of the canonical cluster has variance e^{-2r}/2.
    """
    variances = nullifier_variances(build_cluster(graph), graph)
    expected = np.exp(-2 * graph.r) / 2
    for node, value in variances.items():
        assert abs(value - expected) < 1e-8, "Node: %s, Expected: %s, Actual: %s" % (node, expected, value)


def test_per_node_squeezing(setup_logging):
    graph = ClusterGraph((0, 1, 2), ((0, 1), (1, 2)), 1.0, {2: 0.4})
    variances = nullifier_variances(build_cluster(graph), graph)
    assert abs(variances[2] - np.exp(-0.8) / 2) < 1e-8, "Actual: %s" % variances


def test_fock_nullifiers(setup_logging):
    graph = ClusterGraph.linear(2, 0.3)
    variances = nullifier_variances(build_cluster(graph, 'fock', 16), graph)
    expected = np.exp(-0.6) / 2
    for node, value in variances.items():
        assert abs(value - expected) < 1e-3, "Node: %s, Expected: %s, Actual: %s" % (node, expected, value)


def test_node_limits(setup_logging):
    with pytest.raises(ProgramError):
        build_cluster(ClusterGraph.linear(13))
    with pytest.raises(ProgramError):
        build_cluster(ClusterGraph.linear(6), 'fock', 4)


def test_nullifier_csv(setup_logging):
    graph = ClusterGraph.linear(2, 1.0)
    text = nullifier_csv(nullifier_variances(build_cluster(graph), graph), graph)
    lines = text.splitlines()
    assert lines[0] == "NODE, R, NULLIFIER_VARIANCE, IDEAL"
    assert len(lines) == 3


@pytest.mark.parametrize("graph", [ClusterGraph.linear(4, 1.0), SQUARE], ids=["linear", "square"])
def test_network_reproduces_cluster(graph, setup_logging):
    network = build_cluster_network(graph)
    variances = nullifier_variances(network.state, graph)
    expected = np.exp(-2 * graph.r) / 2
    for node, value in variances.items():
        assert abs(value - expected) < 1e-8, "Node: %s, Expected: %s, Actual: %s" % (node, expected, value)
    assert len(network.squeezings) == len(graph.nodes)
    assert all(0.0 <= T <= 1.0 for T in network.transmissivities)


def test_gaussian_elementary_teleport(setup_logging):
    """
    The outcome-averaged output is F psi with p-noise e^{-2r}/2.
    """
    r = 1.3
    state = GaussianState.coherent(0.3 + 0.2j)
    out, record = elementary_teleport(state, r)
    expected_mean = np.array([-state.mean[1], state.mean[0]])
    expected_cov = np.diag([0.5, 0.5 + np.exp(-2 * r) / 2])
    assert np.allclose(out.mean, expected_mean), "Expected: %s, Actual: %s" % (expected_mean, out.mean)
    assert np.allclose(out.cov, expected_cov), "Expected: %s, Actual: %s" % (expected_cov, out.cov)
    assert len(record) == 0


def test_gaussian_forced_and_seeded_outcomes(setup_logging):
    state = GaussianState.coherent(0.5)
    out, record = elementary_teleport(state, 1.0, outcome=0.4)
    assert record.outcomes() == [0.4]
    assert out.is_physical()

    first = elementary_teleport(state, 1.0, seed=5)[1].outcomes()
    second = elementary_teleport(state, 1.0, seed=5)[1].outcomes()
    assert first == second, "Expected: %s, Actual: %s" % (first, second)


def test_gaussian_shear_gate(setup_logging):
    sigma = 0.6
    state = GaussianState.coherent(0.4 - 0.1j)
    out, _ = gate_by_basis_change(state, BasisSpec.shear(sigma), 2.0)
    mx, mp = state.mean
    expected = np.array([-(mp + sigma * mx), mx])
    assert np.allclose(out.mean, expected), "Expected: %s, Actual: %s" % (expected, out.mean)


def test_cubic_basis_rejected(setup_logging):
    with pytest.raises(ProgramError):
        gate_by_basis_change(GaussianState.vacuum(), BasisSpec(cubic=0.1), 1.0)


def test_linear_program_feedforward(setup_logging):
    graph = ClusterGraph.linear(3)
    program = linear_program(graph, [BasisSpec()] * 3)
    assert [s.node for s in program.steps] == [INPUT_NODE, 0, 1]
    expected = [
        ((0, 'x', -1.0), (1, 'p', -1.0)),
        ((1, 'x', -1.0), (2, 'p', -1.0)),
        ((2, 'x', -1.0),),
    ]
    result = [s.feedforward for s in program.steps]
    assert result == expected, "Expected: %s, Actual: %s" % (expected, result)
    assert program.validate(graph) == 2
    assert MeasurementProgram.from_json(program.to_json()) == program


def test_program_validation(setup_logging):
    graph = ClusterGraph.linear(2)
    twice = MeasurementProgram([ProgramStep(INPUT_NODE), ProgramStep(INPUT_NODE)])
    no_input = MeasurementProgram([ProgramStep(0)])
    backwards = MeasurementProgram([ProgramStep(INPUT_NODE), ProgramStep(0, feedforward=((INPUT_NODE, 'x', 1.0),))])
    too_few = MeasurementProgram([ProgramStep(INPUT_NODE)])
    for program in (twice, no_input, backwards):
        with pytest.raises(ProgramError):
            program.validate(graph)
    with pytest.raises(ProgramError):
        too_few.validate(ClusterGraph.linear(3))
    with pytest.raises(ProgramError):
        linear_program(SQUARE, [BasisSpec()] * 4)


BASES = [BasisSpec.shear(0.3), BasisSpec.z(0.5), BasisSpec.identity()]


def test_chain_matches_composed_gates(setup_logging):
    graph = ClusterGraph.linear(3, 6.0)
    state = GaussianState.coherent(0.4 + 0.3j)
    out, _ = run_program(graph, state, linear_program(graph, BASES))
    target = composed_target(state, BASES)
    assert np.allclose(out.mean, target.mean, atol=1e-8), "Expected: %s, Actual: %s" % (target.mean, out.mean)
    assert np.allclose(out.cov, target.cov, atol=1e-4), "Expected: %s, Actual: %s" % (target.cov, out.cov)


def test_chain_output_does_not_depend_on_outcomes(setup_logging):
    """
    With the byproduct feedforward in place the conditioned output matches the averaged one.
    """
    graph = ClusterGraph.linear(3, 6.0)
    state = GaussianState.coherent(0.4 + 0.3j)
    program = linear_program(graph, BASES)
    averaged, _ = run_program(graph, state, program)
    forced, record = run_program(graph, state, program, outcomes=[0.7, -1.2, 2.5])
    assert len(record) == 3
    assert np.allclose(forced.mean, averaged.mean, atol=1e-3), "Expected: %s, Actual: %s" % (averaged.mean,
                                                                                           forced.mean)
    with pytest.raises(ProgramError):
        run_program(graph, state, program, outcomes=[0.1])


def test_seeded_program_replays(setup_logging):
    graph = ClusterGraph.linear(3, 2.0)
    program = linear_program(graph, BASES)
    first = run_program(graph, GaussianState.vacuum(), program, seed=9)[1].outcomes()
    second = run_program(graph, GaussianState.vacuum(), program, seed=9)[1].outcomes()
    assert first == second


def test_fock_teleport_vacuum(setup_logging):
    r = 1.0
    out, _ = elementary_teleport(ToyStateCreator(cutoff=10).vacuum(), r)
    result = fidelity(ToyStateCreator(cutoff=out.space.cutoff).vacuum(), out)
    expected = 1 / np.sqrt(1 + np.exp(-2 * r) / 2)
    assert abs(result - expected) < 1e-3, "Expected: %s, Actual: %s" % (expected, result)


def test_fock_teleport_fidelity_grows_with_squeezing(setup_logging):
    toys = ToyStateCreator(cutoff=10)
    values = []
    for r in (0.5, 1.0, 1.5, 2.0):
        out, _ = elementary_teleport(toys.coherent(0.5), r)
        values.append(fidelity(ToyStateCreator(cutoff=out.space.cutoff).coherent(0.5j), out))
    assert all(a < b for a, b in zip(values, values[1:])), "Actual: %s" % values
    assert values[-1] > 0.95, "Expected: > 0.95, Actual: %s" % values[-1]


def test_fock_forced_outcome(setup_logging):
    toys = ToyStateCreator(cutoff=8)
    out, record = elementary_teleport(toys.fock(1), 1.5, outcome=0.0)
    assert record.outcomes() == [0.0]
    assert out.is_valid(tol=1e-8)
    seeded = [elementary_teleport(toys.fock(1), 1.5, seed=2)[1].outcomes() for _ in range(2)]
    assert seeded[0] == seeded[1]


def test_fock_shear_gate_matches_gaussian(setup_logging):
    r = 1.5
    basis = BasisSpec.shear(0.5)
    fock, _ = gate_by_basis_change(ToyStateCreator(cutoff=14).coherent(0.3), basis, r)
    gaussian, _ = gate_by_basis_change(GaussianState.coherent(0.3), basis, r)
    m = moments(fock)
    assert np.allclose(m.mean, gaussian.mean, atol=1e-2), "Expected: %s, Actual: %s" % (gaussian.mean, m.mean)
    assert np.allclose(m.cov, gaussian.cov, atol=1e-2), "Expected: %s, Actual: %s" % (gaussian.cov, m.cov)


def test_fock_chain_matches_gaussian(setup_logging):
    graph = ClusterGraph.linear(2, 1.5)
    program = linear_program(graph, [BasisSpec(), BasisSpec()])
    fock, _ = run_program(graph, ToyStateCreator(cutoff=10).coherent(0.3), program)
    gaussian, _ = run_program(graph, GaussianState.coherent(0.3), program)
    result = gaussian_fidelity_coherent(moments(fock).as_gaussian(), gaussian)
    assert result > 1 - 1e-3, "Expected: ~1, Actual: %s" % result


def test_fock_program_records_outcomes(setup_logging):
    graph = ClusterGraph.linear(2, 1.5)
    program = linear_program(graph, [BasisSpec(), BasisSpec()])
    state = ToyStateCreator(cutoff=10).coherent(0.3)
    fock, record = run_program(graph, state, program, outcomes=[0.2, -0.1])
    assert record.outcomes() == [0.2, -0.1], "Actual: %s" % record.outcomes()
    assert [entry[0] for entry in record.entries] == [INPUT_NODE, 0]
    gaussian, _ = run_program(graph, GaussianState.coherent(0.3), program, outcomes=[0.2, -0.1])
    result = gaussian_fidelity_coherent(moments(fock).as_gaussian(), gaussian)
    assert result > 1 - 1e-3, "Expected: ~1, Actual: %s" % result

    seeded = [run_program(graph, state, program, seed=4)[1].outcomes() for _ in range(2)]
    assert len(seeded[0]) == 2
    assert seeded[0] == seeded[1]
    with pytest.raises(ProgramError):
        run_program(graph, state, program, outcomes=[0.2])


@pytest.mark.parametrize("coefficients", [(0.5,), (0.0, 0.3), (0.0, 0.0, 0.05)])
def test_phase_gates_commute_with_cz(coefficients, setup_logging):
    result = commutator_with_cz(coefficients, 8)
    assert result < 1e-8, "Expected: < 1e-8, Actual: %s" % result
