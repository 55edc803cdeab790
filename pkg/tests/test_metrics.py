import logging

import numpy as np
import pytest

from src.calculators.measurement_calculator import QuadratureGrid
from src.calculators.metrics_calculator import (
    QubitSubspace,
    density_elements,
    density_table,
    density_table_json,
    fidelity,
    higher_population,
    purity,
    qubit_population,
    trace_distance,
    vacuum_population,
    wigner_csv,
    wigner_grid,
)
from src.calculators.teleport_calculator import apply_loss
from src.errors import GridResolutionError, ModeIndexError, SpaceMismatchError
from src.fock_ir import FockDensity, FockSpace, FockState
from src.util.toy_states import ToyStateCreator


@pytest.fixture(scope="function")
def setup_logging():
    logging.basicConfig(
        level=logging.DEBUG,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def test_fidelity_of_orthogonal_states(setup_logging):
    toys = ToyStateCreator(cutoff=4)
    assert fidelity(toys.fock(0), toys.fock(1)) == 0.0
    assert abs(fidelity(toys.fock(2), toys.fock(2)) - 1) < 1e-12


def test_mixed_mixed_fidelity(setup_logging):
    """
    Uhlmann fidelity of two diagonal densities is (sum sqrt(p_i q_i))^2.
    """
    space = FockSpace(1, 3)
    p = np.array([0.5, 0.3, 0.2])
    q = np.array([0.2, 0.2, 0.6])
    result, clipped = fidelity(FockDensity(space, np.diag(p)), FockDensity(space, np.diag(q)), report=True)
    expected = np.sum(np.sqrt(p * q)) ** 2
    assert abs(result - expected) < 1e-12, "Expected: %s, Actual: %s" % (expected, result)
    assert clipped == 0.0


def test_fidelity_space_mismatch(setup_logging):
    with pytest.raises(SpaceMismatchError):
        fidelity(ToyStateCreator(cutoff=4).vacuum(), ToyStateCreator(cutoff=5).vacuum())


def test_trace_distance_and_purity(setup_logging):
    toys = ToyStateCreator(cutoff=4)
    assert abs(trace_distance(toys.fock(0), toys.fock(1)) - 1) < 1e-12
    mixed = FockDensity(FockSpace(1, 4), np.diag([0.5, 0.5, 0, 0]))
    assert abs(purity(mixed) - 0.5) < 1e-12, "Expected: %s, Actual: %s" % (0.5, purity(mixed))
    assert purity(toys.fock(3)) == 1.0


def test_register_populations(setup_logging):
    toys = ToyStateCreator(cutoff=4)
    lossy = apply_loss(toys.dual_rail_qubit(0.6, 0.8), 0.7)
    assert abs(qubit_population(lossy) - 0.7) < 1e-12
    assert abs(vacuum_population(lossy) - 0.3) < 1e-12
    assert higher_population(lossy) < 1e-12

    space = FockSpace(2, 4)
    pair = FockState.basis(space, (1, 1))
    assert abs(higher_population(pair) - 1) < 1e-12


def test_qubit_population_on_larger_register(setup_logging):
    toys = ToyStateCreator(cutoff=3)
    qubit = toys.dual_rail_qubit(1.0, 1.0)
    joint = FockState(FockSpace(3, 3), np.kron(toys.fock(2).amplitudes, qubit.amplitudes))
    result = qubit_population(joint, QubitSubspace(3, (1, 2)))
    assert abs(result - 1) < 1e-12, "Expected: %s, Actual: %s" % (1.0, result)
    with pytest.raises(ModeIndexError):
        qubit_population(toys.vacuum())


def test_density_elements_and_table(setup_logging):
    toys = ToyStateCreator(cutoff=3)
    qubit = toys.dual_rail_qubit(0.6, 0.8j)
    values = density_elements(qubit, [((0, 1), (1, 0)), ((1, 0), (1, 0))])
    expected = [0.6 * np.conj(0.8j), 0.64]
    assert np.allclose(values, expected), "Expected: %s, Actual: %s" % (expected, values)

    rows = density_table(qubit)
    assert len(rows) == 16
    text = density_table_json(qubit)
    assert '"imag"' in text and '"k"' in text


def test_wigner_values_at_origin(setup_logging):
    grid = QuadratureGrid(4.0, 64)
    toys = ToyStateCreator(cutoff=6)
    centre = np.argmin(np.abs(grid.values))
    x = grid.values[centre]
    r2 = 2 * x ** 2
    vacuum = wigner_grid(toys.vacuum(), 0, grid)
    assert vacuum.max() <= 1 / np.pi + 1e-12
    one = wigner_grid(toys.fock(1), 0, grid)[centre, centre]
    # the grid has no point at zero; the nearest one is within half a spacing
    expected = (2 * r2 - 1) * np.exp(-r2) / np.pi
    assert abs(one - expected) < 1e-12, "Expected: %s, Actual: %s" % (expected, one)
    assert abs(one + 1 / np.pi) < 1e-2, "Expected: %s, Actual: %s" % (-1 / np.pi, one)


def test_fuchs_van_de_graaff_bounds(setup_logging):
    toys = ToyStateCreator(cutoff=6, seed=3)
    space = FockSpace(1, 6)
    for _ in range(200):
        a, b = toys.random_pure_state(space), toys.random_pure_state(space)
        root = np.sqrt(fidelity(a, b))
        distance = trace_distance(a, b)
        lower, upper = 1 - root, np.sqrt(1 - root ** 2)
        assert lower - 1e-8 <= distance <= upper + 1e-8, "Expected: [%s, %s], Actual: %s" % (lower, upper, distance)


def test_wigner_normalization(setup_logging):
    grid = QuadratureGrid(6.0, 256)
    W = wigner_grid(ToyStateCreator(cutoff=10).coherent(0.5 + 0.5j), 0, grid)
    total = W.sum() * grid.spacing ** 2
    assert abs(total - 1) < 1e-6, "Expected: %s, Actual: %s" % (1.0, total)


def test_wigner_needs_fine_grid(setup_logging):
    squeezed = ToyStateCreator(cutoff=20).squeezed(1.0, 0.0)
    with pytest.raises(GridResolutionError):
        wigner_grid(squeezed, 0, QuadratureGrid(4.0, 64))


def test_wigner_csv_header(setup_logging):
    text = wigner_csv(ToyStateCreator(cutoff=4).vacuum(), 0, QuadratureGrid(3.0, 64))
    lines = text.splitlines()
    assert lines[0] == "X, P, W"
    assert len(lines) == 1 + 64 * 64
