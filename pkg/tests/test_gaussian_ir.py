import logging

import numpy as np
import pytest

from src.errors import ModeIndexError, ParameterRangeError, SingularMarginalError, SpaceMismatchError
from src.fock_ir import FockSpace, FockState, fock_gaussian_op, moments
from src.gaussian_ir import (
    GaussianOp,
    GaussianState,
    gaussian_feedforward,
    gaussian_fidelity_coherent,
    gaussian_ops,
    homodyne_condition,
    product,
    quadrature_combination_variance,
    reduce,
)


@pytest.fixture(scope="function")
def setup_logging():
    logging.basicConfig(
        level=logging.DEBUG,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


ALL_OPS = [
    GaussianOp.squeeze(0, 0.4, 0.3),
    GaussianOp.phase(1, 1.1),
    GaussianOp.beamsplit(0, 1, 0.3),
    GaussianOp.displace(0, 0.2 - 0.5j),
    GaussianOp.two_mode_squeeze(0, 1, 0.6),
    GaussianOp.cz(0, 1, 0.7),
    GaussianOp.shear(1, -0.4),
]


@pytest.mark.parametrize("op", ALL_OPS, ids=lambda op: op.kind)
def test_every_op_is_symplectic(op, setup_logging):
    transform = op.symplectic(2)
    assert transform.is_symplectic(), "Expected: symplectic, Actual: %s" % transform


def test_squeezed_variances(setup_logging):
    r = 0.8
    x_squeezed = GaussianState.squeezed(r, 0.0)
    p_squeezed = GaussianState.squeezed(r, np.pi / 2)
    assert abs(x_squeezed.cov[0, 0] - np.exp(-2 * r) / 2) < 1e-12, "Actual: %s" % x_squeezed.cov
    assert abs(p_squeezed.cov[1, 1] - np.exp(-2 * r) / 2) < 1e-12, "Actual: %s" % p_squeezed.cov
    assert x_squeezed.is_physical() and abs(x_squeezed.purity() - 1) < 1e-12


def test_thermal_purity(setup_logging):
    state = GaussianState.thermal(1.0)
    expected = 1 / 3
    assert abs(state.purity() - expected) < 1e-12, "Expected: %s, Actual: %s" % (expected, state.purity())
    assert not GaussianState(np.zeros(2), 0.1 * np.eye(2)).is_physical()


def test_displace_moves_mean(setup_logging):
    out = gaussian_ops(GaussianState.vacuum(), GaussianOp.displace(0, 0.5 + 0.25j))
    expected = np.sqrt(2) * np.array([0.5, 0.25])
    assert np.allclose(out.mean, expected), "Expected: %s, Actual: %s" % (expected, out.mean)


def test_cz_and_shear_push_p_by_x(setup_logging):
    start = product(GaussianState.coherent(1.0), GaussianState.coherent(0.5))
    out = gaussian_ops(start, GaussianOp.cz(0, 1))
    expected = np.array([start.mean[0], start.mean[2], start.mean[2], start.mean[0]])
    assert np.allclose(out.mean, expected), "Expected: %s, Actual: %s" % (expected, out.mean)

    sheared = gaussian_ops(GaussianState.coherent(1.0), GaussianOp.shear(0, 0.3))
    assert abs(sheared.mean[1] - 0.3 * np.sqrt(2)) < 1e-12, "Actual: %s" % sheared.mean


def test_phase_convention(setup_logging):
    out = gaussian_ops(GaussianState.coherent(1.0), GaussianOp.phase(0, np.pi / 2))
    expected = GaussianState.coherent(1j).mean
    assert np.allclose(out.mean, expected), "Expected: %s, Actual: %s" % (expected, out.mean)


def test_beamsplitter_transmissivity_range(setup_logging):
    with pytest.raises(ParameterRangeError):
        GaussianOp.beamsplit(0, 1, 1.2)
    with pytest.raises(ModeIndexError):
        GaussianOp.cz(1, 1)


def test_state_shape_checked(setup_logging):
    with pytest.raises(SpaceMismatchError):
        GaussianState(np.zeros(2), np.eye(4))


def test_homodyne_condition_on_product_leaves_rest(setup_logging):
    rest = GaussianState.coherent(0.3 + 0.1j)
    state = product(GaussianState.vacuum(), rest)
    out, density = homodyne_condition(state, 0, 0.0, 0.4)
    expected = np.exp(-0.4 ** 2) / np.sqrt(np.pi)
    assert abs(density - expected) < 1e-12, "Expected: %s, Actual: %s" % (expected, density)
    assert np.allclose(out.mean, rest.mean) and np.allclose(out.cov, rest.cov)


def test_homodyne_condition_epr_correlation(setup_logging):
    r = 1.0
    epr = gaussian_ops(GaussianState.vacuum(2), GaussianOp.two_mode_squeeze(0, 1, r))
    out, _ = homodyne_condition(epr, 0, 0.0, 0.5)
    expected = 0.5 * epr.cov[2, 0] / epr.cov[0, 0]
    assert abs(out.mean[0] - expected) < 1e-12, "Expected: %s, Actual: %s" % (expected, out.mean[0])
    assert out.cov[0, 0] < epr.cov[2, 2]


def test_homodyne_condition_singular(setup_logging):
    state = product(GaussianState(np.zeros(2), np.diag([0.0, 1e3])), GaussianState.vacuum())
    with pytest.raises(SingularMarginalError):
        homodyne_condition(state, 0, 0.0, 0.0)


def test_feedforward_zero_gain_is_marginal(setup_logging):
    state = gaussian_ops(GaussianState.vacuum(2), GaussianOp.two_mode_squeeze(0, 1, 0.5))
    out = gaussian_feedforward(state, [(0, 0.0)], np.zeros((2, 1)))
    expected = reduce(state, [1])
    assert np.allclose(out.cov, expected.cov), "Expected: %s, Actual: %s" % (expected.cov, out.cov)


def test_feedforward_cancels_correlated_noise(setup_logging):
    """
    Displacing x2 by -x1 on a state with x1 = x2 leaves x2 noiseless.
    """
    cov = np.array([
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 0.5, 0.0, 0.0],
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.5],
    ])
    state = GaussianState(np.zeros(4), cov)
    out = gaussian_feedforward(state, [(0, 0.0)], [[-1.0], [0.0]])
    assert abs(out.cov[0, 0]) < 1e-12, "Expected: %s, Actual: %s" % (0.0, out.cov[0, 0])


def test_quadrature_combination_variance(setup_logging):
    r = 0.7
    epr = gaussian_ops(GaussianState.vacuum(2), GaussianOp.two_mode_squeeze(0, 1, r))
    diffs = [quadrature_combination_variance(epr, {0: 1, 2: -1}),
             quadrature_combination_variance(epr, {0: 1, 2: 1})]
    expected = np.exp(-2 * r)
    assert abs(min(diffs) - expected) < 1e-12, "Expected: %s, Actual: %s" % (expected, diffs)


def test_coherent_fidelities(setup_logging):
    a = GaussianState.coherent(0.5)
    assert abs(gaussian_fidelity_coherent(a, a) - 1) < 1e-12
    result = gaussian_fidelity_coherent(GaussianState.vacuum(), a)
    expected = np.exp(-0.25)
    assert abs(result - expected) < 1e-12, "Expected: %s, Actual: %s" % (expected, result)


def test_json_round_trip(setup_logging):
    state = gaussian_ops(GaussianState.vacuum(2), GaussianOp.two_mode_squeeze(0, 1, 0.3))
    back = GaussianState.from_json(state.to_json())
    assert np.allclose(back.cov, state.cov) and np.allclose(back.mean, state.mean)


def test_conditioned_states_mix_back_to_marginal(setup_logging):
    """
    Averaging the conditioned states over the outcome density recovers the
    unconditioned reduced state.
    """
    state = gaussian_ops(GaussianState.vacuum(2), [GaussianOp.two_mode_squeeze(0, 1, 0.6),
                                                   GaussianOp.displace(0, 0.3 + 0.2j),
                                                   GaussianOp.squeeze(1, 0.2, 0.4)])
    angle = 0.3
    rotated = gaussian_ops(state, GaussianOp.phase(0, -angle))
    mu, std = rotated.mean[0], np.sqrt(rotated.cov[0, 0])
    outcomes = np.linspace(mu - 10 * std, mu + 10 * std, 4001)
    step = outcomes[1] - outcomes[0]
    mean = np.zeros(2)
    second = np.zeros((2, 2))
    for m in outcomes:
        out, density = homodyne_condition(state, 0, angle, m)
        mean += density * out.mean * step
        second += density * (out.cov + np.outer(out.mean, out.mean)) * step
    cov = second - np.outer(mean, mean)
    expected = reduce(state, [1])
    assert np.allclose(mean, expected.mean, atol=1e-4), "Expected: %s, Actual: %s" % (expected.mean, mean)
    assert np.allclose(cov, expected.cov, atol=1e-4), "Expected: %s, Actual: %s" % (expected.cov, cov)


def _random_program(rng, count, modes=3):
    ops = []
    for _ in range(count):
        kind = rng.choice(['squeeze', 'phase', 'displace', 'shear', 'beamsplit', 'two_mode_squeeze', 'cz'])
        m = int(rng.integers(modes))
        pair = sorted(int(k) for k in rng.choice(modes, 2, replace=False))
        if kind == 'squeeze':
            ops.append(GaussianOp.squeeze(m, rng.uniform(0.0, 0.2), rng.uniform(0, np.pi)))
        elif kind == 'phase':
            ops.append(GaussianOp.phase(m, rng.uniform(0, 2 * np.pi)))
        elif kind == 'displace':
            ops.append(GaussianOp.displace(m, complex(*rng.uniform(-0.3, 0.3, 2))))
        elif kind == 'shear':
            ops.append(GaussianOp.shear(m, rng.uniform(-0.3, 0.3)))
        elif kind == 'beamsplit':
            ops.append(GaussianOp.beamsplit(*pair, rng.uniform(0.2, 0.8)))
        elif kind == 'two_mode_squeeze':
            ops.append(GaussianOp.two_mode_squeeze(*pair, rng.uniform(0.0, 0.2)))
        else:
            ops.append(GaussianOp.cz(*pair, rng.uniform(-0.3, 0.3)))
    return ops


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fock_backend_matches_random_programs(seed, setup_logging):
    rng = np.random.default_rng(seed)
    ops = _random_program(rng, int(rng.integers(1, 7)))
    expected = gaussian_ops(GaussianState.vacuum(3), ops)
    fock = fock_gaussian_op(FockState.vacuum(FockSpace(3, 20)), ops)
    m = moments(fock)
    assert np.allclose(m.mean, expected.mean, atol=1e-6), "ops: %s, Expected: %s, Actual: %s" % (ops, expected.mean,
                                                                                               m.mean)
    assert np.allclose(m.cov, expected.cov, atol=1e-6), "ops: %s, Expected: %s, Actual: %s" % (ops, expected.cov,
                                                                                             m.cov)
