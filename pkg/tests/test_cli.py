import json
import logging
import os
import subprocess
import tempfile

import numpy as np
import pytest

from src.cli import EXIT_CONFIG, EXIT_OK, main, parse_pairs, parse_sweep, parse_value, read_config_file
from src.errors import ConfigError


@pytest.fixture(scope="function")
def setup_logging():
    logging.basicConfig(
        level=logging.DEBUG,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


@pytest.fixture
def temp_directory():
    temp_dir = tempfile.mkdtemp()
    yield temp_dir
    subprocess.run(['rm', '-rf', temp_dir])


def _read(prefix, kind):
    with open(f"{prefix}.{kind}") as f:
        return f.read()


def test_run_writes_three_outputs(temp_directory, setup_logging):
    prefix = os.path.join(temp_directory, "epr")
    status = main(["epr-correlations", "--set", "r=0.5", "--out", prefix])
    assert status == EXIT_OK, "Expected: %s, Actual: %s" % (EXIT_OK, status)
    for kind in ("manifest.json", "result.json", "csv"):
        assert os.path.exists(f"{prefix}.{kind}"), "missing %s" % kind
    manifest = json.loads(_read(prefix, "manifest.json"))
    assert manifest["config"]["r"] == 0.5
    assert manifest["experiment"] == "epr-correlations"
    assert set(manifest["versions"]) == {"hqip", "numpy", "scipy"}
    header = _read(prefix, "csv").splitlines()[0]
    assert header == "R, VAR_X1_MINUS_X2, VAR_P1_PLUS_P2, IDEAL", "Actual: %s" % header


def test_reruns_are_byte_identical(temp_directory, setup_logging):
    first = os.path.join(temp_directory, "first")
    second = os.path.join(temp_directory, "second")
    for prefix in (first, second):
        assert main(["teleport-dv", "--set", "samples=3", "--set", "seed=7", "--out", prefix]) == EXIT_OK
    assert _read(first, "result.json") == _read(second, "result.json")
    assert _read(first, "csv") == _read(second, "csv")


def test_unknown_key_is_a_config_error(temp_directory, setup_logging):
    prefix = os.path.join(temp_directory, "bad")
    status = main(["epr-correlations", "--set", "squeeze=1.0", "--out", prefix])
    assert status == EXIT_CONFIG, "Expected: %s, Actual: %s" % (EXIT_CONFIG, status)
    assert not os.path.exists(f"{prefix}.csv")


def test_unknown_experiment_is_a_config_error(temp_directory, setup_logging):
    status = main(["teleport-cat", "--out", os.path.join(temp_directory, "cat")])
    assert status == EXIT_CONFIG, "Expected: %s, Actual: %s" % (EXIT_CONFIG, status)


def test_empty_sweep_writes_header_only(temp_directory, setup_logging):
    prefix = os.path.join(temp_directory, "sweep")
    assert main(["squeezer", "--sweep", "T=", "--out", prefix]) == EXIT_OK
    lines = _read(prefix, "csv").splitlines()
    assert lines == ["T, G, OPTIMAL_G, MEAN_X, EXCESS_NOISE, IDEAL_EXCESS_X"], "Actual: %s" % lines


def test_sweep_rows_follow_values(temp_directory, setup_logging):
    prefix = os.path.join(temp_directory, "sweep")
    assert main(["squeezer", "--sweep", "T=0.3,0.6", "--out", prefix]) == EXIT_OK
    lines = _read(prefix, "csv").splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("0.29999999999999999,")
    result = json.loads(_read(prefix, "result.json"))
    assert [run["T"] for run in result["runs"]] == [0.3, 0.6]


def test_config_file_then_set(temp_directory, setup_logging):
    path = os.path.join(temp_directory, "run.cfg")
    with open(path, "w") as f:
        f.write("# squeezing\nr = 0.8\nbackend = gaussian\n\n")
    assert read_config_file(path) == {'r': 0.8, 'backend': 'gaussian'}
    prefix = os.path.join(temp_directory, "cfg")
    assert main(["epr-correlations", "--config", path, "--set", "r=0.2", "--out", prefix]) == EXIT_OK
    manifest = json.loads(_read(prefix, "manifest.json"))
    assert manifest["config"]["r"] == 0.2


def test_parse_helpers(setup_logging):
    assert parse_value('cutoff', '12') == 12
    assert parse_value('g', 'auto') == 'auto'
    assert parse_pairs(['r=1.5', 'backend=fock']) == {'r': 1.5, 'backend': 'fock'}
    assert parse_sweep('chi=0.01,0.02') == ('chi', [0.01, 0.02])
    for bad in (lambda: parse_value('r', 'nan'), lambda: parse_value('backend', 'tensor'),
                lambda: parse_pairs(['r']), lambda: parse_sweep('backend=fock'),
                lambda: parse_value('cutoff', '1.5')):
        with pytest.raises(ConfigError):
            bad()


def test_gkp_ancilla_resolves_displacement(temp_directory, setup_logging):
    prefix = os.path.join(temp_directory, "gkp")
    assert main(["gkp-ancilla", "--set", "counts=2", "--out", prefix]) == EXIT_OK
    manifest = json.loads(_read(prefix, "manifest.json"))
    assert manifest["config"]["t"] == pytest.approx(4 * 1.6487212707001282)
    lines = _read(prefix, "csv").splitlines()
    assert lines[0] == "N, PROBABILITY, CHI, NULLIFIER_VARIANCE, VAR_P, FIDELITY"
    assert len(lines) == 3


@pytest.mark.parametrize("argv", [
    ["squeezer", "--set", "cutoff=10"],
    ["channel-equivalence", "--set", "g=0.5"],
    ["squeezer", "--sweep", "chi=0.1,0.2"],
])
def test_key_without_effect_is_a_config_error(argv, temp_directory, setup_logging):
    prefix = os.path.join(temp_directory, "unused")
    status = main(argv + ["--out", prefix])
    assert status == EXIT_CONFIG, "Expected: %s, Actual: %s" % (EXIT_CONFIG, status)
    assert not os.path.exists(f"{prefix}.csv")


def test_channel_equivalence_records_resolved_grid(temp_directory, setup_logging):
    prefix = os.path.join(temp_directory, "channel")
    assert main(["channel-equivalence", "--set", "cutoff=6", "--out", prefix]) == EXIT_OK
    manifest = json.loads(_read(prefix, "manifest.json"))
    result = json.loads(_read(prefix, "result.json"))
    widths = result["summary"]["grid_L"]
    assert set(widths) == {"vacuum", "fock1", "coherent", "superposition"}
    assert manifest["config"]["grid.L"] == max(widths.values()), "Actual: %s" % manifest["config"]["grid.L"]
    assert manifest["config"]["g"] == pytest.approx(np.tanh(0.7))
    lines = _read(prefix, "csv").splitlines()
    assert lines[0] == "INPUT, GRID_L, TRACE_DISTANCE", "Actual: %s" % lines[0]
    assert len(lines) == 5
