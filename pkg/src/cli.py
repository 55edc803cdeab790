"""
Command line for the experiment registry.

    hqip <experiment> [--config file] [--set key=value ...] [--out prefix]
                      [--sweep key=v1,v2,...] [--log-level LEVEL]

Writes <prefix>.manifest.json, <prefix>.result.json and <prefix>.csv.
Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path

import numpy as np
import scipy

import src
from src.errors import ConfigError, GridCoverageError, HqipError, LeakageError, ToleranceError
from src.experiments import EXPERIMENTS, defaults_for, run_experiment

ALLOWED_KEYS = (
    'r', 'g', 'chi', 'T', 'cutoff', 'grid.L', 'grid.points', 'seed', 'alpha', 'backend',
    'input_population', 't', 'samples', 'nodes', 'counts',
)
INTEGER_KEYS = ('cutoff', 'grid.points', 'seed', 'samples', 'nodes', 'counts')
AUTO_KEYS = ('g', 'grid.L', 't')
BACKENDS = ('fock', 'gaussian')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


@dataclass
class ExperimentConfig:
    """
    One resolved run: experiment name, parameters and output prefix.

    Parameters start from the experiment's defaults, then the config file,
    then --set pairs. A key is accepted only when the experiment has a
    default for it.
    """
    experiment: str
    params: dict = field(default_factory=dict)
    output: str = None

    def __post_init__(self):
        base = defaults_for(self.experiment)
        for key in self.params:
            _check_key(key, base)
        self.params = {**base, **self.params}
        self.output = self.output or str(Path("results") / self.experiment)

    def check_key(self, key):
        _check_key(key, defaults_for(self.experiment))

    def override(self, pairs):
        for key, value in pairs.items():
            self.check_key(key)
            self.params[key] = value
        return self


def _check_key(key, defaults=None):
    if key not in ALLOWED_KEYS:
        raise ConfigError(f"unknown configuration key {key!r}; expected one of {list(ALLOWED_KEYS)}")
    if defaults is not None and key not in defaults:
        raise ConfigError(f"key {key!r} has no effect here; expected one of {sorted(defaults)}")


def parse_value(key, text):
    """Typed value of one key: numbers, 'auto' for g, grid.L and t, a backend name."""
    _check_key(key)
    text = str(text).strip()
    if key in AUTO_KEYS and text == 'auto':
        return 'auto'
    if key == 'backend':
        if text not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {text!r}")
        return text
    try:
        if key in INTEGER_KEYS:
            return int(text)
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key} needs a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {text!r}")
    return value


def parse_pairs(items):
    pairs = {}
    for item in items:
        if '=' not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split('=', 1)
        key = key.strip()
        pairs[key] = parse_value(key, value)
    return pairs


def read_config_file(path):
    """Flat `key = value` lines; blank lines and # comments are skipped."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None
    items = []
    for line in lines:
        line = line.split('#', 1)[0].strip()
        if line:
            items.append(line)
    return parse_pairs(items)


def parse_sweep(text):
    """key=v1,v2,... -> (key, values); an empty list is allowed."""
    if '=' not in text:
        raise ConfigError(f"expected key=v1,v2,..., got {text!r}")
    key, values = text.split('=', 1)
    key = key.strip()
    _check_key(key)
    if key in ('backend',):
        raise ConfigError(f"sweep parameter must be numeric, got {key!r}")
    parts = [v for v in values.split(',') if v.strip()]
    out = []
    for v in parts:
        value = parse_value(key, v)
        if value == 'auto':
            raise ConfigError(f"sweep parameter must be numeric, got {v!r}")
        out.append(value)
    return key, out


def _canonical(value):
    """JSON text with sorted keys and floats at 17 significant digits."""
    if isinstance(value, dict):
        items = (f"{json.dumps(str(k))}: {_canonical(v)}" for k, v in sorted(value.items()))
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_canonical(v) for v in value) + "]"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return format(value, '.17g') if math.isfinite(value) else "null"
    if isinstance(value, complex):
        return _canonical({"real": value.real, "imag": value.imag})
    if value is None:
        return "null"
    return json.dumps(str(value))


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    return str(value)


def to_csv(header, rows):
    buf = StringIO()
    print(", ".join(header), file=buf)
    for row in rows:
        print(*[_cell(v) for v in row], sep=',', file=buf)
    return buf.getvalue()


def manifest(config, sweep=None):
    return {
        "experiment": config.experiment,
        "config": config.params,
        "seed": config.params.get('seed'),
        "sweep": {"key": sweep[0], "values": sweep[1]} if sweep else None,
        "versions": {"hqip": src.__version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "outputs": {kind: f"{config.output}.{kind}" for kind in ("manifest.json", "result.json", "csv")},
    }


def run(config):
    """Run one configuration; returns (result dictionary, csv text)."""
    result = run_experiment(config.experiment, config.params)
    return {"experiment": config.experiment, "summary": result.summary}, to_csv(result.header, result.rows)


def sweep(config, key, values):
    """One run per value; the CSV holds one row per value in the order given."""
    columns = list(EXPERIMENTS[config.experiment].columns)
    runs = []
    rows = []
    for value in values:
        params = dict(config.params)
        params[key] = value
        result = run_experiment(config.experiment, params)
        runs.append({key: value, "summary": result.summary, "resolved": params})
        rows.append([value] + [result.summary.get(c, float('nan')) for c in columns])
    header = [key.upper()] + [c.upper() for c in columns]
    return {"experiment": config.experiment, "sweep": key, "runs": runs}, to_csv(header, rows)


def write_outputs(config, result, csv_text, sweep_spec=None):
    prefix = Path(config.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.manifest.json").write_text(_canonical(manifest(config, sweep_spec)) + "\n")
    Path(f"{prefix}.result.json").write_text(_canonical(result) + "\n")
    Path(f"{prefix}.csv").write_text(csv_text)


def build_parser():
    parser = argparse.ArgumentParser(prog="hqip", description="Hybrid quantum-optics experiments")
    parser.add_argument("experiment", help=f"one of {', '.join(EXPERIMENTS)}")
    parser.add_argument("--config", help="flat key = value file")
    parser.add_argument("--set", dest="pairs", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--out", help="output path prefix")
    parser.add_argument("--sweep", metavar="KEY=V1,V2,...")
    parser.add_argument("--log-level", default="INFO")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.getLogger().setLevel(args.log_level.upper())
    try:
        config = ExperimentConfig(args.experiment, output=args.out)
        if args.config:
            config.override(read_config_file(args.config))
        config.override(parse_pairs(args.pairs))
        sweep_spec = parse_sweep(args.sweep) if args.sweep else None
        if sweep_spec:
            config.check_key(sweep_spec[0])
            result, csv_text = sweep(config, *sweep_spec)
        else:
            result, csv_text = run(config)
        write_outputs(config, result, csv_text, sweep_spec)
    except (ToleranceError, LeakageError, GridCoverageError) as e:
        print(f"hqip: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except HqipError as e:
        print(f"hqip: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    logging.info('wrote %s.{manifest.json,result.json,csv}', config.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
