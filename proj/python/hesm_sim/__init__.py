"""Battery/ultracapacitor bus simulator with a fuzzy supervisory controller."""

import json

from ._core import ConfigError, FuzzyError, SimulationFault, __version__
from . import _core


def _text(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return json.dumps(config)


def default_config():
    return json.loads(_core.canonical_config(""))


def load_config(path):
    with open(path) as f:
        return json.loads(_core.canonical_config(f.read()))


def config_digest(config=None):
    return _core.config_digest(_text(config))


def infer(v_bus, i_hesm, config=None):
    """Battery current limit (A) from the fuzzy supervisor."""
    return _core.infer(float(v_bus), float(i_hesm), _text(config))


def run(config=None):
    """Simulate; returns status, metrics and the decimated trace columns."""
    return _core.run(_text(config))


def main(args):
    """Run the command line; returns (exit_code, stdout, stderr)."""
    return _core.main([str(a) for a in args])


__all__ = ["ConfigError", "FuzzyError", "SimulationFault", "__version__", "config_digest", "default_config",
           "infer", "load_config", "main", "run"]
