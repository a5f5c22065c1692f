"""
Experiment configuration: defaults from settings.UCP_SIMULATION, then a
TOML file, then explicit overrides (command-line flags or request bodies).
"""
import logging
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import fields
from pathlib import Path

from django.conf import settings

from .channel import RoomGeometry
from .exceptions import ConfigurationError
from .frontend import ShapingConfig
from .link import LinkConfig

logger = logging.getLogger(__name__)

LINK_FIELDS = {f.name for f in fields(LinkConfig)}
GEOMETRY_FIELDS = {f.name for f in fields(RoomGeometry)}
SHAPING_FIELDS = {f.name for f in fields(ShapingConfig)}

# keys of UCP_SIMULATION that are not LinkConfig fields
SERVICE_KEYS = {'desk_runs', 'full_runs', 'precoder_cache', 'output_dir'}


def simulation_settings():
    return dict(getattr(settings, 'UCP_SIMULATION', {}))


def precoder_cache_dir():
    return simulation_settings().get('precoder_cache')


def output_dir():
    return Path(simulation_settings().get('output_dir', 'results'))


def read_config_file(path):
    path = Path(path)
    try:
        with open(path, 'rb') as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path} does not exist")
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid TOML: {e}")


def _table(value, allowed, name, cls):
    if isinstance(value, cls):
        return value
    if not isinstance(value, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    unknown = sorted(set(value) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    converted = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
    try:
        return cls(**converted)
    except TypeError as e:
        raise ConfigurationError(f"invalid [{name}] table: {e}")


def _coerce(values):
    out = {}
    for key, value in values.items():
        if key not in LINK_FIELDS:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        if key == 'geometry' and value is not None:
            value = _table(value, GEOMETRY_FIELDS, 'geometry', RoomGeometry)
        elif key == 'shaping':
            value = _table(value, SHAPING_FIELDS, 'shaping', ShapingConfig)
        elif key in ('qam_orders', 'clip_probs'):
            if not isinstance(value, dict):
                raise ConfigurationError(f"{key} must be a table keyed by scheme")
            value = dict(value)
        elif isinstance(value, list):
            value = tuple(value)
        out[key] = value
    return out


def build_link_config(path=None, full=False, **overrides):
    """
    LinkConfig from settings defaults < config file < overrides. Overrides
    set to None are ignored. `full` switches the default run count to the
    full-scale value unless runs is given explicitly.
    """
    defaults = simulation_settings()
    runs = defaults.pop('full_runs' if full else 'desk_runs', None)
    for key in SERVICE_KEYS:
        defaults.pop(key, None)
    if runs is not None:
        defaults['runs'] = runs

    values = _coerce(defaults)
    layers = [read_config_file(path)] if path is not None else []
    layers.append({k: v for k, v in overrides.items() if v is not None})
    for layer in layers:
        layer = _coerce(layer)
        for key in ('qam_orders', 'clip_probs'):
            if key in layer and key in values:
                layer[key] = {**values[key], **layer[key]}
        values.update(layer)

    try:
        cfg = LinkConfig(**values)
    except TypeError as e:
        raise ConfigurationError(f"invalid configuration: {e}")
    logger.debug("Resolved link configuration: %s", cfg)
    return cfg
