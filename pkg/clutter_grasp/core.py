from __future__ import absolute_import, print_function

import copy
import os

import numpy as np
import yaml


__all__ = ('ClutterGraspException', 'ValidationError', 'ParseError',
           'SettleError', 'InfeasibleScenario', 'AttrDict', 'load_config',
           'default_config', 'normalize_seed')


class ClutterGraspException(Exception):
    """Internal exception to report to user"""
    pass


class ValidationError(ClutterGraspException):
    """A value, argument, or document failed validation"""
    pass


class ParseError(ClutterGraspException):
    """A document could not be decoded"""
    pass


class SettleError(ClutterGraspException):
    """Object overlaps could not be resolved"""
    pass


class InfeasibleScenario(ClutterGraspException):
    """No valid layout was found for a scenario"""
    pass


DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')
DEFAULTS_PATH = os.path.join(DATA_DIR, 'defaults.yaml')
CONFIG_ENV_VAR = 'CLUTTER_GRASP_CONFIG'


def normalize_seed(seed):
    """An integer seed reduced to the unsigned 64-bit range.

    >>> normalize_seed(-1) == 2 ** 64 - 1
    True
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError("Seed must be an integer, got %r" % (seed,))
    return int(seed) % 2 ** 64


class AttrDict(dict):
    def __setattr__(self, key, val):
        self[key] = val

    def __getattr__(self, key):
        try:
            return self[key]
        except KeyError:
            raise AttributeError(key)


def _to_attrdict(obj):
    if isinstance(obj, dict):
        return AttrDict((k, _to_attrdict(v)) for k, v in obj.items())
    return obj


def read_yaml(path):
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (IOError, OSError) as e:
        raise ClutterGraspException("Failed to read %r: %s" % (path, e))
    except yaml.YAMLError as e:
        raise ParseError("Invalid YAML in %r: %s" % (path, e))
    return {} if data is None else data


def _merge(base, update, where):
    for key, val in update.items():
        if key not in base:
            raise ValidationError("Unknown configuration key %r"
                                  % '.'.join(where + [key]))
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ValidationError("Configuration section %r must be a mapping"
                                      % '.'.join(where + [key]))
            _merge(base[key], val, where + [key])
        else:
            base[key] = val


_DEFAULTS = None


def default_config():
    """The packaged default configuration, as a fresh ``AttrDict``."""
    global _DEFAULTS
    if _DEFAULTS is None:
        _DEFAULTS = read_yaml(DEFAULTS_PATH)
    return _to_attrdict(copy.deepcopy(_DEFAULTS))


def load_config(path=None):
    """Load the configuration.

    Parameters
    ----------
    path : str, optional
        A YAML file whose values are merged over the packaged defaults. If
        not provided, the path in the ``CLUTTER_GRASP_CONFIG`` environment
        variable is used if set.

    Returns
    -------
    config : AttrDict
        Nested configuration, one section per component (``hand``,
        ``reward``, ``grasp``, ``world``, ``skills``, ``planner``,
        ``executor``).
    """
    config = default_config()
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path is not None:
        update = read_yaml(path)
        if not isinstance(update, dict):
            raise ValidationError("Configuration file %r must contain a mapping"
                                  % path)
        _merge(config, _to_attrdict(update), [])
    return config


def get_config(config=None):
    return default_config() if config is None else config
