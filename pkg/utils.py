"""
Utility functions shared by the CLI, formatters and tests.
"""

import os


def env_flag(name, default=False):
    """True when the environment variable is the string 'true' (any case)."""
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() == 'true'


def env_int(name, default):
    """Integer environment variable, falling back to default when unset or malformed."""
    value = os.getenv(name, '').strip()
    try:
        return int(value) if value else default
    except ValueError:
        return default


def default_worker_count():
    return max(1, env_int('KPP_WORKERS', 1))


def default_out_dir():
    return os.getenv('KPP_OUT_DIR', 'output')


def format_float(value):
    """Shortest round-trip text for a float, so reruns write identical bytes."""
    return repr(float(value))
