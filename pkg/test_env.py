#!/usr/bin/env python3
import pytest

from utils import default_out_dir, default_worker_count, env_flag, env_int, format_float


@pytest.mark.parametrize('value, expected', [
    ('true', True), ('True', True), ('TRUE', True), (' true ', True),
    ('false', False), ('False', False), ('', False), ('1', False),
])
def test_env_flag(monkeypatch, value, expected):
    monkeypatch.setenv('RUN_SLOW', value)
    assert env_flag('RUN_SLOW') is expected


def test_env_flag_unset(monkeypatch):
    monkeypatch.delenv('RUN_SLOW', raising=False)
    assert env_flag('RUN_SLOW') is False
    assert env_flag('RUN_SLOW', default=True) is True


def test_env_int(monkeypatch):
    monkeypatch.setenv('KPP_WORKERS', '6')
    assert env_int('KPP_WORKERS', 1) == 6
    monkeypatch.setenv('KPP_WORKERS', 'many')
    assert env_int('KPP_WORKERS', 1) == 1
    monkeypatch.delenv('KPP_WORKERS')
    assert env_int('KPP_WORKERS', 3) == 3


def test_worker_count_is_at_least_one(monkeypatch):
    monkeypatch.setenv('KPP_WORKERS', '-2')
    assert default_worker_count() == 1
    monkeypatch.setenv('KPP_WORKERS', '4')
    assert default_worker_count() == 4


def test_out_dir(monkeypatch):
    monkeypatch.delenv('KPP_OUT_DIR', raising=False)
    assert default_out_dir() == 'output'
    monkeypatch.setenv('KPP_OUT_DIR', '/tmp/kpp')
    assert default_out_dir() == '/tmp/kpp'


def test_format_float_round_trips():
    for value in (0.1, 1.0 / 3.0, 2.5e-17, 123456.789):
        assert float(format_float(value)) == value
