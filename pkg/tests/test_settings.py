import json

import pytest

from app.settings import DEFAULT_SETTINGS, WORKERS_ENV, load_settings


def test_default_file_matches_builtin(monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    settings = load_settings()
    assert settings.tolerances == DEFAULT_SETTINGS.tolerances
    assert settings.solver == DEFAULT_SETTINGS.solver
    assert settings.anchor == (0, 0)
    assert settings.k_max == 20


def test_partial_file_keeps_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"tolerances": {"eps_check": 1e-7}, "oracle": {"anchor_level": 2}}), encoding="utf-8")
    settings = load_settings(path)
    assert settings.tolerances.eps_check == 1e-7
    assert settings.tolerances.eps_stoch == DEFAULT_SETTINGS.tolerances.eps_stoch
    assert settings.anchor == (2, 0)


def test_missing_file_uses_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv(WORKERS_ENV, raising=False)
    assert load_settings(tmp_path / "absent.json") == DEFAULT_SETTINGS


def test_worker_env_override(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "7")
    assert load_settings().workers == 7
    monkeypatch.setenv(WORKERS_ENV, "many")
    assert load_settings().workers == DEFAULT_SETTINGS.workers


def test_with_overrides_routes_fields():
    settings = DEFAULT_SETTINGS.with_overrides(eps_check=1e-6, g_tol=1e-12, workers=2, eps_tail=None)
    assert settings.tolerances.eps_check == 1e-6
    assert settings.solver.g_tol == 1e-12
    assert settings.workers == 2
    assert settings.tolerances.eps_tail == DEFAULT_SETTINGS.tolerances.eps_tail
    assert DEFAULT_SETTINGS.tolerances.eps_check == 1e-9


def test_settings_are_frozen():
    with pytest.raises(AttributeError):
        DEFAULT_SETTINGS.workers = 3
