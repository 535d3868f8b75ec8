from pathlib import Path

import pytest

from tabflow.config import load_config, with_updates
from tabflow.errors import UsageError
from tabflow.odesolve import Dopri5, Euler, RK4


def test_defaults_match_pipeline_settings():
    cfg = load_config()
    assert cfg.chunk_seconds == 4.0
    assert cfg.batch_size == 64
    assert cfg.lr == pytest.approx(1e-4)
    assert cfg.epochs == 50
    assert cfg.steps == 100
    assert cfg.dims == 64
    assert cfg.sample_rate == 44100
    assert cfg.normalize_db == -9.0
    assert isinstance(cfg.solver(), Dopri5)


def test_config_file_overlays_defaults(tmp_path):
    ini = tmp_path / "cfg.ini"
    ini.write_text("[flowmatch]\nepochs = 7\n\n[odesolve]\nsolver = euler\nsteps = 12\n")
    cfg = load_config(ini)
    assert cfg.epochs == 7
    assert cfg.solver() == Euler(12)
    assert cfg.batch_size == 64  # untouched default


def test_unknown_keys_rejected(tmp_path):
    ini = tmp_path / "cfg.ini"
    ini.write_text("[flowmatch]\nlearning = 1\n")
    with pytest.raises(UsageError, match="unknown config key"):
        load_config(ini)
    ini.write_text("[nosuch]\nx = 1\n")
    with pytest.raises(UsageError, match="unknown config section"):
        load_config(ini)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(UsageError, match="cannot read"):
        load_config(tmp_path / "absent.ini")


def test_bad_values_rejected(tmp_path):
    ini = tmp_path / "cfg.ini"
    ini.write_text("[flowmatch]\nepochs = many\n")
    with pytest.raises(UsageError, match="bad config value"):
        load_config(ini)
    ini.write_text("[odesolve]\nsolver = leapfrog\n")
    with pytest.raises(UsageError, match="unknown solver"):
        load_config(ini)


def test_solver_construction():
    cfg = load_config(None, {"odesolve": {"solver": "rk4", "steps": "25"}})
    assert cfg.solver() == RK4(25)


def test_hash_stable_and_sensitive():
    a = load_config()
    b = load_config()
    assert a.hash() == b.hash()
    c = load_config(None, {"flowmatch": {"epochs": "49"}})
    assert c.hash() != a.hash()
    assert len(a.hash()) == 16


def test_with_updates_rederives():
    cfg = load_config()
    cfg2 = with_updates(cfg, cli={"seed": 7})
    assert cfg2.seed == 7
    assert cfg2.hash() != cfg.hash()


def test_train_config_reflects_settings():
    cfg = load_config(None, {"flowmatch": {"batch_size": "8", "lr": "0.001"}})
    tc = cfg.train_config()
    assert tc.batch_size == 8 and tc.lr == pytest.approx(1e-3)
    assert tc.epochs == 50 and tc.chunk_seconds == 4.0
