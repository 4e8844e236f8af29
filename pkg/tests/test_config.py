import pytest

from frobhodge.config import get_default_config, get_n_jobs, get_project_root, load_config, set_config
from frobhodge.runlog import log


def test_settings_file_matches_defaults():
    assert (get_project_root() / 'config' / 'settings.yaml').exists()
    assert load_config() == get_default_config()


def test_partial_file_keeps_other_defaults(tmp_path):
    path = tmp_path / 'settings.yaml'
    path.write_text("series:\n  order: 6\nhodge:\n  sign_calibration: literal\n")
    config = load_config(str(path))
    assert config['series']['order'] == 6
    assert config['hodge']['sign_calibration'] == 'literal'
    assert config['sampling'] == {'seed': 0, 'samples': 5}


def test_missing_file_warns_and_uses_defaults(tmp_path, capsys):
    config = load_config(str(tmp_path / 'absent.yaml'))
    assert config == get_default_config()
    assert 'Config file not found' in capsys.readouterr().err


def test_environment_overrides_file(tmp_path, monkeypatch):
    path = tmp_path / 'settings.yaml'
    path.write_text("sampling:\n  seed: 3\n")
    monkeypatch.setenv('FROBHODGE_SEED', '11')
    monkeypatch.setenv('FROBHODGE_VERBOSE', 'yes')
    config = load_config(str(path))
    assert config['sampling']['seed'] == 11
    assert config['runtime']['verbose'] is True


def test_unknown_sign_calibration_is_rejected(monkeypatch):
    monkeypatch.setenv('FROBHODGE_SIGN_CALIBRATION', 'upside-down')
    with pytest.raises(ValueError):
        load_config()


def test_set_config_checks_values():
    config = get_default_config()
    config['series']['order'] = -1
    with pytest.raises(ValueError):
        set_config(config)
    config = get_default_config()
    config['runtime']['n_jobs'] = 4
    set_config(config)
    assert get_n_jobs() == 4


def test_log_is_silent_unless_verbose(capsys):
    log('quiet')
    assert capsys.readouterr().err == ''
    config = get_default_config()
    config['runtime']['verbose'] = True
    set_config(config)
    log('loud')
    assert capsys.readouterr().err.endswith('] loud\n')
