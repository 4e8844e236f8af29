import json

import pytest
from sympy import QQ

from frobhodge import cli, correspondence
from frobhodge.catalog import change_basis, e1_module, projective_product_module
from frobhodge.cli import main, run
from frobhodge.config import get_default_order
from frobhodge.io import module_to_payload, read_module, read_tower, write_json
from frobhodge.linalg import identity, qq_matrix


def invoke(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def report(capsys, *argv):
    code, out = invoke(capsys, *argv)
    return code, json.loads(out)


def test_wdvv_check_passes(capsys, data_dir):
    code, rep = report(capsys, 'wdvv-check', data_dir / 'P1P4.module.json', data_dir / 'P1P4.potential.json')
    assert code == 0
    assert rep['status'] == 'pass'
    assert rep['verdicts'] == {'wdvv': True}
    assert rep['schema_version'] == 'frobhodge.report/1'


def test_wdvv_check_reports_witness(capsys, data_dir):
    code, rep = report(capsys, 'wdvv-check', data_dir / 'P1P4.module.json',
                       data_dir / 'P1P4-perturbed.potential.json')
    assert code == 1
    assert rep['status'] == 'fail'
    witness = rep['witnesses'][0]
    assert (witness['j'], witness['l'], witness['a'], witness['d']) == (1, 2, 1, 6)


def test_round_trip_emits_tower(capsys, data_dir):
    code, rep = report(capsys, 'round-trip', data_dir / 'E1.module.json', data_dir / 'E1q.potential.json')
    assert code == 0
    assert rep['payload']['round_trip']['holds'] is True
    piece = rep['payload']['tower']['pieces']['2']
    entry = next(e for e in piece if (e['row'], e['col']) == (2, 0))
    assert entry['series']['1'] == '(tau)/(1)'


def test_round_trip_reconstructs_the_tower_once(capsys, data_dir, monkeypatch):
    calls = []
    original = correspondence.reconstruct_gamma

    def counting(*args, **kwargs):
        calls.append(args[1].order)
        return original(*args, **kwargs)

    monkeypatch.setattr(cli, 'reconstruct_gamma', counting)
    monkeypatch.setattr(correspondence, 'reconstruct_gamma', counting)
    code, rep = report(capsys, 'round-trip', data_dir / 'E1.module.json', data_dir / 'E1q.potential.json',
                       '--order', 4)
    assert code == 0
    assert rep['verdicts'] == {'round_trip': True}
    assert calls == [4]


def test_validate_broken_module(capsys, data_dir):
    code, rep = report(capsys, 'validate', data_dir / 'broken.module.json')
    assert code == 1
    assert rep['verdicts'] == {'module': False}
    assert rep['witnesses'][0]['name'] == 'frobenius_condition'
    assert rep['witnesses'][0]['witness'] == {'w': 1, 'v1': 2, 'v2': 0, 'lhs': '2', 'rhs': '1'}


def test_validate_module_and_potential(capsys, data_dir):
    code, rep = report(capsys, 'validate', data_dir / 'E1.module.json', data_dir / 'E1q.potential.json')
    assert code == 0
    assert rep['verdicts'] == {'module': True, 'potential': True, 'deformed_product': True}


def test_check_pvhs_is_reproducible(capsys, data_dir):
    argv = ('check-pvhs', data_dir / 'E1.module.json', data_dir / 'E1q.potential.json',
            '--order', 4, '--samples', 2)
    first_code, first = invoke(capsys, *argv)
    second_code, second = invoke(capsys, *argv)
    assert first_code == second_code == 0
    assert first == second
    assert json.loads(first)['verdicts']['frame_agreement'] is True


def test_catalog_writes_module(capsys, tmp_path):
    target = tmp_path / 'E1.json'
    code, rep = report(capsys, 'catalog', 'E1', '--output', target)
    assert code == 0
    assert rep['payload']['module'] == module_to_payload(e1_module())
    assert read_module(target) == e1_module()


def test_correspond_then_extract(capsys, data_dir, tmp_path):
    tower_path = tmp_path / 'tower.json'
    code, _ = report(capsys, 'correspond', data_dir / 'E1.module.json', data_dir / 'E1q.potential.json',
                     '--output', tower_path)
    assert code == 0
    assert read_tower(e1_module(), tower_path).order == 8
    code, rep = report(capsys, 'extract-potential', data_dir / 'E1.module.json', tower_path)
    assert code == 0
    assert rep['payload']['potential']['weight3'] == {'1': '1'}


def test_hodge_numbers_and_monodromy(capsys, data_dir):
    code, rep = report(capsys, 'hodge-numbers', data_dir / 'P1P4.module.json')
    assert code == 0
    assert rep['payload']['hodge_numbers'] == {'0': 1, '1': 2, '2': 2, '3': 2, '4': 2, '5': 1}
    code, rep = report(capsys, 'monodromy', data_dir / 'E1.module.json', '--j', 1)
    assert code == 0
    assert [row[0] for row in rep['payload']['monodromy']] == ['1', '-1', '5/2', '-5/6']


def test_missing_module_is_an_input_error(capsys, tmp_path):
    code, rep = report(capsys, 'hodge-numbers', tmp_path / 'absent.json')
    assert code == 2
    assert rep['status'] == 'error'
    assert rep['verdicts'] == {'error': 'ParseError'}


def test_order_above_file_order_is_rejected(capsys, data_dir):
    code, rep = report(capsys, 'wdvv-check', data_dir / 'E1.module.json', data_dir / 'E1q.potential.json',
                       '--order', 12)
    assert code == 2
    assert rep['verdicts'] == {'error': 'SeriesMismatch'}


def test_usage_error_exits_with_two(capsys):
    assert main(['wdvv-check']) == 2


def test_text_format(capsys, data_dir):
    code, out = invoke(capsys, 'hodge-numbers', data_dir / 'E1.module.json', '--format', 'text')
    assert code == 0
    assert out.startswith('hodge-numbers: pass (exit 0)')


def test_run_returns_report(data_dir):
    rep = run(['classical-potential', str(data_dir / 'E1.module.json')])
    assert rep.exit_code == 0
    assert rep.payload['cubic'] == {'0,1,2': '1', '1,1,1': '5/6'}


def test_environment_override(capsys, data_dir, monkeypatch):
    monkeypatch.setenv('FROBHODGE_ORDER', '3')
    rep = run(['classical-potential', str(data_dir / 'E1.module.json')])
    assert rep.exit_code == 0
    assert get_default_order() == 3


@pytest.mark.parametrize("name", ['E1', 'P1xP4', 'P2xP2'])
def test_catalog_modules_validate(capsys, tmp_path, name):
    target = tmp_path / f'{name}.json'
    code, _ = report(capsys, 'catalog', name, '--output', target)
    assert code == 0
    code, rep = report(capsys, 'validate', target)
    assert code == 0


def test_bad_config_value_is_a_config_error(capsys, data_dir, monkeypatch):
    monkeypatch.setenv('FROBHODGE_SIGN_CALIBRATION', 'upside-down')
    code, rep = report(capsys, 'hodge-numbers', data_dir / 'E1.module.json')
    assert code == 2
    assert rep['verdicts'] == {'error': 'ConfigError'}


def test_internal_value_error_is_not_a_config_error(data_dir, monkeypatch):
    def broken(path):
        raise ValueError("internal failure")

    monkeypatch.setattr(cli, 'read_module', broken)
    with pytest.raises(ValueError, match="internal failure"):
        run(['hodge-numbers', str(data_dir / 'E1.module.json')])


def test_check_orbit_on_a_mixed_middle_basis(capsys, tmp_path):
    M = projective_product_module((2, 2))
    g = identity(M.n).to_list()
    g[3][4] = QQ(1)
    g[4][5] = QQ(-1)
    g[3][5] = QQ(-1, 2)
    target = tmp_path / 'P2xP2-mixed.json'
    write_json(target, module_to_payload(change_basis(M, qq_matrix(g))))
    code, rep = report(capsys, 'check-orbit', target)
    assert code == 0
    assert rep['verdicts']['round_trip'] is True
    assert rep['verdicts']['maximally_unipotent'] is True
    assert read_module(target) != M
