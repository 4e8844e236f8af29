import pytest

from frobhodge.catalog import e1_module, e1_potential, p1_p4_potential, random_polarizable_module
from frobhodge.correspondence import gamma1_from_potential, reconstruct_gamma
from frobhodge.errors import ParseError
from frobhodge.io import (dumps, loads, module_from_payload, module_to_payload, potential_from_payload,
                          potential_to_payload, read_json, read_module, read_potential, series_from_payload,
                          series_to_payload, tower_from_payload, tower_to_payload, write_json)
from frobhodge.series import LogPolySeries, QSeries


def e1_payload():
    return module_to_payload(e1_module())


def test_data_files_match_catalog(data_dir, e1, p1p4):
    assert read_module(data_dir / 'E1.module.json') == e1
    assert read_module(data_dir / 'E1.module.json').labels == e1.labels
    assert read_module(data_dir / 'P1P4.module.json') == p1p4


def test_potential_files(data_dir, e1, e1_q, p1p4, p1p4_phi, p1p4_perturbed):
    assert read_potential(e1, data_dir / 'E1q.potential.json') == e1_q
    assert read_potential(e1, data_dir / 'E1q37.potential.json') == e1_potential({1: 3, 2: 7}, order=8, module=e1)
    assert read_potential(p1p4, data_dir / 'P1P4.potential.json') == p1p4_phi
    assert read_potential(p1p4, data_dir / 'P1P4-perturbed.potential.json') == p1p4_perturbed


def test_broken_module_still_parses(data_dir):
    M = read_module(data_dir / 'broken.module.json')
    assert M.products[(1, 2)] == {3: 2}


def test_module_payload_round_trip():
    M = random_polarizable_module(seed=9, k=4)
    assert module_from_payload(module_to_payload(M)) == M


def test_potential_payload_lists_each_pair_once(p1p4, p1p4_perturbed):
    payload = potential_to_payload(p1p4_perturbed)
    assert sorted(payload['phi_ab']) == ['3,3', '4,4']
    assert payload['phi_a'] == {'6': {'0,1': '1', '0,2': '1'}}
    assert 'weight3' not in payload
    assert potential_from_payload(p1p4, payload) == p1p4_perturbed


def test_tower_payload_round_trip(e1, e1_q):
    tower = reconstruct_gamma(e1, gamma1_from_potential(e1, e1_q))
    payload = tower_to_payload(tower)
    assert sorted(payload['pieces']) == ['1', '2', '3']
    assert tower_from_payload(e1, payload) == tower


def test_log_series_keys():
    s = LogPolySeries(1, 3, {(1,): QSeries.variable(1, 1, 3)})
    payload = series_to_payload(s)
    assert payload == {'1|z=1': '1'}
    assert series_from_payload(payload, 1, 3) == s


def test_pure_series_come_back_as_qseries():
    back = series_from_payload({'0,1': '1/2', '2,0': '(tau)/(1)'}, 2, 4)
    assert isinstance(back, QSeries)
    assert series_to_payload(back) == {'0,1': '1/2', '2,0': '(tau)/(1)'}


def test_syntax_error_reports_line():
    with pytest.raises(ParseError) as exc:
        loads('{\n  "weight": 3,\n}', source='m.json')
    assert exc.value.witness['line'] == 3
    assert exc.value.witness['file'] == 'm.json'


def test_duplicate_key_is_rejected(tmp_path):
    path = tmp_path / 'potential.json'
    path.write_text('{"order": 4, "weight3": {"1": "1", "1": "2"}}')
    with pytest.raises(ParseError) as exc:
        read_json(path)
    assert exc.value.witness == {'file': str(path), 'key': '1'}


def test_missing_field_is_named():
    payload = e1_payload()
    del payload['framing']
    with pytest.raises(ParseError) as exc:
        module_from_payload(payload)
    assert exc.value.witness['field'] == 'framing'


def test_unknown_field_is_rejected():
    payload = e1_payload()
    payload['colour'] = 'blue'
    with pytest.raises(ParseError) as exc:
        module_from_payload(payload)
    assert exc.value.witness['field'] == 'colour'


def test_bad_scalar_names_its_field():
    payload = e1_payload()
    payload['pairing']['0,3'] = 'abc'
    with pytest.raises(ParseError) as exc:
        module_from_payload(payload)
    assert exc.value.witness['field'] == 'pairing.0,3'


def test_schema_version_is_checked():
    payload = e1_payload()
    payload['schema_version'] = 'frobhodge.module/2'
    with pytest.raises(ParseError) as exc:
        module_from_payload(payload)
    assert exc.value.witness['field'] == 'schema_version'


def test_series_key_length_is_checked():
    with pytest.raises(ParseError):
        series_from_payload({'1,2': '1'}, 1, 4)


def test_potential_rejects_z_terms(e1):
    payload = {'order': 4, 'weight3': {'1|z=1': '1'}}
    with pytest.raises(ParseError) as exc:
        potential_from_payload(e1, payload)
    assert exc.value.witness['field'] == 'weight3'


def test_missing_file(tmp_path):
    with pytest.raises(ParseError) as exc:
        read_json(tmp_path / 'absent.json')
    assert exc.value.witness['file'].endswith('absent.json')


def test_write_json_is_deterministic(tmp_path):
    path = tmp_path / 'out.json'
    payload = potential_to_payload(p1_p4_potential(order=3))
    write_json(path, payload)
    assert path.read_text() == dumps(payload)
    assert path.read_text().endswith('\n')
