"""
frobhodge command line

    python -m frobhodge SUBCOMMAND MODULE [POTENTIAL] [--order D] [--seed S]
        [--format json|text] [--sign-calibration geometric|literal]
        [--config PATH] [--n-jobs N] [--output PATH]

Every run prints one report (schema "frobhodge.report/1") on stdout and exits
with 0 on pass, 1 on a mathematical failure and 2 on an input error.
"""

import argparse
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from sympy import QQ

from . import __version__
from .amodel import canonical_frame, flat_frame, monodromy, pvhs_certificate, residue, verify_frame_lemmas
from .catalog import CATALOG, catalog_module
from .config import SIGN_CALIBRATIONS, get_config, load_config, set_config
from .correspondence import gamma1_from_potential, potential_from_gamma, reconstruct_gamma, round_trip, tower_report
from .errors import FrobHodgeError, SeriesMismatch
from .frobenius import classical_potential, hodge_numbers, validate_module
from .hodge import check_framing_cone, check_max_unipotent, graded_isomorphism, module_to_orbit, orbit_to_module
from .io import (dumps, matrix_to_payload, module_to_payload, potential_to_payload, read_module,
                 read_potential, read_tower, series_to_payload, tower_to_payload, write_json)
from .models import Report
from .potential import (QuantumPotential, deformed_product_report, quantum_product, validate_potential,
                        wdvv_check)
from .runlog import log
from .scalars import format_scalar, from_rational

Outcome = Dict[str, Any]


# ============================================================
# Argument parsing
# ============================================================

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--order', '-D', type=int, default=None, help='Truncation order D (total q-degree)')
    common.add_argument('--seed', type=int, default=None, help='Seed for cone samples')
    common.add_argument('--samples', type=int, default=None, help='Number of seeded cone samples')
    common.add_argument('--format', choices=('json', 'text'), default=None, help='Report format')
    common.add_argument('--sign-calibration', choices=SIGN_CALIBRATIONS, default=None,
                        help='Positivity sign convention for polarized MHS')
    common.add_argument('--config', default=None, help='Path to a settings.yaml')
    common.add_argument('--n-jobs', type=int, default=None, help='Worker threads for commutator checks')
    common.add_argument('--verbose', '-v', action='store_true', help='Progress messages on stderr')
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog='frobhodge', description="Quantum potentials and polarized VHS")
    parser.add_argument('--version', action='version', version=f'frobhodge {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    def command(name: str, help_text: str, potential: str = 'none') -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.add_argument('module', help='Module file (JSON)')
        if potential == 'required':
            p.add_argument('potential', help='Potential file (JSON)')
        elif potential == 'optional':
            p.add_argument('potential', nargs='?', default=None, help='Potential file (JSON)')
        return p

    command('validate', 'Check the module axioms (and the potential, if given)', 'optional')
    command('classical-potential', 'Cubic potential of the module')
    command('hodge-numbers', 'h^{p,p} of the module')
    command('check-orbit', 'Module -> nilpotent orbit -> module, with maximal unipotency')
    command('wdvv-check', 'Graded WDVV of a potential', 'required')
    p = command('quantum-product', 'T_j *_q T_a', 'required')
    p.add_argument('--j', type=int, required=True, help='Degree-2 basis index')
    p.add_argument('--a', type=int, required=True, help='Basis index')
    p = command('correspond', 'Gamma tower of a potential', 'required')
    p.add_argument('--output', '-o', default=None, help='Write the tower file here')
    p = sub.add_parser('extract-potential', help='Potential of a canonical Gamma tower', parents=[common])
    p.add_argument('module', help='Module file (JSON)')
    p.add_argument('tower', help='Tower file (JSON)')
    p.add_argument('--output', '-o', default=None, help='Write the potential file here')
    command('round-trip', 'potential -> tower -> potential', 'required')
    command('flat-frame', 'Flat frame of the A-model connection', 'required')
    command('canonical-frame', 'Canonical-extension frame', 'required')
    p = command('residue', 'Residue of the connection at q_j = 0', 'optional')
    p.add_argument('--j', type=int, required=True, help='Degree-2 basis index')
    p = command('monodromy', 'Local monodromy around q_j = 0', 'optional')
    p.add_argument('--j', type=int, required=True, help='Degree-2 basis index')
    command('check-pvhs', 'Full polarized VHS certificate', 'required')
    p = sub.add_parser('catalog', help='Emit a built-in module', parents=[common])
    p.add_argument('name', choices=sorted(CATALOG), help='Catalog entry')
    p.add_argument('--output', '-o', default=None, help='Write the module file here')
    return parser


def _apply_flags(args: argparse.Namespace) -> Dict[str, Any]:
    config = load_config(args.config)
    if args.order is not None:
        config['series']['order'] = args.order
    if args.seed is not None:
        config['sampling']['seed'] = args.seed
    if args.samples is not None:
        config['sampling']['samples'] = args.samples
    if args.sign_calibration is not None:
        config['hodge']['sign_calibration'] = args.sign_calibration
    if args.n_jobs is not None:
        config['runtime']['n_jobs'] = args.n_jobs
    if args.verbose:
        config['runtime']['verbose'] = True
    if args.format is not None:
        config['report']['format'] = args.format
    set_config(config)
    return config


# ============================================================
# Commands
# ============================================================

def _potential(args, M):
    phi = read_potential(M, args.potential)
    if args.order is not None and args.order != phi.order:
        if args.order > phi.order:
            raise SeriesMismatch(f"--order {args.order} exceeds the potential's order {phi.order}",
                                 witness={'order': args.order, 'file_order': phi.order})
        phi = phi.truncate(args.order)
    return phi


def _rows(matrix) -> List[List[str]]:
    convert = from_rational if matrix.domain == QQ else (lambda c: c)
    return [[format_scalar(convert(c)) for c in row] for row in matrix.to_list()]


def _failures(items) -> List[Any]:
    return [c.model_dump(mode='json') for c in items if not c.passed]


def cmd_validate(args, M) -> Outcome:
    report = validate_module(M)
    verdicts = {'module': report.passed}
    witnesses = _failures(report.checks)
    payload = {'module': report.model_dump(mode='json')}
    if args.potential is not None and report.passed:
        phi = _potential(args, M)
        pot = validate_potential(M, phi)
        product = deformed_product_report(M, phi)
        verdicts['potential'] = pot.passed
        verdicts['deformed_product'] = product.passed
        witnesses += _failures(pot.checks) + _failures(product.checks)
        payload['potential'] = pot.model_dump(mode='json')
        payload['deformed_product'] = product.model_dump(mode='json')
    return {'passed': all(verdicts.values()), 'verdicts': verdicts, 'witnesses': witnesses, 'payload': payload}


def cmd_classical_potential(args, M) -> Outcome:
    phi0 = classical_potential(M)
    terms = {",".join(str(i) for i in triple): format_scalar(c)
             for triple, c in sorted(phi0.monomial_coefficients().items())}
    return {'passed': True, 'payload': {'cubic': terms}}


def cmd_hodge_numbers(args, M) -> Outcome:
    return {'passed': True, 'payload': {'hodge_numbers': {str(p): h for p, h in hodge_numbers(M).items()}}}


def cmd_check_orbit(args, M) -> Outcome:
    cone = check_framing_cone(M)
    orbit = module_to_orbit(M)
    unipotent = check_max_unipotent(orbit)
    recovered = orbit_to_module(orbit)
    same = recovered == M or graded_isomorphism(recovered, M) is not None
    verdicts = {'cone_consistent': cone.consistent, 'polarized': cone.polarization.passed,
                'maximally_unipotent': unipotent.holds, 'round_trip': same}
    return {'passed': all(verdicts.values()), 'verdicts': verdicts,
            'witnesses': _failures(unipotent.checks) + _failures(cone.polarization.items),
            'payload': {'orbit': orbit.to_payload(), 'cone': cone.model_dump(mode='json'),
                        'module': module_to_payload(recovered)}}


def _commutator_outcome(verdict) -> Outcome:
    return {'passed': verdict.holds, 'verdicts': {verdict.check: verdict.holds},
            'witnesses': [w.model_dump(mode='json') for w in verdict.violations[:1]],
            'payload': {verdict.check: verdict.model_dump(mode='json')}}


def cmd_wdvv_check(args, M) -> Outcome:
    return _commutator_outcome(wdvv_check(M, _potential(args, M)))


def cmd_quantum_product(args, M) -> Outcome:
    phi = _potential(args, M)
    image = quantum_product(M, phi, args.j, args.a)
    return {'passed': True, 'payload': {'product': {str(c): series_to_payload(s) for c, s in sorted(image.items())}}}


def cmd_correspond(args, M) -> Outcome:
    phi = _potential(args, M)
    tower = reconstruct_gamma(M, gamma1_from_potential(M, phi))
    report = tower_report(M, tower)
    payload = tower_to_payload(tower)
    if args.output:
        write_json(args.output, payload)
    return {'passed': report.passed, 'verdicts': {'tower': report.passed}, 'witnesses': _failures(report.checks),
            'payload': {'tower': payload}}


def cmd_extract_potential(args, M) -> Outcome:
    tower = read_tower(M, args.tower)
    phi = potential_from_gamma(M, tower)
    payload = potential_to_payload(phi)
    if args.output:
        write_json(args.output, payload)
    return {'passed': True, 'payload': {'potential': payload}}


def cmd_round_trip(args, M) -> Outcome:
    phi = _potential(args, M)
    tower = reconstruct_gamma(M, gamma1_from_potential(M, phi))
    result = round_trip(M, phi, tower=tower)
    return {'passed': result.holds, 'verdicts': {'round_trip': result.holds},
            'witnesses': result.mismatches,
            'payload': {'round_trip': result.model_dump(mode='json'), 'tower': tower_to_payload(tower)}}


def cmd_flat_frame(args, M) -> Outcome:
    phi = _potential(args, M)
    frame = flat_frame(M, phi)
    lemmas = verify_frame_lemmas(M, phi, flat=frame)
    return {'passed': lemmas.passed, 'verdicts': {'flat': True, 'frame_lemmas': lemmas.passed},
            'witnesses': _failures(lemmas.items),
            'payload': {'frame': matrix_to_payload(frame.matrix())}}


def cmd_canonical_frame(args, M) -> Outcome:
    phi = _potential(args, M)
    frame = canonical_frame(M, phi)
    return {'passed': True, 'payload': {'frame': matrix_to_payload(frame.matrix())}}


def _potential_or_zero(args, M):
    return _potential(args, M) if args.potential is not None else QuantumPotential.zero(M)


def cmd_residue(args, M) -> Outcome:
    return {'passed': True, 'payload': {'residue': _rows(residue(M, _potential_or_zero(args, M), args.j))}}


def cmd_monodromy(args, M) -> Outcome:
    return {'passed': True, 'payload': {'monodromy': _rows(monodromy(M, _potential_or_zero(args, M), args.j))}}


def cmd_check_pvhs(args, M) -> Outcome:
    phi = _potential(args, M)
    certificate = pvhs_certificate(M, phi)
    verdicts = {item.name: item.passed for item in certificate.items}
    return {'passed': certificate.passed, 'verdicts': verdicts, 'witnesses': _failures(certificate.items),
            'payload': {'certificate': certificate.model_dump(mode='json')}}


COMMANDS: Dict[str, Callable[[argparse.Namespace, Any], Outcome]] = {
    'validate': cmd_validate,
    'classical-potential': cmd_classical_potential,
    'hodge-numbers': cmd_hodge_numbers,
    'check-orbit': cmd_check_orbit,
    'wdvv-check': cmd_wdvv_check,
    'quantum-product': cmd_quantum_product,
    'correspond': cmd_correspond,
    'extract-potential': cmd_extract_potential,
    'round-trip': cmd_round_trip,
    'flat-frame': cmd_flat_frame,
    'canonical-frame': cmd_canonical_frame,
    'residue': cmd_residue,
    'monodromy': cmd_monodromy,
    'check-pvhs': cmd_check_pvhs,
}


# ============================================================
# Reports
# ============================================================

def _arguments(args: argparse.Namespace) -> Dict[str, Any]:
    skip = {'command', 'config', 'verbose', 'format', 'n_jobs'}
    return {key: value for key, value in sorted(vars(args).items()) if key not in skip and value is not None}


def render_text(report: Report) -> str:
    lines = [f"{report.command}: {report.status} (exit {report.exit_code})"]
    for name, value in sorted(report.verdicts.items()):
        lines.append(f"  {name}: {value}")
    for witness in report.witnesses:
        lines.append(f"  witness: {witness}")
    return "\n".join(lines) + "\n"


def run(argv: Optional[Sequence[str]] = None) -> Report:
    args = build_parser().parse_args(argv)
    arguments = _arguments(args)
    try:
        _apply_flags(args)
    except ValueError as exc:
        return Report(command=args.command, arguments=arguments, status='error', exit_code=2,
                      verdicts={'error': 'ConfigError'}, witnesses=[{'message': str(exc)}])
    try:
        if args.command == 'catalog':
            M = catalog_module(args.name)
            payload = module_to_payload(M)
            if args.output:
                write_json(args.output, payload)
            outcome: Outcome = {'passed': True, 'payload': {'module': payload}}
        else:
            M = read_module(args.module)
            log(f"{args.command}: loaded {M!r}")
            outcome = COMMANDS[args.command](args, M)
        exit_code = 0 if outcome['passed'] else 1
        return Report(command=args.command, arguments=arguments, status='pass' if exit_code == 0 else 'fail',
                      exit_code=exit_code, verdicts=outcome.get('verdicts', {}),
                      witnesses=outcome.get('witnesses', []), payload=outcome.get('payload', {}))
    except FrobHodgeError as exc:
        status = 'error' if exc.exit_code == 2 else 'fail'
        return Report(command=args.command, arguments=arguments, status=status, exit_code=exc.exit_code,
                      verdicts={'error': type(exc).__name__},
                      witnesses=[{'message': str(exc), 'witness': exc.witness}])


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        report = run(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    text_format = get_config()['report']['format'] == 'text'
    sys.stdout.write(render_text(report) if text_format else dumps(report.model_dump(mode='json')))
    return report.exit_code


if __name__ == '__main__':
    sys.exit(main())
