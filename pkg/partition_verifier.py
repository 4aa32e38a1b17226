#!/usr/bin/env python3
"""
Partition Verifier
Exact counts, asymptotic envelopes, thresholds N(d) and checkpointed sweeps
for q_d^(2)(n) >= Q_d^(2,-)(n) and its level-one and Rogers-Ramanujan relatives.
Uses config.yaml for configuration
"""

import sys
import json
import logging
import argparse
from pathlib import Path

from asymptotic_evaluator import (check_Q_envelope, check_Q_upper, check_q_side, evaluate_envelope,
                                  write_envelope_csv, ENVELOPE_MIN_N)
from bound_engine import (D_RANGE, compare_with_published, compute_all, compute_N,
                          threshold_check, write_threshold_reports)
from exact_count import FamilyConfig, FamilyKind, count_congruence, count_distinct
from scalar_constants import build_bundle, residue_for
from series_io import load_or_count, write_series_csv
from verifier_config import (ARTIFACT_VERSION, default_fingerprint, load_settings, setup_logging,
                             with_overrides)
from verifier_errors import (EXIT_FAILURE, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, CertificationError,
                             UsageError, VerifierError)
from verify_harness import (SweepJob, SweepMode, run_identity_checks, run_sweeps, write_report)

logger = logging.getLogger(__name__)


def _write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write('\n')
    logger.info(f"Wrote {path}")


def _out_dir(args, settings):
    return Path(args.out or settings.output_dir)


def _family_d(d):
    if d < 1:
        raise UsageError(f"--d must be >= 1, got {d}")
    return d


def _bounds_d(d):
    if not D_RANGE[0] <= d <= D_RANGE[1]:
        raise UsageError(f"--d must be in {D_RANGE[0]}..{D_RANGE[1]} for this subcommand, got {d}")
    return d


def cmd_count(args, settings):
    """Export one count series as CSV"""
    kind = FamilyKind(args.kind)
    if kind is FamilyKind.DISTINCT and args.minus:
        raise UsageError("--minus applies to congruence families only")
    if args.n_max < 0:
        raise UsageError(f"--n-max must be >= 0, got {args.n_max}")
    _family_d(args.d)
    config = FamilyConfig(d=args.d, a=args.a, minus=args.minus, kind=kind)
    series = load_or_count(config, args.n_max, None, settings.memory_budget_bytes)
    minus = '-minus' if args.minus else ''
    path = _out_dir(args, settings) / f"{kind.value}-d{args.d}-a{args.a}{minus}-n{args.n_max}.csv"
    write_series_csv(series, path)
    return EXIT_OK


def cmd_constants(args, settings):
    """Write the ConstantBundle for one d"""
    d = _bounds_d(args.d)
    bundle = build_bundle(d, settings.params_for(d), settings.precision_bits)
    data = bundle.to_json_dict()
    data['fingerprint'] = bundle.fingerprint()
    _write_json(_out_dir(args, settings) / f"constants-d{d}.json", data)
    return EXIT_OK


def cmd_bounds(args, settings):
    """Thresholds N1..N8 and N(d), certified at N(d), 2N(d) and 10N(d)"""
    if args.all:
        ds = list(range(D_RANGE[0], D_RANGE[1] + 1))
        reports = compute_all(ds, settings.table, settings.precision_bits, settings.strict_hypotheses,
                              settings.worker_count)
        stem = 'thresholds-all'
    elif args.d is not None:
        d = _bounds_d(args.d)
        reports = [compute_N(d, settings.params_for(d), settings.precision_bits, settings.strict_hypotheses)]
        stem = f"thresholds-d{d}"
    else:
        raise UsageError("bounds needs --d or --all")

    checks = {report.d: threshold_check(report) for report in reports}
    out = _out_dir(args, settings)
    write_threshold_reports(reports, out / f"{stem}.json", out / f"{stem}.csv", checks)
    for report in reports:
        comparison = compare_with_published(report)
        logger.info(f"d={report.d}: N(d)={report.N_d} ({comparison['dominant']}), "
                    f"published {comparison['published']}")

    failed = [d for d, results in checks.items() if not all(holds for _, _, holds in results)]
    if failed:
        raise CertificationError(f"certification inequality fails for d in {failed}")
    return EXIT_OK


def cmd_asymptotics(args, settings):
    """Envelope table for one d; --check compares against exact counts"""
    d = _bounds_d(args.d)
    b = args.b or residue_for(d)
    if b not in (1, 2):
        raise UsageError(f"--b must be 1 or 2, got {b}")
    ns = sorted(set(args.n))
    if ns[0] < ENVELOPE_MIN_N:
        raise UsageError(f"--n values must be >= {ENVELOPE_MIN_N}, got {ns[0]}")
    params = settings.params_for(d)
    bundle = build_bundle(d, params, settings.precision_bits, b)
    evaluations = [evaluate_envelope(d, n, bundle, params, b) for n in ns]
    write_envelope_csv(evaluations, _out_dir(args, settings) / f"envelope-d{d}-b{b}.csv",
                       settings.precision_bits)
    if not args.check:
        return EXIT_OK

    exact = count_congruence(FamilyConfig(d=d, a=b), ns[-1], settings.memory_budget_bytes)
    failures = []
    for n in ns:
        upper = check_Q_upper(d, b, n, exact[n], bundle, params)
        if not upper.holds:
            failures.append(f"Q_{d}^({b})({n}) > S1 + S2 + S3")
        if b == 2 and bundle.c3 is not None:
            envelope = check_Q_envelope(d, n, exact[n], bundle, params)
            if not envelope.holds:
                failures.append(f"|Q_{d}^(2)({n}) - main term| > R_bound")
    distinct = count_distinct(d, 2, ns[-1], settings.memory_budget_bytes)
    for n in ns:
        if not check_q_side(d, n, distinct[n], bundle, params).holds:
            logger.warning(f"q_{d}^(2)({n}) < m_d - (S4 + ... + S8) with f_err_max={params.f_err_max}")
    for failure in failures:
        logger.error(failure)
    logger.info(f"Envelope checks for d={d}: {len(ns)} values of n, {len(failures)} failures")
    return EXIT_VIOLATION if failures else EXIT_OK


def cmd_verify(args, settings):
    """Sweep one or more d and compare the negatives with the predicted sets"""
    mode = SweepMode(args.mode)
    if args.n_cap < 1:
        raise UsageError(f"--n-cap must be >= 1, got {args.n_cap}")
    if args.resume and len(args.d) > 1:
        raise UsageError("--resume takes a single --d")
    for d in args.d:
        _family_d(d)
    if args.checkpoint_every is not None and args.checkpoint_every < 1:
        raise UsageError(f"--checkpoint-every must be >= 1, got {args.checkpoint_every}")
    every = args.checkpoint_every or settings.checkpoint_every
    jobs = [SweepJob(d=d, mode=mode, n_cap=args.n_cap, checkpoint_every=every, resume_from=args.resume)
            for d in args.d]
    reports = run_sweeps(jobs, settings.worker_count,
                         cache_dir=settings.cache_dir if args.cache else None,
                         checkpoint_dir=settings.checkpoint_dir,
                         memory_budget=settings.memory_budget_bytes,
                         spot_checks=settings.spot_checks,
                         spot_check_cap=settings.spot_check_cap,
                         seed=settings.seed)

    out = _out_dir(args, settings)
    mismatched = []
    for report in reports:
        stem = f"verify-d{report.job.d}-{mode.value}"
        write_report(report, out / f"{stem}.json", out / f"{stem}.csv", ARTIFACT_VERSION)
        if not report.matches:
            mismatched.append(report.job.d)
        logger.info(f"d={report.job.d}: negatives {sorted(report.negative_indices)} "
                    f"up to n={report.max_n_verified}")
    if mismatched:
        logger.error(f"Negatives differ from the predicted sets for d in {mismatched}")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_identities(args, settings):
    """Classical identities, dominance and cross-checks"""
    if args.n_max < 1 or args.oracle_n_max < 0:
        raise UsageError("--n-max must be >= 1 and --oracle-n-max >= 0")
    if args.oracle_n_max > settings.oracle_cap:
        raise UsageError(f"--oracle-n-max must be <= oracle_cap={settings.oracle_cap}, got {args.oracle_n_max}")
    results = run_identity_checks(args.n_max, oracle_n_max=args.oracle_n_max, oracle_cap=settings.oracle_cap)
    _write_json(_out_dir(args, settings) / 'identities.json',
                {'n_max': args.n_max, 'oracle_n_max': args.oracle_n_max,
                 'checks': [result.as_dict() for result in results]})
    failed = [result.name for result in results if not result.holds]
    for name in failed:
        logger.error(f"Identity check failed: {name}")
    return EXIT_VIOLATION if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog='partition_verifier',
        description='Verify d-distinct partition inequalities against congruence partitions')
    parser.add_argument('--version', action='store_true', help='print artifact version and parameter fingerprint')
    parser.add_argument('--config', help='configuration file (default: config.yaml when present)')
    parser.add_argument('--workers', type=int, help='override worker_count')
    subparsers = parser.add_subparsers(dest='command')

    def add_out(sub):
        sub.add_argument('--out', help='output directory (default: output_dir from the config)')

    count = subparsers.add_parser('count', help='export exact counts as CSV')
    count.add_argument('--d', type=int, required=True)
    count.add_argument('--a', type=int, default=2, choices=(1, 2))
    count.add_argument('--minus', action='store_true', help='drop the part d+3-a')
    count.add_argument('--kind', default=FamilyKind.CONGRUENCE.value, choices=[k.value for k in FamilyKind])
    count.add_argument('--n-max', type=int, required=True)
    add_out(count)
    count.set_defaults(handler=cmd_count)

    constants = subparsers.add_parser('constants', help='write the constant bundle for one d')
    constants.add_argument('--d', type=int, required=True)
    constants.add_argument('--precision-bits', type=int)
    add_out(constants)
    constants.set_defaults(handler=cmd_constants)

    bounds = subparsers.add_parser('bounds', help='thresholds N1..N8 and N(d)')
    bounds.add_argument('--d', type=int)
    bounds.add_argument('--all', action='store_true', help=f"every d in {D_RANGE[0]}..{D_RANGE[1]}")
    bounds.add_argument('--precision-bits', type=int)
    add_out(bounds)
    bounds.set_defaults(handler=cmd_bounds)

    asymptotics = subparsers.add_parser('asymptotics', help='main terms and error envelopes')
    asymptotics.add_argument('--d', type=int, required=True)
    asymptotics.add_argument('--n', type=int, nargs='+', required=True)
    asymptotics.add_argument('--b', type=int, help='residue of the congruence side (default by parity)')
    asymptotics.add_argument('--check', action='store_true', help='compare envelopes with exact counts')
    asymptotics.add_argument('--precision-bits', type=int)
    add_out(asymptotics)
    asymptotics.set_defaults(handler=cmd_asymptotics)

    verify = subparsers.add_parser('verify', help='checkpointed difference sweeps')
    verify.add_argument('--d', type=int, nargs='+', required=True)
    verify.add_argument('--mode', default=SweepMode.DELTA_MINUS.value, choices=[m.value for m in SweepMode])
    verify.add_argument('--n-cap', type=int, required=True)
    verify.add_argument('--checkpoint-every', type=int)
    verify.add_argument('--resume', help='checkpoint file to continue from')
    verify.add_argument('--cache', action='store_true', help='reuse and store series in the binary cache')
    add_out(verify)
    verify.set_defaults(handler=cmd_verify)

    identities = subparsers.add_parser('identities', help='classical identity and dominance checks')
    identities.add_argument('--n-max', type=int, default=2000)
    identities.add_argument('--oracle-n-max', type=int, default=60,
                            help='largest n compared against exhaustive enumeration')
    add_out(identities)
    identities.set_defaults(handler=cmd_identities)
    return parser


def main(argv=None):
    """Parse arguments, run one subcommand and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if args.version:
        print(f"partition_verifier {ARTIFACT_VERSION}")
        print(f"parameters {default_fingerprint()}")
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    setup_logging()
    try:
        bits = getattr(args, 'precision_bits', None)
        if bits is not None and bits < 53:
            raise UsageError(f"--precision-bits must be >= 53, got {bits}")
        settings = load_settings(args.config)
        settings = with_overrides(settings, worker_count=args.workers,
                                  precision_bits=bits)
        setup_logging(settings.log_file)
        return args.handler(args, settings)
    except VerifierError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except MemoryError:
        logger.error("Out of memory; lower --n-max/--n-cap or memory_budget_bytes")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
