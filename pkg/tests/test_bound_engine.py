#!/usr/bin/env python3
"""
Test thresholds N1..N8, N(d) and the certification inequality past N(d)
"""

import io
import os
import sys
import csv
import json
import logging
import tempfile
from dataclasses import replace
from fractions import Fraction
from functools import lru_cache

import mpmath as mp

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from bound_engine import (CSV_HEADER, PUBLISHED_THRESHOLDS, _last_crossing, certified_ceil, compare_with_published,
                          compute_N, defining_inequality_holds, threshold_check, threshold_N1, threshold_N5,
                          threshold_N7, threshold_N8, write_threshold_reports)
from scalar_constants import DEFAULT_TABLE, build_bundle
from verifier_errors import DomainError, HypothesisViolation, MethodFailure, RootBracketError


@lru_cache(maxsize=None)
def bundle_for(d):
    return build_bundle(d, DEFAULT_TABLE.params_for(d), 256)


@lru_cache(maxsize=None)
def report_for(d):
    return compute_N(d, DEFAULT_TABLE.params_for(d), bundle=bundle_for(d))


def check_certified_ceil():
    with mp.workprec(320):
        assert certified_ceil(mp.mpf('10.5'), 256) == 11
        # exact integers are inflated past themselves
        assert certified_ceil(10, 256) == 11
        assert certified_ceil(-3, 256) == 1
        assert certified_ceil(0, 256) == 1


def check_last_crossing():
    with mp.workprec(128):
        def g(n):
            return mp.log(100) + mp.log(n) - mp.sqrt(n)
        n = _last_crossing(g, 4)
        assert g(mp.mpf(n)) <= 0 < g(mp.mpf(n - 1))
        assert 80 < n <= 100
        assert _last_crossing(lambda n: -1 - n, 4) == 1
        try:
            _last_crossing(lambda n: mp.mpf(1), 4)
        except RootBracketError as e:
            assert e.interval[0] < e.interval[1]
        else:
            raise AssertionError("expected RootBracketError")


def closed_form_thresholds(d, bundle, params):
    """N1, N2, N4, N5, N6 written out from the summand-to-main-term ratios"""
    def clamp(log_ratio, value):
        return 1 if log_ratio <= 0 else certified_ceil(value, 256)

    with mp.workprec(320):
        A, alpha, b = bundle.A_d, bundle.alpha, bundle.b
        K = [mp.mpf(k.numerator) / k.denominator for k in params.weights]
        epsilon = mp.mpf(params.epsilon.numerator) / params.epsilon.denominator
        epsilon2 = mp.mpf(params.epsilon2.numerator) / params.epsilon2.denominator
        delta = mp.mpf(params.delta.numerator) / params.delta.denominator
        shape = alpha ** (d - 3) * (d * alpha ** (d - 1) + 1)
        k = 3 * (d + 3)
        sin_b = mp.sin(b * mp.pi / (d + 3))
        gap = 2 * mp.sqrt(A) - 2 * mp.pi / mp.sqrt(k)

        L1 = mp.log(mp.sqrt(mp.pi * shape) / (2 * K[0] * sin_b * (k * A) ** mp.mpf(0.25)))
        L2 = mp.log(2 * bundle.c7 * mp.pi ** (1 + delta / 2) * mp.sqrt(mp.pi * shape)
                    / (K[1] * A ** mp.mpf(0.25) * k ** 2 * sin_b))
        L4 = -mp.log(K[3] * mp.sqrt(2 * mp.pi) * A ** (epsilon / 2 + mp.mpf(0.25)))
        return (
            clamp(L1, (L1 / gap) ** 2),
            clamp(L2, (L2 / gap) ** 2),
            clamp(L4, (A ** (-mp.mpf(0.5) - epsilon) * L4) ** (2 / (1 - 2 * epsilon))),
            certified_ceil((A ** ((1 + 3 * epsilon2) / 2) / mp.log1p(K[4])) ** (2 / (3 * epsilon2 - 1)), 256),
            certified_ceil(((A ** mp.mpf(1.25) * (1 + A ** epsilon) + A ** mp.mpf(0.25))
                            / (mp.sqrt(mp.pi) * K[5])) ** (mp.mpf(4) / 3), 256),
        )


def check_closed_form_thresholds():
    for d in (8, 9):
        report = report_for(d)
        expected = closed_form_thresholds(d, bundle_for(d), DEFAULT_TABLE.params_for(d))
        actual = (report.N[0], report.N[1], report.N[3], report.N[4], report.N[5])
        assert actual == expected, (d, actual, expected)
    # with epsilon2 = 1 the N5 bound is A_d^2 / log(1 + K5)
    with mp.workprec(320):
        A = bundle_for(8).A_d
        n5 = A ** 2 / mp.log1p(mp.mpf(1) / 800)
        N5 = threshold_N5(8, Fraction(1, 800), DEFAULT_TABLE.params_for(8), bundle_for(8))
        assert n5 <= N5 <= n5 + 1, (N5, n5)


def check_defining_inequalities():
    bundle = bundle_for(8)
    params = DEFAULT_TABLE.params_for(8)
    report = report_for(8)
    for i, n in enumerate(report.N, start=1):
        assert defining_inequality_holds(i, max(n, 6), bundle, params), (i, n)
        assert defining_inequality_holds(i, 10 * max(n, 6), bundle, params), (i, n)


def check_report_even_d():
    report = report_for(8)
    assert report.b == 2
    assert len(report.N) == 8
    assert report.N_Q == max(report.N[:3])
    assert report.N_q == max(report.N[3:])
    assert report.N_d == max(report.N) == report.N[report.dominant - 1]
    assert report.conditional
    assert report.hypothesis_violations and 'beta_q' in report.hypothesis_violations[0]
    assert report.published_N == PUBLISHED_THRESHOLDS[8]
    comparison = compare_with_published(report)
    assert comparison['computed'] == report.N_d
    assert comparison['dominant'] == f"N{report.dominant}"


def check_published_mismatch_warns():
    stream = io.StringIO()
    handler = logging.StreamHandler(stream)
    handler.setLevel(logging.WARNING)
    engine_logger = logging.getLogger('bound_engine')
    engine_logger.addHandler(handler)
    try:
        report = compute_N(8, DEFAULT_TABLE.params_for(8), bundle=bundle_for(8))
    finally:
        engine_logger.removeHandler(handler)
    assert report.N_d != PUBLISHED_THRESHOLDS[8]
    assert f"N(d)={report.N_d} differs from the published {PUBLISHED_THRESHOLDS[8]}" in stream.getvalue()


def check_certification_past_N():
    for d in (8, 9):
        results = threshold_check(report_for(d))
        assert [n for n, _, _ in results] == [report_for(d).N_d * m for m in (1, 2, 10)]
        assert all(holds for _, _, holds in results), (d, results)


def check_precision_doubling():
    coarse = report_for(8)
    fine = compute_N(8, precision_bits=512)
    assert fine.N[2] == coarse.N[2]
    assert fine.N[7] == coarse.N[7]


def check_f_err_max_variants():
    bundle = bundle_for(8)
    params = DEFAULT_TABLE.params_for(8)
    unknown = compute_N(8, replace(params, f_err_max=None), bundle=bundle)
    assert unknown.N[6] is None
    assert unknown.conditional
    assert unknown.N_q == max(n for n in unknown.N[3:] if n is not None)

    exact = compute_N(8, replace(params, f_err_max=Fraction(0)), bundle=bundle)
    assert exact.N[6] == 1
    assert not exact.conditional

    try:
        threshold_N7(8, params.K(7), replace(params, f_err_max=Fraction(1)), bundle)
    except DomainError:
        pass
    else:
        raise AssertionError("N7 accepted K7^2 <= f^2 A_d")


def check_failures():
    bundle = bundle_for(8)
    params = DEFAULT_TABLE.params_for(8)
    try:
        compute_N(8, params, strict_hypotheses=True, bundle=bundle)
    except HypothesisViolation as e:
        assert e.constraint == 'x < beta_q'
    else:
        raise AssertionError("strict mode ignored x < beta_q")
    try:
        threshold_N8(8, params.K(8), params, replace(bundle, eta=mp.mpf(1)))
    except HypothesisViolation as e:
        assert e.constraint == 'eta < 0'
    else:
        raise AssertionError("N8 accepted eta >= 0")
    try:
        threshold_N1(8, 2, params.K(1), replace(bundle, A_d=mp.mpf('0.01')))
    except MethodFailure:
        pass
    else:
        raise AssertionError("N1 accepted a non-positive growth gap")
    for d in (3, 62):
        try:
            compute_N(d)
        except DomainError:
            continue
        raise AssertionError(f"compute_N accepted d={d}")


def check_report_files():
    reports = [report_for(8), report_for(9)]
    checks = {report.d: threshold_check(report) for report in reports}
    with tempfile.TemporaryDirectory() as temp_dir:
        json_path = os.path.join(temp_dir, 'thresholds.json')
        csv_path = os.path.join(temp_dir, 'thresholds.csv')
        write_threshold_reports(reports, json_path, csv_path, checks)
        with open(json_path) as handle:
            entries = json.load(handle)
        with open(csv_path, newline='') as handle:
            rows = list(csv.reader(handle))
    assert [entry['d'] for entry in entries] == [8, 9]
    assert entries[0]['dominant'].startswith('N')
    assert entries[0]['constant_bundle'] == bundle_for(8).fingerprint()
    assert len(entries[1]['certification']) == 3
    assert rows[0] == CSV_HEADER
    assert rows[1][0] == '8' and rows[1][-1] == 'true'
    assert rows[2][CSV_HEADER.index('Nd')] == str(report_for(9).N_d)


CASES = [
    ("certified ceiling", check_certified_ceil),
    ("last crossing", check_last_crossing),
    ("closed-form thresholds", check_closed_form_thresholds),
    ("defining inequalities at N_i", check_defining_inequalities),
    ("report for d=8", check_report_even_d),
    ("published mismatch warning", check_published_mismatch_warns),
    ("certification at N, 2N, 10N", check_certification_past_N),
    ("N3 and N8 at 512 bits", check_precision_doubling),
    ("f_err_max variants", check_f_err_max_variants),
    ("failure modes", check_failures),
    ("report files", check_report_files),
]


def test_bound_engine():
    """Test thresholds"""
    print("🧪 Testing bound engine...")

    passed = 0
    total = len(CASES)

    for name, case in CASES:
        try:
            case()
            print(f"✅ {name} PASSED")
            passed += 1
        except AssertionError as e:
            print(f"❌ {name} FAILED {e}")
        except Exception as e:
            print(f"💥 {name} ERROR: {e}")

    print(f"\n📊 Bound Engine Test Results: {passed}/{total} passed")
    return passed == total


if __name__ == "__main__":
    success = test_bound_engine()
    sys.exit(0 if success else 1)
