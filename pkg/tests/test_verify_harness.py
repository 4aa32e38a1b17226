#!/usr/bin/env python3
"""
Test difference sweeps, checkpoints, exception sets and identity checks
"""

import os
import sys
import csv
import json
import hashlib
import tempfile

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from exact_count import FamilyConfig, FamilyKind, count_congruence, count_distinct
from verifier_errors import (CertificationError, CheckpointCorruptError, CheckpointHashError,
                             CheckpointVersionError, DomainError)
from verify_harness import (CHECKPOINT_FORMAT_VERSION, DOMINANCE_D, SweepJob, SweepMode, check_andrews_dominance,
                            checkpoint_path, exception_set, predicted_negatives, resume, run_identity_checks,
                            run_sweep, spot_check, write_report)


def rewrite_checkpoint(path, **changes):
    """Edit a checkpoint and reseal it with a valid payload hash"""
    with open(path) as handle:
        payload = json.load(handle)
    payload.pop('payload_sha256')
    payload.update(changes)
    canonical = json.dumps(payload, sort_keys=True, separators=(',', ':')).encode('utf-8')
    payload['payload_sha256'] = hashlib.sha256(canonical).hexdigest()
    with open(path, 'w') as handle:
        json.dump(payload, handle)


def check_exception_sets():
    # 24, 26 and 28 are negative too: q_7^(2)(24) = 8 while Q_7^(2)(24) = 9
    assert count_distinct(7, 2, 24)[24] == 8
    assert count_congruence(FamilyConfig(d=7, a=2), 24)[24] == 9
    assert exception_set(7, 300) == {8, 10, 12, 24, 26, 28}
    assert exception_set(7, 20) == {8, 10, 12}
    assert exception_set(7, 300) == predicted_negatives(7, SweepMode.DELTA, 300)
    assert exception_set(9, 300) == {10, 12, 14}
    assert exception_set(8, 300) == frozenset()
    assert exception_set(6, 300) == frozenset()


def check_predictions():
    assert predicted_negatives(7, SweepMode.DELTA, 9) == {8}
    assert predicted_negatives(7, SweepMode.DELTA, 25) == {8, 10, 12, 24}
    assert predicted_negatives(9, SweepMode.DELTA, 10 ** 6) == {10, 12, 14}
    assert predicted_negatives(61, SweepMode.DELTA, 10 ** 6) == {62, 64, 66}
    assert predicted_negatives(8, SweepMode.DELTA, 100) == frozenset()
    assert predicted_negatives(3, SweepMode.DELTA, 100) is None
    assert predicted_negatives(63, SweepMode.DELTA, 100) is None
    assert predicted_negatives(3, SweepMode.DELTA_MINUS, 100) == frozenset()
    try:
        SweepJob(d=7, mode=SweepMode.DELTA, n_cap=0)
    except DomainError:
        pass
    else:
        raise AssertionError("SweepJob accepted n_cap=0")


def check_sweeps():
    delta_report = run_sweep(SweepJob(d=7, mode=SweepMode.DELTA, n_cap=200, checkpoint_every=50),
                             spot_checks=20)
    assert delta_report.negative_indices == {8, 10, 12, 24, 26, 28}
    assert all(value < 0 for _, value in delta_report.negatives)
    assert delta_report.matches
    assert delta_report.max_n_verified == 200
    assert len(delta_report.checkpoint_chain) == 4
    assert delta_report.spot_checked == 20

    minus_report = run_sweep(SweepJob(d=7, mode=SweepMode.DELTA_MINUS, n_cap=200, checkpoint_every=50),
                             spot_checks=0)
    assert minus_report.negatives == ()
    assert minus_report.matches
    # the chain depends on the mode through the config hash
    assert minus_report.checkpoint_chain != delta_report.checkpoint_chain


def check_resume_matches_fresh_run():
    with tempfile.TemporaryDirectory() as temp_dir:
        first = SweepJob(d=9, mode=SweepMode.DELTA, n_cap=120, checkpoint_every=40)
        run_sweep(first, checkpoint_dir=temp_dir, spot_checks=0)
        path = checkpoint_path(temp_dir, first)
        assert path.exists()
        assert resume(path, first).n == 120

        resumed = run_sweep(SweepJob(d=9, mode=SweepMode.DELTA, n_cap=200, checkpoint_every=40,
                                     resume_from=str(path)), spot_checks=0)
        fresh = run_sweep(SweepJob(d=9, mode=SweepMode.DELTA, n_cap=200, checkpoint_every=40),
                          spot_checks=0)
        assert resumed.checkpoint_chain == fresh.checkpoint_chain
        assert resumed.negatives == fresh.negatives
        assert resumed.negative_indices == {10, 12, 14}

        # a checkpoint past n_cap cannot be continued
        try:
            run_sweep(SweepJob(d=9, mode=SweepMode.DELTA, n_cap=100, checkpoint_every=40,
                               resume_from=str(path)), spot_checks=0)
        except CheckpointHashError:
            pass
        else:
            raise AssertionError("resume accepted a checkpoint beyond n_cap")


def check_checkpoint_rejections():
    with tempfile.TemporaryDirectory() as temp_dir:
        job = SweepJob(d=7, mode=SweepMode.DELTA, n_cap=80, checkpoint_every=40)
        run_sweep(job, checkpoint_dir=temp_dir, spot_checks=0)
        path = checkpoint_path(temp_dir, job)

        try:
            resume(path, SweepJob(d=7, mode=SweepMode.DELTA, n_cap=80, checkpoint_every=20))
        except CheckpointHashError:
            pass
        else:
            raise AssertionError("resume accepted a different configuration")

        with open(path) as handle:
            text = handle.read()
        with open(path, 'w') as handle:
            handle.write(text.replace('"n": 80', '"n": 81'))
        try:
            resume(path, job)
        except CheckpointCorruptError:
            pass
        else:
            raise AssertionError("resume accepted a tampered checkpoint")

        with open(path, 'w') as handle:
            handle.write(text[:len(text) // 2])
        try:
            resume(path, job)
        except CheckpointCorruptError:
            pass
        else:
            raise AssertionError("resume accepted a truncated checkpoint")

        with open(path, 'w') as handle:
            handle.write(text)
        rewrite_checkpoint(path, format_version=CHECKPOINT_FORMAT_VERSION + 1)
        try:
            resume(path, job)
        except CheckpointVersionError:
            pass
        else:
            raise AssertionError("resume accepted another checkpoint format")

        # a resealed checkpoint with a forged chain fails the replay
        with open(path, 'w') as handle:
            handle.write(text)
        rewrite_checkpoint(path, running_hash='00' * 32)
        try:
            run_sweep(SweepJob(d=7, mode=SweepMode.DELTA, n_cap=120, checkpoint_every=40,
                               resume_from=str(path)), spot_checks=0)
        except CheckpointHashError:
            pass
        else:
            raise AssertionError("resume accepted a forged chain")


def check_spot_check_catches_wrong_series():
    job = SweepJob(d=7, mode=SweepMode.DELTA_MINUS, n_cap=200)
    distinct = count_distinct(7, 2, 200)
    wrong = count_congruence(FamilyConfig(d=7, a=2), 200)
    try:
        spot_check(job, distinct, wrong, samples=200, cap=200)
    except CertificationError:
        pass
    else:
        raise AssertionError("spot check missed a wrong congruence series")
    right = count_congruence(FamilyConfig(d=7, a=2, minus=True), 200)
    assert spot_check(job, distinct, right, samples=200, cap=200) == 200
    assert FamilyConfig(d=7, a=2, kind=FamilyKind.DISTINCT).kind is FamilyKind.DISTINCT


def check_report_files():
    report = run_sweep(SweepJob(d=7, mode=SweepMode.DELTA, n_cap=60, checkpoint_every=30), spot_checks=5)
    with tempfile.TemporaryDirectory() as temp_dir:
        json_path = os.path.join(temp_dir, 'verify-d7-delta.json')
        csv_path = os.path.join(temp_dir, 'verify-d7-delta.csv')
        write_report(report, json_path, csv_path, '1.0.0')
        with open(json_path, 'rb') as handle:
            first = handle.read()
        write_report(report, json_path, csv_path, '1.0.0')
        with open(json_path, 'rb') as handle:
            assert handle.read() == first
        data = json.loads(first)
        assert os.path.exists(os.path.join(temp_dir, 'verify-d7-delta.meta.json'))
        with open(csv_path, newline='') as handle:
            rows = list(csv.reader(handle))
    assert data['content_hash'] == report.checkpoint_chain[-1]
    assert [item['n'] for item in data['negatives']] == [8, 10, 12, 24, 26, 28]
    assert data['predicted_negatives'] == [8, 10, 12, 24, 26, 28]
    assert data['matches_prediction'] is True
    assert 'started_at' not in data
    assert rows[0] == ['d', 'mode', 'n', 'delta']
    assert [row[2] for row in rows[1:]] == ['8', '10', '12', '24', '26', '28']


def check_identities():
    results = run_identity_checks(n_max=300, gf_n_max=100)
    failed = [result.name for result in results if not result.holds]
    assert not failed, failed
    assert len({result.name for result in results}) == len(results)
    dominance = [result for result in results if result.name.startswith('Q_') and '^(1) >= ' in result.name]
    assert [result.name for result in dominance] == [f"Q_{d}^(1) >= Q_{d}^(2,-)" for d in DOMINANCE_D]
    assert check_andrews_dominance(61, 2000).holds


CASES = [
    ("exception sets", check_exception_sets),
    ("predicted negatives", check_predictions),
    ("sweeps", check_sweeps),
    ("resume matches fresh run", check_resume_matches_fresh_run),
    ("checkpoint rejections", check_checkpoint_rejections),
    ("spot checks", check_spot_check_catches_wrong_series),
    ("report files", check_report_files),
    ("identity checks", check_identities),
]


def test_verify_harness():
    """Test sweeps"""
    print("🧪 Testing verify harness...")

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

    print(f"\n📊 Verify Harness Test Results: {passed}/{total} passed")
    return passed == total


if __name__ == "__main__":
    success = test_verify_harness()
    sys.exit(0 if success else 1)
