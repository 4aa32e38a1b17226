#!/usr/bin/env python3
"""
Test the partition_verifier command line: subcommands, output files and exit codes
"""

import io
import os
import sys
import csv
import json
import tempfile
from contextlib import contextmanager, redirect_stderr, redirect_stdout

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from partition_verifier import main
from verifier_config import setup_logging


@contextmanager
def workspace():
    """Run inside an empty directory so no config.yaml is picked up"""
    previous = os.getcwd()
    with tempfile.TemporaryDirectory() as temp_dir:
        os.chdir(temp_dir)
        try:
            yield temp_dir
        finally:
            setup_logging()
            os.chdir(previous)


def run(*argv):
    stdout = io.StringIO()
    with redirect_stdout(stdout), redirect_stderr(io.StringIO()):
        code = main(list(argv))
    return code, stdout.getvalue()


def check_version_and_usage():
    code, out = run('--version')
    assert code == 0
    assert 'partition_verifier 1.0.0' in out
    assert 'parameters ' in out
    with workspace():
        assert run()[0] == 2
        assert run('count', '--d', '3')[0] == 2
        assert run('frobnicate')[0] == 2
        assert run('--config', 'missing.yaml', 'identities')[0] == 2


def check_count():
    with workspace() as temp_dir:
        code, _ = run('count', '--d', '3', '--minus', '--n-max', '6', '--out', 'out')
        assert code == 0
        with open(os.path.join(temp_dir, 'out', 'congruence-d3-a2-minus-n6.csv')) as handle:
            assert handle.read().endswith(',6,1\n')
        assert run('count', '--d', '3', '--kind', 'distinct', '--minus', '--n-max', '6')[0] == 2
        assert run('count', '--d', '3', '--n-max', '-1')[0] == 2
        assert run('count', '--d', '0', '--n-max', '10')[0] == 2
        assert os.path.exists(os.path.join(temp_dir, 'verification.log'))


def check_constants():
    with workspace() as temp_dir:
        assert run('constants', '--d', '8', '--out', 'out')[0] == 0
        with open(os.path.join(temp_dir, 'out', 'constants-d8.json')) as handle:
            data = json.load(handle)
        assert data['d'] == 8 and data['b'] == 2
        assert len(data['fingerprint']) == 64
        assert data['constants']['c3'] is not None
        assert run('constants', '--d', '3')[0] == 2
        assert run('constants', '--d', '8', '--precision-bits', '40')[0] == 2


def check_bounds():
    with workspace() as temp_dir:
        assert run('bounds', '--d', '8', '--out', 'out')[0] == 0
        with open(os.path.join(temp_dir, 'out', 'thresholds-d8.json')) as handle:
            entries = json.load(handle)
        assert len(entries) == 1
        assert entries[0]['N_d'] == max(entries[0]['N'])
        assert [row['holds'] for row in entries[0]['certification']] == [True, True, True]
        with open(os.path.join(temp_dir, 'out', 'thresholds-d8.csv'), newline='') as handle:
            rows = list(csv.reader(handle))
        assert rows[1][0] == '8'
        assert run('bounds')[0] == 2
        assert run('bounds', '--d', '62')[0] == 2


def check_asymptotics():
    with workspace() as temp_dir:
        assert run('asymptotics', '--d', '8', '--n', '10000', '1000', '--check', '--out', 'out')[0] == 0
        with open(os.path.join(temp_dir, 'out', 'envelope-d8-b2.csv'), newline='') as handle:
            rows = list(csv.reader(handle))
        assert [row[2] for row in rows[1:]] == ['1000', '10000']
        assert run('asymptotics', '--d', '8', '--n', '5')[0] == 2
        assert run('asymptotics', '--d', '8', '--n', '100', '--b', '3')[0] == 2


def check_verify():
    with workspace() as temp_dir:
        code, _ = run('verify', '--d', '7', '9', '--mode', 'delta', '--n-cap', '200',
                      '--checkpoint-every', '50', '--out', 'out')
        assert code == 0
        with open(os.path.join(temp_dir, 'out', 'verify-d7-delta.json')) as handle:
            data = json.load(handle)
        assert [item['n'] for item in data['negatives']] == [8, 10, 12, 24, 26, 28]
        assert data['matches_prediction'] is True
        assert data['artifact_version'] == '1.0.0'
        assert os.path.exists(os.path.join(temp_dir, 'out', 'verify-d9-delta.meta.json'))
        checkpoint = os.path.join(temp_dir, 'checkpoints', 'sweep-d7-delta.ckpt.json')
        assert os.path.exists(checkpoint)

        code, _ = run('verify', '--d', '7', '--mode', 'delta', '--n-cap', '300',
                      '--checkpoint-every', '50', '--resume', checkpoint, '--out', 'again')
        assert code == 0
        with open(os.path.join(temp_dir, 'again', 'verify-d7-delta.json')) as handle:
            assert json.load(handle)['max_n_verified'] == 300

        with open(checkpoint, 'w') as handle:
            handle.write('{')
        assert run('verify', '--d', '7', '--mode', 'delta', '--n-cap', '300',
                   '--checkpoint-every', '50', '--resume', checkpoint)[0] == 3
        assert run('verify', '--d', '7', '9', '--n-cap', '100', '--resume', checkpoint)[0] == 2
        assert run('verify', '--d', '7', '--n-cap', '0')[0] == 2
        assert run('verify', '--d', '0', '--n-cap', '10')[0] == 2
        assert run('verify', '--d', '7', '--n-cap', '10', '--checkpoint-every', '-1')[0] == 2


def check_identities():
    with workspace() as temp_dir:
        assert run('identities', '--n-max', '200', '--oracle-n-max', '30', '--out', 'out')[0] == 0
        with open(os.path.join(temp_dir, 'out', 'identities.json')) as handle:
            data = json.load(handle)
        assert data['n_max'] == 200
        assert all(check['holds'] for check in data['checks'])
        assert run('identities', '--oracle-n-max', '400')[0] == 2


def check_config_file_is_used():
    with workspace() as temp_dir:
        with open('config.yaml', 'w') as handle:
            handle.write("output_dir: 'from_config'\nlog_file: 'run.log'\n")
        assert run('count', '--d', '4', '--n-max', '10')[0] == 0
        assert os.path.exists(os.path.join(temp_dir, 'from_config', 'congruence-d4-a2-n10.csv'))
        assert os.path.exists(os.path.join(temp_dir, 'run.log'))
        with open('bad.yaml', 'w') as handle:
            handle.write("weights:\n  even: ['1/800']\n")
        assert run('--config', 'bad.yaml', 'count', '--d', '4', '--n-max', '10')[0] == 2


CASES = [
    ("version and usage", check_version_and_usage),
    ("count", check_count),
    ("constants", check_constants),
    ("bounds", check_bounds),
    ("asymptotics", check_asymptotics),
    ("verify and resume", check_verify),
    ("identities", check_identities),
    ("config file", check_config_file_is_used),
]


def test_cli():
    """Test the command line"""
    print("🧪 Testing partition_verifier command line...")

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

    print(f"\n📊 Command Line Test Results: {passed}/{total} passed")
    return passed == total


if __name__ == "__main__":
    success = test_cli()
    sys.exit(0 if success else 1)
