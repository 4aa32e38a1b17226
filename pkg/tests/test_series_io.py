#!/usr/bin/env python3
"""
Test series CSV export and the binary series cache
"""

import os
import sys
import csv
import tempfile

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from exact_count import FamilyConfig, FamilyKind, count_congruence, count_distinct
from series_io import (CSV_HEADER, cache_path, decode_series, encode_series, load_or_count,
                       read_vlq, vlq, write_series_cache, write_series_csv)
from verifier_errors import SeriesCacheError


def check_vlq():
    assert vlq(0) == b'\x00'
    assert vlq(127) == b'\x7f'
    assert vlq(128) == b'\x80\x01'
    assert read_vlq(b'\x80\x01\x05', 0) == (128, 2)
    try:
        read_vlq(b'\x80', 0)
    except SeriesCacheError:
        pass
    else:
        raise AssertionError("truncated varint accepted")


def check_cache_round_trip():
    series = count_distinct(4, 2, 400)
    decoded = decode_series(encode_series(series))
    assert decoded == series
    minus = count_congruence(FamilyConfig(d=5, a=2, minus=True), 50)
    assert decode_series(encode_series(minus)).config.minus


def check_cache_rejects_damage():
    payload = encode_series(count_congruence(FamilyConfig(d=3, a=2), 30))
    damaged = [
        payload[:-5],
        b'XXXX' + payload[4:],
        payload[:4] + bytes([9]) + payload[5:],
        payload[:10] + bytes([payload[10] ^ 0xFF]) + payload[11:],
    ]
    for bad in damaged:
        try:
            decode_series(bad)
        except SeriesCacheError:
            continue
        raise AssertionError("damaged cache payload accepted")


def check_load_or_count():
    config = FamilyConfig(d=6, a=2, kind=FamilyKind.DISTINCT)
    with tempfile.TemporaryDirectory() as temp_dir:
        first = load_or_count(config, 200, temp_dir)
        assert cache_path(temp_dir, config).exists()
        shorter = load_or_count(config, 120, temp_dir)
        assert shorter.values == first.values[:121]
        assert shorter.n_max == 120

        # unreadable caches are recomputed and replaced
        with open(cache_path(temp_dir, config), 'wb') as handle:
            handle.write(b'garbage')
        again = load_or_count(config, 200, temp_dir)
        assert again == first


def check_csv_export():
    series = count_congruence(FamilyConfig(d=3, a=2, minus=True), 6)
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, 'series.csv')
        write_series_csv(series, path)
        with open(path, newline='') as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == CSV_HEADER
        assert len(rows) == 8
        assert rows[-1] == ['3', '2', 'true', 'congruence', '6', '1']
        with open(path) as handle:
            assert handle.read().endswith(',6,1\n')


def check_cache_file_written_atomically():
    series = count_distinct(5, 1, 50)
    with tempfile.TemporaryDirectory() as temp_dir:
        path = os.path.join(temp_dir, 'nested', 'q.pvsc')
        write_series_cache(series, path)
        assert os.listdir(os.path.dirname(path)) == ['q.pvsc']


CASES = [
    ("varints", check_vlq),
    ("cache round trip", check_cache_round_trip),
    ("cache rejects damage", check_cache_rejects_damage),
    ("load or count", check_load_or_count),
    ("csv export", check_csv_export),
    ("atomic cache write", check_cache_file_written_atomically),
]


def test_series_io():
    """Test series export and cache"""
    print("🧪 Testing series CSV and cache...")

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

    print(f"\n📊 Series IO Test Results: {passed}/{total} passed")
    return passed == total


if __name__ == "__main__":
    success = test_series_io()
    sys.exit(0 if success else 1)
