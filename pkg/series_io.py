"""
Series Export and Cache
CSV export of count series and a versioned binary cache so long sweeps
can reuse counts instead of recomputing them.
"""

import os
import csv
import hashlib
import logging
import tempfile
from pathlib import Path

from exact_count import (CountSeries, FamilyConfig, FamilyKind, count_congruence,
                         count_distinct, DEFAULT_MEMORY_BUDGET)
from verifier_errors import SeriesCacheError

logger = logging.getLogger(__name__)

CACHE_MAGIC = b'PVSC'
CACHE_VERSION = 1
CSV_HEADER = ['d', 'a', 'minus', 'kind', 'n', 'count']

_FLAG_MINUS = 0x01
_FLAG_DISTINCT = 0x02
_DIGEST_SIZE = hashlib.sha256().digest_size


def vlq(i):
    """Unsigned LEB128 bytes of a nonnegative integer"""
    if i < 0:
        raise ValueError(f"vlq needs a nonnegative integer, got {i}")
    ret = []
    while True:
        b = i & 0x7F
        i >>= 7
        if i > 0:
            b |= 0x80
        ret.append(b)
        if i == 0:
            return bytes(ret)


def read_vlq(buffer, offset):
    """Decode a LEB128 integer at offset; returns (value, next offset)"""
    value = 0
    shift = 0
    while True:
        if offset >= len(buffer):
            raise SeriesCacheError("truncated varint")
        b = buffer[offset]
        offset += 1
        value |= (b & 0x7F) << shift
        shift += 7
        if not b & 0x80:
            return value, offset


def atomic_write_bytes(path, payload):
    """Write payload to path through a temp file in the same directory"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


def encode_series(series):
    """
    Serialize a CountSeries into the binary cache format

    Args:
        series (CountSeries): Series to encode

    Returns:
        bytes: Header, length-prefixed little-endian magnitudes, SHA-256 trailer
    """
    config = series.config
    flags = (_FLAG_MINUS if config.minus else 0) | \
            (_FLAG_DISTINCT if config.kind is FamilyKind.DISTINCT else 0)
    chunks = [CACHE_MAGIC, bytes([CACHE_VERSION]), vlq(config.d), vlq(config.a),
              bytes([flags]), vlq(series.n_max)]
    for value in series.values:
        length = (value.bit_length() + 7) // 8
        chunks.append(vlq(length))
        chunks.append(value.to_bytes(length, 'little'))
    body = b''.join(chunks)
    return body + hashlib.sha256(body).digest()


def decode_series(payload):
    """
    Parse the binary cache format back into a CountSeries

    Raises:
        SeriesCacheError: Bad magic, unknown version, checksum mismatch or truncation
    """
    if len(payload) < len(CACHE_MAGIC) + 1 + _DIGEST_SIZE:
        raise SeriesCacheError("cache file too short")
    body, digest = payload[:-_DIGEST_SIZE], payload[-_DIGEST_SIZE:]
    if body[:len(CACHE_MAGIC)] != CACHE_MAGIC:
        raise SeriesCacheError("not a series cache file (bad magic)")
    version = body[len(CACHE_MAGIC)]
    if version != CACHE_VERSION:
        raise SeriesCacheError(f"unsupported cache version {version}, expected {CACHE_VERSION}")
    if hashlib.sha256(body).digest() != digest:
        raise SeriesCacheError("cache checksum mismatch")

    offset = len(CACHE_MAGIC) + 1
    d, offset = read_vlq(body, offset)
    a, offset = read_vlq(body, offset)
    if offset >= len(body):
        raise SeriesCacheError("truncated header")
    flags = body[offset]
    offset += 1
    n_max, offset = read_vlq(body, offset)

    values = []
    for _ in range(n_max + 1):
        length, offset = read_vlq(body, offset)
        if offset + length > len(body):
            raise SeriesCacheError("truncated value")
        values.append(int.from_bytes(body[offset:offset + length], 'little'))
        offset += length
    if offset != len(body):
        raise SeriesCacheError("trailing bytes after series")

    kind = FamilyKind.DISTINCT if flags & _FLAG_DISTINCT else FamilyKind.CONGRUENCE
    config = FamilyConfig(d=d, a=a, minus=bool(flags & _FLAG_MINUS), kind=kind)
    return CountSeries(config=config, n_max=n_max, values=tuple(values))


def write_series_cache(series, path):
    atomic_write_bytes(path, encode_series(series))
    logger.info(f"Cached {series.config.label()} up to n={series.n_max} in {path}")


def read_series_cache(path):
    with open(path, 'rb') as handle:
        return decode_series(handle.read())


def cache_path(cache_dir, config):
    minus = '-minus' if config.minus else ''
    return Path(cache_dir) / f"{config.kind.value}-d{config.d}-a{config.a}{minus}.pvsc"


def load_or_count(config, n_max, cache_dir=None, memory_budget=DEFAULT_MEMORY_BUDGET):
    """
    Return the series for config up to n_max, reusing a cached longer series

    Args:
        config (FamilyConfig): Family to count
        n_max (int): Largest n needed
        cache_dir (str): Cache directory, or None to always recompute
        memory_budget (int): Budget in bytes

    Returns:
        CountSeries: Series truncated to n_max
    """
    path = cache_path(cache_dir, config) if cache_dir else None
    if path is not None and path.exists():
        try:
            cached = read_series_cache(path)
        except SeriesCacheError as e:
            logger.warning(f"Ignoring unreadable cache {path}: {e}")
        else:
            if cached.config == config and cached.n_max >= n_max:
                logger.info(f"Loaded {config.label()} from cache {path}")
                return CountSeries(config=config, n_max=n_max, values=cached.values[:n_max + 1])

    if config.kind is FamilyKind.DISTINCT:
        series = count_distinct(config.d, config.a, n_max, memory_budget)
    else:
        series = count_congruence(config, n_max, memory_budget)
    if path is not None:
        write_series_cache(series, path)
    return series


def series_rows(series):
    config = series.config
    minus = 'true' if config.minus else 'false'
    for n, count in enumerate(series.values):
        yield [config.d, config.a, minus, config.kind.value, n, count]


def write_series_csv(series, path):
    """Export a series as CSV with header d,a,minus,kind,n,count"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        writer.writerows(series_rows(series))
    logger.info(f"Wrote {series.n_max + 1} rows to {path}")
