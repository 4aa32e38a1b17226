#!/usr/bin/env python3
"""
Verify Harness
Checkpointed sweeps of q_d^(2)(n) - Q_d^(2,-)(n) and q_d^(2)(n) - Q_d^(2)(n)
over 1..n_cap, recording every negative index, plus the classical identity
and dominance checks the counting code is expected to reproduce.
"""

import csv
import json
import time
import random
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from functools import partial
from pathlib import Path
from typing import Optional

from exact_count import (DEFAULT_MEMORY_BUDGET, ORACLE_CAP, FamilyConfig, FamilyKind, allowed_parts,
                         brute_force_count, count_congruence, count_distinct, delta,
                         delta_from_series, distinct_count_by_parts, product_coefficients)
from series_io import atomic_write_bytes, load_or_count
from verifier_errors import (CertificationError, CheckpointCorruptError, CheckpointHashError,
                             CheckpointVersionError, DomainError)

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
DEFAULT_CHECKPOINT_EVERY = 100000
DEFAULT_SPOT_CHECKS = 100
DEFAULT_SPOT_CHECK_CAP = 2000
SWEEP_RESIDUE = 2
GF_CROSS_CHECK_N = 500
ORACLE_CROSS_CHECK_N = 60
DOMINANCE_D = range(1, 62)

_SIGN = {1: b'+', -1: b'-', 0: b'0'}

# Negatives of Delta beyond {d+1, d+3, d+5}, found by exact counting
EXTRA_NEGATIVES = {7: (24, 26, 28)}


class SweepMode(Enum):
    DELTA_MINUS = 'delta-minus'
    DELTA = 'delta'


@dataclass(frozen=True)
class SweepJob:
    """
    One sweep over 1..n_cap

    Attributes:
        d (int): Gap of the distinct family, modulus d+3 of the congruence one
        mode (SweepMode): Compare against Q_d^(2,-) or Q_d^(2)
        n_cap (int): Last index scanned
        checkpoint_every (int): Segment length of the hash chain and checkpoint spacing
        resume_from (str): Checkpoint file to continue from
    """
    d: int
    mode: SweepMode
    n_cap: int
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY
    resume_from: Optional[str] = None

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")
        if self.n_cap < 1:
            raise DomainError(f"n_cap must be >= 1, got {self.n_cap}")
        if self.checkpoint_every < 1:
            raise DomainError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")

    @property
    def minus(self):
        return self.mode is SweepMode.DELTA_MINUS

    def label(self):
        return f"d={self.d} {self.mode.value} n<={self.n_cap}"

    def config_hash(self):
        """Hash of everything a checkpoint must agree on; n_cap may grow on resume."""
        payload = {'d': self.d, 'mode': self.mode.value, 'checkpoint_every': self.checkpoint_every,
                   'a': SWEEP_RESIDUE}
        return _sha256_hex(_canonical(payload))

    def as_dict(self):
        return {'d': self.d, 'mode': self.mode.value, 'n_cap': self.n_cap,
                'checkpoint_every': self.checkpoint_every}


@dataclass
class SweepState:
    """Scan progress after index n; chain holds one hash per finished segment."""
    config_hash: str
    n: int
    running_hash: str
    negatives: list = field(default_factory=list)
    chain: list = field(default_factory=list)


@dataclass(frozen=True)
class VerificationReport:
    job: SweepJob
    negatives: tuple
    max_n_verified: int
    checkpoint_chain: tuple
    predicted: Optional[frozenset]
    spot_checked: int
    started_at: float
    finished_at: float
    certificate: Optional[dict] = None

    @property
    def wall_time(self):
        return self.finished_at - self.started_at

    @property
    def negative_indices(self):
        return frozenset(n for n, _ in self.negatives)

    @property
    def matches(self):
        """True when the negatives equal the predicted set, or none were found without a prediction"""
        if self.predicted is None:
            return not self.negatives
        return self.negative_indices == self.predicted

    def to_json_dict(self, artifact_version=None):
        data = {
            'job': self.job.as_dict(),
            'negatives': [{'n': n, 'delta_decimal': str(value)} for n, value in self.negatives],
            'max_n_verified': self.max_n_verified,
            'checkpoints': list(self.checkpoint_chain),
            'content_hash': self.checkpoint_chain[-1] if self.checkpoint_chain else None,
            'predicted_negatives': None if self.predicted is None else sorted(self.predicted),
            'matches_prediction': self.matches,
            'spot_checked': self.spot_checked,
        }
        if artifact_version is not None:
            data['artifact_version'] = artifact_version
        if self.certificate is not None:
            data['certificate'] = self.certificate
        return data

    def meta(self):
        return {
            'started_at': _iso(self.started_at),
            'finished_at': _iso(self.finished_at),
            'wall_time_seconds': round(self.wall_time, 3),
        }


def _canonical(data):
    return json.dumps(data, sort_keys=True, separators=(',', ':')).encode('utf-8')


def _sha256_hex(payload):
    return hashlib.sha256(payload).hexdigest()


def _iso(timestamp):
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).isoformat()


def _sign(value):
    return _SIGN[(value > 0) - (value < 0)]


def initial_state(job):
    config_hash = job.config_hash()
    return SweepState(config_hash=config_hash, n=0,
                      running_hash=_sha256_hex(config_hash.encode('ascii')))


def predicted_negatives(d, mode, n_cap):
    """
    Negative indices the sweep should find, or None where nothing is claimed

    Returns:
        frozenset|None: {d+1, d+3, d+5} plus EXTRA_NEGATIVES for odd 7 <= d <= 61 under
        Delta, empty for even 6 <= d <= 60 under Delta and for 1 <= d <= 61 under DeltaMinus
    """
    if mode is SweepMode.DELTA_MINUS:
        return frozenset() if 1 <= d <= 61 else None
    if d % 2 == 1 and 7 <= d <= 61:
        return frozenset(n for n in (d + 1, d + 3, d + 5) + EXTRA_NEGATIVES.get(d, ()) if n <= n_cap)
    if d % 2 == 0 and 6 <= d <= 60:
        return frozenset()
    return None


def _scan(deltas, state, n_cap, checkpoint_every, on_checkpoint=None):
    # Segments are [j*every + 1, (j+1)*every]; each finished segment extends the chain
    n = state.n
    while n < n_cap:
        stop = min(n_cap, (n // checkpoint_every + 1) * checkpoint_every)
        signs = bytearray()
        for index in range(n + 1, stop + 1):
            value = deltas[index]
            signs += _sign(value)
            if value < 0:
                state.negatives.append((index, value))
        state.running_hash = _sha256_hex(bytes.fromhex(state.running_hash) + bytes(signs))
        state.chain.append(state.running_hash)
        state.n = n = stop
        if stop % checkpoint_every == 0 and on_checkpoint is not None:
            on_checkpoint(state)
    return state


def checkpoint_path(checkpoint_dir, job):
    return Path(checkpoint_dir) / f"sweep-d{job.d}-{job.mode.value}.ckpt.json"


def _state_payload(state):
    return {
        'format_version': CHECKPOINT_FORMAT_VERSION,
        'config_hash': state.config_hash,
        'n': state.n,
        'running_hash': state.running_hash,
        'negatives': [{'n': n, 'delta_decimal': str(value)} for n, value in state.negatives],
        'chain': list(state.chain),
    }


def checkpoint(state, path):
    """
    Atomically write the scan state as JSON with a payload hash

    Args:
        state (SweepState): State at a multiple of checkpoint_every
        path (str): Checkpoint file
    """
    payload = _state_payload(state)
    payload['payload_sha256'] = _sha256_hex(_canonical(payload))
    atomic_write_bytes(path, json.dumps(payload, indent=2, sort_keys=True).encode('utf-8'))
    logger.info(f"Checkpoint at n={state.n} written to {path}")


def resume(path, job=None):
    """
    Load a checkpoint, rejecting anything that does not verify

    Args:
        path (str): Checkpoint file
        job (SweepJob): When given, the checkpoint must belong to this job

    Returns:
        SweepState: State to continue scanning from

    Raises:
        CheckpointCorruptError: Unreadable, truncated or tampered file
        CheckpointVersionError: Written by another checkpoint format
        CheckpointHashError: Checkpoint belongs to a different job configuration
    """
    try:
        with open(path, 'rb') as handle:
            payload = json.loads(handle.read().decode('utf-8'))
        stored_digest = payload.pop('payload_sha256')
        version = payload['format_version']
    except (OSError, ValueError, KeyError, AttributeError, TypeError) as e:
        raise CheckpointCorruptError(f"checkpoint {path} is unreadable: {e}")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format {version} is not supported (expected {CHECKPOINT_FORMAT_VERSION})")
    if _sha256_hex(_canonical(payload)) != stored_digest:
        raise CheckpointCorruptError(f"checkpoint {path} fails its payload hash")
    try:
        state = SweepState(
            config_hash=payload['config_hash'],
            n=int(payload['n']),
            running_hash=payload['running_hash'],
            negatives=[(int(item['n']), int(item['delta_decimal'])) for item in payload['negatives']],
            chain=list(payload['chain']),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise CheckpointCorruptError(f"checkpoint {path} is missing fields: {e}")
    if job is not None and state.config_hash != job.config_hash():
        raise CheckpointHashError(f"checkpoint {path} was written for a different job configuration")
    return state


def _verify_prefix(state, job, deltas):
    """Recompute the chain up to state.n and compare it with the checkpoint."""
    if state.n > job.n_cap:
        raise CheckpointHashError(f"checkpoint is at n={state.n}, beyond n_cap={job.n_cap}")
    replay = _scan(deltas, initial_state(job), state.n, job.checkpoint_every)
    if replay.chain != state.chain or replay.running_hash != state.running_hash:
        raise CheckpointHashError("checkpoint content hash does not match the recomputed sweep")
    if replay.negatives != state.negatives:
        raise CheckpointHashError("checkpoint negatives do not match the recomputed sweep")


def _sweep_series(job, cache_dir, memory_budget):
    distinct = load_or_count(FamilyConfig(d=job.d, a=SWEEP_RESIDUE, kind=FamilyKind.DISTINCT),
                             job.n_cap, cache_dir, memory_budget)
    congruence = load_or_count(FamilyConfig(d=job.d, a=SWEEP_RESIDUE, minus=job.minus),
                               job.n_cap, cache_dir, memory_budget)
    return distinct, congruence


def spot_check(job, distinct, congruence, samples=DEFAULT_SPOT_CHECKS, cap=DEFAULT_SPOT_CHECK_CAP, seed=0):
    """
    Compare sweep counts against independent recursions at random indices

    Args:
        job (SweepJob): Sweep the series belong to
        distinct (CountSeries): q_d^(2) counts
        congruence (CountSeries): Q_d^(2) or Q_d^(2,-) counts
        samples (int): Number of indices drawn
        cap (int): Largest index drawn
        seed (int): Seed for the index sample

    Returns:
        int: Number of indices compared

    Raises:
        CertificationError: A count disagrees with its independent recomputation
    """
    limit = min(job.n_cap, cap)
    if samples <= 0 or limit < 1:
        return 0
    rng = random.Random(f"{seed}:{job.config_hash()}")
    indices = sorted(rng.sample(range(1, limit + 1), min(samples, limit)))
    top = indices[-1]
    by_parts = distinct_count_by_parts(job.d, SWEEP_RESIDUE, top)
    parts = allowed_parts(job.d, SWEEP_RESIDUE, job.minus, top).parts
    by_product = product_coefficients(parts, top)
    for n in indices:
        if distinct[n] != by_parts[n]:
            logger.error(f"{job.label()}: q({n}) = {distinct[n]} but the part-count recursion gives {by_parts[n]}")
            raise CertificationError(f"distinct count mismatch at n={n} for d={job.d}")
        if congruence[n] != by_product[n]:
            logger.error(f"{job.label()}: Q({n}) = {congruence[n]} but the product expansion gives {by_product[n]}")
            raise CertificationError(f"congruence count mismatch at n={n} for d={job.d}")
    return len(indices)


def run_sweep(job, cache_dir=None, checkpoint_dir=None, memory_budget=DEFAULT_MEMORY_BUDGET,
              spot_checks=DEFAULT_SPOT_CHECKS, spot_check_cap=DEFAULT_SPOT_CHECK_CAP, seed=0):
    """
    Compute both series to n_cap, subtract exactly and record every negative index

    Args:
        job (SweepJob): Sweep to run
        cache_dir (str): Binary series cache, or None
        checkpoint_dir (str): Where checkpoints go, or None for no checkpoint files
        memory_budget (int): Budget in bytes for the count series

    Returns:
        VerificationReport: Negatives, chain and prediction for the job

    Raises:
        CapacityError: n_cap does not fit the memory budget
        CheckpointError: job.resume_from does not verify
    """
    started = time.time()
    logger.info(f"Starting sweep {job.label()}")
    distinct, congruence = _sweep_series(job, cache_dir, memory_budget)
    deltas = delta_from_series(distinct, congruence)

    if job.resume_from:
        state = resume(job.resume_from, job)
        _verify_prefix(state, job, deltas)
        logger.info(f"Resumed {job.label()} from n={state.n}")
    else:
        state = initial_state(job)

    on_checkpoint = None
    if checkpoint_dir:
        path = checkpoint_path(checkpoint_dir, job)

        def on_checkpoint(current):
            checkpoint(current, path)

    _scan(deltas, state, job.n_cap, job.checkpoint_every, on_checkpoint)
    checked = spot_check(job, distinct, congruence, spot_checks, spot_check_cap, seed)

    report = VerificationReport(
        job=job,
        negatives=tuple(state.negatives),
        max_n_verified=state.n,
        checkpoint_chain=tuple(state.chain),
        predicted=predicted_negatives(job.d, job.mode, job.n_cap),
        spot_checked=checked,
        started_at=started,
        finished_at=time.time(),
    )
    if report.negatives:
        logger.warning(f"{job.label()}: negatives at {sorted(report.negative_indices)}")
    extra = report.negative_indices & frozenset(EXTRA_NEGATIVES.get(job.d, ()))
    if job.mode is SweepMode.DELTA and extra:
        logger.warning(f"{job.label()}: negatives {sorted(extra)} lie outside {{d+1, d+3, d+5}}")
    if not report.matches:
        logger.error(f"{job.label()}: negatives {sorted(report.negative_indices)} differ from "
                     f"the predicted {sorted(report.predicted or ())}")
    logger.info(f"Finished sweep {job.label()} in {report.wall_time:.1f}s")
    return report


def run_sweeps(jobs, worker_count=1, **options):
    """Run independent jobs, in a process pool when worker_count > 1"""
    runner = partial(run_sweep, **options)
    if worker_count <= 1 or len(jobs) <= 1:
        return [runner(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=worker_count) as pool:
        return list(pool.map(runner, jobs))


def exception_set(d, n_cap, memory_budget=DEFAULT_MEMORY_BUDGET):
    """
    Indices 1..n_cap with q_d^(2)(n) < Q_d^(2)(n)

    The set is returned as counted. A departure from {d+1, d+3, d+5} for odd
    7 <= d <= 61 is logged as a warning.
    """
    values = delta(d, SWEEP_RESIDUE, False, n_cap, memory_budget)
    negatives = frozenset(n for n in range(1, n_cap + 1) if values[n] < 0)
    if d % 2 == 1 and 7 <= d <= 61:
        pattern = frozenset(n for n in (d + 1, d + 3, d + 5) if n <= n_cap)
        if negatives != pattern:
            logger.warning(f"d={d}: exception set {sorted(negatives)} differs from {{d+1, d+3, d+5}} = "
                           f"{sorted(pattern)} up to n={n_cap}")
    return negatives


def write_report(report, json_path, csv_path=None, artifact_version=None):
    """
    Write the report JSON, an optional CSV of negatives and a .meta.json sidecar
    holding the timestamps, so the primary files are byte-stable across runs.
    """
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    with open(json_path, 'w') as handle:
        json.dump(report.to_json_dict(artifact_version), handle, indent=2, sort_keys=True)
        handle.write('\n')
    with open(json_path.with_suffix('.meta.json'), 'w') as handle:
        json.dump(report.meta(), handle, indent=2, sort_keys=True)
        handle.write('\n')
    if csv_path is not None:
        with open(csv_path, 'w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(['d', 'mode', 'n', 'delta'])
            for n, value in report.negatives:
                writer.writerow([report.job.d, report.job.mode.value, n, value])
    logger.info(f"Report for {report.job.label()} written to {json_path}")


@dataclass(frozen=True)
class IdentityResult:
    name: str
    holds: bool
    n_max: int
    first_failure: Optional[int] = None

    def as_dict(self):
        return {'name': self.name, 'holds': self.holds, 'n_max': self.n_max,
                'first_failure': self.first_failure}


def _first(indices):
    return next(iter(indices), None)


def _result(name, n_max, failures):
    first = _first(failures)
    if first is not None:
        logger.error(f"{name} fails at n={first}")
    return IdentityResult(name=name, holds=first is None, n_max=n_max, first_failure=first)


def check_euler(n_max):
    values = delta(1, 1, False, n_max)
    return _result('Euler: q_1^(1) = Q_1^(1)', n_max, (n for n in range(n_max + 1) if values[n] != 0))


def check_rogers_ramanujan(n_max):
    first = delta(2, 1, False, n_max)
    second = delta(2, 2, False, n_max)
    failures = (n for n in range(n_max + 1) if first[n] != 0 or second[n] != 0)
    return _result('Rogers-Ramanujan: q_2^(a) = Q_2^(a)', n_max, failures)


def check_schur(n_max):
    values = delta(3, 1, False, n_max)
    return _result('Schur: q_3^(1) >= Q_3^(1)', n_max, (n for n in range(n_max + 1) if values[n] < 0))


def check_andrews_dominance(d, n_max):
    """Q_d^(1)(n) >= Q_d^(2,-)(n)"""
    level_one = count_congruence(FamilyConfig(d=d, a=1), n_max)
    level_two = count_congruence(FamilyConfig(d=d, a=2, minus=True), n_max)
    failures = (n for n in range(n_max + 1) if level_one[n] < level_two[n])
    return _result(f"Q_{d}^(1) >= Q_{d}^(2,-)", n_max, failures)


def check_shift_inequality(d, a, n_max):
    """q_d^(a)(n) >= q_ceil(d/a)^(1)(ceil(n/a)) for n >= d + 2a"""
    shifted_d = -(-d // a)
    full = count_distinct(d, a, n_max)
    shifted = count_distinct(shifted_d, 1, -(-n_max // a))
    failures = (n for n in range(d + 2 * a, n_max + 1) if full[n] < shifted[-(-n // a)])
    return _result(f"q_{d}^({a})(n) >= q_{shifted_d}^(1)(ceil(n/{a}))", n_max, failures)


def check_halving(d, n_max):
    """
    Doubling parts maps parts ≡ ±1 mod d+3 onto parts ≡ ±2 mod 2d+6, so
    Q_d^(1)(m) = Q_{2d+3}^(2)(2m) and Q_{2d+3}^(2) vanishes at odd n.
    d=1 is paired with itself: Q_1^(1)(m) = Q_1^(2)(2m).
    """
    target = 1 if d == 1 else 2 * d + 3
    half = count_congruence(FamilyConfig(d=d, a=1), n_max // 2)
    doubled = count_congruence(FamilyConfig(d=target, a=2), n_max)
    failures = (n for n in range(n_max + 1)
                if doubled[n] != (half[n // 2] if n % 2 == 0 else 0))
    return _result(f"Q_{d}^(1)(n/2) = Q_{target}^(2)(n)", n_max, failures)


def check_odd_vanishing(n_max):
    values = count_congruence(FamilyConfig(d=1, a=2, minus=True), n_max)
    failures = (n for n in range(1, n_max + 1, 2) if values[n] != 0)
    return _result('Q_1^(2,-) vanishes at odd n', n_max, failures)


def check_level_two_pair(n_max):
    """Q_7^(2)(n) <= Q_3^(2,-)(n), the comparison the d=3 argument stalls on"""
    larger = count_congruence(FamilyConfig(d=3, a=2, minus=True), n_max)
    smaller = count_congruence(FamilyConfig(d=7, a=2), n_max)
    failures = (n for n in range(n_max + 1) if smaller[n] > larger[n])
    return _result('Q_7^(2) <= Q_3^(2,-)', n_max, failures)


def check_generating_functions(d, a, n_max=GF_CROSS_CHECK_N):
    """DP counts against product expansions, distinct counts against the part-count recursion"""
    failures = []
    for minus in (False, True):
        series = count_congruence(FamilyConfig(d=d, a=a, minus=minus), n_max)
        product = product_coefficients(allowed_parts(d, a, minus, max(n_max, 1)).parts, n_max)
        failures.extend(n for n in range(n_max + 1) if series[n] != product[n])
    distinct = count_distinct(d, a, n_max)
    by_parts = distinct_count_by_parts(d, a, n_max)
    failures.extend(n for n in range(n_max + 1) if distinct[n] != by_parts[n])
    return _result(f"generating functions d={d} a={a}", n_max, sorted(failures))


def check_oracle(d, a, minus, n_max, cap=ORACLE_CAP):
    """DP counts against exhaustive enumeration"""
    congruence = count_congruence(FamilyConfig(d=d, a=a, minus=minus), n_max)
    distinct = count_distinct(d, a, n_max)
    distinct_config = FamilyConfig(d=d, a=a, kind=FamilyKind.DISTINCT)
    congruence_config = FamilyConfig(d=d, a=a, minus=minus)
    failures = (n for n in range(n_max + 1)
                if congruence[n] != brute_force_count(n, congruence_config, cap)
                or distinct[n] != brute_force_count(n, distinct_config, cap))
    return _result(f"oracle d={d} a={a} minus={minus}", n_max, failures)


def run_identity_checks(n_max=2000, gf_n_max=GF_CROSS_CHECK_N, oracle_n_max=ORACLE_CROSS_CHECK_N,
                        oracle_cap=ORACLE_CAP):
    """All identity and dominance checks; the list is stable for reporting"""
    results = [
        check_euler(n_max),
        check_rogers_ramanujan(n_max),
        check_schur(n_max),
        check_odd_vanishing(n_max),
        check_level_two_pair(n_max),
        check_halving(1, n_max),
        check_halving(2, n_max),
        check_shift_inequality(1, 2, n_max),
        check_shift_inequality(3, 2, n_max),
    ]
    results.extend(check_andrews_dominance(d, n_max) for d in DOMINANCE_D)
    results.extend(check_generating_functions(d, a, gf_n_max) for d in (1, 4, 7) for a in (1, 2))
    results.extend(check_oracle(d, a, minus, oracle_n_max, oracle_cap)
                   for d in (1, 3, 4) for a in (1, 2) for minus in (False, True))
    failed = [result.name for result in results if not result.holds]
    logger.info(f"Identity checks: {len(results) - len(failed)}/{len(results)} hold")
    return results
