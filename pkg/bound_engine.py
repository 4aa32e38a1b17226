#!/usr/bin/env python3
"""
Bound Engine
Thresholds N1..N8 beyond which each error summand S_i stays below K_i
times the main term m_d(n), and N(d) = max N_i, past which the asymptotic
inequality chain certifies q_d^(2)(n) >= Q_d^(b)(n).
"""

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import mpmath as mp

from asymptotic_evaluator import certification_ratio, log_main_term_q, log_summands
from scalar_constants import (DEFAULT_TABLE, GUARD_BITS, BoundParams, ConstantBundle, beta_hypothesis_holds,
                              beta_hypothesis_threshold, build_bundle, residue_for, to_mpf)
from verifier_errors import DomainError, HypothesisViolation, MethodFailure, RootBracketError

logger = logging.getLogger(__name__)

D_RANGE = (4, 61)
CERTIFY_MULTIPLIERS = (1, 2, 10)
BRACKET_DOUBLINGS = 200
CSV_HEADER = ['d'] + [f"N{i}" for i in range(1, 9)] + ['NQ', 'Nq', 'Nd', 'conditional']

# N(d) for 4 <= d <= 61 as published with the default parameter table
PUBLISHED_THRESHOLDS = {
    4: 38133800, 5: 142685922, 6: 2270342, 7: 16962519, 8: 577857, 9: 4661719,
    10: 314268, 11: 1886829, 12: 405797, 13: 949272, 14: 507346, 15: 547612,
    16: 618979, 17: 635395, 18: 740779, 19: 755215, 20: 872843, 21: 884932,
    22: 1015278, 23: 1024661, 24: 1168195, 25: 1174519, 26: 1331711, 27: 1334627,
    28: 1505944, 29: 1505109, 30: 1691018, 31: 1686090, 32: 1887055, 33: 1877697,
    34: 2094182, 35: 2080058, 36: 2312526, 37: 2293302, 38: 2542214, 39: 2517558,
    40: 2783376, 41: 2752957, 42: 3036139, 43: 2999626, 44: 3300632, 45: 3257697,
    46: 3576985, 47: 3527299, 48: 3865326, 49: 3808560, 50: 5165784, 51: 4101610,
    52: 4478487, 53: 4406575, 54: 4803561, 55: 4723585, 56: 5141132, 57: 5052765,
    58: 5491330, 59: 5394245, 60: 5854276, 61: 5748150,
}


@dataclass(frozen=True)
class ThresholdReport:
    """
    Thresholds for one d

    Attributes:
        N (tuple): N1..N8, None where unavailable (N7 without f_err_max)
        conditional (bool): N(d) rests on a configured, not derived, f_err_max
        hypothesis_violations (tuple): Names of flagged bound hypotheses
        dominant (int): Index i of the N_i that attains N(d)
    """
    d: int
    b: int
    params: BoundParams
    N: tuple
    N_Q: int
    N_q: int
    N_d: int
    conditional: bool
    hypothesis_violations: tuple
    dominant: int
    published_N: Optional[int]
    bundle_fingerprint: str
    bundle: Optional[ConstantBundle] = field(default=None, repr=False, compare=False)

    def to_json_dict(self):
        return {
            'd': self.d,
            'b': self.b,
            'params': self.params.as_dict(),
            'N': list(self.N),
            'N_Q': self.N_Q,
            'N_q': self.N_q,
            'N_d': self.N_d,
            'conditional': self.conditional,
            'hypothesis_violations': list(self.hypothesis_violations),
            'dominant': f"N{self.dominant}",
            'published_N': self.published_N,
            'constant_bundle': self.bundle_fingerprint,
        }

    def csv_row(self):
        return ([self.d] + ['' if n is None else n for n in self.N]
                + [self.N_Q, self.N_q, self.N_d, 'true' if self.conditional else 'false'])


def certified_ceil(x, precision_bits):
    """Ceiling of x inflated by a relative 2^-(precision_bits - 8), at least 1"""
    x = mp.mpf(x)
    value = int(mp.ceil(x + abs(x) * mp.ldexp(1, -(precision_bits - 8))))
    return max(1, value)


def _work(bundle):
    return mp.workprec(bundle.precision_bits + GUARD_BITS)


def _shape_factor(bundle):
    return bundle.alpha ** (bundle.d - 3) * (bundle.d * bundle.alpha ** (bundle.d - 1) + 1)


def _gap(d, bundle):
    gap = 2 * mp.sqrt(bundle.A_d) - 2 * mp.pi / mp.sqrt(3 * (d + 3))
    if gap <= 0:
        logger.error(f"Growth gap 2 sqrt(A_d) - 2 pi / sqrt(3(d+3)) is {mp.nstr(gap, 10)} for d={d}")
        raise MethodFailure(f"q-side growth does not exceed the congruence side for d={d}")
    return gap


def _squared_log_threshold(log_ratio, gap, precision_bits):
    if log_ratio <= 0:
        return 1
    return certified_ceil((log_ratio / gap) ** 2, precision_bits)


def _last_crossing(g, peak, lower=1):
    """
    Smallest integer n >= peak with g(n) <= 0, for g increasing up to peak
    and decreasing after it; 1 when g never exceeds 0.
    """
    if g(mp.mpf(peak)) <= 0:
        return 1
    low = max(lower, int(mp.ceil(peak)))
    if g(mp.mpf(low)) <= 0:
        return low
    high = 2 * low
    for _ in range(BRACKET_DOUBLINGS):
        if g(mp.mpf(high)) <= 0:
            break
        low, high = high, 2 * high
    else:
        raise RootBracketError("no sign change while doubling", (low, high))
    while high - low > 1:
        mid = (low + high) // 2
        if g(mp.mpf(mid)) <= 0:
            high = mid
        else:
            low = mid
    return high


def threshold_N1(d, b, K1, bundle):
    """
    S1 <= K1 m_d(n) for n >= N1

    Raises:
        MethodFailure: 2 sqrt(A_d) <= 2 pi / sqrt(3(d+3))
    """
    with _work(bundle):
        gap = _gap(d, bundle)
        k = 3 * (d + 3)
        log_ratio = mp.log(mp.sqrt(mp.pi * _shape_factor(bundle))
                           / (2 * to_mpf(K1) * mp.sin(b * mp.pi / (d + 3))
                              * mp.power(k * bundle.A_d, mp.mpf(0.25))))
        return _squared_log_threshold(log_ratio, gap, bundle.precision_bits)


def threshold_N2(d, b, K2, bundle, params):
    """S2 <= K2 m_d(n) for n >= N2, using n^(-1+delta/2) <= n^(-3/4)"""
    with _work(bundle):
        gap = _gap(d, bundle)
        k = 3 * (d + 3)
        delta = to_mpf(params.delta)
        log_ratio = mp.log(2 * bundle.c7 * mp.pi ** (1 + delta / 2) * mp.sqrt(mp.pi * _shape_factor(bundle))
                           / (to_mpf(K2) * mp.power(bundle.A_d, mp.mpf(0.25)) * k ** 2
                              * mp.sin(b * mp.pi / (d + 3))))
        return _squared_log_threshold(log_ratio, gap, bundle.precision_bits)


def n3_log_ratio(d, K3, bundle):
    """g(n) = log C3 + (3/4) log n - gap sqrt(n); S3 <= K3 m_d(n) iff g(n) <= 0"""
    gap = _gap(d, bundle)
    log_c3 = mp.log(2 * mp.sqrt(mp.pi * _shape_factor(bundle))
                    / (to_mpf(K3) * mp.power(bundle.A_d, mp.mpf(0.25))))

    def g(n):
        return log_c3 + 3 * mp.log(n) / 4 - gap * mp.sqrt(n)
    return g, (3 / (2 * gap)) ** 2


def threshold_N3(d, b, K3, bundle):
    """
    N3 = ceil(sigma_1), the larger root of C3 n^(3/4) = exp(gap sqrt(n))

    Raises:
        RootBracketError: Doubling never found the final crossing
    """
    with _work(bundle):
        g, peak = n3_log_ratio(d, K3, bundle)
        return _last_crossing(g, peak)


def threshold_N4(d, K4, params, bundle):
    with _work(bundle):
        A = bundle.A_d
        epsilon = to_mpf(params.epsilon)
        log_ratio = -mp.log(to_mpf(K4) * mp.sqrt(2 * mp.pi) * A ** (epsilon / 2 + mp.mpf(1) / 4))
        if log_ratio <= 0:
            return 1
        base = A ** (-mp.mpf(1) / 2 - epsilon) * log_ratio
        return certified_ceil(base ** (2 / (1 - 2 * epsilon)), bundle.precision_bits)


def threshold_N5(d, K5, params, bundle):
    with _work(bundle):
        epsilon2 = to_mpf(params.epsilon2)
        base = bundle.A_d ** ((1 + 3 * epsilon2) / 2) / mp.log1p(to_mpf(K5))
        return certified_ceil(base ** (2 / (3 * epsilon2 - 1)), bundle.precision_bits)


def threshold_N6(d, K6, params, bundle):
    with _work(bundle):
        A = bundle.A_d
        epsilon = to_mpf(params.epsilon)
        base = ((A ** mp.mpf(1.25) * (1 + A ** epsilon) + A ** mp.mpf(0.25))
                / (mp.sqrt(mp.pi) * to_mpf(K6)))
        return certified_ceil(base ** (mp.mpf(4) / 3), bundle.precision_bits)


def threshold_N4_to_N6(d, params, bundle):
    return (threshold_N4(d, params.K(4), params, bundle),
            threshold_N5(d, params.K(5), params, bundle),
            threshold_N6(d, params.K(6), params, bundle))


def threshold_N7(d, K7, params, bundle):
    """
    S7 <= K7 m_d(n) for n >= N7

    Returns:
        int|None: None without a configured f_err_max, 1 when it is 0

    Raises:
        DomainError: K7^2 <= f_err_max^2 A_d
    """
    if params.f_err_max is None:
        return None
    if params.f_err_max == 0:
        return 1
    with _work(bundle):
        A = bundle.A_d
        epsilon = to_mpf(params.epsilon)
        f = to_mpf(params.f_err_max)
        room = to_mpf(K7) ** 2 - f ** 2 * A
        if room <= 0:
            raise DomainError(f"K7^2 <= f_err_max^2 A_d for d={d}; f_err_max must stay below K7/sqrt(A_d)")
        value = A ** (1 + 1 / epsilon) * f ** (2 / epsilon) / room ** (1 / epsilon)
        return certified_ceil(value, bundle.precision_bits)


def n8_log_ratio(d, K8, params, bundle):
    """
    g(n) = log C8 + log n - lambda n^(1/2 - eps) with lambda = -eta rho A_d^(eps - 1/2);
    S8 <= K8 m_d(n) iff g(n) <= 0
    """
    if bundle.eta >= 0:
        raise HypothesisViolation('eta < 0', f"eta = {mp.nstr(bundle.eta, 10)} for d={d}")
    A = bundle.A_d
    epsilon = to_mpf(params.epsilon)
    power = mp.mpf(1) / 2 - epsilon
    rate = -bundle.eta * bundle.rho * A ** (epsilon - mp.mpf(1) / 2)
    log_c8 = (mp.log(2 * mp.pi / (d * mp.sqrt(A))) / 2 + mp.log(1 + bundle.F2)
              + (3 - d) * mp.log(bundle.alpha) / 2 + bundle.F1
              + mp.log(2 * mp.sqrt(mp.pi * _shape_factor(bundle)))
              - mp.log(to_mpf(K8) * mp.power(A, mp.mpf(0.25))))

    def g(n):
        return log_c8 + mp.log(n) - rate * n ** power
    return g, (1 / (rate * power)) ** (1 / power)


def threshold_N8(d, K8, params, bundle):
    """
    N8 = ceil(sigma_1) for C8 n = exp(lambda n^(1/2 - eps))

    Raises:
        HypothesisViolation: eta is not negative
        RootBracketError: Doubling never found the final crossing
    """
    with _work(bundle):
        g, peak = n8_log_ratio(d, K8, params, bundle)
        return _last_crossing(g, peak)


def defining_inequality_holds(i, n, bundle, params):
    """S_i(n) <= K_i m_d(n), compared in log space"""
    logs = log_summands(bundle.d, bundle.b, n, bundle, params)
    if logs[i - 1] is None:
        return None
    with _work(bundle):
        return logs[i - 1] <= mp.log(to_mpf(params.K(i))) + log_main_term_q(bundle.d, n, bundle)


def compute_N(d, params=None, precision_bits=None, strict_hypotheses=False, bundle=None,
              table=DEFAULT_TABLE):
    """
    Assemble N1..N8, N_Q, N_q and N(d)

    Args:
        d (int): Gap in [4, 61]
        params (BoundParams): Defaults to the table row for the parity of d
        precision_bits (int): Working precision, defaults to params.precision_bits
        strict_hypotheses (bool): Raise instead of flagging a failed x < beta_q
        bundle (ConstantBundle): Reuse precomputed constants

    Returns:
        ThresholdReport: Thresholds and diagnostics
    """
    if not D_RANGE[0] <= d <= D_RANGE[1]:
        raise DomainError(f"thresholds are computed for {D_RANGE[0]} <= d <= {D_RANGE[1]}, got {d}")
    if params is None:
        params = table.params_for(d, precision_bits or 256)
    bits = precision_bits or params.precision_bits
    b = residue_for(d)
    if bundle is None:
        bundle = build_bundle(d, params, bits, b)

    violations = []
    if not beta_hypothesis_holds(bundle, 1):
        threshold = beta_hypothesis_threshold(bundle)
        detail = f"sqrt(A_d/n) < beta_q needs n > {mp.nstr(threshold, 6)}"
        if strict_hypotheses:
            logger.error(f"d={d}: {detail}")
            raise HypothesisViolation('x < beta_q', detail)
        logger.warning(f"d={d}: x < beta_q fails at n=1 ({detail}); recorded in the report")
        violations.append(f"x < beta_q ({detail})")

    N = (threshold_N1(d, b, params.K(1), bundle),
         threshold_N2(d, b, params.K(2), bundle, params),
         threshold_N3(d, b, params.K(3), bundle),
         *threshold_N4_to_N6(d, params, bundle),
         threshold_N7(d, params.K(7), params, bundle),
         threshold_N8(d, params.K(8), params, bundle))
    N_Q = max(N[:3])
    N_q = max(n for n in N[3:] if n is not None)
    N_d = max(N_Q, N_q)
    dominant = next(i for i, n in enumerate(N, start=1) if n == N_d)

    report = ThresholdReport(
        d=d, b=b, params=params, N=N, N_Q=N_Q, N_q=N_q, N_d=N_d,
        conditional=params.f_err_max != 0,
        hypothesis_violations=tuple(violations),
        dominant=dominant,
        published_N=PUBLISHED_THRESHOLDS.get(d),
        bundle_fingerprint=bundle.fingerprint(),
        bundle=bundle,
    )
    logger.info(f"d={d}: N={list(N)}, N(d)={N_d} from N{dominant}")
    comparison = compare_with_published(report)
    if comparison['published'] is not None and comparison['published'] != N_d:
        logger.warning(f"d={d}: N(d)={N_d} differs from the published {comparison['published']} "
                       f"(ratio {comparison['ratio']}; f_err_max={params.as_dict()['f_err_max']})")
    return report


def compare_with_published(report):
    """Diagnostic comparison of N(d) against the published value"""
    published = report.published_N
    ratio = None if not published else f"{report.N_d / published:.6f}"
    return {'d': report.d, 'computed': report.N_d, 'published': published, 'ratio': ratio,
            'dominant': f"N{report.dominant}", 'conditional': report.conditional}


def threshold_check(report, bundle=None, params=None, multipliers=CERTIFY_MULTIPLIERS):
    """
    Evaluate (S1 + ... + S8) / m_d(n) at multiples of N(d)

    Args:
        report (ThresholdReport): Thresholds for one d
        bundle (ConstantBundle): Defaults to the bundle the report was computed from
        params (BoundParams): Defaults to the report's parameters

    Returns:
        list: (n, ratio, holds) per multiplier
    """
    bundle = report.bundle if bundle is None else bundle
    params = report.params if params is None else params
    results = []
    for multiplier in multipliers:
        n = multiplier * report.N_d
        ratio = certification_ratio(report.d, n, bundle, params)
        results.append((n, ratio, ratio <= 1))
        if ratio > 1:
            logger.error(f"d={report.d}: certification fails at n={n}, ratio {mp.nstr(ratio, 10)}")
    return results


def certification_rows(results):
    return [{'n': n, 'ratio': mp.nstr(ratio, 12), 'holds': bool(holds)} for n, ratio, holds in results]


def _compute_for_d(job):
    d, table, bits, strict = job
    return compute_N(d, table.params_for(d, bits), bits, strict_hypotheses=strict)


def compute_all(ds, table=DEFAULT_TABLE, precision_bits=256, strict_hypotheses=False, worker_count=1):
    """Reports for several d, in a process pool when worker_count > 1"""
    jobs = [(d, table, precision_bits, strict_hypotheses) for d in ds]
    if worker_count <= 1:
        return [_compute_for_d(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=worker_count) as pool:
        return list(pool.map(_compute_for_d, jobs))


def write_threshold_reports(reports, json_path, csv_path=None, checks=None):
    """
    JSON array of reports and CSV d,N1,...,N8,NQ,Nq,Nd,conditional

    Args:
        checks (dict): Optional d -> threshold_check results, added under 'certification'
    """
    entries = []
    for report in reports:
        entry = report.to_json_dict()
        if checks is not None and report.d in checks:
            entry['certification'] = certification_rows(checks[report.d])
        entries.append(entry)
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    with open(json_path, 'w') as handle:
        json.dump(entries, handle, indent=2, sort_keys=True)
        handle.write('\n')
    if csv_path is not None:
        with open(csv_path, 'w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(CSV_HEADER)
            for report in reports:
                writer.writerow(report.csv_row())
    logger.info(f"Wrote {len(reports)} threshold reports to {json_path}")
