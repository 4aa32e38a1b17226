#!/usr/bin/env python3
"""
Asymptotic Evaluator
Main terms of q_d^(2)(n) and Q_d^(b)(n), the eight error summands S1..S8,
the combined congruence-side upper bound and the R_d(n) envelope.

Every quantity is built in log space and exponentiated with mpmath, whose
exponent range does not overflow for n up to 10^8 and beyond.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import mpmath as mp
from mpmath.libmp import from_int, prec_to_dps

from scalar_constants import GUARD_BITS, residue_for, round_to, to_mpf
from verifier_errors import DomainError

logger = logging.getLogger(__name__)

ENVELOPE_MIN_N = 6
CSV_HEADER = ['d', 'b', 'n', 'main_q', 'main_Q'] + [f"S{i}" for i in range(1, 9)] + ['R_bound']


def _work(bundle):
    return mp.workprec(bundle.precision_bits + GUARD_BITS)


def _shape_factor(bundle):
    alpha = bundle.alpha
    d = bundle.d
    return alpha ** (d - 3) * (d * alpha ** (d - 1) + 1)


def _modulus_terms(d, b):
    k = 3 * (d + 3)
    growth = 2 * mp.pi / mp.sqrt(k)
    return k, growth, mp.sin(b * mp.pi / (d + 3))


def _logsumexp(values):
    values = [v for v in values if v is not None and v != mp.ninf]
    if not values:
        return mp.ninf
    top = max(values)
    return top + mp.log(mp.fsum(mp.exp(v - top) for v in values))


def _log_main_q(bundle, n):
    return (mp.log(bundle.A_d) / 4 - mp.log(2 * mp.sqrt(mp.pi * _shape_factor(bundle)))
            - 3 * mp.log(n) / 4 + 2 * mp.sqrt(bundle.A_d * n))


def _log_main_Q(d, b, n):
    k, growth, sin_b = _modulus_terms(d, b)
    return -3 * mp.log(n) / 4 + growth * mp.sqrt(n) - mp.log(4 * mp.power(k, mp.mpf(0.25)) * sin_b)


def log_main_term_q(d, n, bundle):
    if d != bundle.d:
        raise DomainError(f"bundle is for d={bundle.d}, not d={d}")
    with _work(bundle):
        return _log_main_q(bundle, mp.mpf(n))


def main_term_q(d, n, bundle):
    """
    m_d(n) = A_d^(1/4) / (2 sqrt(pi alpha^(d-3) (d alpha^(d-1) + 1))) n^(-3/4) exp(2 sqrt(A_d n))

    Args:
        d (int): Gap, at least 4
        n (int|mpf): Argument, at least 1
        bundle (ConstantBundle): Constants for d

    Returns:
        mpf: Main term at the bundle precision
    """
    if n < 1:
        raise DomainError(f"main_term_q needs n >= 1, got {n}")
    with _work(bundle):
        value = mp.exp(log_main_term_q(d, n, bundle))
    return round_to(value, bundle.precision_bits)


def log_main_term_Q(d, n, b=None, precision_bits=256):
    with mp.workprec(precision_bits + GUARD_BITS):
        return _log_main_Q(d, residue_for(d) if b is None else b, mp.mpf(n))


def main_term_Q(d, n, b=None, precision_bits=256):
    """n^(-3/4) exp(2 pi sqrt(n / (3(d+3)))) / (4 (3(d+3))^(1/4) sin(b pi/(d+3)))"""
    if d < 4 or n < 1:
        raise DomainError(f"main_term_Q needs d >= 4 and n >= 1, got d={d}, n={n}")
    with mp.workprec(precision_bits + GUARD_BITS):
        value = mp.exp(log_main_term_Q(d, n, b, precision_bits))
    return round_to(value, precision_bits)


def _log_summands(d, b, n, bundle, params):
    pi = mp.pi
    A = bundle.A_d
    log_n = mp.log(n)
    sqrt_n = mp.sqrt(n)
    k, growth, sin_b = _modulus_terms(d, b)
    delta = to_mpf(params.delta)
    epsilon = to_mpf(params.epsilon)
    epsilon2 = to_mpf(params.epsilon2)
    log_gamma = mp.log(bundle.gamma)
    q_growth = 2 * mp.sqrt(A * n)
    spread = 1 + A ** epsilon * n ** (-epsilon)

    s1 = _log_main_Q(d, b, n)
    s2 = ((delta / 2 - 1) * log_n + mp.log(bundle.c7) + (1 + delta / 2) * mp.log(pi)
          - 2 * mp.log(k) - mp.log(sin_b) + growth * sqrt_n)
    s3 = growth * sqrt_n
    s4 = (log_gamma - mp.log(2 * A ** epsilon) / 2 + (epsilon / 2 - 1) * log_n
          + q_growth - n ** (mp.mpf(1) / 2 - epsilon) * A ** (mp.mpf(1) / 2 + epsilon))
    s5_exponent = A ** ((1 + 3 * epsilon2) / 2) * n ** ((1 - 3 * epsilon2) / 2)
    s5 = (log_gamma + q_growth + mp.log(mp.expm1(s5_exponent))
          + mp.log(pi) / 2 + mp.log(A) / 4 - 3 * log_n / 4)
    cut = A ** (epsilon2 / 2) * n ** (1 - epsilon2 / 2)
    s6 = _logsumexp([
        log_gamma + q_growth - cut / spread + 3 * mp.log(A) / 2 - 3 * log_n / 2 + mp.log(spread),
        log_gamma + mp.log(A) / 2 - 3 * log_n / 2 + q_growth - cut,
    ])
    if params.f_err_max is None:
        s7 = None
    elif params.f_err_max == 0:
        s7 = mp.ninf
    else:
        s7 = (log_gamma + q_growth + mp.log(to_mpf(params.f_err_max))
              + (mp.log(pi) + 3 * mp.log(A) / 2 - 3 * log_n / 2 + mp.log(spread)) / 2)
    s8 = (mp.log(2 * pi / (d * mp.sqrt(A))) / 2 + log_n / 4
          + bundle.eta * bundle.rho * A ** (epsilon - mp.mpf(1) / 2) * n ** (mp.mpf(1) / 2 - epsilon)
          + mp.log(1 + bundle.F2) + q_growth + (3 - d) * mp.log(bundle.alpha) / 2 + bundle.F1)
    return [s1, s2, s3, s4, s5, s6, s7, s8]


def log_summands(d, b, n, bundle, params):
    """Logs of S1..S8; S7 is None without f_err_max and -inf when it is 0"""
    if d != bundle.d:
        raise DomainError(f"bundle is for d={bundle.d}, not d={d}")
    with _work(bundle):
        return _log_summands(d, b, mp.mpf(n), bundle, params)


def summands_S(d, b, n, bundle, params):
    """
    The eight error summands at n

    S1..S3 bound Q_d^(b)(n); S4..S8 bound the signed error of q_d^(2)(n),
    with F1 and F2 in place of f1 and f2 in S8.

    Returns:
        list: Eight mpf values, S7 None when f_err_max is not configured
    """
    with _work(bundle):
        logs = _log_summands(d, b, mp.mpf(n), bundle, params)
        values = [None if v is None else mp.exp(v) for v in logs]
    return [round_to(v, bundle.precision_bits) for v in values]


def _log_R_bound(d, n, bundle, params):
    pi = mp.pi
    k, growth, sin_b = _modulus_terms(d, 2)
    delta = to_mpf(params.delta)
    epsilon1 = to_mpf(params.epsilon1)
    log_n = mp.log(n)
    sqrt_n = mp.sqrt(n)
    first = (-log_n / 4 + mp.log(pi) / 2 - 3 * mp.log(k) / 4 - mp.log(2 * sin_b) + growth * sqrt_n
             - n ** (-delta / 8) * 2 * pi ** (2 - delta / 4) * k ** (-2 + 3 * delta / 8))
    second = ((delta / 2 - 1) * log_n + mp.log(bundle.c7) + (1 + delta / 2) * mp.log(pi)
              - 2 * mp.log(k) - mp.log(sin_b) + growth * sqrt_n)
    third = growth * sqrt_n - bundle.c3 * n ** (epsilon1 / 2) * (pi ** 2 / k) ** (-3 * epsilon1 / 2)
    return _logsumexp([first, second, third])


def R_bound(d, n, bundle, params):
    """
    Envelope for |Q_d^(2)(n) - main_term_Q(d, n)|, even d only

    Raises:
        DomainError: Odd d, or a bundle without c3
    """
    if d % 2 or bundle.c3 is None:
        raise DomainError(f"R_bound needs even d with c3 computed, got d={d}")
    with _work(bundle):
        value = mp.exp(_log_R_bound(d, mp.mpf(n), bundle, params))
    return round_to(value, bundle.precision_bits)


@dataclass(frozen=True)
class EnvelopeEvaluation:
    d: int
    b: int
    n: int
    main_q: mp.mpf
    main_Q: mp.mpf
    S: tuple
    combined_Q_upper: mp.mpf
    R_d_bound: Optional[mp.mpf]
    r_d_bound: mp.mpf
    conditional: bool


def evaluate_envelope(d, n, bundle, params, b=None):
    """
    Evaluate main terms, summands and envelopes at one n

    Returns:
        EnvelopeEvaluation: r_d_bound leaves out S7 when it is unavailable;
            conditional unless f_err_max is exactly 0
    """
    b = bundle.b if b is None else b
    S = summands_S(d, b, n, bundle, params)
    with _work(bundle):
        combined = S[0] + S[1] + S[2]
        r_d = mp.fsum(s for s in S[3:] if s is not None)
    return EnvelopeEvaluation(
        d=d, b=b, n=int(n),
        main_q=main_term_q(d, n, bundle),
        main_Q=main_term_Q(d, n, b, bundle.precision_bits),
        S=tuple(S),
        combined_Q_upper=round_to(combined, bundle.precision_bits),
        R_d_bound=R_bound(d, n, bundle, params) if b == 2 and bundle.c3 is not None else None,
        r_d_bound=round_to(r_d, bundle.precision_bits),
        conditional=params.f_err_max != 0,
    )


def exact_to_mpf(value, rounding):
    """Exact integer to mpf rounded down ('f') or up ('c') at the working precision"""
    return mp.make_mpf(from_int(value, mp.mp.prec, rounding))


class EnvelopeCheck(NamedTuple):
    holds: bool
    lower: mp.mpf
    upper: mp.mpf
    exact_low: mp.mpf
    exact_high: mp.mpf


def _check(exact, lower, upper):
    exact_low = exact_to_mpf(exact, 'f')
    exact_high = exact_to_mpf(exact, 'c')
    holds = (lower is None or exact_low >= lower) and exact_high <= upper
    return EnvelopeCheck(holds, lower, upper, exact_low, exact_high)


def check_Q_envelope(d, n, exact, bundle, params):
    """main_term_Q - R_bound <= Q_d^(2)(n) <= main_term_Q + R_bound, rounded against the check"""
    if n < ENVELOPE_MIN_N:
        raise DomainError(f"envelope checks start at n={ENVELOPE_MIN_N}, got {n}")
    with _work(bundle):
        main = mp.exp(_log_main_Q(d, 2, mp.mpf(n)))
        R = mp.exp(_log_R_bound(d, mp.mpf(n), bundle, params))
        return _check(exact, main - R, main + R)


def check_Q_upper(d, b, n, exact, bundle, params):
    """Q_d^(b)(n) <= S1 + S2 + S3"""
    if n < ENVELOPE_MIN_N:
        raise DomainError(f"envelope checks start at n={ENVELOPE_MIN_N}, got {n}")
    with _work(bundle):
        logs = _log_summands(d, b, mp.mpf(n), bundle, params)
        return _check(exact, None, mp.exp(_logsumexp(logs[:3])))


def check_q_side(d, n, exact, bundle, params):
    """q_d^(2)(n) >= m_d(n) - (S4 + ... + S8); diagnostic, f_err_max is configured"""
    if n < ENVELOPE_MIN_N:
        raise DomainError(f"envelope checks start at n={ENVELOPE_MIN_N}, got {n}")
    if d != bundle.d:
        raise DomainError(f"bundle is for d={bundle.d}, not d={d}")
    with _work(bundle):
        logs = _log_summands(d, bundle.b, mp.mpf(n), bundle, params)
        lower = mp.exp(_log_main_q(bundle, mp.mpf(n))) - mp.exp(_logsumexp(logs[3:]))
        exact_high = exact_to_mpf(exact, 'c')
        return EnvelopeCheck(exact_to_mpf(exact, 'f') >= lower, lower, mp.inf,
                             exact_to_mpf(exact, 'f'), exact_high)


def certification_ratio(d, n, bundle, params, b=None):
    """(S1 + ... + S8) / m_d(n); the inequality chain needs this <= 1"""
    b = bundle.b if b is None else b
    with _work(bundle):
        logs = _log_summands(d, b, mp.mpf(n), bundle, params)
        ratio = mp.exp(_logsumexp(logs) - _log_main_q(bundle, mp.mpf(n)))
    return round_to(ratio, bundle.precision_bits)


def envelope_row(evaluation, precision_bits):
    dps = prec_to_dps(precision_bits)

    def text(value):
        return '' if value is None else mp.nstr(value, dps)
    return ([evaluation.d, evaluation.b, evaluation.n, text(evaluation.main_q), text(evaluation.main_Q)]
            + [text(s) for s in evaluation.S] + [text(evaluation.R_d_bound)])


def write_envelope_csv(evaluations, path, precision_bits):
    """CSV with header d,b,n,main_q,main_Q,S1..S8,R_bound"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for evaluation in evaluations:
            writer.writerow(envelope_row(evaluation, precision_bits))
    logger.info(f"Wrote {len(evaluations)} envelope rows to {path}")
