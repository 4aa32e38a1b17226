#!/usr/bin/env python3
"""
Scalar Constants
High-precision per-d constants for the asymptotic main terms and error
envelopes of d-distinct and congruence partition counts.

All reals in parameters are exact fractions; everything transcendental is
evaluated with mpmath at precision_bits plus guard bits and rounded once.
"""

import json
import hashlib
import logging
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import NamedTuple, Optional

import mpmath as mp
from mpmath.libmp import prec_to_dps

from verifier_errors import CertificationError, DomainError

logger = logging.getLogger(__name__)

GUARD_BITS = 64
DEFAULT_PRECISION_BITS = 256
HURWITZ_CHECK_TERMS = 2000
Y_MAX_HALVINGS = 8192
Y_MAX_RELATIVE_WIDTH_BITS = 32
# truncation error of the dilogarithm series shrinks with the precision itself
PRECISION_DEPENDENT = ('A_tail_bound',)


def parse_decimal(text):
    """
    Parse a decimal or rational string such as '0.224' or '1/800' exactly

    Args:
        text (str|int|Fraction): Value to parse

    Returns:
        Fraction: Exact value
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool) or isinstance(text, float):
        raise ValueError(f"expected a decimal string, got {type(text).__name__} {text!r}")
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"not a decimal or rational string: {text!r}") from e


def format_fraction(value):
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def to_mpf(value):
    """Exact fraction to an mpf at the current working precision"""
    value = Fraction(value)
    return mp.mpf(value.numerator) / value.denominator


def round_to(value, precision_bits):
    """Round to nearest at precision_bits; directed bounds are taken later by certified_ceil"""
    if value is None:
        return None
    with mp.workprec(precision_bits):
        return +value


def one_minus_cos(x):
    return 2 * mp.sin(x / 2) ** 2


class CertifiedValue(NamedTuple):
    value: mp.mpf
    tail_bound: mp.mpf


@dataclass(frozen=True)
class BoundParams:
    """
    Free parameters of the error bounds

    Attributes:
        epsilon, epsilon2, delta, xi, c, epsilon1 (Fraction): Bound parameters
        weights (tuple): K1..K8, K8 = 1 - (K1 + ... + K7)
        f_err_max (Fraction|None): Configured error constant, None when unknown
        precision_bits (int): Working precision of the constants
    """
    epsilon: Fraction
    epsilon2: Fraction
    delta: Fraction
    xi: Fraction
    c: Fraction
    epsilon1: Fraction
    weights: tuple
    f_err_max: Optional[Fraction] = None
    precision_bits: int = DEFAULT_PRECISION_BITS

    @classmethod
    def build(cls, epsilon, epsilon2, delta, xi, c, weights, f_err_max=None,
              epsilon1=None, precision_bits=DEFAULT_PRECISION_BITS):
        """Create validated params from seven weights; K8 closes the sum to 1."""
        head = tuple(parse_decimal(k) for k in weights)
        if len(head) != 7:
            raise DomainError(f"expected 7 weights K1..K7, got {len(head)}")
        delta = parse_decimal(delta)
        params = cls(
            epsilon=parse_decimal(epsilon),
            epsilon2=parse_decimal(epsilon2),
            delta=delta,
            xi=parse_decimal(xi),
            c=parse_decimal(c),
            epsilon1=delta / 4 if epsilon1 is None else parse_decimal(epsilon1),
            weights=head + (1 - sum(head),),
            f_err_max=None if f_err_max is None else parse_decimal(f_err_max),
            precision_bits=int(precision_bits),
        )
        params.validate()
        return params

    def K(self, i):
        return self.weights[i - 1]

    def validate(self):
        checks = [
            (0 < self.epsilon < Fraction(1, 2), '0 < epsilon < 1/2'),
            (self.epsilon2 > Fraction(1, 3), 'epsilon2 > 1/3'),
            (self.epsilon2 > self.epsilon, 'epsilon2 > epsilon'),
            (0 < self.delta < Fraction(1, 2), '0 < delta < 1/2'),
            (0 < self.xi < 1, '0 < xi < 1'),
            (Fraction(3, 8) < self.c < Fraction(1, 2), '3/8 < c < 1/2'),
            (0 < self.epsilon1 < self.delta / 2, '0 < epsilon1 < delta/2'),
            (len(self.weights) == 8, 'eight weights K1..K8'),
            (all(k > 0 for k in self.weights), 'every weight K_i > 0'),
            (sum(self.weights) == 1, 'K1 + ... + K8 = 1'),
            (self.f_err_max is None or self.f_err_max >= 0, 'f_err_max >= 0'),
            (self.precision_bits >= 53, 'precision_bits >= 53'),
        ]
        for ok, constraint in checks:
            if not ok:
                raise DomainError(f"parameter constraint violated: {constraint}")

    def as_dict(self):
        return {
            'epsilon': format_fraction(self.epsilon),
            'epsilon2': format_fraction(self.epsilon2),
            'delta': format_fraction(self.delta),
            'xi': format_fraction(self.xi),
            'c': format_fraction(self.c),
            'epsilon1': format_fraction(self.epsilon1),
            'weights': [format_fraction(k) for k in self.weights],
            'f_err_max': None if self.f_err_max is None else format_fraction(self.f_err_max),
            'precision_bits': self.precision_bits,
        }


@dataclass(frozen=True)
class ParameterTable:
    """Parameter choices keyed by the parity of d."""
    c: Fraction
    epsilon: Fraction
    epsilon2: Fraction
    xi: Fraction
    delta_even: Fraction
    delta_odd: Fraction
    weights_even: tuple
    weights_odd: tuple
    f_err_max: Optional[Fraction] = Fraction(1, 10000)
    epsilon1: Optional[Fraction] = None

    def params_for(self, d, precision_bits=DEFAULT_PRECISION_BITS):
        even = d % 2 == 0
        return BoundParams.build(
            epsilon=self.epsilon,
            epsilon2=self.epsilon2,
            delta=self.delta_even if even else self.delta_odd,
            xi=self.xi,
            c=self.c,
            weights=self.weights_even if even else self.weights_odd,
            f_err_max=self.f_err_max,
            epsilon1=self.epsilon1,
            precision_bits=precision_bits,
        )

    def as_dict(self):
        def text(value):
            return None if value is None else format_fraction(value)
        return {
            'c': text(self.c),
            'epsilon': text(self.epsilon),
            'epsilon2': text(self.epsilon2),
            'xi': text(self.xi),
            'delta': {'even': text(self.delta_even), 'odd': text(self.delta_odd)},
            'epsilon1': text(self.epsilon1),
            'weights': {'even': [text(k) for k in self.weights_even],
                        'odd': [text(k) for k in self.weights_odd]},
            'f_err_max': text(self.f_err_max),
        }

    def fingerprint(self):
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


DEFAULT_TABLE = ParameterTable(
    c=Fraction('0.37501'),
    epsilon=Fraction('0.11'),
    epsilon2=Fraction(1),
    xi=Fraction('0.224'),
    delta_even=Fraction(1, 3),
    delta_odd=Fraction(1, 80),
    weights_even=tuple(Fraction(k) for k in ('1/800', '1/800', '1/2', '1/800',
                                             '1/800', '1/800', '1/800')),
    weights_odd=tuple(Fraction(k) for k in ('1/800', '1/8', '1/8', '1/800',
                                            '1/800', '1/800', '1/800')),
)


@dataclass(frozen=True)
class ConstantBundle:
    """
    Per-d constants at a given precision. Fields that only exist for even d
    (c2, y_max, c4, c5, c3) are None on the odd-d path.
    """
    d: int
    b: int
    precision_bits: int
    alpha: mp.mpf
    A_d: mp.mpf
    A_tail_bound: mp.mpf
    rho: mp.mpf
    gamma: mp.mpf
    beta_q: mp.mpf
    eta: mp.mpf
    F1: mp.mpf
    F2: mp.mpf
    zeta_3_2_2: mp.mpf
    beta_Q: mp.mpf
    c10: mp.mpf
    phi3_max: mp.mpf
    c6: mp.mpf
    c7: mp.mpf
    log_two_sin: mp.mpf
    D_prime_zero: mp.mpf
    c2: Optional[mp.mpf] = None
    y_max: Optional[mp.mpf] = None
    c4: Optional[mp.mpf] = None
    c5: Optional[mp.mpf] = None
    c3: Optional[mp.mpf] = None

    def constant_names(self):
        return [f.name for f in fields(self) if f.name not in ('d', 'b', 'precision_bits')]

    def to_json_dict(self):
        dps = prec_to_dps(self.precision_bits)
        constants = {}
        for name in self.constant_names():
            value = getattr(self, name)
            constants[name] = None if value is None else mp.nstr(value, dps)
        return {'d': self.d, 'b': self.b, 'precision_bits': self.precision_bits,
                'constants': constants}

    def fingerprint(self):
        canonical = json.dumps(self.to_json_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _solve_alpha(d, precision_bits):
    lo, hi = mp.mpf(0), mp.mpf(1)
    width = mp.ldexp(1, -(precision_bits + 2))
    while hi - lo > width:
        mid = (lo + hi) / 2
        residual = mid ** d + mid - 1
        if residual == 0:
            return mid
        if residual < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def solve_alpha(d, precision_bits=DEFAULT_PRECISION_BITS):
    """
    Root of x^d + x - 1 on (0, 1) by bisection

    The polynomial is -1 at 0 and 1 at 1, so the bracket certifies the root.

    Args:
        d (int): Degree, at least 1
        precision_bits (int): Target precision

    Returns:
        mpf: alpha
    """
    if d < 1:
        raise DomainError(f"solve_alpha needs d >= 1, got {d}")
    with mp.workprec(precision_bits + GUARD_BITS):
        alpha = _solve_alpha(d, precision_bits)
    return round_to(alpha, precision_bits)


def _compute_A(d, alpha, precision_bits):
    x = alpha ** d
    target = mp.ldexp(1, -precision_bits)
    total = mp.mpf(0)
    power = mp.mpf(1)
    r = 0
    while True:
        r += 1
        power *= x
        total += power / r ** 2
        tail = power * x / ((r + 1) ** 2 * (1 - x))
        if tail < target:
            break
    return CertifiedValue(d * mp.log(alpha) ** 2 / 2 + total, tail)


def compute_A(d, alpha, precision_bits=DEFAULT_PRECISION_BITS):
    """
    A_d = (d/2) log^2(alpha) + Li_2(alpha^d)

    The dilogarithm series stops once the geometric tail bound
    x^(R+1) / ((R+1)^2 (1-x)) drops below 2^-precision_bits.

    Returns:
        CertifiedValue: A_d and the tail bound of the truncated series
    """
    with mp.workprec(precision_bits + GUARD_BITS):
        value, tail = _compute_A(d, mp.mpf(alpha), precision_bits)
    return CertifiedValue(round_to(value, precision_bits), round_to(tail, precision_bits))


class HurwitzBracket(NamedTuple):
    partial_sum: mp.mpf
    lower: mp.mpf
    upper: mp.mpf


def hurwitz_partial_sum(terms):
    """
    Bracket for zeta(3/2, 2) from its first `terms` summands.
    The integral test puts the tail between 2/sqrt(N+2) and 2/sqrt(N+1).
    """
    partial = mp.fsum((n + 2) ** mp.mpf(-1.5) for n in range(terms))
    return HurwitzBracket(partial,
                          partial + 2 / mp.sqrt(terms + 2),
                          partial + 2 / mp.sqrt(terms + 1))


def _hurwitz_zeta_3_2_at_2(check_terms):
    value = mp.zeta(mp.mpf(3) / 2, 2)
    bracket = hurwitz_partial_sum(check_terms)
    if not bracket.lower <= value <= bracket.upper:
        raise CertificationError(f"zeta(3/2, 2) = {mp.nstr(value, 20)} outside the integral-test "
                                 f"bracket [{mp.nstr(bracket.lower, 20)}, {mp.nstr(bracket.upper, 20)}]")
    return value


def hurwitz_zeta_3_2_at_2(precision_bits=DEFAULT_PRECISION_BITS, check_terms=HURWITZ_CHECK_TERMS):
    """zeta(3/2, 2) = zeta(3/2) - 1, checked against the partial-sum bracket"""
    with mp.workprec(precision_bits + GUARD_BITS):
        value = _hurwitz_zeta_3_2_at_2(check_terms)
    return round_to(value, precision_bits)


def dirichlet_series(s, d, a):
    """D(s) = (d+3)^-s (zeta(s, a/(d+3)) + zeta(s, (d+3-a)/(d+3)))"""
    modulus = d + 3
    s = mp.mpf(s)
    x1 = mp.mpf(a) / modulus
    x2 = mp.mpf(modulus - a) / modulus
    return mp.power(modulus, -s) * (mp.zeta(s, x1) + mp.zeta(s, x2))


def dirichlet_derivative_at_zero(d, a):
    """
    D'(0) from the Hurwitz zeta derivatives; equals log(1/(2 sin(a pi/(d+3)))).
    """
    modulus = d + 3
    x1 = mp.mpf(a) / modulus
    x2 = mp.mpf(modulus - a) / modulus
    at_zero = mp.zeta(0, x1) + mp.zeta(0, x2)
    return mp.zeta(0, x1, 1) + mp.zeta(0, x2, 1) - mp.log(modulus) * at_zero


def f1(x, rho, epsilon, zeta_3_2_2):
    epsilon = to_mpf(epsilon)
    return ((1 + x ** (2 * epsilon)) ** mp.mpf(0.25) / mp.sqrt(2) * mp.pi ** mp.mpf(-1.5)
            * zeta_3_2_2 * (rho / (1 - rho)) / (mp.pi / 2 - mp.atan(x ** epsilon)))


def f2(x, d, rho, epsilon, xi):
    epsilon = to_mpf(epsilon)
    xi = to_mpf(xi)
    x = mp.mpf(x)
    spread = d * x * (1 + x ** (2 * epsilon))
    bracket = (mp.expm1(d * x * mp.sqrt(1 + x ** (2 * epsilon)) / 8)
               + 2 * mp.exp(-4 * mp.pi ** 2 * (1 - xi) / spread)
               / -mp.expm1(-2 * mp.pi ** 2 * (1 - xi) / spread))
    tail = 2 * mp.exp(2 * mp.pi * (abs(rho) - mp.pi) / spread
                      - 2 * mp.log(rho) / d * x ** (epsilon - 1)
                      + d * abs(x) / 8)
    return mp.exp(d * abs(x) / 8) * bracket + tail


def eta(beta, epsilon):
    """
    Decay coefficient of the I_2 envelope. Negative for beta > 0; written
    with expm1 and 2 sin^2 so tiny beta does not cancel.
    """
    epsilon = to_mpf(epsilon)
    first = -1 / mp.expm1(beta)
    radicand = mp.expm1(-beta) ** 2 + 4 * mp.exp(-beta) * mp.sin(beta ** (1 + epsilon) / 2) ** 2
    return mp.exp(-3 * beta) * beta ** (1 - 2 * epsilon) * (first - 1 / mp.sqrt(radicand))


class QSideConstants(NamedTuple):
    rho: mp.mpf
    gamma: mp.mpf
    beta_q: mp.mpf
    eta: mp.mpf
    F1: mp.mpf
    F2: mp.mpf
    zeta_3_2_2: mp.mpf


def _q_side(d, alpha, A, params):
    epsilon = to_mpf(params.epsilon)
    xi = to_mpf(params.xi)
    rho = 1 - alpha
    gamma = 1 / (2 * mp.pi * mp.sqrt(alpha ** (d - 3) * (d * alpha ** (d - 1) + 1)))
    beta_q = min(-mp.pi * xi / mp.log(rho),
                 2 * alpha ** (2 - d) / (mp.pi * d),
                 mp.mpf(1) / (2 * d) + rho * (mp.mpf(1) / 2 - mp.pi ** 2 / 24)) ** (1 / epsilon)
    zeta_3_2_2 = _hurwitz_zeta_3_2_at_2(HURWITZ_CHECK_TERMS)
    x = mp.sqrt(A)
    return QSideConstants(
        rho=rho,
        gamma=gamma,
        beta_q=beta_q,
        eta=eta(beta_q, params.epsilon),
        F1=f1(x, rho, params.epsilon, zeta_3_2_2),
        F2=f2(x, d, rho, params.epsilon, params.xi),
        zeta_3_2_2=zeta_3_2_2,
    )


def q_side_constants(d, params, precision_bits=None):
    """
    rho, gamma, beta_q, eta, F1 and F2 for the d-distinct side

    Args:
        d (int): Gap, at least 4
        params (BoundParams): Bound parameters
        precision_bits (int): Defaults to params.precision_bits

    Returns:
        QSideConstants: Rounded to precision_bits
    """
    if d < 4:
        raise DomainError(f"q-side constants need d >= 4, got {d}")
    bits = precision_bits or params.precision_bits
    with mp.workprec(bits + GUARD_BITS):
        alpha = _solve_alpha(d, bits)
        A = _compute_A(d, alpha, bits).value
        constants = _q_side(d, alpha, A, params)
    return QSideConstants(*(round_to(value, bits) for value in constants))


def _c2_candidates(d):
    pi = mp.pi
    k = d + 3
    denominator = mp.expm1(k * pi) * (mp.exp(k * pi) + 1) ** 2
    bound1 = (2 * pi * one_minus_cos(2 * pi / (d + 5))
              * (mp.exp((2 * d + 4) * pi) + mp.exp((d + 5) * pi)) / denominator)
    bound2 = (pi * one_minus_cos(2 * pi / (d + 5))
              * (mp.exp((3 * d + 7) * pi) + mp.exp(2 * pi)
                 - mp.exp((2 * d + 4) * pi) - mp.exp((d + 5) * pi)) / denominator)
    bound3 = (pi * one_minus_cos((k - pi) / k ** 2) * 2 * k * (d + 1)
              / (mp.expm1(pi * k) * (8 * pi ** 2 + k ** 2)))
    half = mp.exp(mp.mpf(k) / 2)
    bound4 = 8 * pi / (mp.expm1(k * pi) * ((half - 1) ** 2 + 4 * half))
    return (bound1, bound2, bound3, bound4)


def c2_candidates(d, precision_bits=DEFAULT_PRECISION_BITS):
    """The four explicit lower bounds whose minimum is c2 (even d only)"""
    if d % 2:
        raise DomainError(f"c2 is only defined for even d, got d={d}")
    with mp.workprec(precision_bits + GUARD_BITS):
        bounds = _c2_candidates(d)
    return tuple(round_to(value, precision_bits) for value in bounds)


def compute_c2(d, precision_bits=DEFAULT_PRECISION_BITS):
    return min(c2_candidates(d, precision_bits))


class QBoundConstants(NamedTuple):
    beta_Q: mp.mpf
    c10: mp.mpf
    phi3_max: mp.mpf
    c6: mp.mpf
    c7: mp.mpf
    log_two_sin: mp.mpf
    c2: Optional[mp.mpf]
    y_max: Optional[mp.mpf]
    c4: Optional[mp.mpf]
    c5: Optional[mp.mpf]
    c3: Optional[mp.mpf]


def _find_y_max(c4, c5, y_upper):
    def admissible(y):
        return c4(y) > 0 and c5(y) > 0

    if admissible(y_upper):
        return y_upper
    good, bad = y_upper, y_upper
    for _ in range(Y_MAX_HALVINGS):
        good = good / 2
        if admissible(good):
            break
        bad = good
    else:
        raise CertificationError(f"no y_max with c4 > 0 and c5 > 0 after {Y_MAX_HALVINGS} halvings")
    relative_width = mp.ldexp(1, -Y_MAX_RELATIVE_WIDTH_BITS)
    while (bad - good) / good > relative_width:
        mid = (good + bad) / 2
        if admissible(mid):
            good = mid
        else:
            bad = mid
    return good


def _Q_side(d, b, params):
    pi = mp.pi
    k = d + 3
    delta = to_mpf(params.delta)
    xi = to_mpf(params.xi)
    epsilon1 = to_mpf(params.epsilon1)

    beta_Q = mp.mpf(3) / 2 - delta / 4
    c10 = 2 * pi * (pi ** 2 / (3 * k)) ** (beta_Q - 1)
    phi3_max = (2 ** ((22 + 3 * delta) / 8) * pi ** ((22 - 3 * delta) / 4)
                / (3 * mp.power(k, (10 - 3 * delta) / 8))
                + xi * (pi ** 2 / (2 * k)) ** mp.mpf(0.25))
    c6 = mp.expm1(phi3_max) / phi3_max
    c7 = (c6 * c10 ** 3
          + xi * c6 * pi ** ((4 - 3 * delta) / 4)
          / (2 ** (3 * delta / 8) * 3 ** ((2 - 3 * delta) / 4) * mp.power(k, (4 - 3 * delta) / 8)))
    log_two_sin = mp.log(2 * mp.sin(b * pi / k))

    if d % 2:
        return QBoundConstants(beta_Q, c10, phi3_max, c6, c7, log_two_sin, None, None, None, None, None)

    c2 = min(_c2_candidates(d))

    def c4(y):
        return 2 * pi ** 4 / (3 * k) - log_two_sin * y ** (delta / 2) - xi * y ** ((1 + delta) / 2)

    def c5(y):
        return c2 + y * log_two_sin - xi * y ** mp.mpf(1.5)

    y_upper = (1 / (2 * pi)) ** (1 / (beta_Q - 1))
    y_max = _find_y_max(c4, c5, y_upper)
    c4_value = c4(y_max)
    c5_value = c5(y_max)
    c3 = min(c4_value * y_max ** (epsilon1 - delta / 2), c5_value * y_max ** (epsilon1 - 1))
    return QBoundConstants(beta_Q, c10, phi3_max, c6, c7, log_two_sin, c2, y_max, c4_value, c5_value, c3)


def Q_side_constants(d, params, precision_bits=None, b=None):
    """
    Constants of the congruence-side envelope

    Args:
        d (int): Family index, at least 4
        params (BoundParams): delta, xi and epsilon1 are used
        precision_bits (int): Defaults to params.precision_bits
        b (int): Residue, 2 for even d and 1 for odd d by default

    Returns:
        QBoundConstants: c2, y_max, c4, c5 and c3 are None for odd d

    Raises:
        CertificationError: No y_max keeps c4 and c5 positive
    """
    if d < 4:
        raise DomainError(f"congruence-side constants need d >= 4, got {d}")
    bits = precision_bits or params.precision_bits
    b = residue_for(d) if b is None else b
    with mp.workprec(bits + GUARD_BITS):
        constants = _Q_side(d, b, params)
    return QBoundConstants(*(round_to(value, bits) for value in constants))


def residue_for(d):
    return 2 if d % 2 == 0 else 1


def build_bundle(d, params, precision_bits=None, b=None):
    """
    Evaluate every constant for d in one working-precision pass

    Args:
        d (int): Gap / family index, at least 4
        params (BoundParams): Bound parameters
        precision_bits (int): Defaults to params.precision_bits
        b (int): Residue of the congruence side; parity default

    Returns:
        ConstantBundle: Values rounded to precision_bits
    """
    if d < 4:
        raise DomainError(f"constants are defined for d >= 4, got {d}")
    bits = precision_bits or params.precision_bits
    b = residue_for(d) if b is None else b
    with mp.workprec(bits + GUARD_BITS):
        alpha = _solve_alpha(d, bits)
        A = _compute_A(d, alpha, bits)
        q_side = _q_side(d, alpha, A.value, params)
        Q_side = _Q_side(d, b, params)
        D_prime_zero = dirichlet_derivative_at_zero(d, b)
        values = dict(alpha=alpha, A_d=A.value, A_tail_bound=A.tail_bound, D_prime_zero=D_prime_zero)
        values.update(q_side._asdict())
        values.update(Q_side._asdict())
    bundle = ConstantBundle(d=d, b=b, precision_bits=bits,
                            **{name: round_to(value, bits) for name, value in values.items()})
    logger.info(f"Constants for d={d}, b={b} at {bits} bits: alpha={mp.nstr(bundle.alpha, 15)}, "
                f"A_d={mp.nstr(bundle.A_d, 15)}")
    return bundle


def beta_hypothesis_threshold(bundle):
    """Smallest real n with sqrt(A_d/n) < beta_q, that is A_d / beta_q^2"""
    with mp.workprec(bundle.precision_bits + GUARD_BITS):
        return bundle.A_d / bundle.beta_q ** 2


def beta_hypothesis_holds(bundle, n):
    with mp.workprec(bundle.precision_bits + GUARD_BITS):
        return mp.sqrt(bundle.A_d / n) < bundle.beta_q


def agreement_bits(coarse, fine, cap):
    """Bits to which two evaluations agree, capped for exact matches"""
    if coarse is None or fine is None:
        return cap if coarse is None and fine is None else 0
    with mp.workprec(2 * cap + GUARD_BITS):
        difference = abs(mp.mpf(coarse) - mp.mpf(fine))
        if difference == 0:
            return cap
        scale = abs(mp.mpf(fine))
        if scale == 0:
            return 0
        return min(cap, int(mp.floor(-mp.log(difference / scale, 2))))


def precision_stability(d, params, precision_bits=None):
    """
    Compare every constant at precision_bits and at twice that

    Returns:
        dict: constant name -> agreement in bits
    """
    bits = precision_bits or params.precision_bits
    coarse = build_bundle(d, params, bits)
    fine = build_bundle(d, params, 2 * bits)
    return {name: agreement_bits(getattr(coarse, name), getattr(fine, name), 2 * bits)
            for name in coarse.constant_names() if name not in PRECISION_DEPENDENT}
