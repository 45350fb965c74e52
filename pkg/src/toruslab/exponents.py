"""Exact rational arithmetic for the resolvent and kernel exponents.

Every quantity here is a :class:`fractions.Fraction`; floats are rejected so
that strict inequalities between exponents are decided without tolerance.

Notation used in the function names:

* ``epsilon_bssy(n)``  -- the earlier admissible exponent, 2(n-1)/(n(n+1)) for
  odd n and 2(n-1)/(n^2+2n+2) for even n.
* ``beta_n(n)``        -- 1/3 + (n/3) / (21 n^2 - n - 24).
* ``omega(n, q)``      -- n / (2n(2^q - 1) + 2^(q+1)), the Weyl-sum saving.
* ``beta_nq(n, q)``    -- 1/3 + (n/3) (q-2) / (3(n^2-1) 2^q - qn - (3n-2)n).
"""

from __future__ import annotations

import numbers
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterator

from .errors import DomainError

__all__ = [
    "ExponentReport",
    "beta_n",
    "beta_nq",
    "constraint_exponent",
    "constraint_margin",
    "epsilon3_refined",
    "epsilon_bssy",
    "exponent_report",
    "exponent_table",
    "omega",
    "optimal_q",
    "positivity_margin",
]

DEFAULT_N_MAX = 12
DEFAULT_Q_MAX = 30


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _check_n(n, n_min: int) -> int:
    n = _as_int(n, "n")
    if n < n_min:
        raise DomainError(f"dimension n={n} below the admissible minimum {n_min}")
    return n


def _check_q(q) -> int:
    q = _as_int(q, "q")
    if q < 1:
        raise DomainError(f"derivative order q={q} must be >= 1")
    return q


def as_fraction(value) -> Fraction:
    """Convert an exact value (int, Fraction or ``"p/q"`` string) to Fraction."""
    if isinstance(value, float):
        raise TypeError("floating point values are not accepted in exponent arithmetic")
    if isinstance(value, (Fraction, numbers.Integral, str)):
        return Fraction(value)
    if isinstance(value, numbers.Rational):
        return Fraction(value.numerator, value.denominator)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def epsilon_bssy(n: int) -> Fraction:
    n = _check_n(n, 3)
    if n % 2:
        return Fraction(2 * (n - 1), n * (n + 1))
    return Fraction(2 * (n - 1), n * n + 2 * n + 2)


def epsilon3_refined() -> Fraction:
    """The number-theoretically improved exponent available for n = 3."""
    return Fraction(85, 252)


def omega(n: int, q: int) -> Fraction:
    n = _check_n(n, 2)
    q = _check_q(q)
    return Fraction(n, 2 * n * (2**q - 1) + 2 ** (q + 1))


def beta_n(n: int) -> Fraction:
    n = _check_n(n, 3)
    return Fraction(1, 3) + Fraction(n, 3) * Fraction(1, 21 * n * n - n - 24)


def beta_nq(n: int, q: int) -> Fraction:
    n = _check_n(n, 3)
    q = _check_q(q)
    denom = 3 * (n * n - 1) * 2**q - q * n - (3 * n - 2) * n
    if denom == 0:
        raise DomainError(f"beta_nq undefined at n={n}, q={q}: zero denominator")
    return Fraction(1, 3) + Fraction(n, 3) * Fraction(q - 2, denom)


def optimal_q(n: int, q_max: int = DEFAULT_Q_MAX) -> int:
    """Return the q in ``3..q_max`` maximising ``beta_nq(n, q)``.

    Comparison is exact; ties go to the smaller q.
    """
    n = _check_n(n, 3)
    q_max = _check_q(q_max)
    if q_max < 4:
        raise DomainError(f"q_max={q_max} must be >= 4")
    best_q, best = 3, beta_nq(n, 3)
    for q in range(4, q_max + 1):
        value = beta_nq(n, q)
        if value > best:
            best_q, best = q, value
    return best_q


def constraint_exponent(n: int, q: int) -> Fraction:
    """q - 1 - 2/n + 2^(1-q): the power of 1/rho that lambda must dominate."""
    n = _check_n(n, 2)
    q = _check_q(q)
    return q - 1 - Fraction(2, n) + Fraction(2, 2**q)


def constraint_margin(n: int, q: int, beta) -> Fraction:
    """1 - beta * (q - 1 - 2/n + 2^(1-q)).

    With rho = lambda^(-beta), the condition lambda >= rho^(-(q-1-2/n+2^(1-q)))
    holds for all large lambda (with room for a small epsilon) iff the margin
    is positive.
    """
    return 1 - as_fraction(beta) * constraint_exponent(n, q)


def positivity_margin(n: int, q: int) -> Fraction:
    """(n+1)/2 - (q+1) omega(n, q); positive for every n >= 2, q >= 1."""
    return Fraction(n + 1, 2) - (q + 1) * omega(n, q)


@dataclass(frozen=True)
class ExponentReport:
    n: int
    q: int
    epsilon_n: Fraction
    beta_n: Fraction
    omega_nq: Fraction
    beta_nq: Fraction
    constraint_margin: Fraction
    positivity_margin: Fraction

    FIELDS = (
        "n",
        "q",
        "epsilon_n",
        "beta_n",
        "omega_nq",
        "beta_nq",
        "constraint_margin",
        "positivity_margin",
    )

    def as_strings(self) -> dict[str, str]:
        """Field values with rationals rendered as ``"p/q"`` strings."""
        return {k: _fraction_str(v) for k, v in asdict(self).items()}


def _fraction_str(value) -> str:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return str(value)


def exponent_report(n: int, q: int) -> ExponentReport:
    """All exponents for ``(n, q)``; the constraint margin uses ``beta_nq(n, q)``."""
    b_nq = beta_nq(n, q)
    return ExponentReport(
        n=n,
        q=q,
        epsilon_n=epsilon_bssy(n),
        beta_n=beta_n(n),
        omega_nq=omega(n, q),
        beta_nq=b_nq,
        constraint_margin=constraint_margin(n, q, b_nq),
        positivity_margin=positivity_margin(n, q),
    )


def exponent_table(
    n_min: int = 3, n_max: int = DEFAULT_N_MAX, q_max: int = DEFAULT_Q_MAX
) -> Iterator[ExponentReport]:
    n_min = _check_n(n_min, 3)
    n_max = _check_n(n_max, n_min)
    q_max = _check_q(q_max)
    for n in range(n_min, n_max + 1):
        for q in range(1, q_max + 1):
            yield exponent_report(n, q)
