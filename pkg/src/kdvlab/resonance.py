"""Exact arithmetic for resonance polynomials on frequency hyperplanes.

P_n(t) is the sum of (2j+1)-th powers of n frequencies summing to zero.
On Gamma_3 it factors as x*y*z*Q_3 and on Gamma_4 as
(x+y)(x+z)(x+w)*Q_4, with |Q_n| comparable to max|entry|^(2j-2). This
module evaluates the polynomials and cofactors in exact integer/rational
arithmetic (floats are deliberately rejected: the identities are exact,
and k^(2j+1) overflows fixed-width types quickly) and verifies the
factorization and comparability claims by exhaustive lattice enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

__all__ = [
    "FreqTuple",
    "p_n",
    "q_n",
    "alpha_n",
    "prefactor",
    "ResonantTupleError",
    "FactorizationReport",
    "verify_factorization",
]


class ResonantTupleError(ValueError):
    """Raised when a cofactor is requested at a zero-prefactor tuple."""


def _as_exact(value) -> Fraction | int:
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    raise TypeError(
        f"exact rational required, got {type(value).__name__} (floats are not allowed here)"
    )


def _validated(entries: Sequence, j: int, allow_zero: bool = False):
    ent = tuple(_as_exact(e) for e in entries)
    if len(ent) not in (3, 4, 5):
        raise ValueError(f"tuple arity must be 3, 4 or 5, got {len(ent)}")
    if sum(ent) != 0:
        raise ValueError(f"entries {ent} do not lie on the zero-sum hyperplane")
    if not allow_zero and any(e == 0 for e in ent):
        raise ValueError(f"entries {ent} contain 0 (pass allow_zero for degenerate probes)")
    if j < 1:
        raise ValueError(f"dispersion order j must be >= 1, got {j}")
    return ent


@dataclass(frozen=True)
class FreqTuple:
    """n lattice frequencies on the zero-sum hyperplane Gamma_n."""

    entries: tuple
    j: int
    allow_zero: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "entries", _validated(self.entries, self.j, self.allow_zero)
        )

    @property
    def n(self) -> int:
        return len(self.entries)


def _unpack(t, j=None, allow_zero=False):
    if isinstance(t, FreqTuple):
        return t.entries, t.j
    if j is None:
        raise TypeError("j is required when passing raw entries")
    return _validated(t, j, allow_zero), j


def p_n(t, j: int | None = None, allow_zero: bool = False):
    """Sum of (2j+1)-th powers; exact integer for integer entries."""
    ent, j = _unpack(t, j, allow_zero)
    e = 2 * j + 1
    return sum(x**e for x in ent)


def prefactor(t, j: int | None = None, allow_zero: bool = False):
    """x*y*z on Gamma_3; (x+y)(x+z)(x+w) on Gamma_4."""
    ent, j = _unpack(t, j, allow_zero)
    if len(ent) == 3:
        x, y, z = ent
        return x * y * z
    if len(ent) == 4:
        x, y, z, w = ent
        return (x + y) * (x + z) * (x + w)
    raise ValueError(f"prefactor defined for arity 3 or 4, got {len(ent)}")


def q_n(t, j: int | None = None, allow_zero: bool = False) -> Fraction:
    """Exact cofactor Q_n = P_n / prefactor."""
    ent, j = _unpack(t, j, allow_zero)
    pref = prefactor(ent, j, allow_zero=True)
    if pref == 0:
        raise ResonantTupleError(f"tuple {ent} is resonant (zero prefactor)")
    return Fraction(p_n(ent, j, allow_zero=True)) / Fraction(pref)


def alpha_n(t, j: int | None = None, allow_zero: bool = False) -> complex:
    """alpha_n = i * P_n; purely imaginary by construction."""
    ent, j = _unpack(t, j, allow_zero)
    return 1j * float(p_n(ent, j, allow_zero=True))


@dataclass
class FactorizationReport:
    """Outcome of exhaustive factorization/comparability enumeration."""

    j: int
    K: int
    arity: int
    count: int
    min_ratio: Fraction | None
    max_ratio: Fraction | None
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and self.count > 0


def _gamma3_tuples(K: int) -> Iterable[tuple]:
    rng = [k for k in range(-K, K + 1) if k != 0]
    for x in rng:
        for y in rng:
            z = -x - y
            if z != 0 and -K <= z <= K:
                yield (x, y, z)


def _gamma4_tuples(K: int) -> Iterable[tuple]:
    rng = [k for k in range(-K, K + 1) if k != 0]
    for x in rng:
        for y in rng:
            for z in rng:
                w = -x - y - z
                if w != 0 and -K <= w <= K:
                    yield (x, y, z, w)


def verify_factorization(j: int, K: int, arity: int = 3) -> FactorizationReport:
    """Check P_n = prefactor * Q_n exactly on the full lattice.

    Enumerates all nonzero-entry, nonzero-prefactor tuples on Gamma_n with
    |entries| <= K, verifies the identity in exact arithmetic, and records
    min/max of |Q_n| / max|entry|^(2j-2). The comparability constants are
    reported, not asserted: the underlying claim hides its constants.
    """
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    if arity not in (3, 4):
        raise ValueError(f"arity must be 3 or 4, got {arity}")
    e = 2 * j + 1
    powers = {k: k**e for k in range(-3 * K, 3 * K + 1)}
    tuples = _gamma3_tuples(K) if arity == 3 else _gamma4_tuples(K)

    count = 0
    min_ratio = None
    max_ratio = None
    failures = []
    for t in tuples:
        p = sum(powers[x] for x in t)
        if arity == 3:
            pref = t[0] * t[1] * t[2]
        else:
            pref = (t[0] + t[1]) * (t[0] + t[2]) * (t[0] + t[3])
        if pref == 0:
            continue
        count += 1
        q, rem = divmod(p, pref)
        if rem != 0:
            q = Fraction(p, pref)
        if q * pref != p:
            failures.append((t, p, pref))
            continue
        ratio = abs(Fraction(q)) / Fraction(max(abs(x) for x in t)) ** (2 * j - 2)
        if min_ratio is None or ratio < min_ratio:
            min_ratio = ratio
        if max_ratio is None or ratio > max_ratio:
            max_ratio = ratio
    return FactorizationReport(
        j=j,
        K=K,
        arity=arity,
        count=count,
        min_ratio=min_ratio,
        max_ratio=max_ratio,
        failures=failures,
    )
