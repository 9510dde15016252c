"""Exact multivariate polynomials in (h, hp, c).

Coefficients are Fractions when the construction data are rational, so
evaluation at rational points is exact; float coefficients degrade
gracefully to float arithmetic.  Monomials are kept in a dict keyed by the
exponent triple and stored in canonical sorted order for printing and
comparison.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

VARS = ("h", "hp", "c")


def _coef(x):
    if isinstance(x, Rational):
        return Fraction(x)
    return float(x)


class MultiPoly:
    """Polynomial in (h, hp, c) with exact rational (or float) coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for key, val in terms.items():
                if val != 0:
                    self.terms[tuple(key)] = val

    # -- constructors ------------------------------------------------------

    @classmethod
    def const(cls, v) -> "MultiPoly":
        v = _coef(v)
        return cls({(0, 0, 0): v}) if v != 0 else cls()

    @classmethod
    def var(cls, name: str) -> "MultiPoly":
        key = [0, 0, 0]
        key[VARS.index(name)] = 1
        return cls({tuple(key): Fraction(1)})

    # -- algebra -----------------------------------------------------------

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.terms)
        for k, v in other.terms.items():
            s = out.get(k, 0) + v
            if s == 0:
                out.pop(k, None)
            else:
                out[k] = s
        return MultiPoly(out)

    def __sub__(self, other):
        return self + (self._lift(other) * -1)

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            s = _coef(other)
            return MultiPoly({k: v * s for k, v in self.terms.items()})
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                key = (k1[0] + k2[0], k1[1] + k2[1], k1[2] + k2[2])
                out[key] = out.get(key, 0) + v1 * v2
        return MultiPoly(out)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __pow__(self, n: int):
        out = MultiPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, MultiPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    @staticmethod
    def _lift(x):
        return x if isinstance(x, MultiPoly) else MultiPoly.const(x)

    def is_zero(self) -> bool:
        return not self.terms

    # -- calculus and evaluation --------------------------------------------

    def diff(self, name: str) -> "MultiPoly":
        idx = VARS.index(name)
        out = {}
        for k, v in self.terms.items():
            e = k[idx]
            if e:
                key = list(k)
                key[idx] = e - 1
                out[tuple(key)] = out.get(tuple(key), 0) + v * e
        return MultiPoly(out)

    def eval(self, h, hp, c):
        """Exact when coefficients and arguments are rational."""
        total = 0
        for (i, j, k), v in self.terms.items():
            total += v * h ** i * hp ** j * c ** k
        return total

    def eval_float(self, h, hp, c) -> float:
        return float(self.eval(float(h), float(hp), float(c)))

    # -- structure ----------------------------------------------------------

    def divide_hp_minus_h(self):
        """Exact division by (hp - h): returns (quotient, remainder).

        The remainder is a polynomial in (h, c) alone; an exact division
        has an empty remainder.
        """
        by_j = {}
        for (i, j, k), v in self.terms.items():
            by_j.setdefault(j, {})[(i, k)] = v
        dmax = max(by_j) if by_j else 0
        quot = {}
        carry = {}
        for j in range(dmax, 0, -1):
            cur = dict(by_j.get(j, {}))
            for key, v in carry.items():
                s = cur.get(key, 0) + v
                if s == 0:
                    cur.pop(key, None)
                else:
                    cur[key] = s
            for (i, k), v in cur.items():
                quot[(i, j - 1, k)] = v
            carry = {(i + 1, k): v for (i, k), v in cur.items()}
        rem = dict(by_j.get(0, {}))
        for key, v in carry.items():
            s = rem.get(key, 0) + v
            if s == 0:
                rem.pop(key, None)
            else:
                rem[key] = s
        return MultiPoly(quot), MultiPoly({(i, 0, k): v for (i, k), v in rem.items()})

    def sorted_terms(self):
        return sorted(self.terms.items())

    def __repr__(self):
        if not self.terms:
            return "MultiPoly(0)"
        bits = []
        for (i, j, k), v in self.sorted_terms():
            mono = "".join(f"*{n}^{e}" for n, e in zip(VARS, (i, j, k)) if e)
            bits.append(f"{v}{mono}")
        return "MultiPoly(" + " + ".join(bits) + ")"
