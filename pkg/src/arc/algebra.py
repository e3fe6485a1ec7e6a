"""Prime-field, ring and polynomial arithmetic.

Everything in the library is built on two scalar domains: the prime field
F_p (whose modulus depends on the active group backend) and the ring
Z_{2^k} used for fixed-point ML arithmetic.  Elements are immutable and
carry their modulus, so values from different domains cannot be mixed
silently.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass


def stable_seed(*parts) -> int:
    """Process-independent RNG seed from printable parts.

    str hashes are salted per process, so seeding random.Random with
    tuples of strings would break run-to-run determinism; route every
    derived seed through here instead.
    """
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")

# Small primes for hand-checkable tests and statistical soundness
# experiments; the d/p soundness bound is only observable when p is small.
TEST_PRIME = 101
TEST_PRIME_LARGE = 1009

# Order of the BLS12-381 G1/G2 subgroups (the scalar field of the curve
# backend).
BLS12_381_SCALAR_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001


class AlgebraError(Exception):
    """Raised on domain violations (modulus mismatch, inversion of zero)."""


def byte_length(modulus: int) -> int:
    return (modulus.bit_length() + 7) // 8


@dataclass(frozen=True)
class FieldElement:
    """An element of F_p in canonical representation 0 <= value < p."""

    value: int
    p: int

    @staticmethod
    def make(value: int, p: int) -> "FieldElement":
        return FieldElement(value % p, p)

    def _check(self, other: "FieldElement") -> None:
        if self.p != other.p:
            raise AlgebraError(f"modulus mismatch: {self.p} vs {other.p}")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement((self.value + other.value) % self.p, self.p)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement((self.value - other.value) % self.p, self.p)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        self._check(other)
        return FieldElement((self.value * other.value) % self.p, self.p)

    def __neg__(self) -> "FieldElement":
        return FieldElement(-self.value % self.p, self.p)

    def inv(self) -> "FieldElement":
        if self.value == 0:
            raise AlgebraError("inversion of zero")
        return FieldElement(pow(self.value, -1, self.p), self.p)

    def __pow__(self, e: int) -> "FieldElement":
        if e < 0:
            return self.inv() ** (-e)
        return FieldElement(pow(self.value, e, self.p), self.p)

    def is_zero(self) -> bool:
        return self.value == 0

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(byte_length(self.p), "big")

    @staticmethod
    def from_bytes(data: bytes, p: int) -> "FieldElement":
        v = int.from_bytes(data, "big")
        if v >= p:
            raise AlgebraError("field element out of range")
        return FieldElement(v, p)

    def __repr__(self) -> str:
        return f"Fp({self.value} mod {self.p})"


@dataclass(frozen=True)
class RingElement:
    """An element of Z_{2^k} with wrapping arithmetic (default k=64)."""

    value: int
    k: int = 64

    @staticmethod
    def make(value: int, k: int = 64) -> "RingElement":
        return RingElement(value & ((1 << k) - 1), k)

    @property
    def mod(self) -> int:
        return 1 << self.k

    def _check(self, other: "RingElement") -> None:
        if self.k != other.k:
            raise AlgebraError(f"ring width mismatch: {self.k} vs {other.k}")

    def __add__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement((self.value + other.value) & (self.mod - 1), self.k)

    def __sub__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement((self.value - other.value) & (self.mod - 1), self.k)

    def __mul__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement((self.value * other.value) & (self.mod - 1), self.k)

    def __neg__(self) -> "RingElement":
        return RingElement(-self.value & (self.mod - 1), self.k)

    def signed(self) -> int:
        """Two's-complement interpretation in [-2^(k-1), 2^(k-1))."""
        half = 1 << (self.k - 1)
        return self.value - self.mod if self.value >= half else self.value

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(self.k // 8 + (1 if self.k % 8 else 0), "big")

    def __repr__(self) -> str:
        return f"Z2k({self.value} mod 2^{self.k})"


class NonZeroRemainder(AlgebraError):
    """Division of g(Z)-y by (Z-x) left a remainder, i.e. g(x) != y."""


class Polynomial:
    """Polynomial over F_p; coeffs[i] is the coefficient of Z^i.

    Trailing zero coefficients are stripped on construction, so ``degree``
    of the zero polynomial is -1.
    """

    __slots__ = ("coeffs", "p")

    def __init__(self, coeffs: list[int] | tuple[int, ...], p: int):
        trimmed = list(c % p for c in coeffs)
        while trimmed and trimmed[-1] == 0:
            trimmed.pop()
        self.coeffs = tuple(trimmed)
        self.p = p

    @staticmethod
    def zero(p: int) -> "Polynomial":
        return Polynomial([], p)

    @staticmethod
    def from_field_elements(elems: list[FieldElement], p: int) -> "Polynomial":
        return Polynomial([e.value for e in elems], p)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def coefficient(self, i: int) -> int:
        return self.coeffs[i] if i < len(self.coeffs) else 0

    def eval(self, z: int) -> int:
        """Horner evaluation of sum(coeffs[i] * z^i) mod p."""
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * z + c) % self.p
        return acc

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.p != other.p:
            raise AlgebraError("modulus mismatch")
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(
            [self.coefficient(i) + other.coefficient(i) for i in range(n)], self.p
        )

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        if self.p != other.p:
            raise AlgebraError("modulus mismatch")
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(
            [self.coefficient(i) - other.coefficient(i) for i in range(n)], self.p
        )

    def scale(self, s: int) -> "Polynomial":
        return Polynomial([c * s for c in self.coeffs], self.p)

    def shift(self, n: int) -> "Polynomial":
        """Multiply by Z^n."""
        return Polynomial([0] * n + list(self.coeffs), self.p)

    def mul_linear(self, x: int) -> "Polynomial":
        """Multiply by (Z - x); used by tests to reconstruct dividends."""
        shifted = [0] + list(self.coeffs)
        for i, c in enumerate(self.coeffs):
            shifted[i] = (shifted[i] - c * x) % self.p
        return Polynomial(shifted, self.p)

    def div_linear(self, x: int, y: int) -> "Polynomial":
        """Quotient q with g(Z) - y = q(Z) * (Z - x).

        Synthetic division; raises NonZeroRemainder when g(x) != y, which
        signals an invalid opening attempt.
        """
        q: list[int] = [0] * max(len(self.coeffs) - 1, 0)
        acc = 0
        for i in range(len(self.coeffs) - 1, 0, -1):
            acc = (acc * x + self.coeffs[i]) % self.p
            q[i - 1] = acc
        remainder = (acc * x + self.coefficient(0) - y) % self.p
        if remainder != 0:
            raise NonZeroRemainder(f"g({x}) != {y} (remainder {remainder})")
        return Polynomial(q, self.p)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.p == other.p
            and self.coeffs == other.coeffs
        )

    def __hash__(self) -> int:
        return hash((self.coeffs, self.p))

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coeffs)} mod {self.p})"
