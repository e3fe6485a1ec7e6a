"""Two's-complement fixed-point arithmetic over Z_{2^k}.

Values represent x * 2^-f.  Multiplication is followed by *exact*
truncation (round toward zero on the signed value), so the plaintext and
MPC execution paths produce bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class FxOverflow(Exception):
    pass


@dataclass(frozen=True)
class FxFormat:
    k: int = 64  # ring width
    f: int = 16  # fractional bits

    @property
    def mod(self) -> int:
        return 1 << self.k

    @property
    def scale(self) -> int:
        return 1 << self.f

    # magnitude bound below which products cannot overflow the ring
    @property
    def safe_magnitude(self) -> int:
        return 1 << (self.k - self.f - 2)

    def encode(self, x) -> int:
        """Encode a float/Fraction/int as a ring element."""
        if isinstance(x, Fraction):
            scaled = x * self.scale
            v = int(scaled) if scaled >= 0 else -int(-scaled)
        else:
            v = int(x * self.scale) if x >= 0 else -int(-x * self.scale)
        return v % self.mod

    def decode(self, v: int) -> float:
        return self.signed(v) / self.scale

    def decode_fraction(self, v: int) -> Fraction:
        return Fraction(self.signed(v), self.scale)

    def signed(self, v: int) -> int:
        v %= self.mod
        return v - self.mod if v >= (self.mod >> 1) else v

    def trunc(self, v: int, check: bool = False) -> int:
        """Exact truncation by f bits, rounding the signed value toward zero."""
        s = self.signed(v)
        t = (s >> self.f) if s >= 0 else -((-s) >> self.f)
        if check and abs(t) >= (self.mod >> 1):
            raise FxOverflow(f"truncated value {t} exceeds ring range")
        return t % self.mod

    def mul_trunc(self, a: int, b: int, check: bool = False) -> int:
        """Fixed-point product: exact signed integer product, then trunc."""
        prod = self.signed(a) * self.signed(b)
        if check and abs(prod) >= (self.mod >> 1) << self.f:
            raise FxOverflow("product overflows ring before truncation")
        t = (prod >> self.f) if prod >= 0 else -((-prod) >> self.f)
        return t % self.mod

    def div(self, a: int, b: int) -> int:
        """Fixed-point quotient a/b, rounded toward zero."""
        sa, sb = self.signed(a), self.signed(b)
        if sb == 0:
            raise ZeroDivisionError("fixed-point division by zero")
        num = sa << self.f
        q = abs(num) // abs(sb)
        if (sa < 0) != (sb < 0):
            q = -q
        return q % self.mod


DEFAULT_FX = FxFormat()
