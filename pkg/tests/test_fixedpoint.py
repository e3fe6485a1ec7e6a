from fractions import Fraction

import pytest

from arc.fixedpoint import FxFormat, FxOverflow


F = FxFormat()


class TestEncoding:
    def test_zero(self):
        assert F.encode(0.0) == 0

    def test_one_times_one(self):
        one = F.encode(1.0)
        assert F.mul_trunc(one, one) == one

    def test_quarter_exact(self):
        half = F.encode(0.5)
        assert F.decode(F.mul_trunc(half, half)) == 0.25

    def test_negative_round_trip(self):
        v = F.encode(-3.75)
        assert F.decode(v) == -3.75
        assert F.signed(v) == -3.75 * F.scale

    def test_fraction_encode(self):
        assert F.encode(Fraction(1, 4)) == F.scale // 4

    def test_truncation_toward_zero(self):
        a = F.encode(-0.3)
        b = F.encode(0.7)
        # -0.21 truncated toward zero: quantized just above -0.21
        got = F.signed(F.mul_trunc(a, b))
        assert -0.21 * F.scale <= got <= -0.2099 * F.scale + 1

    def test_integer_oracle(self):
        # exact integer semantics: trunc(signed(a)*signed(b) / 2^f)
        a, b = F.encode(1.371), F.encode(-2.25)
        prod = F.signed(a) * F.signed(b)
        expect = -((-prod) >> F.f)
        assert F.signed(F.mul_trunc(a, b)) == expect

    def test_div(self):
        assert F.decode(F.div(F.encode(1.0), F.encode(4.0))) == 0.25
        with pytest.raises(ZeroDivisionError):
            F.div(F.encode(1.0), 0)

    def test_overflow_detection(self):
        big = F.encode(float(1 << 40))
        with pytest.raises(FxOverflow):
            F.mul_trunc(big, big, check=True)
