import random

import pytest

from arc.algebra import BLS12_381_SCALAR_ORDER as P
from arc.mpc import (
    Abb,
    Domain,
    RangeViolation,
    TrustedDealer,
    share_convert_field_to_ring,
    share_convert_ring_to_field,
)


def abb_pair(seed=0, n=3, k=64):
    dealer = TrustedDealer(n, seed)
    ring = Abb(n, Domain.ring(k), dealer=dealer)
    fld = Abb(n, Domain.field(P), dealer=dealer)
    return ring, fld


def to_ring(v: int, k: int = 64) -> int:
    return v % (1 << k)


class TestRingToField:
    def test_zero(self):
        ring, fld = abb_pair()
        out = share_convert_ring_to_field(ring, fld, ring.input(0, [0]), 10, 40)
        assert fld.open(out) == [0]

    def test_negative_three_maps_to_p_minus_three(self):
        ring, fld = abb_pair()
        out = share_convert_ring_to_field(
            ring, fld, ring.input(0, [to_ring(-3)]), ell=8, kappa=40
        )
        assert fld.open(out) == [P - 3]

    def test_boundary_range_error(self):
        ring, fld = abb_pair()
        with pytest.raises(RangeViolation):
            share_convert_ring_to_field(
                ring, fld, ring.input(0, [1 << 9]), ell=10, kappa=40
            )

    def test_plaintext_oracle_random(self):
        rng = random.Random(4)
        ring, fld = abb_pair(seed=2)
        vals = [to_ring(rng.randrange(-(1 << 30), 1 << 30)) for _ in range(32)]
        out = share_convert_ring_to_field(ring, fld, ring.input(0, vals), 32, 40)
        want = [(v - (1 << 64) if v >= 1 << 63 else v) % P for v in vals]
        assert fld.open(out) == want


class TestRoundTrip:
    def test_exhaustive_ell_10(self):
        """All 2^10 signed values survive ring -> field -> ring."""
        ring, fld = abb_pair(seed=5)
        vals = [to_ring(v) for v in range(-512, 512)]
        mid = share_convert_ring_to_field(ring, fld, ring.input(0, vals), 10, 40)
        back = share_convert_field_to_ring(fld, ring, mid, 10, 40)
        assert ring.open(back) == vals

    def test_random_ell_64(self):
        rng = random.Random(6)
        ring, fld = abb_pair(seed=7)
        vals = [
            to_ring(rng.randrange(-(1 << 62), 1 << 62)) for _ in range(200)
        ]
        mid = share_convert_ring_to_field(ring, fld, ring.input(0, vals), 64, 40)
        back = share_convert_field_to_ring(fld, ring, mid, 64, 40)
        assert ring.open(back) == vals


class TestMasking:
    def test_epsilon_spread(self):
        """The masked opening of a fixed value is non-constant and spans a
        range at least 2^kappa wide across repeated conversions."""
        kappa = 20
        seen = set()
        lo, hi = None, None
        for seed in range(64):
            ring, fld = abb_pair(seed=seed)
            x = ring.input(0, [37])
            shifted = ring.add_const(x, [1 << 9])
            eps_shared = ring.lincomb(
                [1, 1], [shifted, ring.dealer.edabits(ring.domain, 10 + kappa, 1)[0]]
            )
            eps = ring.open(eps_shared)[0]
            seen.add(eps)
            lo = eps if lo is None else min(lo, eps)
            hi = eps if hi is None else max(hi, eps)
        assert len(seen) >= 60
        assert hi - lo >= 1 << kappa
