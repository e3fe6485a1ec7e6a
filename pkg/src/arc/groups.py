"""Bilinear group backends.

Two interchangeable backends drive all commitment and pairing logic:

* ``MockBackend`` -- G1 = G2 = GT = exponents in F_q and e(a, b) = a*b.
  Insecure but genuinely bilinear, so protocol logic can be hand-checked
  on tiny primes and soundness bounds like d/p become observable.
* ``ArkworksBackend`` -- BLS12-381 through the py-arkworks bindings
  (compressed 48/96-byte points, native multi-scalar multiplication).

Protocol code only talks to the backend interface; group elements are
opaque handles owned by the backend that produced them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .algebra import AlgebraError, byte_length
from .algebra import BLS12_381_SCALAR_ORDER, TEST_PRIME

_G1, _G2, _GT = "G1", "G2", "GT"


@dataclass(frozen=True)
class MockPoint:
    """A 'group element' of the mock backend: its exponent mod q."""

    value: int
    grp: str


class MockBackend:
    """Transparent pairing: group elements are exponents, e(a, b) = a*b.

    The generator of each group is the exponent 1, so x*h1 is literally x.
    """

    name = "mock"

    def __init__(self, order: int = TEST_PRIME):
        self.order = order
        self.pairing_checks = 0
        self.g1_op_count = 0

    # -- G1 ----------------------------------------------------------
    def g1_generator(self) -> MockPoint:
        return MockPoint(1, _G1)

    def g1_identity(self) -> MockPoint:
        return MockPoint(0, _G1)

    def _binop(self, a: MockPoint, b: MockPoint, v: int) -> MockPoint:
        if a.grp != b.grp:
            raise AlgebraError(f"group mismatch: {a.grp} vs {b.grp}")
        return MockPoint(v % self.order, a.grp)

    def g1_add(self, a: MockPoint, b: MockPoint) -> MockPoint:
        self.g1_op_count += 1
        return self._binop(a, b, a.value + b.value)

    def g1_neg(self, a: MockPoint) -> MockPoint:
        return MockPoint(-a.value % self.order, a.grp)

    def g1_mul(self, a: MockPoint, scalar: int) -> MockPoint:
        self.g1_op_count += 1
        return MockPoint(a.value * (scalar % self.order) % self.order, a.grp)

    def g1_msm(self, scalars: list[int], points: list[MockPoint]) -> MockPoint:
        if len(scalars) != len(points):
            raise AlgebraError("msm length mismatch")
        self.g1_op_count += len(points)
        acc = 0
        for s, pt in zip(scalars, points):
            acc += s * pt.value
        return MockPoint(acc % self.order, _G1)

    def g1_eq(self, a: MockPoint, b: MockPoint) -> bool:
        return a == b

    def g1_to_bytes(self, a: MockPoint) -> bytes:
        return b"\x01" + a.value.to_bytes(byte_length(self.order), "big")

    def g1_from_bytes(self, data: bytes) -> MockPoint:
        if not data or data[0] != 1:
            raise AlgebraError("not a mock G1 encoding")
        return MockPoint(int.from_bytes(data[1:], "big") % self.order, _G1)

    @property
    def g1_bytes_len(self) -> int:
        return 1 + byte_length(self.order)

    # -- G2 ----------------------------------------------------------
    def g2_generator(self) -> MockPoint:
        return MockPoint(1, _G2)

    def g2_add(self, a: MockPoint, b: MockPoint) -> MockPoint:
        return self._binop(a, b, a.value + b.value)

    def g2_neg(self, a: MockPoint) -> MockPoint:
        return MockPoint(-a.value % self.order, a.grp)

    def g2_mul(self, a: MockPoint, scalar: int) -> MockPoint:
        return MockPoint(a.value * (scalar % self.order) % self.order, a.grp)

    # -- pairing -----------------------------------------------------
    def pairing(self, a: MockPoint, b: MockPoint) -> MockPoint:
        if a.grp != _G1 or b.grp != _G2:
            raise AlgebraError("pairing expects (G1, G2)")
        return MockPoint(a.value * b.value % self.order, _GT)

    def gt_eq(self, a: MockPoint, b: MockPoint) -> bool:
        return a == b

    def pairing_check(self, a1, b1, a2, b2) -> bool:
        """e(a1, b1) == e(a2, b2), counted as one verification equation."""
        self.pairing_checks += 1
        return self.gt_eq(self.pairing(a1, b1), self.pairing(a2, b2))


class ArkworksBackend:
    """BLS12-381 via py-arkworks-bls12381 (Rust arkworks underneath)."""

    name = "curve"

    def __init__(self):
        from py_arkworks_bls12381 import G1Point, G2Point, GT, Scalar

        self._G1Point = G1Point
        self._G2Point = G2Point
        self._GT = GT
        self._Scalar = Scalar
        self.order = BLS12_381_SCALAR_ORDER
        self.pairing_checks = 0
        self.g1_op_count = 0

    def _scalar(self, s: int):
        return self._Scalar.from_le_bytes((s % self.order).to_bytes(32, "little"))

    # -- G1 ----------------------------------------------------------
    def g1_generator(self):
        return self._G1Point()

    def g1_identity(self):
        return self._G1Point.identity()

    def g1_add(self, a, b):
        self.g1_op_count += 1
        return a + b

    def g1_neg(self, a):
        return -a

    def g1_mul(self, a, scalar: int):
        self.g1_op_count += 1
        return a * self._scalar(scalar)

    def g1_msm(self, scalars: list[int], points: list) -> object:
        if len(scalars) != len(points):
            raise AlgebraError("msm length mismatch")
        if not points:
            return self.g1_identity()
        self.g1_op_count += len(points)
        return self._G1Point.multiexp_unchecked(
            list(points), [self._scalar(s) for s in scalars]
        )

    def g1_eq(self, a, b) -> bool:
        return a == b

    def g1_to_bytes(self, a) -> bytes:
        return bytes(a.to_compressed_bytes())

    def g1_from_bytes(self, data: bytes):
        return self._G1Point.from_compressed_bytes(data)

    @property
    def g1_bytes_len(self) -> int:
        return 48

    # -- G2 ----------------------------------------------------------
    def g2_generator(self):
        return self._G2Point()

    def g2_add(self, a, b):
        return a + b

    def g2_neg(self, a):
        return -a

    def g2_mul(self, a, scalar: int):
        return a * self._scalar(scalar)

    # -- pairing -----------------------------------------------------
    def pairing(self, a, b):
        return self._GT.pairing(a, b)

    def gt_eq(self, a, b) -> bool:
        return a == b

    def pairing_check(self, a1, b1, a2, b2) -> bool:
        """e(a1, b1) == e(a2, b2) via one product-of-pairings evaluation."""
        self.pairing_checks += 1
        acc = self._GT.multi_pairing([a1, self.g1_neg(a2)], [b1, b2])
        return acc == self._GT.one()


def get_backend(name: str | None = None, order: int = TEST_PRIME):
    """Build a backend by name, honoring ARC_FIELD_BACKEND when unset."""
    if name is None:
        name = os.environ.get("ARC_FIELD_BACKEND", "mock")
    if name == "mock":
        return MockBackend(order)
    if name == "curve":
        return ArkworksBackend()
    raise ValueError(f"unknown field backend {name!r} (expected mock|curve)")
