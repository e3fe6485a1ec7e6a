"""Commitment schemes and signatures.

Contains the polynomial commitment scheme (constant-size commitments with
pairing-verified opening proofs), Pedersen vector commitments, an
MPC-friendly algebraic sponge hash, and Ed25519 signatures including the
emulated distributed-signing mode used by the receipt pipeline.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .algebra import AlgebraError, NonZeroRemainder, Polynomial


class CommitError(AlgebraError):
    pass


# ---------------------------------------------------------------------------
# KZG polynomial commitments
# ---------------------------------------------------------------------------


@dataclass
class KzgParams:
    """Powers of the trapdoor in G1 plus the trapdoor in G2.

    ``powers_g1[i]`` is alpha^i * h1 for i = 0..max_degree; alpha itself is
    erased after setup.  The top power is reserved for the hiding
    randomizer, so payload polynomials must have degree < max_degree.
    """

    backend: object
    powers_g1: list
    alpha_g2: object
    max_degree: int


@dataclass(frozen=True)
class KzgCommitment:
    point: object  # G1; constant size independent of the polynomial degree

    def to_bytes(self, backend) -> bytes:
        return backend.g1_to_bytes(self.point)


@dataclass(frozen=True)
class Opening:
    point: object  # G1 commitment to the quotient polynomial


def kzg_setup(backend, d: int, seed: int, alpha: int | None = None) -> KzgParams:
    """Sample the trapdoor from a seeded RNG, build powers, erase it.

    ``alpha`` is a test hook that forces the trapdoor; production callers
    leave it unset.
    """
    if d < 1:
        raise CommitError("degree must be >= 1")
    if alpha is None:
        rng = random.Random(seed)
        alpha = rng.randrange(2, backend.order)
    h1 = backend.g1_generator()
    powers = []
    acc = 1
    for _ in range(d + 1):
        powers.append(backend.g1_mul(h1, acc))
        acc = acc * alpha % backend.order
    alpha_g2 = backend.g2_mul(backend.g2_generator(), alpha)
    del alpha
    return KzgParams(backend, powers, alpha_g2, d)


def randomized_poly(pp: KzgParams, g: Polynomial, r: int) -> Polynomial:
    """The actually-committed polynomial g + r * Z^max_degree."""
    if g.degree >= pp.max_degree:
        raise CommitError(
            f"degree {g.degree} overflows capacity {pp.max_degree - 1}"
        )
    coeffs = list(g.coeffs) + [0] * (pp.max_degree - len(g.coeffs)) + [r]
    return Polynomial(coeffs, g.p)


def kzg_commit(pp: KzgParams, g: Polynomial, r: int) -> KzgCommitment:
    """Commit to g with hiding randomizer r in the top coefficient slot.

    The commitment equals (g(alpha) + r * alpha^max_degree) * h1.
    Homomorphic: commit(g1, r1) + commit(g2, r2) = commit(g1+g2, r1+r2).
    """
    ghat = randomized_poly(pp, g, r)
    if not ghat.coeffs:
        return KzgCommitment(pp.backend.g1_identity())
    scalars = list(ghat.coeffs)
    return KzgCommitment(pp.backend.g1_msm(scalars, pp.powers_g1[: len(scalars)]))


def kzg_commitment_add(backend, a: KzgCommitment, b: KzgCommitment) -> KzgCommitment:
    return KzgCommitment(backend.g1_add(a.point, b.point))


def kzg_eval(pp: KzgParams, g: Polynomial, r: int, x: int) -> int:
    """Evaluation of the committed (randomized) polynomial at x."""
    return (g.eval(x) + r * pow(x, pp.max_degree, g.p)) % g.p


def kzg_prove(
    pp: KzgParams, c: KzgCommitment, g: Polynomial, r: int, x: int, y: int
) -> Opening:
    """Produce the quotient-commitment proof that the committed polynomial
    evaluates to y at x.

    Raises NonZeroRemainder when the evaluation does not match, signalling
    an invalid opening attempt.  With r != 0 the quotient picks up the
    randomizer term r * (Z^d - x^d)/(Z - x).
    """
    ghat = randomized_poly(pp, g, r)
    q = ghat.div_linear(x, y)
    if not q.coeffs:
        return Opening(pp.backend.g1_identity())
    return Opening(pp.backend.g1_msm(list(q.coeffs), pp.powers_g1[: len(q.coeffs)]))


def kzg_check(pp: KzgParams, c: KzgCommitment, x: int, y: int, pi: Opening) -> bool:
    """Accept iff e(pi, alpha*h2 - x*h2) = e(c - y*h1, h2)."""
    backend = pp.backend
    try:
        lhs_g2 = backend.g2_add(pp.alpha_g2, backend.g2_neg(
            backend.g2_mul(backend.g2_generator(), x)))
        rhs_g1 = backend.g1_add(c.point, backend.g1_neg(
            backend.g1_mul(backend.g1_generator(), y)))
        return backend.pairing_check(pi.point, lhs_g2, rhs_g1,
                                     backend.g2_generator())
    except (AlgebraError, TypeError, ValueError):
        return False


# ---------------------------------------------------------------------------
# Pedersen vector commitments
# ---------------------------------------------------------------------------


@dataclass
class PedersenParams:
    """Generators h0..hd; h0 carries the randomness, h1..hd the message."""

    backend: object
    generators: list

    @property
    def capacity(self) -> int:
        return len(self.generators) - 1


def pedersen_setup(backend, d: int, tag: bytes = b"arc-pedersen") -> PedersenParams:
    """Derive d+1 generators from a domain-separation tag.

    On the mock backend generators are successive small multiples of h1
    (their discrete logs are knowable but unused -- tests only).  On the
    curve backend each generator is obtained from a hash-derived scalar.
    """
    h1 = backend.g1_generator()
    gens = []
    if backend.name == "mock":
        for i in range(d + 1):
            gens.append(backend.g1_mul(h1, i + 2))
    else:
        for i in range(d + 1):
            digest = hashlib.sha256(tag + i.to_bytes(4, "big")).digest()
            s = int.from_bytes(digest, "big") % backend.order
            gens.append(backend.g1_mul(h1, s))
    return PedersenParams(backend, gens)


def pedersen_commit(pp: PedersenParams, m: list[int], r: int):
    """c = r*h0 + sum(m_i * h_i), message slots starting at h1."""
    if len(m) > pp.capacity:
        raise CommitError(f"message length {len(m)} exceeds capacity {pp.capacity}")
    return pp.backend.g1_msm([r] + list(m), pp.generators[: len(m) + 1])


def pedersen_verify(pp: PedersenParams, c, m: list[int], r: int) -> bool:
    try:
        return pp.backend.g1_eq(c, pedersen_commit(pp, m, r))
    except CommitError:
        return False


# ---------------------------------------------------------------------------
# Algebraic sponge hash (MiMC-style cubing permutation)
# ---------------------------------------------------------------------------

HASH_ROUNDS = 73


@dataclass
class HashParams:
    p: int
    round_constants: tuple[int, ...]
    exponent: int = 3


def permutation_exponent(p: int) -> int:
    """Smallest odd power e >= 3 with gcd(e, p-1) = 1.

    x -> x^e is a bijection of F_p exactly when e is coprime to p-1;
    cubing fails that on fields with 3 | p-1 (including the curve scalar
    field), which would collapse the sponge state and break binding.
    """
    import math

    e = 3
    while math.gcd(e, p - 1) != 1:
        e += 2
    return e


def hash_setup(p: int, tag: bytes = b"arc-mimc") -> HashParams:
    """Round constants derived from a nothing-up-my-sleeve hash stream."""
    consts = []
    for i in range(HASH_ROUNDS):
        digest = hashlib.sha256(tag + i.to_bytes(4, "big")).digest()
        consts.append(int.from_bytes(digest, "big") % p)
    return HashParams(p, tuple(consts), permutation_exponent(p))


def hash_permute(params: HashParams, s: int) -> int:
    p = params.p
    e = params.exponent
    for k in params.round_constants:
        s = pow((s + k) % p, e, p)
    return s


def hash_commit(params: HashParams, m: list[int], r: int) -> int:
    """Sponge with rate 1: absorb the length, then each element.

    Empty m yields a well-defined digest of r alone.
    """
    s = hash_permute(params, (r + len(m)) % params.p)
    for v in m:
        s = hash_permute(params, (s + v) % params.p)
    return s


# ---------------------------------------------------------------------------
# Signatures (Ed25519), including emulated distributed signing
# ---------------------------------------------------------------------------

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)


@dataclass
class KeyPair:
    sk: bytes  # 32-byte private seed
    pk: bytes  # 32-byte public key

    @staticmethod
    def generate(rng: random.Random) -> "KeyPair":
        seed = rng.getrandbits(256).to_bytes(32, "big")
        priv = Ed25519PrivateKey.from_private_bytes(seed)
        pub = priv.public_key().public_bytes_raw()
        return KeyPair(seed, pub)


def sign(kp: KeyPair, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(kp.sk).sign(message)


def verify(pk: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(pk).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


def dist_sign_emulated(keys: list[KeyPair], message: bytes) -> list[bytes]:
    """One signature per computing party.

    Stands in for a threshold signing protocol: the bundle verifies iff
    every party's signature verifies, which gives the same trust
    conclusion under 'at least one computing party is honest'.
    """
    return [sign(kp, message) for kp in keys]


def dist_verify(pks: list[bytes], message: bytes, sigs: list[bytes]) -> tuple[bool, int | None]:
    """Verify all shares; on failure report the index of the bad signer."""
    if len(pks) != len(sigs):
        return False, None
    for i, (pk, sig) in enumerate(zip(pks, sigs)):
        if not verify(pk, message, sig):
            return False, i
    return True, None
