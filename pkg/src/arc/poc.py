"""Proof-of-consistency backends.

Three interchangeable ways for a prover to convince the computing
parties that a secret-shared vector matches a previously published
commitment:

* ``poly`` -- commit to the coefficient polynomial g(z) = sum x_i z^i
  with a constant-size polynomial commitment; the check masks the
  evaluation with a fresh random polynomial, opens a single value at a
  public challenge and verifies one pairing equation.
* ``hash`` -- direct commitment via the algebraic sponge, re-computed
  over the shares inside the MPC (multiplication count linear in d).
* ``pedersen`` -- per-element homomorphic commitments folded with a
  random challenge and compared against one distributed commitment
  (constant MPC work, linear storage).

All variants share the Setup/Commit/Check surface and the batch
verification helper aggregates polynomial openings into one pairing
equation.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .algebra import NonZeroRemainder, Polynomial
from . import commit as cm
from .mpc import Abb, IdentifiedAbort, SharedVector, dist_commit_pedersen

VARIANTS = ("poly", "hash", "pedersen")


class PocError(Exception):
    pass


@dataclass
class PocParams:
    variant: str
    backend: object
    d: int
    kzg: cm.KzgParams | None = None
    pedersen: cm.PedersenParams | None = None
    hash: cm.HashParams | None = None

    @property
    def chunk_capacity(self) -> int:
        # payload occupies degrees 1..max_degree-1; slot 0 stays zero and
        # the top slot carries the hiding randomizer
        return self.kzg.max_degree - 1


@dataclass
class PocCommitment:
    variant: str
    points: tuple = ()      # poly: one KzgCommitment per chunk
    digest: int | None = None   # hash
    elements: tuple = ()    # pedersen: d commitments

    def to_bytes(self, backend) -> bytes:
        if self.variant == "poly":
            return b"".join(backend.g1_to_bytes(c.point) for c in self.points)
        if self.variant == "hash":
            nbytes = (backend.order.bit_length() + 7) // 8
            return self.digest.to_bytes(nbytes, "big")
        return b"".join(backend.g1_to_bytes(e) for e in self.elements)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PocCommitment) or self.variant != other.variant:
            return False
        if self.variant == "hash":
            return self.digest == other.digest
        if self.variant == "poly":
            return len(self.points) == len(other.points) and all(
                a.point == b.point for a, b in zip(self.points, other.points)
            )
        return self.elements == other.elements


def poc_setup(variant: str, backend, d: int, seed: int = 0) -> PocParams:
    """Public parameters supporting inputs of size up to d elements."""
    if d < 1:
        raise PocError("d must be >= 1")
    if variant == "poly":
        return PocParams(variant, backend, d, kzg=cm.kzg_setup(backend, d, seed))
    if variant == "pedersen":
        return PocParams(variant, backend, d, pedersen=cm.pedersen_setup(backend, d))
    if variant == "hash":
        return PocParams(variant, backend, d, hash=cm.hash_setup(backend.order))
    raise PocError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Commit
# ---------------------------------------------------------------------------


def _chunk(x: list[int], capacity: int) -> list[list[int]]:
    if not x:
        return [[]]
    return [x[i : i + capacity] for i in range(0, len(x), capacity)]


def _chunk_randomness(pp: PocParams, r: int, count: int) -> list[int]:
    """Per-chunk decommitment values derived deterministically from r."""
    if count == 1:
        return [r % pp.backend.order]
    hp = pp.hash or cm.hash_setup(pp.backend.order)
    return [
        r % pp.backend.order if j == 0 else cm.hash_permute(hp, (r + j) % pp.backend.order)
        for j in range(count)
    ]


def _element_randomness(pp: PocParams, r, count: int) -> list[int]:
    """Per-element decommitment values for the pedersen variant.

    The scheme's randomness is naturally a vector (one value per stored
    commitment); a scalar seed is also accepted and expanded through the
    permutation for convenience."""
    if isinstance(r, (list, tuple)):
        if len(r) != count:
            raise PocError("randomness vector length mismatch")
        return [v % pp.backend.order for v in r]
    hp = cm.hash_setup(pp.backend.order)
    return [cm.hash_permute(hp, (r + j) % pp.backend.order) for j in range(count)]


def coefficient_polynomial(x: list[int], p: int) -> Polynomial:
    """g(z) = sum_{i=1..d} x_i * z^i -- constant term fixed at zero."""
    return Polynomial([0] + list(x), p)


def poc_commit(pp: PocParams, x: list[int], r) -> PocCommitment:
    """r is a scalar for poly/hash; pedersen takes one value per element
    (vector, or a scalar seed expanded deterministically)."""
    p = pp.backend.order
    x = [v % p for v in x]
    if pp.variant == "poly":
        chunks = _chunk(x, pp.chunk_capacity)
        rs = _chunk_randomness(pp, r, len(chunks))
        points = tuple(
            cm.kzg_commit(pp.kzg, coefficient_polynomial(ch, p), rj)
            for ch, rj in zip(chunks, rs)
        )
        return PocCommitment("poly", points=points)
    if pp.variant == "hash":
        return PocCommitment("hash", digest=cm.hash_commit(pp.hash, x, r))
    if pp.variant == "pedersen":
        if len(x) > pp.d:
            raise PocError("input exceeds pedersen capacity")
        rs = _element_randomness(pp, r, len(x))
        gens = pp.pedersen.generators
        elems = tuple(
            pp.backend.g1_msm([ri, xi], [gens[0], gens[1]]) for ri, xi in zip(rs, x)
        )
        return PocCommitment("pedersen", elements=elems)
    raise PocError(pp.variant)


# ---------------------------------------------------------------------------
# Check transcripts
# ---------------------------------------------------------------------------


@dataclass
class CheckTranscript:
    variant: str
    verdict: bool
    beta: int | None = None
    rho: tuple = ()
    c_omega: tuple = ()
    openings: tuple = ()
    blamed: int | None = None
    opened_values: int = 0
    beaver_muls: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "variant": self.variant,
                "verdict": self.verdict,
                "beta": self.beta,
                "rho": list(self.rho),
                "blamed": self.blamed,
                "opened_values": self.opened_values,
                "beaver_muls": self.beaver_muls,
            }
        )


class PocProver:
    """Prover state: the plaintext vector and its decommitment randomness
    (a scalar, or one value per element for the pedersen variant)."""

    def __init__(self, pp: PocParams, x: list[int], r, rng: random.Random):
        self.pp = pp
        self.x = [v % pp.backend.order for v in x]
        self.r = r
        self.rng = rng


def poc_check_poly(
    abb: Abb,
    pp: PocParams,
    commitment: PocCommitment,
    shared_x: SharedVector,
    prover: PocProver,
    identifiable: bool = False,
    prover_party: int | str | None = None,
) -> CheckTranscript:
    """The consistency check for the polynomial backend.

    Per chunk: the prover broadcasts a commitment to a fresh degree-0
    masking polynomial (choosing its randomizer as the negation of the
    data commitment's, so the two hiding terms cancel in the sum), the
    parties then draw the public challenge, locally evaluate the masked
    coefficient polynomial on their shares and open the single value rho;
    the prover's opening proof on the combined commitment is verified
    with one pairing equation per chunk.

    MPC cost per check: one shared input, one public coin, one local
    linear combination and one opened value -- independent of d.
    """
    p = pp.backend.order
    chunks = _chunk(prover.x, pp.chunk_capacity)
    rs = _chunk_randomness(pp, prover.r, len(chunks))
    if len(commitment.points) != len(chunks):
        return CheckTranscript("poly", False, blamed=prover_party if identifiable else None)

    opened0 = abb.opened_values
    muls0 = abb.beaver_muls

    # step 1: masks are committed (and input to the ABB) before the coin
    omegas = [prover.rng.randrange(p) for _ in chunks]
    c_omega = tuple(
        cm.kzg_commit(pp.kzg, Polynomial([w], p), -rj % p)
        for w, rj in zip(omegas, rs)
    )
    shared_omega = abb.input(
        prover_party if prover_party is not None else 0, omegas
    )

    # step 2: public challenge, drawn only after c_omega is fixed
    beta = abb.rand_coin()

    # step 3: rho_j = omega_j + sum_i x_i beta^i, one local lincomb + open
    coeffs = []
    acc = 1
    for _ in range(pp.chunk_capacity):
        acc = acc * beta % p
        coeffs.append(acc)
    rho_rows = []
    offset = 0
    for ch in chunks:
        rho_rows.append((offset, len(ch)))
        offset += len(ch)
    # build per-chunk selector lincomb over the single shared vector:
    # each chunk's rho share = omega_j + sum over its slice
    n = abb.n
    mod = p
    rho_shares = []
    for i in range(n):
        xs = shared_x.shares[i]
        row = []
        for j, (off, ln) in enumerate(rho_rows):
            s = shared_omega.shares[i][j]
            for e in range(ln):
                s = (s + coeffs[e] * xs[off + e]) % mod
            row.append(s)
        rho_shares.append(tuple(row))
    tag = shared_x.corrupted_by
    if tag is None:
        tag = shared_omega.corrupted_by
    rho_vec = SharedVector(abb.domain, tuple(rho_shares), tag)
    try:
        rho = abb.open(rho_vec)
    except IdentifiedAbort as abort:
        return CheckTranscript(
            "poly", False, beta=beta, c_omega=c_omega, blamed=abort.party,
            opened_values=abb.opened_values - opened0,
            beaver_muls=abb.beaver_muls - muls0,
        )

    # step 4: opening proofs on the combined commitments
    openings = []
    ok = True
    for j, (ch, rj, w) in enumerate(zip(chunks, rs, omegas)):
        combined_poly = coefficient_polynomial(ch, p) + Polynomial([w], p)
        c_sum = cm.kzg_commitment_add(pp.backend, commitment.points[j], c_omega[j])
        try:
            pi = cm.kzg_prove(pp.kzg, c_sum, combined_poly, 0, beta, rho[j])
        except NonZeroRemainder:
            # the prover cannot open to the MPC value; submit a void proof
            pi = cm.Opening(pp.backend.g1_identity())
        openings.append(pi)
        # step 5: each verifier checks the pairing equation
        if not cm.kzg_check(pp.kzg, c_sum, beta, rho[j], pi):
            ok = False
    blamed = None
    if not ok and identifiable:
        blamed = prover_party  # reject with a valid open: the prover lied
    return CheckTranscript(
        "poly",
        ok,
        beta=beta,
        rho=tuple(rho),
        c_omega=c_omega,
        openings=tuple(openings),
        blamed=blamed,
        opened_values=abb.opened_values - opened0,
        beaver_muls=abb.beaver_muls - muls0,
    )


def _mpc_pow(abb: Abb, base: SharedVector, e: int) -> SharedVector:
    """Shared x^e by square-and-multiply (O(log e) Beaver rounds)."""
    result = None
    acc = base
    while e:
        if e & 1:
            result = acc if result is None else abb.mul(result, acc)
        e >>= 1
        if e:
            acc = abb.mul(acc, acc)
    return result


def mpc_hash_permute(abb: Abb, hp: cm.HashParams, state: SharedVector) -> SharedVector:
    """The power-map permutation on a shared state; a few Beaver muls per
    round (two for the cube, three for the fifth power).

    This is the hot loop of the hash backend -- the Beaver steps run
    inline on raw share rows, with the same counter accounting as
    Abb.mul, to keep large-d checks tractable.
    """
    mod = abb.domain.mod
    n = abb.n
    lanes = state.length
    nbits = mod.bit_length() + 32
    rand = abb.dealer.rng.getrandbits
    elem_bytes = abb._elem_bytes
    rows = [list(r) for r in state.shares]

    def beaver_rows(xr, yr):
        abb.beaver_muls += lanes
        abb._round("beaver", 2 * lanes * elem_bytes * (n - 1))
        out = [[0] * lanes for _ in range(n)]
        for j in range(lanes):
            alpha = rand(nbits) % mod
            beta = rand(nbits) % mod
            gamma = alpha * beta % mod
            x = 0
            y = 0
            for i in range(n):
                x += xr[i][j]
                y += yr[i][j]
            d = (x - alpha) % mod
            e2 = (y - beta) % mod
            acc_a = acc_b = acc_c = 0
            for i in range(1, n):
                ta = rand(nbits) % mod
                tb = rand(nbits) % mod
                tc = rand(nbits) % mod
                acc_a += ta
                acc_b += tb
                acc_c += tc
                out[i][j] = (tc + d * tb + e2 * ta) % mod
            out[0][j] = (
                gamma - acc_c + d * (beta - acc_b) + e2 * (alpha - acc_a) + d * e2
            ) % mod
        return out

    exponent = hp.exponent
    for k in hp.round_constants:
        row0 = rows[0]
        for j in range(lanes):
            row0[j] = (row0[j] + k) % mod
        result = None
        acc = rows
        e = exponent
        while e:
            if e & 1:
                result = acc if result is None else beaver_rows(result, acc)
            e >>= 1
            if e:
                acc = beaver_rows(acc, acc)
        rows = result
    return SharedVector(
        abb.domain, tuple(tuple(r) for r in rows), state.corrupted_by
    )


def mpc_sponge(
    abb: Abb, hp: cm.HashParams, shared_x: SharedVector, shared_r: SharedVector
) -> SharedVector:
    """hash_commit evaluated on shares; mirrors the plaintext sponge."""
    state = abb.add_const(shared_r, [shared_x.length])
    state = mpc_hash_permute(abb, hp, state)
    for e in range(shared_x.length):
        elem = SharedVector(
            abb.domain,
            tuple((sh[e],) for sh in shared_x.shares),
            shared_x.corrupted_by,
        )
        state = mpc_hash_permute(abb, hp, abb.lincomb([1, 1], [state, elem]))
    return state


def poc_check_hash(
    abb: Abb,
    pp: PocParams,
    commitment: PocCommitment,
    shared_x: SharedVector,
    prover: PocProver,
    identifiable: bool = False,
    prover_party: int | str | None = None,
) -> CheckTranscript:
    """Strawman check: recompute the sponge over the shares inside the ABB.

    Every cubing costs two Beaver multiplications, so the MPC work grows
    linearly in d (times the permutation rounds).
    """
    opened0 = abb.opened_values
    muls0 = abb.beaver_muls
    shared_r = abb.input(
        prover_party if prover_party is not None else 0, [prover.r]
    )
    try:
        digest = abb.open(mpc_sponge(abb, pp.hash, shared_x, shared_r))[0]
    except IdentifiedAbort as abort:
        return CheckTranscript(
            "hash", False, blamed=abort.party,
            opened_values=abb.opened_values - opened0,
            beaver_muls=abb.beaver_muls - muls0,
        )
    ok = digest == commitment.digest
    blamed = prover_party if (not ok and identifiable) else None
    return CheckTranscript(
        "hash", ok, blamed=blamed,
        opened_values=abb.opened_values - opened0,
        beaver_muls=abb.beaver_muls - muls0,
    )


def poc_check_pedersen(
    abb: Abb,
    pp: PocParams,
    commitment: PocCommitment,
    shared_x: SharedVector,
    prover: PocProver,
    identifiable: bool = False,
    prover_party: int | str | None = None,
) -> CheckTranscript:
    """Folded homomorphic check: one distributed commitment in MPC, a
    local fold of the stored per-element commitments, and a comparison."""
    p = pp.backend.order
    d = shared_x.length
    if len(commitment.elements) != d:
        return CheckTranscript(
            "pedersen", False, blamed=prover_party if identifiable else None
        )
    opened0 = abb.opened_values
    muls0 = abb.beaver_muls
    rs = _element_randomness(pp, prover.r, d)
    shared_rs = abb.input(
        prover_party if prover_party is not None else 0, rs
    )
    beta = abb.rand_coin()
    coeffs = []
    acc = 1
    for _ in range(d):
        coeffs.append(acc)
        acc = acc * beta % p
    # local fold of shares: x~ = sum beta^(i-1) x_i, r~ likewise
    n = abb.n
    fold_shares = []
    for i in range(n):
        xs = shared_x.shares[i]
        rr = shared_rs.shares[i]
        xt = 0
        rt = 0
        for e in range(d):
            xt = (xt + coeffs[e] * xs[e]) % p
            rt = (rt + coeffs[e] * rr[e]) % p
        fold_shares.append((xt, rt))
    tag = shared_x.corrupted_by if shared_x.corrupted_by is not None else shared_rs.corrupted_by
    x_fold = SharedVector(abb.domain, tuple((s[0],) for s in fold_shares), tag)
    r_fold = SharedVector(abb.domain, tuple((s[1],) for s in fold_shares), tag)
    try:
        c_prime = dist_commit_pedersen(abb, pp.pedersen, x_fold, r_fold)
    except IdentifiedAbort as abort:
        return CheckTranscript(
            "pedersen", False, beta=beta, blamed=abort.party,
            opened_values=abb.opened_values - opened0,
            beaver_muls=abb.beaver_muls - muls0,
        )
    # verifiers fold the stored commitments locally
    backend = pp.backend
    c_tilde = backend.g1_msm(coeffs, list(commitment.elements))
    ok = backend.g1_eq(c_tilde, c_prime)
    blamed = prover_party if (not ok and identifiable) else None
    return CheckTranscript(
        "pedersen", ok, beta=beta, blamed=blamed,
        opened_values=abb.opened_values - opened0,
        beaver_muls=abb.beaver_muls - muls0,
    )


_CHECKS = {
    "poly": poc_check_poly,
    "hash": poc_check_hash,
    "pedersen": poc_check_pedersen,
}


def poc_check(abb, pp, commitment, shared_x, prover, **kw) -> CheckTranscript:
    return _CHECKS[pp.variant](abb, pp, commitment, shared_x, prover, **kw)


# ---------------------------------------------------------------------------
# Distributed commitment to a shared vector (the MPC output-commit path)
# ---------------------------------------------------------------------------


def dist_commit(
    abb: Abb, pp: PocParams, shared_x: SharedVector, shared_r: SharedVector
) -> PocCommitment:
    """Commit to a secret-shared vector; equals poc_commit of the
    reconstructed vector with the reconstructed randomness.

    poly and pedersen run over the group directly (each party commits to
    its shares locally, one group-element opening); hash recomputes the
    sponge under MPC.  Per-element pedersen randomness derives from the
    shared scalar through the permutation chain, also under MPC.
    """
    from .mpc import dist_commit_kzg

    if pp.variant == "poly":
        if shared_x.length > pp.chunk_capacity:
            raise PocError("shared vector exceeds single-chunk capacity")
        return PocCommitment("poly", points=(dist_commit_kzg(abb, pp.kzg, shared_x, shared_r),))
    if pp.variant == "hash":
        digest = abb.open(mpc_sponge(abb, pp.hash, shared_x, shared_r))[0]
        return PocCommitment("hash", digest=digest)
    if pp.variant == "pedersen":
        # shared_r carries one decommitment value per element; each party
        # commits to its share slice locally and one batched group-element
        # opening yields all d commitments
        d = shared_x.length
        if shared_r.length != d:
            raise PocError("pedersen dist-commit needs per-element randomness")
        backend = pp.backend
        h0, h1 = pp.pedersen.generators[0], pp.pedersen.generators[1]
        share_points = []
        for i in range(abb.n):
            share_points.append([
                backend.g1_msm(
                    [shared_r.shares[i][e], shared_x.shares[i][e]], [h0, h1]
                )
                for e in range(d)
            ])
        elems = []
        for e in range(d):
            acc = backend.g1_identity()
            for i in range(abb.n):
                acc = backend.g1_add(acc, share_points[i][e])
            elems.append(acc)
        abb._round("open-g1-batch", backend.g1_bytes_len * d * (abb.n - 1))
        abb.opened_values += d
        return PocCommitment("pedersen", elements=tuple(elems))
    raise PocError(pp.variant)


def _single_slot(pp: PocParams):
    """Pedersen params restricted to (h0, h1) for one-element commits."""
    return cm.PedersenParams(pp.backend, pp.pedersen.generators[:2])


# ---------------------------------------------------------------------------
# Batch verification of polynomial openings
# ---------------------------------------------------------------------------


def batch_verify(
    pp: PocParams,
    commitments: list[cm.KzgCommitment],
    rhos: list[int],
    openings: list[cm.Opening],
    beta: int,
    gamma: int,
) -> tuple[bool, set[int]]:
    """Aggregate N openings at a common challenge into one pairing check.

    c~ = sum gamma^i c_i, rho~ = sum gamma^i rho_i, pi~ = sum gamma^i pi_i.
    On failure, falls back to individual checks and returns the set of
    failing indices.
    """
    backend = pp.backend
    p = backend.order
    n = len(commitments)
    if not (n == len(rhos) == len(openings)):
        raise PocError("batch length mismatch")
    weights = []
    acc = 1
    for _ in range(n):
        acc = acc * gamma % p
        weights.append(acc)
    c_tilde = cm.KzgCommitment(
        backend.g1_msm(weights, [c.point for c in commitments])
    )
    rho_tilde = sum(w * r for w, r in zip(weights, rhos)) % p
    pi_tilde = cm.Opening(backend.g1_msm(weights, [o.point for o in openings]))
    if cm.kzg_check(pp.kzg, c_tilde, beta, rho_tilde, pi_tilde):
        return True, set()
    failing = {
        i
        for i in range(n)
        if not cm.kzg_check(pp.kzg, commitments[i], beta, rhos[i], openings[i])
    }
    return False, failing
