"""Simulated arithmetic black box over N parties.

Additive secret sharing in F_p and Z_{2^k} with a trusted dealer for
correlated randomness (Beaver triples, edaBits, coins).  Parties execute
on a single-threaded lockstep scheduler; given a seed the transcript is
bit-identical across runs.  Opening carries per-party contribution tags
so the identifiable-abort mode can name a tampering party.

Cost accounting: linear combinations are local (0 rounds), each
multiplication batch and each open contributes one round; the counters
back the protocol-cost assertions in the test suite.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .algebra import stable_seed

ROLES = ("DH", "M", "C", "TC", "IC", "AC")


@dataclass(frozen=True)
class PartyId:
    index: int
    role: str = "TC"

    def __str__(self) -> str:
        return f"{self.role}_{self.index}"


class MpcError(Exception):
    pass


class RangeViolation(MpcError):
    pass


class TripleExhaustion(MpcError):
    pass


class IdentifiedAbort(MpcError):
    """Raised by the [ID] functionality when a tampered share is opened."""

    def __init__(self, party: int, reason: str):
        super().__init__(f"party {party} misbehaved: {reason}")
        self.party = party
        self.reason = reason


@dataclass(frozen=True)
class Domain:
    kind: str  # "field" | "ring"
    mod: int

    @staticmethod
    def field(p: int) -> "Domain":
        return Domain("field", p)

    @staticmethod
    def ring(k: int = 64) -> "Domain":
        return Domain("ring", 1 << k)

    @property
    def bits(self) -> int:
        return self.mod.bit_length() - (1 if self.kind == "ring" else 0)


@dataclass(frozen=True)
class SharedVector:
    """Per-party additive share vectors of a secret vector.

    ``corrupted_by`` tags a value derived from a tampered share; the tag
    propagates through local arithmetic so the [ID] functionality can
    assign blame at opening time.
    """

    domain: Domain
    shares: tuple[tuple[int, ...], ...]  # [party][element]
    corrupted_by: int | None = None

    @property
    def length(self) -> int:
        return len(self.shares[0])

    @property
    def n_parties(self) -> int:
        return len(self.shares)


@dataclass(frozen=True)
class SharedBits:
    """XOR-shared bit matrix, position-major and lane-packed.

    ``masks[j][i]`` is party i's share of bit position j for all lanes,
    packed as an integer bitmask (lane v lives at bit v).
    """

    masks: tuple[tuple[int, ...], ...]  # [position][party]
    lanes: int

    @property
    def width(self) -> int:
        return len(self.masks)


class TrustedDealer:
    """Generates correlated randomness; optionally with a finite triple pool."""

    def __init__(self, n: int, seed=0, triple_budget: int | None = None):
        self.n = n
        self.rng = random.Random(stable_seed("dealer", seed))
        self.triple_budget = triple_budget

    def share(self, domain: Domain, values: list[int]) -> tuple[tuple[int, ...], ...]:
        mod = domain.mod
        shares = [
            [self.rng.randrange(mod) for _ in values] for _ in range(self.n - 1)
        ]
        last = [
            (v - sum(col)) % mod
            for v, col in zip(values, zip(*shares) if shares else [()] * len(values))
        ]
        if self.n == 1:
            last = [v % mod for v in values]
        shares.append(last)
        return tuple(tuple(s) for s in shares)

    def triples(self, domain: Domain, count: int):
        if self.triple_budget is not None:
            if self.triple_budget < count:
                raise TripleExhaustion("dealer triple pool exhausted")
            self.triple_budget -= count
        mod = domain.mod
        a = [self.rng.randrange(mod) for _ in range(count)]
        b = [self.rng.randrange(mod) for _ in range(count)]
        c = [x * y % mod for x, y in zip(a, b)]
        return (
            self.share(domain, a),
            self.share(domain, b),
            self.share(domain, c),
        )

    def bin_triple(self, lanes: int):
        """Packed GF(2) Beaver triple over ``lanes`` parallel bit lanes."""
        full = (1 << lanes) - 1
        a = self.rng.getrandbits(lanes) & full
        b = self.rng.getrandbits(lanes) & full
        c = a & b
        return (
            self._share_mask(a, lanes),
            self._share_mask(b, lanes),
            self._share_mask(c, lanes),
        )

    def _share_mask(self, value: int, lanes: int) -> tuple[int, ...]:
        shares = [self.rng.getrandbits(lanes) for _ in range(self.n - 1)]
        acc = 0
        for s in shares:
            acc ^= s
        shares.append(acc ^ value)
        return tuple(shares)

    def edabits(self, domain: Domain, nbits: int, lanes: int):
        """Per-lane random r < 2^nbits shared in ``domain`` plus its bits in Z_2."""
        rs = [self.rng.getrandbits(nbits) for _ in range(lanes)]
        arith = self.share(domain, rs)
        positions = []
        for j in range(nbits):
            mask = 0
            for v, r in enumerate(rs):
                mask |= ((r >> j) & 1) << v
            positions.append(self._share_mask(mask, lanes))
        return SharedVector(domain, arith), SharedBits(tuple(positions), lanes)

    def coin(self, mod: int) -> int:
        return self.rng.randrange(mod)


class Abb:
    """The simulated F_ABB (optionally F_ABB[ID]) for one protocol phase."""

    def __init__(
        self,
        n_parties: int,
        domain: Domain,
        seed: int = 0,
        identifiable: bool = False,
        dealer: TrustedDealer | None = None,
        label: str = "abb",
    ):
        self.n = n_parties
        self.domain = domain
        self.identifiable = identifiable
        self.dealer = dealer or TrustedDealer(n_parties, seed)
        self.label = label
        self.rounds = 0
        self.opened_values = 0
        self.beaver_muls = 0
        self.bin_ands = 0
        self.inputs = 0
        self.coins = 0
        self.bytes_per_party = [0] * n_parties
        self.transcript: list[dict] = []
        self.transcript_cap = 10_000  # counters stay exact beyond the cap
        self._elem_bytes = (domain.mod.bit_length() + 7) // 8

    # -- bookkeeping ---------------------------------------------------
    def _round(self, kind: str, nbytes_each: int) -> None:
        self.rounds += 1
        total = nbytes_each
        bpp = self.bytes_per_party
        for i in range(self.n):
            bpp[i] += total
        if len(self.transcript) < self.transcript_cap:
            self.transcript.append(
                {"round": self.rounds, "kind": kind, "bytes_per_party": nbytes_each}
            )

    def dump_transcript(self) -> str:
        return json.dumps(
            {
                "label": self.label,
                "parties": self.n,
                "rounds": self.rounds,
                "opened_values": self.opened_values,
                "beaver_muls": self.beaver_muls,
                "bytes_per_party": self.bytes_per_party,
                "events_recorded": len(self.transcript),
                "events": self.transcript,
            },
            indent=2,
        )

    def counters(self) -> dict:
        return {
            "rounds": self.rounds,
            "opened_values": self.opened_values,
            "beaver_muls": self.beaver_muls,
            "bin_ands": self.bin_ands,
            "inputs": self.inputs,
            "coins": self.coins,
        }

    # -- core ABB interface ---------------------------------------------
    def input(self, owner: int | str, values: list[int]) -> SharedVector:
        """Fresh additive sharing of the owner's values."""
        vals = [v % self.domain.mod for v in values]
        self.inputs += 1
        self._round(f"input:{owner}", len(vals) * self._elem_bytes)
        return SharedVector(self.domain, self.dealer.share(self.domain, vals))

    def reconstruct(self, v: SharedVector) -> list[int]:
        """Test-mode reconstruction; not part of the party-visible API."""
        mod = self.domain.mod
        return [sum(col) % mod for col in zip(*v.shares)]

    def open(self, v: SharedVector, to: set[int] | None = None) -> list[int] | None:
        """Open to the given parties (all by default); empty set is a no-op.

        In [ID] mode a vector derived from a tampered share aborts with
        the tampering party's identity.
        """
        if to is not None and len(to) == 0:
            return None
        if v.corrupted_by is not None and self.identifiable:
            raise IdentifiedAbort(v.corrupted_by, "inconsistent share in opening")
        self.opened_values += v.length
        self._round("open", v.length * self._elem_bytes * (self.n - 1))
        return self.reconstruct(v)

    def lincomb(
        self,
        coeffs: list[int],
        vectors: list[SharedVector],
        const: list[int] | None = None,
    ) -> SharedVector:
        """sum(coeffs[j] * vectors[j]) + const; local, zero rounds."""
        if not vectors:
            raise MpcError("empty linear combination")
        mod = self.domain.mod
        length = vectors[0].length
        for v in vectors:
            if v.domain != self.domain:
                raise MpcError("domain mismatch in linear combination")
            if v.length != length:
                raise MpcError("length mismatch in linear combination")
        out = []
        for i in range(self.n):
            row = [0] * length
            for coef, vec in zip(coeffs, vectors):
                sh = vec.shares[i]
                for e in range(length):
                    row[e] = (row[e] + coef * sh[e]) % mod
            if i == 0 and const is not None:
                for e in range(length):
                    row[e] = (row[e] + const[e]) % mod
            out.append(tuple(row))
        tag = next((v.corrupted_by for v in vectors if v.corrupted_by is not None), None)
        return SharedVector(self.domain, tuple(out), tag)

    def add_const(self, v: SharedVector, const: list[int]) -> SharedVector:
        return self.lincomb([1], [v], const)

    def mul(self, a: SharedVector, b: SharedVector) -> SharedVector:
        """Beaver multiplication; one communication round per batch."""
        if a.domain != b.domain or a.domain != self.domain:
            raise MpcError("domain mismatch in multiplication")
        length = a.length
        if length != b.length:
            raise MpcError("length mismatch in multiplication")
        mod = self.domain.mod
        n = self.n
        # getrandbits with headroom: cheap, uniform enough for dealer
        # correlations (correctness never depends on the distribution)
        nbits = mod.bit_length() + 32
        rand = self.dealer.rng.getrandbits
        if self.dealer.triple_budget is not None:
            if self.dealer.triple_budget < length:
                raise TripleExhaustion("dealer triple pool exhausted")
            self.dealer.triple_budget -= length
        self.beaver_muls += length
        self._round("beaver", 2 * length * self._elem_bytes * (n - 1))
        out = [[0] * length for _ in range(n)]
        a_sh = a.shares
        b_sh = b.shares
        for j in range(length):
            # triple (alpha, beta, alpha*beta), freshly shared
            alpha = rand(nbits) % mod
            beta = rand(nbits) % mod
            gamma = alpha * beta % mod
            x = 0
            y = 0
            for i in range(n):
                x += a_sh[i][j]
                y += b_sh[i][j]
            d = (x - alpha) % mod
            e = (y - beta) % mod
            acc_a = 0
            acc_b = 0
            acc_c = 0
            for i in range(1, n):
                ta = rand(nbits) % mod
                tb = rand(nbits) % mod
                tc = rand(nbits) % mod
                acc_a += ta
                acc_b += tb
                acc_c += tc
                out[i][j] = (tc + d * tb + e * ta) % mod
            ta0 = (alpha - acc_a) % mod
            tb0 = (beta - acc_b) % mod
            tc0 = (gamma - acc_c) % mod
            out[0][j] = (tc0 + d * tb0 + e * ta0 + d * e) % mod
        tag = a.corrupted_by if a.corrupted_by is not None else b.corrupted_by
        return SharedVector(self.domain, tuple(tuple(r) for r in out), tag)

    coin_corruption: tuple[int, int] | None = None  # test hook (party, delta)

    def rand_coin(self) -> int:
        """Public coin, identical at all parties; the lockstep bus asserts
        agreement across the per-party views on every draw."""
        self.coins += 1
        value = self.dealer.coin(self.domain.mod)
        self._round("coin", self._elem_bytes)
        views = [value] * self.n
        if self.coin_corruption is not None:
            party, delta = self.coin_corruption
            views[party] = (views[party] + delta) % self.domain.mod
        assert all(v == views[0] for v in views), "public coin disagreement"
        return value

    def rand_shared(self, length: int = 1, bound: int | None = None) -> SharedVector:
        values = [
            self.dealer.coin(bound if bound else self.domain.mod)
            for _ in range(length)
        ]
        self._round("rand-shared", length * self._elem_bytes)
        return SharedVector(self.domain, self.dealer.share(self.domain, values))

    def ideal_op(self, name: str, fn, *vectors: SharedVector) -> SharedVector:
        """Higher-order ABB primitive (truncation, comparison, argsort...).

        The ideal functionality applies ``fn`` to the reconstructed
        secrets and re-shares the result.  Counts one round.
        """
        for v in vectors:
            if v.corrupted_by is not None and self.identifiable:
                raise IdentifiedAbort(v.corrupted_by, f"tampered input to {name}")
        secrets = [self.reconstruct(v) for v in vectors]
        result = fn(*secrets)
        result = [int(x) % self.domain.mod for x in result]
        self._round(f"ideal:{name}", len(result) * self._elem_bytes)
        tag = next((v.corrupted_by for v in vectors if v.corrupted_by is not None), None)
        return SharedVector(self.domain, self.dealer.share(self.domain, result), tag)

    # -- tamper hooks (test mode) ----------------------------------------
    def corrupt_share(
        self, v: SharedVector, party: int, index: int = 0, delta: int = 1
    ) -> SharedVector:
        """Return a copy of v in which ``party``'s share of element ``index``
        is offset by delta; the result reconstructs incorrectly."""
        mod = self.domain.mod
        rows = [list(r) for r in v.shares]
        rows[party][index] = (rows[party][index] + delta) % mod
        return SharedVector(self.domain, tuple(tuple(r) for r in rows), party)

    # -- binary subsystem (XOR sharing, packed lanes) ---------------------
    def bin_xor(self, a: SharedBits, b: SharedBits) -> SharedBits:
        if a.lanes != b.lanes or a.width != b.width:
            raise MpcError("binary operand mismatch")
        masks = tuple(
            tuple(x ^ y for x, y in zip(ra, rb)) for ra, rb in zip(a.masks, b.masks)
        )
        return SharedBits(masks, a.lanes)

    def bin_and_position(
        self, a_pos: tuple[int, ...], b_pos: tuple[int, ...], lanes: int
    ) -> tuple[int, ...]:
        """GF(2) Beaver AND of one bit position across all lanes."""
        ta, tb, tc = self.dealer.bin_triple(lanes)
        d = 0
        e = 0
        for i in range(self.n):
            d ^= a_pos[i] ^ ta[i]
            e ^= b_pos[i] ^ tb[i]
        self.bin_ands += 1
        self._round("bin-and", 2 * ((lanes + 7) // 8) * (self.n - 1))
        out = []
        for i in range(self.n):
            z = tc[i] ^ (d & tb[i]) ^ (e & ta[i])
            if i == 0:
                z ^= d & e
            out.append(z)
        return tuple(out)

    def bin_open(self, bits: SharedBits) -> list[int]:
        """Open all positions; returns per-lane integers."""
        lanes = bits.lanes
        values = [0] * lanes
        for j, pos in enumerate(bits.masks):
            mask = 0
            for share in pos:
                mask ^= share
            for v in range(lanes):
                if (mask >> v) & 1:
                    values[v] |= 1 << j
        self.opened_values += lanes
        self._round("bin-open", bits.width * ((lanes + 7) // 8) * (self.n - 1))
        return values

    def bin_zero(self, lanes: int) -> tuple[int, ...]:
        return tuple(0 for _ in range(self.n))

    def bin_add(self, a: SharedBits, b: SharedBits, out_width: int) -> SharedBits:
        """Ripple-carry adder on shared bits; both addends secret.

        Costs two ANDs per position: carry' = (a&b) ^ (carry & (a^b)).
        """
        lanes = a.lanes
        width = max(a.width, b.width)
        zero = self.bin_zero(lanes)
        carry = zero
        out = []
        for j in range(min(out_width, width + 1)):
            aj = a.masks[j] if j < a.width else zero
            bj = b.masks[j] if j < b.width else zero
            axb = tuple(x ^ y for x, y in zip(aj, bj))
            s = tuple(x ^ y for x, y in zip(axb, carry))
            out.append(s)
            if j < out_width - 1:
                g = self.bin_and_position(aj, bj, lanes)
                pr = self.bin_and_position(carry, axb, lanes)
                carry = tuple(x ^ y for x, y in zip(g, pr))
        return SharedBits(tuple(out), lanes)

    def bin_sub_public(
        self, minuend: list[int], b: SharedBits, out_width: int
    ) -> SharedBits:
        """Bits of (public minuend - shared b) mod 2^out_width, per lane.

        One AND per position: with public bit a, borrow' = b&bw when a=1
        and b|bw when a=0, sharing the single AND t = b&bw.
        """
        lanes = b.lanes
        full = (1 << lanes) - 1
        zero = self.bin_zero(lanes)
        borrow = zero
        out = []
        for j in range(out_width):
            a_mask = 0
            for v, m in enumerate(minuend):
                a_mask |= ((m >> j) & 1) << v
            bj = b.masks[j] if j < b.width else zero
            # diff = a ^ b ^ borrow (a is public: party 0 folds it in)
            d = tuple(
                (x ^ y ^ (a_mask if i == 0 else 0)) & full
                for i, (x, y) in enumerate(zip(bj, borrow))
            )
            out.append(d)
            if j < out_width - 1:
                t = self.bin_and_position(bj, borrow, lanes)
                # borrow' = a ? b&bw : b^bw^(b&bw)
                borrow = tuple(
                    ((a_mask & tt) ^ (~a_mask & (x ^ y ^ tt))) & full
                    for tt, x, y in zip(t, bj, borrow)
                )
        return SharedBits(tuple(out), lanes)


# ---------------------------------------------------------------------------
# Share conversion between Z_{2^k} and F_p (edaBit bit decomposition)
# ---------------------------------------------------------------------------


def _decompose_to_bits(
    abb: Abb, v: SharedVector, ell: int, kappa: int
) -> SharedBits:
    """Shared bits of v (valid range [0, 2^ell)) via a masked opening.

    Opens epsilon = v + r for an edaBit r; the opened value hides v with
    statistical distance 2^-kappa (perfectly, when the mask spans the
    whole domain).  Bits are recovered with a binary subtractor.
    """
    domain = abb.domain
    lanes = v.length
    if domain.kind == "ring":
        nbits = min(ell + kappa, domain.bits)
        sub_width = ell  # (eps - r) mod 2^k: low bits self-consistent
    else:
        if (1 << (ell + kappa + 1)) >= domain.mod:
            raise RangeViolation("2^(ell+kappa+1) must be below the field modulus")
        nbits = ell + kappa
        sub_width = ell  # eps - r = v exactly over the integers
    r_arith, r_bits = abb.dealer.edabits(domain, nbits, lanes)
    eps_shared = abb.lincomb([1, 1], [v, r_arith])
    eps = abb.open(eps_shared)
    return abb.bin_sub_public(eps, r_bits, sub_width)


def _recompose_from_bits(abb_out: Abb, bits: SharedBits, ell: int, kappa: int) -> SharedVector:
    """Shared value in the output domain from shared bits.

    Masks the bits with a second edaBit r' through a binary adder, opens
    the masked sum (carry included so the integer identity is exact), and
    locally computes eps' - r'.
    """
    domain = abb_out.domain
    lanes = bits.lanes
    if domain.kind == "ring":
        nbits = min(ell + kappa, domain.bits)
    else:
        nbits = ell + kappa
    rp_arith, rp_bits = abb_out.dealer.edabits(domain, nbits, lanes)
    width = max(bits.width, nbits) + 1
    masked = abb_out.bin_add(bits, rp_bits, width)
    eps = abb_out.bin_open(masked)
    neg = abb_out.lincomb([-1], [rp_arith], const=eps)
    return neg


def share_convert_ring_to_field(
    abb_ring: Abb,
    abb_field: Abb,
    v: SharedVector,
    ell: int = 64,
    kappa: int = 40,
) -> SharedVector:
    """Convert signed values |x| < 2^(ell-1) from Z_{2^k} into F_p.

    Shifts up by 2^(ell-1) so the value fits in ell bits, decomposes,
    recomposes in the field and shifts back; negatives land on p - |x|.
    """
    if abb_ring.domain.kind != "ring" or abb_field.domain.kind != "field":
        raise MpcError("expected (ring, field) ABB pair")
    half = 1 << (ell - 1)
    secrets = abb_ring.reconstruct(v)
    k = abb_ring.domain.bits
    for s in secrets:
        signed = s - (1 << k) if s >= (1 << (k - 1)) else s
        if not (-half <= signed < half):
            raise RangeViolation(f"value {signed} outside [-2^{ell-1}, 2^{ell-1})")
    shifted = abb_ring.add_const(v, [half] * v.length)
    bits = _decompose_to_bits(abb_ring, shifted, ell, kappa)
    out = _recompose_from_bits(abb_field, bits, ell, kappa)
    return abb_field.add_const(out, [-half % abb_field.domain.mod] * v.length)


def share_convert_field_to_ring(
    abb_field: Abb,
    abb_ring: Abb,
    v: SharedVector,
    ell: int = 64,
    kappa: int = 40,
) -> SharedVector:
    """Inverse conversion; field residues p - |x| map back to negatives."""
    if abb_ring.domain.kind != "ring" or abb_field.domain.kind != "field":
        raise MpcError("expected (field, ring) ABB pair")
    half = 1 << (ell - 1)
    p = abb_field.domain.mod
    secrets = abb_field.reconstruct(v)
    for s in secrets:
        if not (s < half or p - s <= half):
            raise RangeViolation("field value outside signed conversion range")
    shifted = abb_field.add_const(v, [half] * v.length)
    bits = _decompose_to_bits(abb_field, shifted, ell, kappa)
    out = _recompose_from_bits(abb_ring, bits, ell, kappa)
    return abb_ring.add_const(out, [-half % abb_ring.domain.mod] * v.length)


# ---------------------------------------------------------------------------
# EC-MPC: distributed commitments on shared vectors
# ---------------------------------------------------------------------------


def open_group_shares(abb: Abb, backend, g1_shares: list):
    """Open an additively shared group element (one group-element round)."""
    acc = backend.g1_identity()
    for s in g1_shares:
        acc = backend.g1_add(acc, s)
    abb._round("open-g1", backend.g1_bytes_len * (abb.n - 1))
    abb.opened_values += 1
    return acc


def dist_commit_pedersen(abb: Abb, pp, v: SharedVector, r: SharedVector):
    """Each party commits to its shares locally; the G1 shares sum to the
    Pedersen commitment of the reconstructed vector."""
    backend = pp.backend
    gens = pp.generators[: v.length + 1]
    shares = []
    for i in range(abb.n):
        scalars = [r.shares[i][0]] + list(v.shares[i])
        shares.append(backend.g1_msm(scalars, gens))
    return open_group_shares(abb, backend, shares)


def dist_commit_kzg(abb: Abb, pp, v: SharedVector, r: SharedVector):
    """Distributed KZG commit to the coefficient polynomial of v.

    Coefficient i+1 carries v[i] (constant term fixed at zero) and the
    top power carries the shared randomizer, matching the centralized
    poc commit layout.
    """
    from .commit import CommitError, KzgCommitment

    backend = pp.backend
    if v.length > pp.max_degree - 1:
        raise CommitError("shared vector exceeds commitment capacity")
    bases = pp.powers_g1[1 : v.length + 1] + [pp.powers_g1[pp.max_degree]]
    shares = []
    for i in range(abb.n):
        scalars = list(v.shares[i]) + [r.shares[i][0]]
        shares.append(backend.g1_msm(scalars, bases))
    return KzgCommitment(open_group_shares(abb, backend, shares))
