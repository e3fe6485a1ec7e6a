import math
import random

import pytest

from arc import commit as cm
from arc.algebra import NonZeroRemainder, Polynomial
from arc.groups import ArkworksBackend, MockBackend


def mock_setup(d=3, alpha=5, p=101):
    backend = MockBackend(p)
    return backend, cm.kzg_setup(backend, d, seed=0, alpha=alpha)


class TestKzgSetup:
    def test_forced_alpha_powers(self):
        backend, pp = mock_setup(d=2)
        assert [pt.value for pt in pp.powers_g1] == [1, 5, 25]

    def test_structure_d1(self):
        backend, pp = mock_setup(d=1)
        assert len(pp.powers_g1) == 2
        assert pp.alpha_g2 is not None

    def test_deterministic_under_seed(self):
        backend = MockBackend(101)
        a = cm.kzg_setup(backend, 4, seed=9)
        b = cm.kzg_setup(backend, 4, seed=9)
        assert [pt.value for pt in a.powers_g1] == [pt.value for pt in b.powers_g1]

    def test_degree_must_be_positive(self):
        with pytest.raises(cm.CommitError):
            cm.kzg_setup(MockBackend(101), 0, seed=1)


class TestKzgCommit:
    def test_zero_poly_zero_randomness(self):
        backend, pp = mock_setup()
        c = cm.kzg_commit(pp, Polynomial.zero(101), 0)
        assert backend.g1_eq(c.point, backend.g1_identity())

    def test_square_at_alpha(self):
        backend, pp = mock_setup()
        c = cm.kzg_commit(pp, Polynomial([0, 0, 1], 101), 0)
        assert c.point.value == 25

    def test_randomizer_occupies_top_slot(self):
        backend, pp = mock_setup(d=3)
        c = cm.kzg_commit(pp, Polynomial.zero(101), 2)
        assert c.point.value == 2 * pow(5, 3, 101) % 101

    def test_homomorphism_random(self):
        backend, pp = mock_setup(d=6)
        rng = random.Random(4)
        for _ in range(100):
            g1 = Polynomial([rng.randrange(101) for _ in range(5)], 101)
            g2 = Polynomial([rng.randrange(101) for _ in range(5)], 101)
            r1, r2 = rng.randrange(101), rng.randrange(101)
            lhs = cm.kzg_commitment_add(
                backend, cm.kzg_commit(pp, g1, r1), cm.kzg_commit(pp, g2, r2)
            )
            rhs = cm.kzg_commit(pp, g1 + g2, (r1 + r2) % 101)
            assert backend.g1_eq(lhs.point, rhs.point)

    def test_degree_overflow(self):
        backend, pp = mock_setup(d=2)
        with pytest.raises(cm.CommitError):
            cm.kzg_commit(pp, Polynomial([0, 0, 1], 101), 0)


class TestKzgProveCheck:
    def test_square_proof_frozen(self):
        backend, pp = mock_setup()
        g = Polynomial([0, 0, 1], 101)
        c = cm.kzg_commit(pp, g, 0)
        pi = cm.kzg_prove(pp, c, g, 0, 2, 4)
        assert pi.point.value == 7  # q = z + 2 evaluated at alpha = 5
        assert cm.kzg_check(pp, c, 2, 4, pi)

    def test_constant_poly_randomizer_quotient(self):
        backend, pp = mock_setup(d=3)
        g = Polynomial([9], 101)
        r = 6
        c = cm.kzg_commit(pp, g, r)
        x = 4
        y = cm.kzg_eval(pp, g, r, x)
        pi = cm.kzg_prove(pp, c, g, r, x, y)
        # quotient is exactly the randomizer term r*(Z^3 - x^3)/(Z - x)
        expected_q = Polynomial([r * x * x, r * x, r], 101)
        assert pi.point.value == sum(
            cf * pow(5, i, 101) for i, cf in enumerate(expected_q.coeffs)
        ) % 101
        assert cm.kzg_check(pp, c, x, y, pi)

    def test_wrong_value_raises(self):
        backend, pp = mock_setup()
        g = Polynomial([0, 0, 1], 101)
        c = cm.kzg_commit(pp, g, 0)
        with pytest.raises(NonZeroRemainder):
            cm.kzg_prove(pp, c, g, 0, 2, 5)

    def test_check_rejects_shifted_value(self):
        backend, pp = mock_setup()
        g = Polynomial([0, 0, 1], 101)
        c = cm.kzg_commit(pp, g, 0)
        pi = cm.kzg_prove(pp, c, g, 0, 2, 4)
        assert not cm.kzg_check(pp, c, 2, 5, pi)

    @pytest.mark.parametrize("backend_name", ["mock", "curve"])
    def test_completeness_200_random(self, backend_name):
        if backend_name == "mock":
            backend = MockBackend(1009)
        else:
            backend = ArkworksBackend()
        pp = cm.kzg_setup(backend, 16, seed=7)
        rng = random.Random(13)
        p = backend.order
        for _ in range(200):
            g = Polynomial([rng.randrange(p) for _ in range(rng.randrange(1, 16))], p)
            r = rng.randrange(p)
            c = cm.kzg_commit(pp, g, r)
            x = rng.randrange(p)
            y = cm.kzg_eval(pp, g, r, x)
            pi = cm.kzg_prove(pp, c, g, r, x, y)
            assert cm.kzg_check(pp, c, x, y, pi)

    def test_evaluation_binding_statistical(self):
        """Forged proofs from a second polynomial succeed only on trapdoor
        collisions; rate bounded by d/p plus sampling noise."""
        rng = random.Random(99)
        p, d, trials = 101, 10, 10_000
        accepts = 0
        for _ in range(trials):
            backend = MockBackend(p)
            pp = cm.kzg_setup(backend, d, seed=rng.randrange(2**30))
            g = Polynomial([rng.randrange(p) for _ in range(d)], p)
            g2 = Polynomial([rng.randrange(p) for _ in range(d)], p)
            if g == g2:
                continue
            c = cm.kzg_commit(pp, g, 0)
            x = rng.randrange(p)
            y = g2.eval(x)  # y != g(x) in general
            pi = cm.kzg_prove(pp, cm.kzg_commit(pp, g2, 0), g2, 0, x, y)
            if cm.kzg_check(pp, c, x, y, pi):
                accepts += 1
        rate = accepts / trials
        bound = d / p
        sigma = math.sqrt(bound * (1 - bound) / trials)
        assert rate <= bound + 3 * sigma


class TestPedersen:
    def test_zero_message(self):
        backend = MockBackend(101)
        pp = cm.pedersen_setup(backend, 4)
        c = cm.pedersen_commit(pp, [0, 0], 0)
        assert backend.g1_eq(c, backend.g1_identity())

    def test_mock_generators_frozen(self):
        backend = MockBackend(101)
        pp = cm.pedersen_setup(backend, 4)
        # h_i = (i+2) * h1, so m=(1,1), r=0 commits to (3+4) * h1
        c = cm.pedersen_commit(pp, [1, 1], 0)
        assert c.value == 7

    def test_verify_round_trip(self):
        backend = MockBackend(101)
        pp = cm.pedersen_setup(backend, 4)
        c = cm.pedersen_commit(pp, [5, 9, 3], 17)
        assert cm.pedersen_verify(pp, c, [5, 9, 3], 17)
        assert not cm.pedersen_verify(pp, c, [5, 9, 4], 17)
        assert not cm.pedersen_verify(pp, c, [5, 9, 3], 18)

    def test_length_overflow(self):
        backend = MockBackend(101)
        pp = cm.pedersen_setup(backend, 2)
        with pytest.raises(cm.CommitError):
            cm.pedersen_commit(pp, [1, 2, 3], 0)

    def test_linearity(self):
        """a*C1 + b*C2 commits to a*m1 + b*m2 with a*r1 + b*r2."""
        backend = MockBackend(1009)
        pp = cm.pedersen_setup(backend, 6)
        rng = random.Random(3)
        p = backend.order
        for _ in range(100):
            m1 = [rng.randrange(p) for _ in range(4)]
            m2 = [rng.randrange(p) for _ in range(4)]
            r1, r2 = rng.randrange(p), rng.randrange(p)
            a, b = rng.randrange(p), rng.randrange(p)
            c1 = cm.pedersen_commit(pp, m1, r1)
            c2 = cm.pedersen_commit(pp, m2, r2)
            lhs = backend.g1_add(backend.g1_mul(c1, a), backend.g1_mul(c2, b))
            rhs = cm.pedersen_commit(
                pp,
                [(a * x + b * y) % p for x, y in zip(m1, m2)],
                (a * r1 + b * r2) % p,
            )
            assert backend.g1_eq(lhs, rhs)

    def test_curve_generators_distinct(self):
        backend = ArkworksBackend()
        pp = cm.pedersen_setup(backend, 8)
        raw = [backend.g1_to_bytes(g) for g in pp.generators]
        assert len(set(raw)) == len(raw)


class TestHashCommit:
    def setup_method(self):
        self.params = cm.hash_setup(101)

    def test_deterministic(self):
        assert cm.hash_commit(self.params, [1, 2, 3], 9) == cm.hash_commit(
            self.params, [1, 2, 3], 9
        )

    def test_randomness_sensitivity(self):
        rng = random.Random(8)
        distinct = 0
        for _ in range(50):
            m = [rng.randrange(101) for _ in range(4)]
            r = rng.randrange(101)
            if cm.hash_commit(self.params, m, r) != cm.hash_commit(
                self.params, m, (r + 1) % 101
            ):
                distinct += 1
        assert distinct >= 45  # avalanche over random trials

    def test_empty_message_well_defined(self):
        assert cm.hash_commit(self.params, [], 7) == cm.hash_commit(self.params, [], 7)
        assert cm.hash_commit(self.params, [], 7) != cm.hash_commit(self.params, [], 8)


class TestSignatures:
    def test_sign_verify(self):
        kp = cm.KeyPair.generate(random.Random(1))
        sig = cm.sign(kp, b"message")
        assert cm.verify(kp.pk, b"message", sig)

    def test_bit_flip_fails(self):
        kp = cm.KeyPair.generate(random.Random(2))
        sig = cm.sign(kp, b"message")
        assert not cm.verify(kp.pk, b"messagf", sig)
        assert not cm.verify(kp.pk, b"message", sig[:-1] + bytes([sig[-1] ^ 1]))

    def test_dist_sign_three_parties(self):
        keys = [cm.KeyPair.generate(random.Random(i)) for i in range(3)]
        sigs = cm.dist_sign_emulated(keys, b"payload")
        assert len(sigs) == 3
        ok, idx = cm.dist_verify([k.pk for k in keys], b"payload", sigs)
        assert ok and idx is None

    def test_dist_verify_identifies_failure(self):
        keys = [cm.KeyPair.generate(random.Random(i)) for i in range(3)]
        sigs = cm.dist_sign_emulated(keys, b"payload")
        sigs[1] = sigs[0]
        ok, idx = cm.dist_verify([k.pk for k in keys], b"payload", sigs)
        assert not ok and idx == 1
