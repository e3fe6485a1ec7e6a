import random

import pytest

from arc import commit as cm
from arc import receipts as rc


def make_training_receipt(seed=0, n_dh=2, n_tc=3):
    rng = random.Random(seed)
    keys_dh = [cm.KeyPair.generate(rng) for _ in range(n_dh)]
    keys_tc = [cm.KeyPair.generate(rng) for _ in range(n_tc)]
    c_ds = [bytes([i + 1]) * 33 for i in range(n_dh)]
    c_m = b"\xaa" * 33
    c_j = b"\xbb" * 33
    r = rc.TrainingReceipt("poly", c_ds, c_m, c_j, [], [])
    msg = r.message()
    r.sigs_dh = [cm.sign(k, msg) for k in keys_dh]
    r.sigs_tc = cm.dist_sign_emulated(keys_tc, msg)
    return r, keys_dh, keys_tc


def make_inference_receipt(seed=0):
    rng = random.Random(seed + 100)
    training, keys_dh, keys_tc = make_training_receipt(seed)
    keys_ic = [cm.KeyPair.generate(rng) for _ in range(3)]
    key_m = cm.KeyPair.generate(rng)
    r = rc.InferenceReceipt(training, b"\xcc" * 33, b"\xdd" * 33, [], b"")
    r.sigs_ic = cm.dist_sign_emulated(keys_ic, r.ic_message())
    r.sig_model_owner = cm.sign(key_m, r.owner_message())
    return r, keys_dh, keys_tc, keys_ic, key_m


class TestFraming:
    def test_round_trip(self):
        fields = [b"", b"a", b"hello world", bytes(300)]
        assert rc.read_frames(rc.concat_frames(fields)) == fields

    def test_truncated_header(self):
        with pytest.raises(rc.ReceiptError):
            rc.read_frames(b"\x00\x00\x01")

    def test_truncated_body(self):
        with pytest.raises(rc.ReceiptError):
            rc.read_frames(b"\x00\x00\x00\x05ab")


class TestSerialization:
    def test_training_round_trip(self):
        r, *_ = make_training_receipt()
        back = rc.TrainingReceipt.from_bytes(r.to_bytes())
        assert back == r

    def test_inference_round_trip(self):
        r, *_ = make_inference_receipt()
        back = rc.InferenceReceipt.from_bytes(r.to_bytes())
        assert back == r

    def test_hex_armor(self):
        r, *_ = make_inference_receipt()
        text = rc.to_hex_armor(r.to_bytes())
        assert rc.InferenceReceipt.from_bytes(rc.from_hex_armor(text)) == r

    def test_version_header_checked(self):
        r, *_ = make_training_receipt()
        data = b"XXXX" + r.to_bytes()[4:]
        with pytest.raises(rc.ReceiptError):
            rc.TrainingReceipt.from_bytes(data)

    def test_receipt_size_is_serialized_length(self):
        r, *_ = make_inference_receipt()
        assert rc.receipt_size(r) == len(r.to_bytes())


class TestVerification:
    def test_honest_receipt_verifies(self):
        r, keys_dh, keys_tc, keys_ic, key_m = make_inference_receipt()
        rep = rc.verify_inference_receipt(
            r, [k.pk for k in keys_dh], [k.pk for k in keys_tc],
            [k.pk for k in keys_ic], key_m.pk,
        )
        assert rep.ok

    def test_flipped_model_commitment_fails_at_tc_signature(self):
        r, keys_dh, keys_tc, keys_ic, key_m = make_inference_receipt()
        r.training.c_model = bytes([r.training.c_model[0] ^ 1]) + r.training.c_model[1:]
        rep = rc.verify_inference_receipt(
            r, [k.pk for k in keys_dh], [k.pk for k in keys_tc],
            [k.pk for k in keys_ic], key_m.pk,
        )
        assert not rep.ok
        assert "signature" in rep.failed_at

    def test_reordered_dataset_commitments_detected(self):
        r, keys_dh, keys_tc, keys_ic, key_m = make_inference_receipt()
        r.training.c_datasets = list(reversed(r.training.c_datasets))
        rep = rc.verify_inference_receipt(
            r, [k.pk for k in keys_dh], [k.pk for k in keys_tc],
            [k.pk for k in keys_ic], key_m.pk,
        )
        assert not rep.ok

    def test_failure_location_reported(self):
        r, keys_dh, keys_tc, keys_ic, key_m = make_inference_receipt()
        r.sig_model_owner = bytes(64)
        rep = rc.verify_inference_receipt(
            r, [k.pk for k in keys_dh], [k.pk for k in keys_tc],
            [k.pk for k in keys_ic], key_m.pk,
        )
        assert not rep.ok and rep.failed_at == "model-owner signature"

    def test_mutation_fuzz_detected(self):
        """Any single-field mutation of a serialized receipt is caught by
        parsing or verification (1000 trials)."""
        r, keys_dh, keys_tc, keys_ic, key_m = make_inference_receipt()
        blob = r.to_bytes()
        rng = random.Random(44)
        detected = 0
        trials = 1000
        for _ in range(trials):
            pos = rng.randrange(4, len(blob))  # keep the version header
            bit = 1 << rng.randrange(8)
            mutated = blob[:pos] + bytes([blob[pos] ^ bit]) + blob[pos + 1 :]
            try:
                parsed = rc.InferenceReceipt.from_bytes(mutated)
            except (rc.ReceiptError, StopIteration, UnicodeDecodeError):
                detected += 1
                continue
            rep = rc.verify_inference_receipt(
                parsed, [k.pk for k in keys_dh], [k.pk for k in keys_tc],
                [k.pk for k in keys_ic], key_m.pk,
            )
            if not rep.ok:
                detected += 1
        assert detected == trials
