import random
from fractions import Fraction

import pytest

from arc import audit, ml
from arc.fixedpoint import DEFAULT_FX as F
from arc.pipeline import (
    ArcPipeline,
    AuditOutcome,
    PhaseAbort,
    Scenario,
    UnsupportedMode,
)
from arc.receipts import InferenceReceipt, receipt_size, verify_inference_receipt


FAST = dict(epochs=2, audit_aux={"n": 10})


def run_full(tamper=None, scenario=None):
    sc = scenario or Scenario(audit_function="robustness", **FAST)
    pipe = ArcPipeline(sc, tamper=tamper)
    training = pipe.run_training()
    inference = pipe.run_inference(training)
    outcome = pipe.run_audit(training, inference)
    return pipe, training, inference, outcome


class TestHonestRun:
    def test_training_receipt_structure(self):
        sc = Scenario(**FAST)
        pipe = ArcPipeline(sc)
        tr = pipe.run_training()
        # 2 data holders + model + randomness commitments
        assert len(tr.receipt.c_datasets) == 2
        assert tr.receipt.c_model and tr.receipt.c_randomness
        # N_DH countersignatures + one signature share per computing party
        assert len(tr.receipt.sigs_dh) == 2
        assert len(tr.receipt.sigs_tc) == 3

    def test_model_matches_plaintext_trainer(self):
        """The MPC-trained model equals plaintext gradient descent with the
        same committed randomness, bit for bit."""
        sc = Scenario(**FAST)
        pipe = ArcPipeline(sc)
        tr = pipe.run_training()
        merged = ml.Dataset(
            [r for d in tr.datasets for r in d.features],
            [l for d in tr.datasets for l in d.labels],
        )
        plain = ml.train(merged, tr.j_values, sc.epochs, sc.learning_rate,
                         sc.batch_size)
        assert plain.weights == tr.model.weights

    def test_inference_matches_plaintext_predict(self):
        pipe, tr, inf, _ = run_full()
        x = inf.client.x
        score, label = ml.predict(tr.model, x)
        assert inf.client.y == [score, label]

    def test_client_receipt_verifies(self):
        pipe, tr, inf, _ = run_full()
        rep = verify_inference_receipt(
            inf.receipt,
            pipe.pki.pks("DH", 2), pipe.pki.pks("TC", 3),
            pipe.pki.pks("IC", 3), pipe.pki.pk("M_0"),
        )
        assert rep.ok

    def test_audit_returns_result_arm(self):
        _, _, _, outcome = run_full()
        assert outcome.result is not None and outcome.malicious is None

    def test_outcome_exactly_one_arm(self):
        with pytest.raises(ValueError):
            AuditOutcome(result=1, malicious="X")
        with pytest.raises(ValueError):
            AuditOutcome()


class TestDeterminism:
    def test_identical_seeds_identical_receipts(self):
        _, _, inf_a, _ = run_full()
        _, _, inf_b, _ = run_full()
        assert inf_a.receipt.to_bytes() == inf_b.receipt.to_bytes()

    def test_different_seeds_differ(self):
        sc2 = Scenario(audit_function="robustness", seed=8, **FAST)
        _, _, inf_a, _ = run_full()
        _, _, inf_b, _ = run_full(scenario=sc2)
        assert inf_a.receipt.to_bytes() != inf_b.receipt.to_bytes()


class TestTamperMatrix:
    def test_dataset_swap_at_training(self):
        pipe = ArcPipeline(Scenario(**FAST), tamper="dh:0:dataset")
        with pytest.raises(PhaseAbort) as exc:
            pipe.run_training()
        assert exc.value.step == "T.1" and exc.value.party == "DH_0"

    def test_model_swap_at_inference(self):
        pipe = ArcPipeline(Scenario(**FAST), tamper="m:0:model")
        tr = pipe.run_training()
        with pytest.raises(PhaseAbort) as exc:
            pipe.run_inference(tr)
        assert exc.value.step == "I.1" and exc.value.party == "M_0"

    def test_unknown_model_identifier(self):
        pipe = ArcPipeline(Scenario(**FAST), tamper="c:0:model-id")
        tr = pipe.run_training()
        with pytest.raises(PhaseAbort) as exc:
            pipe.run_inference(tr)
        assert exc.value.step == "I.1" and exc.value.party == "C_0"

    @pytest.mark.parametrize(
        "tamper,culprit",
        [
            ("dh:0:audit-dataset", "DH_0"),
            ("dh:1:audit-dataset", "DH_1"),
            ("m:0:audit-model", "M_0"),
            ("c:0:audit-xy", "C_0"),
            ("ac:1:share", "AC_1"),
        ],
    )
    def test_audit_blame(self, tamper, culprit):
        _, _, _, outcome = run_full(tamper=tamper)
        assert outcome.malicious == culprit
        assert outcome.result is None

    def test_disallowed_audit_function_blames_client(self):
        sc = Scenario(**FAST)
        pipe = ArcPipeline(sc)
        tr = pipe.run_training()
        inf = pipe.run_inference(tr)
        outcome = pipe.run_audit(tr, inf, function_id="influence-functions")
        assert outcome.malicious == "C_0"


class TestStorageScaling:
    def test_computing_parties_store_nothing(self):
        pipe, tr, inf, _ = run_full()
        for party, items in pipe.storage.items():
            assert not party.startswith(("TC", "IC", "AC")), (party, items)

    def test_client_stores_one_receipt_per_inference(self):
        sc = Scenario(**FAST)
        pipe = ArcPipeline(sc)
        tr = pipe.run_training()
        for k in range(3):
            pipe.run_inference(tr)
        stored = [it for it in pipe.storage.get("C_0", [])
                  if it[0] == "inference-receipt"]
        assert len(stored) == 3

    def test_poly_receipt_size_constant_in_model_size(self):
        sizes = {}
        for rows in (4, 16):
            sc = Scenario(**FAST)
            pipe = ArcPipeline(sc)
            pipe.party_datasets = [
                ml.Dataset(d.features[:rows], d.labels[:rows], d.fmt)
                for d in pipe.party_datasets
            ]
            tr = pipe.run_training()
            inf = pipe.run_inference(tr)
            sizes[rows] = receipt_size(inf.receipt)
        assert sizes[4] == sizes[16]


class TestAuditDualExecution:
    """MPC audit evaluation matches the plaintext audit functions."""

    def _setup(self, seed=7):
        sc = Scenario(audit_function="robustness", seed=seed, **FAST)
        pipe = ArcPipeline(sc)
        tr = pipe.run_training()
        inf = pipe.run_inference(tr)
        return pipe, tr, inf

    def test_robustness_matches(self):
        for seed in (7, 11, 13):
            pipe, tr, inf = self._setup(seed)
            aux = {"n": 12, "radius": 0.25, "sigma": 0.5, "alpha": "0.05"}
            got = pipe.run_audit(tr, inf, "robustness", aux).result
            from scipy.stats import norm
            tau = Fraction(float(norm.cdf(0.25 / 0.5)))
            chol = [[0.5 if i == j else 0.0 for j in range(4)] for i in range(4)]
            want = audit.certify_core(
                lambda v: ml.predict(tr.model, v)[1],
                inf.client.x, 1 if F.signed(inf.client.y[1]) * 2 >= F.scale else 0,
                tau, chol, 12, Fraction(1, 20), pipe._rng("audit-noise"),
            )
            assert got == want

    def test_knn_matches_exactly(self):
        pipe, tr, inf = self._setup()
        got = pipe.run_audit(tr, inf, "knn-shapley", {"k": 3}).result
        feats = [r for d in tr.datasets for r in d.features]
        labels01 = [1 if F.signed(l) * 2 >= F.scale else 0
                    for d in tr.datasets for l in d.labels]
        ylab = 1 if F.signed(inf.client.y[1]) * 2 >= F.scale else 0
        want = audit.knn_shapley(inf.client.x, ylab, feats, labels01, 3)
        assert got == want.values

    def test_camel_matches(self):
        pipe, tr, inf = self._setup()
        aux = {"unlearn_epochs": 2, "tau_mad": 3.5}
        got = pipe.run_audit(tr, inf, "camel", aux).result
        ylab = 1 if F.signed(inf.client.y[1]) * 2 >= F.scale else 0
        want = audit.camel_attribution(
            inf.client.x, ylab, tr.model, tr.datasets, 2, 3.5,
            j_values=(7, 0), lr=pipe.sc.learning_rate,
        )
        assert got == want

    def test_kernel_shap_matches(self):
        pipe, tr, inf = self._setup()
        aux = {"n_samples": 14}
        got = pipe.run_audit(tr, inf, "kernel-shap", aux).result
        # plaintext mirror: same coalitions, same fx marginal pipeline
        rng = pipe._rng("audit-shap")
        coalitions = audit.sample_coalitions(4, 14, rng)
        feats = [r for d in tr.datasets for r in d.features]

        def marginal(z):
            acc = 0
            for row in feats:
                masked = [inf.client.x[i] if z[i] else row[i] for i in range(4)]
                acc = (acc + ml.predict(tr.model, masked)[0]) % F.mod
            s = F.signed(acc)
            q = abs(s) // len(feats)
            return (q if s >= 0 else -q) % F.mod

        import numpy as np
        ys = [F.decode(marginal(z)) for z in coalitions]
        y0 = F.decode(marginal(tuple([0] * 4)))
        y1 = F.decode(marginal(tuple([1] * 4)))
        rows = [[1.0] + list(z) for z in coalitions] + [
            [1.0, 0, 0, 0, 0], [1.0, 1, 1, 1, 1]]
        weights = [audit.shapley_kernel_weight(4, sum(z)) for z in coalitions]
        weights += [1e9, 1e9]
        Z = np.array(rows)
        W = np.diag(weights)
        yv = np.array(ys + [y0, y1])
        A = Z.T @ W @ Z + 1e-8 * np.eye(5)
        want = [float(v) for v in np.linalg.solve(A, Z.T @ W @ yv)]
        assert got == want


class TestPlaintextSeam:
    def test_unsupported_mode(self):
        pipe = ArcPipeline(Scenario(**FAST))
        with pytest.raises(UnsupportedMode):
            pipe.proof_slot.prove()
        with pytest.raises(UnsupportedMode):
            pipe.proof_slot.verify()


class TestTranscripts:
    def test_phases_use_fresh_abb_instances(self):
        pipe, *_ = run_full()
        labels = [a.label for a in pipe.abbs]
        assert any(l.startswith("training") for l in labels)
        assert any(l.startswith("inference") for l in labels)
        assert any(l.startswith("audit") for l in labels)

    def test_transcript_dump_parses(self):
        import json

        pipe, *_ = run_full()
        data = json.loads(pipe.dump_transcripts())
        assert all("rounds" in entry for entry in data)


class TestAuditRequest:
    def test_aux_travels_as_json(self):
        from arc.pipeline import AuditRequest

        pipe, tr, inf, _ = run_full()
        req = AuditRequest.build(inf, "robustness", {"n": 10, "sigma": 0.5})
        assert req.aux == {"n": 10, "sigma": 0.5}
        assert isinstance(req.aux_json, str)
        outcome = pipe.run_audit(tr, inf, request=req)
        assert outcome.result is not None

    def test_unknown_function_blames_client(self):
        from arc.pipeline import AuditRequest

        pipe, tr, inf, _ = run_full()
        req = AuditRequest.build(inf, "not-a-function", {})
        outcome = pipe.run_audit(tr, inf, request=req)
        assert outcome.malicious == "C_0"


class TestDegenerateDataset:
    def test_empty_party_dataset_receipt_well_formed(self):
        from arc.receipts import TrainingReceipt

        sc = Scenario(**FAST)
        pipe = ArcPipeline(sc)
        empty = ml.Dataset([], [], pipe.party_datasets[1].fmt)
        pipe.party_datasets = [pipe.party_datasets[0], empty]
        tr = pipe.run_training()
        back = TrainingReceipt.from_bytes(tr.receipt.to_bytes())
        assert back == tr.receipt
        assert len(back.c_datasets) == 2
