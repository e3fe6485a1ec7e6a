"""The receipt pipeline: committed training, inference and auditing.

Each phase runs on a fresh ABB instance over a round-synchronized,
single-threaded scheduler.  Training and inference bind every input and
output to commitments chained by signatures into receipts; auditing
verifies the chain in reverse order, proves the freshly provided inputs
consistent with the receipt, and only then evaluates the audit function
under the identifiable-abort functionality.

Fault injection ("role:index:field") covers the blame matrix: a
dishonest commitment at training, a swapped model at inference, wrong
audit-time datasets / model / prediction pair, and a corrupted computing
party share during the audit itself.
"""

from __future__ import annotations

import importlib.resources
import random
from dataclasses import dataclass, field
from fractions import Fraction

from . import audit as auditfn
from . import commit as cm
from . import ml
from . import poc
from .algebra import BLS12_381_SCALAR_ORDER, stable_seed
from .fixedpoint import DEFAULT_FX, FxFormat
from .groups import get_backend
from .mpc import (
    Abb,
    Domain,
    IdentifiedAbort,
    SharedVector,
    TrustedDealer,
    share_convert_ring_to_field,
)
from .receipts import (
    InferenceReceipt,
    TrainingReceipt,
    concat_frames,
    verify_inference_receipt,
    verify_training_receipt,
)


class UnsupportedMode(Exception):
    """Plaintext training/inference would require zero-knowledge proof
    systems that this artifact deliberately leaves unimplemented; the
    interface seam preserves the protocol architecture."""


class PlaintextProofSlot:
    """Placeholder for the proof-of-training / proof-of-inference hook."""

    def prove(self, *a, **kw):
        raise UnsupportedMode("plaintext computation branches are not supported")

    def verify(self, *a, **kw):
        raise UnsupportedMode("plaintext computation branches are not supported")


@dataclass
class PhaseAbort(Exception):
    phase: str
    step: str
    party: str
    detail: str = ""

    def __str__(self) -> str:
        return f"abort at {self.step} ({self.phase}): {self.party} {self.detail}"


@dataclass
class AuditOutcome:
    """Either the audit function's result or an identified culprit."""

    result: object | None = None
    malicious: str | None = None

    def __post_init__(self):
        if (self.result is None) == (self.malicious is None):
            raise ValueError("exactly one of result/malicious must be set")


@dataclass
class AuditRequest:
    """The client's broadcast bundle opening an audit.

    Function-specific parameters travel as a JSON object; the function id
    must name an entry of the audit allow-list.
    """

    receipt: "InferenceReceipt"
    x: list[int]
    y: list[int]
    function_id: str
    aux_json: str = "{}"

    @property
    def aux(self) -> dict:
        import json

        return json.loads(self.aux_json)

    @staticmethod
    def build(inference: "InferenceOutput", function_id: str,
              aux: dict | None = None) -> "AuditRequest":
        import json

        return AuditRequest(
            inference.receipt,
            list(inference.client.x),
            list(inference.client.y),
            function_id,
            json.dumps(aux or {}, sort_keys=True),
        )


@dataclass
class Scenario:
    n_dh: int = 2
    n_tc: int = 3
    n_ic: int = 3
    n_ac: int = 3
    poc_variant: str = "poly"
    field_backend: str = "mock"
    mock_order: int | None = None  # defaults to the curve's scalar order
    dataset: str = "adult-toy"
    epochs: int = 8
    learning_rate: float = 0.5
    batch_size: int = 4
    ell: int = 40
    kappa: int = 40
    seed: int = 7
    audit_function: str = "knn-shapley"
    audit_aux: dict = field(default_factory=dict)
    fmt: FxFormat = DEFAULT_FX


def load_bundled_dataset(name: str, fmt: FxFormat = DEFAULT_FX) -> ml.Dataset:
    if name != "adult-toy":
        raise ValueError(f"unknown dataset id {name!r}")
    path = importlib.resources.files("arc.data").joinpath("adult_toy.csv")
    with importlib.resources.as_file(path) as p:
        return ml.load_csv(str(p), fmt)


def split_dataset(ds: ml.Dataset, n_parts: int) -> list[ml.Dataset]:
    parts = []
    per = ds.n_rows // n_parts
    for i in range(n_parts):
        lo = i * per
        hi = (i + 1) * per if i < n_parts - 1 else ds.n_rows
        parts.append(ml.Dataset(ds.features[lo:hi], ds.labels[lo:hi], ds.fmt))
    return parts


def field_encode(fmt: FxFormat, values: list[int], p: int) -> list[int]:
    """Signed fixed-point residues mapped into F_p (negatives to p-|x|)."""
    return [fmt.signed(v) % p for v in values]


class Pki:
    """In-simulation key registry; everyone but clients gets signing keys."""

    def __init__(self, scenario: Scenario):
        rng = random.Random(stable_seed("pki", scenario.seed))
        self.keys: dict[str, cm.KeyPair] = {}
        for role, count in (
            ("DH", scenario.n_dh),
            ("TC", scenario.n_tc),
            ("IC", scenario.n_ic),
            ("AC", scenario.n_ac),
            ("M", 1),
        ):
            for i in range(count):
                self.keys[f"{role}_{i}"] = cm.KeyPair.generate(rng)

    def pk(self, name: str) -> bytes:
        return self.keys[name].pk

    def pks(self, role: str, count: int) -> list[bytes]:
        return [self.keys[f"{role}_{i}"].pk for i in range(count)]

    def is_registered(self, pk: bytes) -> bool:
        return any(kp.pk == pk for kp in self.keys.values())


@dataclass
class TrainingOutput:
    receipt: TrainingReceipt
    model: ml.Model                 # opened to the model owner
    r_model: object                 # decommitment for c_M (scalar or vector)
    datasets: list[ml.Dataset]      # held by their data holders
    r_datasets: list
    j_values: tuple[int, ...]
    r_j: object


@dataclass
class ClientBox:
    """What the audit requester stores besides the receipt."""

    x: list[int]
    y: list[int]  # (score, label) fx pair
    r_x: object
    r_y: object


@dataclass
class InferenceOutput:
    receipt: InferenceReceipt
    client: ClientBox


class ArcPipeline:
    """Orchestrates the three phases for one scenario."""

    def __init__(
        self,
        scenario: Scenario,
        tamper: str | None = None,
        dataset: ml.Dataset | None = None,
    ):
        self.sc = scenario
        self.tamper = tamper
        order = scenario.mock_order
        self.backend = (
            get_backend("curve")
            if scenario.field_backend == "curve"
            else get_backend("mock", order if order else BLS12_381_SCALAR_ORDER)
        )
        self.fmt = scenario.fmt
        self.pki = Pki(scenario)
        self.full_dataset = (
            dataset if dataset is not None
            else load_bundled_dataset(scenario.dataset, self.fmt)
        )
        self.party_datasets = split_dataset(self.full_dataset, scenario.n_dh)
        self.model_width = self.full_dataset.n_features + 1
        max_len = max(
            max(len(d.flatten()) for d in self.party_datasets),
            self.model_width,
        )
        self.pp = poc.poc_setup(
            scenario.poc_variant, self.backend, max_len + 1, seed=scenario.seed
        )
        self.storage: dict[str, list[tuple[str, int]]] = {}
        self.proof_slot = PlaintextProofSlot()
        self.abbs: list[Abb] = []

    # -- helpers ---------------------------------------------------------
    def _rng(self, *tag) -> random.Random:
        return random.Random(stable_seed("arc", self.sc.seed, *tag))

    def _tampered(self, key: str) -> bool:
        return self.tamper == key

    def _store(self, party: str, kind: str, nbytes: int) -> None:
        self.storage.setdefault(party, []).append((kind, nbytes))

    def _fresh_abbs(self, label: str, identifiable: bool = False, n: int | None = None):
        n = n if n is not None else self.sc.n_tc
        dealer = TrustedDealer(n, stable_seed("phase", self.sc.seed, label))
        ring = Abb(n, Domain.ring(self.fmt.k), dealer=dealer,
                   identifiable=identifiable, label=f"{label}-ring")
        fld = Abb(n, Domain.field(self.backend.order), dealer=dealer,
                  identifiable=identifiable, label=f"{label}-field")
        self.abbs.extend([ring, fld])
        return ring, fld

    def dump_transcripts(self) -> str:
        import json
        return json.dumps(
            [json.loads(a.dump_transcript()) for a in self.abbs], indent=2
        )

    def _convert(self, ring: Abb, fld: Abb, v: SharedVector) -> SharedVector:
        return share_convert_ring_to_field(ring, fld, v, self.sc.ell, self.sc.kappa)

    def _is_vector_randomness(self) -> bool:
        return self.sc.poc_variant == "pedersen"

    def _sample_r(self, rng, count: int):
        """Decommitment randomness: per-element for pedersen, scalar else."""
        p = self.backend.order
        if self._is_vector_randomness():
            return [rng.randrange(p) for _ in range(count)]
        return rng.randrange(p)

    def _shared_r(self, fld, count: int):
        return fld.rand_shared(count if self._is_vector_randomness() else 1)

    def _opened_r(self, fld, shared):
        vals = fld.open(shared)
        return vals if self._is_vector_randomness() else vals[0]

    def _prover(self, x_field: list[int], r) -> poc.PocProver:
        tag = r if isinstance(r, int) else tuple(r)
        return poc.PocProver(self.pp, x_field, r, self._rng("mask", len(x_field), tag))

    def _check(self, abb, commitment, shared, prover, label, identifiable=False):
        return poc.poc_check(
            abb, self.pp, commitment, shared, prover,
            identifiable=identifiable, prover_party=label,
        )

    # -- training phase (steps T.1 - T.4) ---------------------------------
    def run_training(self) -> TrainingOutput:
        sc = self.sc
        p = self.backend.order
        ring, fld = self._fresh_abbs("training")
        n_dh = sc.n_dh

        # T.1: each data holder samples a decommitment value, inputs its
        # dataset and publishes a commitment to it.
        shared_ds_ring = []
        commitments = []
        r_datasets = []
        datasets = []
        for i in range(n_dh):
            ds = self.party_datasets[i]
            datasets.append(ds)
            flat = ds.flatten()
            r_d = self._sample_r(self._rng("r_D", i), len(flat))
            r_datasets.append(r_d)
            shared = ring.input(f"DH_{i}", flat)
            shared_ds_ring.append(shared)
            commit_to = flat
            if self._tampered(f"dh:{i}:dataset"):
                commit_to = list(flat)
                commit_to[0] = (commit_to[0] + self.fmt.encode(1.0)) % self.fmt.mod
            c_d = poc.poc_commit(self.pp, field_encode(self.fmt, commit_to, p), r_d)
            commitments.append(c_d)

        # T.1 continued: consistency checks against the fresh sharings
        shared_ds_field = []
        for i in range(n_dh):
            shared_f = self._convert(ring, fld, shared_ds_ring[i])
            shared_ds_field.append(shared_f)
            flat = datasets[i].flatten()
            transcript = self._check(
                fld, commitments[i], shared_f,
                self._prover(field_encode(self.fmt, flat, p), r_datasets[i]),
                f"DH_{i}",
            )
            if not transcript.verdict:
                raise PhaseAbort("training", "T.1", f"DH_{i}",
                                 "dataset inconsistent with commitment")

        # T.2: sample randomness, train, commit to model and randomness
        j_shared = ring.rand_shared(2, bound=1 << (sc.ell - 2))
        j_values = tuple(ring.reconstruct(j_shared))  # functionality-internal
        r_m_shared = self._shared_r(fld, self.model_width)
        r_j_shared = self._shared_r(fld, 2)

        n_feat = self.full_dataset.n_features
        feats_shared = _concat_shared(ring, [
            _slice_features(ring, shared_ds_ring[i], datasets[i], n_feat)
            for i in range(n_dh)
        ])
        labels_shared = _concat_shared(ring, [
            _slice_labels(ring, shared_ds_ring[i], datasets[i], n_feat)
            for i in range(n_dh)
        ])
        n_rows = sum(d.n_rows for d in datasets)
        w_shared = ml.mpc_train(
            ring, self.fmt, feats_shared, labels_shared, n_rows, n_feat,
            j_shared, sc.epochs, sc.learning_rate, sc.batch_size,
        )
        w_field = self._convert(ring, fld, w_shared)
        c_model = poc.dist_commit(fld, self.pp, w_field, r_m_shared)
        j_field = self._convert(ring, fld, j_shared)
        c_j = poc.dist_commit(fld, self.pp, j_field, r_j_shared)

        c_ds_bytes = [c.to_bytes(self.backend) for c in commitments]
        c_m_bytes = c_model.to_bytes(self.backend)
        c_j_bytes = c_j.to_bytes(self.backend)
        message = concat_frames(c_ds_bytes + [c_m_bytes, c_j_bytes])
        sigs_tc = cm.dist_sign_emulated(
            [self.pki.keys[f"TC_{j}"] for j in range(sc.n_tc)], message
        )

        # T.3: data holders verify the broadcast bundle and countersign
        sigs_dh = []
        for i in range(n_dh):
            ok, _ = cm.dist_verify(self.pki.pks("TC", sc.n_tc), message, sigs_tc)
            if not ok:
                raise PhaseAbort("training", "T.3", f"DH_{i}", "bad TC signature")
            own = commitments[i].to_bytes(self.backend)
            if own not in c_ds_bytes:
                raise PhaseAbort("training", "T.3", f"DH_{i}",
                                 "own commitment missing from bundle")
            sigs_dh.append(cm.sign(self.pki.keys[f"DH_{i}"], message))

        # T.4: model owner verification checklist, then the model opens
        receipt = TrainingReceipt(
            sc.poc_variant, c_ds_bytes, c_m_bytes, c_j_bytes, sigs_dh, sigs_tc
        )
        report = verify_training_receipt(
            receipt, self.pki.pks("DH", n_dh), self.pki.pks("TC", sc.n_tc)
        )
        if not report.ok:
            raise PhaseAbort("training", "T.4", "M_0", report.failed_at or "")

        weights = ring.open(w_shared)
        r_model = self._opened_r(fld, r_m_shared)
        r_j = self._opened_r(fld, r_j_shared)
        self._store("M_0", "training-receipt", len(receipt.to_bytes()))
        # computing parties keep no artifacts once the phase ends
        return TrainingOutput(
            receipt, ml.Model(weights, self.fmt), r_model,
            datasets, r_datasets, j_values, r_j,
        )

    # -- inference phase (steps I.1 - I.4) ---------------------------------
    def run_inference(
        self, training: TrainingOutput, x: list[int] | None = None
    ) -> InferenceOutput:
        sc = self.sc
        p = self.backend.order
        ring, fld = self._fresh_abbs("inference", n=sc.n_ic)
        x = x if x is not None else self.full_dataset.features[0]

        # I.1: the client identifies the model, the owner provides it
        c_m_requested = training.receipt.c_model
        if self._tampered("c:0:model-id"):
            c_m_requested = bytes([c_m_requested[0] ^ 1]) + c_m_requested[1:]
        if c_m_requested != training.receipt.c_model:
            raise PhaseAbort("inference", "I.1", "C_0",
                             "requested model commitment unknown")
        x_shared = ring.input("C_0", x)

        model_input = training.model.weights
        if self._tampered("m:0:model"):
            model_input = list(model_input)
            model_input[0] = (model_input[0] + self.fmt.encode(0.5)) % self.fmt.mod
        w_shared = ring.input("M_0", model_input)
        w_field = self._convert(ring, fld, w_shared)
        transcript = self._check(
            fld,
            _commitment_from_bytes(self.pp, training.receipt.c_model),
            w_field,
            self._prover(
                field_encode(self.fmt, training.model.weights, p), training.r_model
            ),
            "M_0",
        )
        if not transcript.verdict:
            raise PhaseAbort("inference", "I.1", "M_0",
                             "model inconsistent with training commitment")

        # I.2: predict under MPC, commit to the sample and the result
        score, label = ml.mpc_predict(ring, self.fmt, w_shared, x_shared)
        y_shared = _concat_shared(ring, [score, label])
        r_x_shared = self._shared_r(fld, len(x))
        r_y_shared = self._shared_r(fld, 2)
        x_field = self._convert(ring, fld, x_shared)
        y_field = self._convert(ring, fld, y_shared)
        c_x = poc.dist_commit(fld, self.pp, x_field, r_x_shared)
        c_y = poc.dist_commit(fld, self.pp, y_field, r_y_shared)
        c_x_bytes = c_x.to_bytes(self.backend)
        c_y_bytes = c_y.to_bytes(self.backend)

        ic_message = concat_frames(
            [training.receipt.bundle_bytes(), c_x_bytes, c_y_bytes]
        )
        sigs_ic = cm.dist_sign_emulated(
            [self.pki.keys[f"IC_{j}"] for j in range(sc.n_ic)], ic_message
        )

        # openings delivered to the client only (r_x stays withheld from
        # the model owner)
        y_opened = ring.open(y_shared)
        r_x = self._opened_r(fld, r_x_shared)
        r_y = self._opened_r(fld, r_y_shared)

        # I.3: the model owner countersigns the receipt chain
        ok, idx = cm.dist_verify(self.pki.pks("IC", sc.n_ic), ic_message, sigs_ic)
        if not ok:
            raise PhaseAbort("inference", "I.3", f"IC_{idx}", "bad IC signature")
        receipt = InferenceReceipt(training.receipt, c_x_bytes, c_y_bytes, sigs_ic, b"")
        receipt.sig_model_owner = cm.sign(
            self.pki.keys["M_0"], receipt.owner_message()
        )

        # I.4: client checklist (signatures + commitment recomputation)
        report = verify_inference_receipt(
            receipt,
            self.pki.pks("DH", sc.n_dh),
            self.pki.pks("TC", sc.n_tc),
            self.pki.pks("IC", sc.n_ic),
            self.pki.pk("M_0"),
        )
        if not report.ok:
            raise PhaseAbort("inference", "I.4", "M_0", report.failed_at or "")
        recomputed_cx = poc.poc_commit(
            self.pp, field_encode(self.fmt, x, p), r_x
        ).to_bytes(self.backend)
        recomputed_cy = poc.poc_commit(
            self.pp, field_encode(self.fmt, y_opened, p), r_y
        ).to_bytes(self.backend)
        if recomputed_cx != c_x_bytes or recomputed_cy != c_y_bytes:
            raise PhaseAbort("inference", "I.4", "IC_0",
                             "opened values do not match commitments")

        self._store("C_0", "inference-receipt", len(receipt.to_bytes()))
        return InferenceOutput(receipt, ClientBox(x, y_opened, r_x, r_y))

    # -- auditing phase (steps A.1 - A.6) -----------------------------------
    def run_audit(
        self,
        training: TrainingOutput,
        inference: InferenceOutput,
        function_id: str | None = None,
        aux: dict | None = None,
        optimistic: bool = True,
        request: AuditRequest | None = None,
    ) -> AuditOutcome:
        """Optimistically run with plain security-with-abort; on any abort
        rerun with the identifiable-abort functionality and report blame."""
        if request is None:
            request = AuditRequest.build(
                inference,
                function_id or self.sc.audit_function,
                aux if aux is not None else self.sc.audit_aux,
            )
        fn = request.function_id
        aux = request.aux
        if optimistic:
            try:
                return self._audit_once(training, inference, fn, aux, identifiable=False)
            except PhaseAbort:
                pass
            except IdentifiedAbort:
                pass
            return self._audit_once(training, inference, fn, aux, identifiable=True)
        return self._audit_once(training, inference, fn, aux, identifiable=True)

    def _audit_once(
        self,
        training: TrainingOutput,
        inference: InferenceOutput,
        fn: str,
        aux: dict,
        identifiable: bool,
    ) -> AuditOutcome:
        sc = self.sc
        p = self.backend.order
        fmt = self.fmt
        ring, fld = self._fresh_abbs("audit", identifiable=identifiable, n=sc.n_ac)
        receipt = inference.receipt
        client = inference.client

        def outcome_or_raise(party: str, detail: str) -> AuditOutcome:
            if identifiable:
                return AuditOutcome(malicious=party)
            raise PhaseAbort("audit", "abort", party, detail)

        # A.1: client broadcast + secret inputs
        x_tilde = list(client.x)
        y_tilde = list(client.y)
        if self._tampered("c:0:audit-xy"):
            y_tilde = [y_tilde[0], (y_tilde[1] + fmt.encode(1.0)) % fmt.mod]
        x_shared = ring.input("C_0", x_tilde)
        y_shared = ring.input("C_0", y_tilde)

        # A.2: local checks: registered identity, owner signature, allow-list
        if not self.pki.is_registered(self.pki.pk("M_0")):
            return outcome_or_raise("C_0", "unknown model-owner identity")
        if not cm.verify(
            self.pki.pk("M_0"), receipt.owner_message(), receipt.sig_model_owner
        ):
            return outcome_or_raise("C_0", "invalid owner signature in request")
        if fn not in auditfn.AUDIT_FUNCTIONS:
            return outcome_or_raise("C_0", f"audit function {fn!r} not allowed")

        try:
            # A.3: verify the audit requester's inputs against c_x, c_y
            x_field = self._convert(ring, fld, x_shared)
            y_field = self._convert(ring, fld, y_shared)
            if self._tampered("ac:1:share"):
                x_field = fld.corrupt_share(x_field, party=1, index=0, delta=3)
            t = self._check(
                fld, _commitment_from_bytes(self.pp, receipt.c_x), x_field,
                self._prover(field_encode(fmt, client.x, p), client.r_x),
                "C_0", identifiable,
            )
            if not t.verdict:
                return outcome_or_raise(_blame(t, "C_0"), "prediction sample mismatch")
            t = self._check(
                fld, _commitment_from_bytes(self.pp, receipt.c_y), y_field,
                self._prover(field_encode(fmt, client.y, p), client.r_y),
                "C_0", identifiable,
            )
            if not t.verdict:
                return outcome_or_raise(_blame(t, "C_0"), "prediction result mismatch")

            # A.4: verify inference: model consistency + IC signatures
            model_input = training.model.weights
            if self._tampered("m:0:audit-model"):
                model_input = list(model_input)
                model_input[1] = (model_input[1] + fmt.encode(0.25)) % fmt.mod
            w_shared = ring.input("M_0", model_input)
            w_field = self._convert(ring, fld, w_shared)
            t = self._check(
                fld,
                _commitment_from_bytes(self.pp, receipt.training.c_model),
                w_field,
                self._prover(
                    field_encode(fmt, training.model.weights, p), training.r_model
                ),
                "M_0", identifiable,
            )
            if not t.verdict:
                return outcome_or_raise(_blame(t, "M_0"), "model mismatch at audit")
            ok, _ = cm.dist_verify(
                self.pki.pks("IC", sc.n_ic), receipt.ic_message(), receipt.sigs_ic
            )
            if not ok:
                return outcome_or_raise("M_0", "invalid inference signature bundle")

            # A.5: verify training: dataset consistency + training signatures
            ds_shared_ring = []
            for i in range(sc.n_dh):
                flat = training.datasets[i].flatten()
                ds_input = flat
                if self._tampered(f"dh:{i}:audit-dataset"):
                    ds_input = list(flat)
                    ds_input[2] = (ds_input[2] + fmt.encode(2.0)) % fmt.mod
                shared = ring.input(f"DH_{i}", ds_input)
                ds_shared_ring.append(shared)
                shared_f = self._convert(ring, fld, shared)
                t = self._check(
                    fld,
                    _commitment_from_bytes(self.pp, receipt.training.c_datasets[i]),
                    shared_f,
                    self._prover(field_encode(fmt, flat, p), training.r_datasets[i]),
                    f"DH_{i}", identifiable,
                )
                if not t.verdict:
                    return outcome_or_raise(
                        _blame(t, f"DH_{i}"), "dataset mismatch at audit"
                    )
            msg = receipt.training.message()
            for i in range(sc.n_dh):
                if not cm.verify(
                    self.pki.pk(f"DH_{i}"), msg, receipt.training.sigs_dh[i]
                ):
                    return outcome_or_raise("M_0", "invalid data-holder signature")
            ok, _ = cm.dist_verify(
                self.pki.pks("TC", sc.n_tc), msg, receipt.training.sigs_tc
            )
            if not ok:
                return outcome_or_raise("M_0", "invalid training signature bundle")

            # A.6: all checks passed; evaluate the audit function and open
            result = self._evaluate_audit(
                ring, fn, aux, x_shared, y_shared, w_shared, ds_shared_ring, training
            )
        except IdentifiedAbort as abort:
            return AuditOutcome(malicious=f"AC_{abort.party}")
        return AuditOutcome(result=result)

    # -- audit function evaluation under the ABB ---------------------------
    def _evaluate_audit(
        self,
        ring: Abb,
        fn: str,
        aux: dict,
        x_shared: SharedVector,
        y_shared: SharedVector,
        w_shared: SharedVector,
        ds_shared: list[SharedVector],
        training: TrainingOutput,
    ):
        fmt = self.fmt
        n_feat = self.full_dataset.n_features
        row_counts = [d.n_rows for d in training.datasets]

        if fn in ("robustness", "fairness"):
            n = int(aux.get("n", 40))
            alpha = Fraction(str(aux.get("alpha", "0.05")))
            noise_rng = self._rng("audit-noise")
            if fn == "robustness":
                radius = float(aux.get("radius", 0.25))
                sigma = float(aux.get("sigma", 0.5))
                from scipy.stats import norm
                tau = Fraction(float(norm.cdf(radius / sigma)))
                chol = [[sigma if i == j else 0.0 for j in range(n_feat)]
                        for i in range(n_feat)]
            else:
                import numpy as np
                from scipy.stats import norm
                lipschitz = float(aux.get("lipschitz", 4.0))
                theta = aux.get("theta") or [
                    [4.0 if i == j else 0.0 for j in range(n_feat)]
                    for i in range(n_feat)
                ]
                arr = np.array(theta, dtype=float)
                if not np.allclose(arr, arr.T):
                    raise auditfn.AuditError("similarity matrix must be symmetric")
                chol = np.linalg.cholesky(np.linalg.inv(arr)).tolist()
                tau = Fraction(float(norm.cdf((1.0 / lipschitz) ** 0.5)))
            noises = auditfn.gaussian_noise_vectors(chol, n, n_feat, noise_rng)
            count_shared = None
            y_label = _element_sv(ring, y_shared, 1)
            for delta in noises:
                enc = [fmt.encode(d) for d in delta]
                perturbed = ring.add_const(x_shared, enc)
                _, lab = ml.mpc_predict(ring, fmt, w_shared, perturbed)
                match = ring.ideal_op(
                    "label-match", lambda a, b: [1 if a[0] == b[0] else 0],
                    lab, y_label,
                )
                count_shared = match if count_shared is None else ring.lincomb(
                    [1, 1], [count_shared, match]
                )
            decision = ring.ideal_op(
                "binomial-test",
                lambda c: [1 if auditfn.binomial_upper_tail(c[0], n, tau) <= alpha else 0],
                count_shared,
            )
            return bool(ring.open(decision)[0])

        if fn == "knn-shapley":
            k = int(aux.get("k", 3))
            feats, labels = _split_rows(ring, ds_shared, row_counts, n_feat)
            diffs = []
            for row in feats:
                d = ring.lincomb([1, -1], [row, x_shared])
                sq = ring.mul(d, d)  # raw squared diffs (2f bits, exact)
                diffs.append(sq)

            def closed_form(y_vals, label_vals, *sq_rows):
                dists = [sum(fmt.signed(v) for v in row) for row in sq_rows]
                m = len(dists)
                order = sorted(range(m), key=lambda i: (dists[i], i))
                y_lab = 1 if fmt.signed(y_vals[1]) * 2 >= fmt.scale else 0
                labs01 = [
                    1 if fmt.signed(lv) * 2 >= fmt.scale else 0 for lv in label_vals
                ]
                z = [1 if labs01[order[i]] == y_lab else 0 for i in range(m)]
                s = [Fraction(0)] * m
                s[m - 1] = Fraction(z[m - 1] * min(k, m), k * m)
                for i in range(m - 1, 0, -1):
                    s[i - 1] = s[i] + Fraction((z[i - 1] - z[i]) * min(k, i), k * i)
                out = [Fraction(0)] * m
                for pos, idx in enumerate(order):
                    out[idx] = s[pos]
                return out

            labels_vec = _concat_shared(ring, labels)
            # exact rationals cannot ride the 64-bit ring; the result is
            # computed inside the functionality and opened to the client
            inputs = [y_shared, labels_vec] + diffs
            for v in inputs:
                if ring.identifiable and v.corrupted_by is not None:
                    raise IdentifiedAbort(v.corrupted_by, "tampered attribution input")
            vals = closed_form(
                ring.reconstruct(y_shared),
                ring.reconstruct(labels_vec),
                *[ring.reconstruct(d) for d in diffs],
            )
            ring._round("open-result", len(vals) * 16)
            return vals

        if fn == "camel":
            epochs = int(aux.get("unlearn_epochs", 3))
            tau_mad = float(aux.get("tau_mad", 3.5))
            lr = float(aux.get("lr", self.sc.learning_rate))
            feats_all = _concat_shared(
                ring, [_slice_features(ring, s, d, n_feat)
                       for s, d in zip(ds_shared, training.datasets)]
            )
            half = fmt.scale >> 1
            y_fx = _element_sv(ring, y_shared, 1)
            scores = []
            n_rows = sum(row_counts)
            for i in range(len(ds_shared)):
                label_parts = []
                for j, (s, d) in enumerate(zip(ds_shared, training.datasets)):
                    if j == i:
                        label_parts.append(_const_shared(ring, [half] * d.n_rows))
                    else:
                        label_parts.append(_slice_labels(ring, s, d, n_feat))
                labels_i = _concat_shared(ring, label_parts)
                w_unlearned = ml.mpc_train(
                    ring, fmt, feats_all, labels_i, n_rows, n_feat,
                    _const_shared(ring, [7, 0]), epochs, lr,
                    batch_size=n_rows, initial=w_shared,
                )
                score, _ = ml.mpc_predict(ring, fmt, w_unlearned, x_shared)
                ce = ring.ideal_op(
                    "cross-entropy",
                    lambda s_, y_: [
                        ml.cross_entropy(fmt, s_[0], fmt.encode(
                            1 if fmt.signed(y_[0]) * 2 >= fmt.scale else 0))
                    ],
                    score, y_fx,
                )
                scores.append(ce)
            scores_vec = _concat_shared(ring, scores)

            def mad_outliers(vals):
                med = auditfn._median_fx(fmt, list(vals))
                devs = [abs(fmt.signed(v) - fmt.signed(med)) % fmt.mod for v in vals]
                mad = auditfn._median_fx(fmt, devs)
                tau_fx = fmt.encode(tau_mad)
                return [
                    1 if fmt.signed(fmt.div(d, (mad + 1) % fmt.mod)) > fmt.signed(tau_fx)
                    else 0
                    for d in devs
                ]
            flags = ring.ideal_op("mad-outliers", mad_outliers, scores_vec)
            opened = ring.open(flags)
            return {i for i, f in enumerate(opened) if f}

        if fn == "kernel-shap":
            n_samples = int(aux.get("n_samples", 2 ** n_feat))
            ridge = float(aux.get("ridge", 1e-8))
            rng = self._rng("audit-shap")
            coalitions = auditfn.sample_coalitions(n_feat, n_samples, rng)
            feats, _ = _split_rows(ring, ds_shared, row_counts, n_feat)
            all_z = list(coalitions) + [tuple([0] * n_feat), tuple([1] * n_feat)]
            marginals = []
            for z in all_z:
                acc = None
                for row in feats:
                    masked_rows = []
                    for i in range(ring.n):
                        masked_rows.append(tuple(
                            x_shared.shares[i][e] if z[e] else row.shares[i][e]
                            for e in range(n_feat)
                        ))
                    tag = row.corrupted_by if row.corrupted_by is not None \
                        else x_shared.corrupted_by
                    masked = SharedVector(ring.domain, tuple(masked_rows), tag)
                    score, _ = ml.mpc_predict(ring, fmt, w_shared, masked)
                    acc = score if acc is None else ring.lincomb([1, 1], [acc, score])
                mean = ring.ideal_op(
                    "mean", lambda v: [_div_signed(fmt, v[0], len(feats))], acc
                )
                marginals.append(mean)
            marg_vec = _concat_shared(ring, marginals)

            def solve(vals):
                import numpy as np
                ys = [fmt.decode(v) for v in vals]
                rows, weights, targets = [], [], []
                for z, yv in zip(coalitions, ys[: len(coalitions)]):
                    rows.append([1.0] + list(z))
                    weights.append(auditfn.shapley_kernel_weight(n_feat, sum(z)))
                    targets.append(yv)
                rows.append([1.0] + [0.0] * n_feat)
                weights.append(1e9)
                targets.append(ys[-2])
                rows.append([1.0] + [1.0] * n_feat)
                weights.append(1e9)
                targets.append(ys[-1])
                Z = np.array(rows)
                W = np.diag(weights)
                yv = np.array(targets)
                A = Z.T @ W @ Z + ridge * np.eye(n_feat + 1)
                phi = np.linalg.solve(A, Z.T @ W @ yv)
                return [float(v) for v in phi]

            if ring.identifiable and marg_vec.corrupted_by is not None:
                raise IdentifiedAbort(marg_vec.corrupted_by, "tampered marginals")
            vals = ring.reconstruct(marg_vec)
            ring._round("open-result", len(vals) * 8)
            return solve(vals)

        raise auditfn.AuditError(f"unknown audit function {fn!r}")


# ---------------------------------------------------------------------------
# shared-vector plumbing helpers
# ---------------------------------------------------------------------------


def _blame(transcript: poc.CheckTranscript, default: str) -> str:
    b = transcript.blamed
    if b is None:
        return default
    if isinstance(b, int):
        return f"AC_{b}"
    return b


def _commitment_from_bytes(pp: poc.PocParams, data: bytes) -> poc.PocCommitment:
    backend = pp.backend
    if pp.variant == "hash":
        return poc.PocCommitment("hash", digest=int.from_bytes(data, "big"))
    size = backend.g1_bytes_len
    points = [
        backend.g1_from_bytes(data[i : i + size]) for i in range(0, len(data), size)
    ]
    if pp.variant == "poly":
        from .commit import KzgCommitment
        return poc.PocCommitment(
            "poly", points=tuple(KzgCommitment(pt) for pt in points)
        )
    return poc.PocCommitment("pedersen", elements=tuple(points))


def _concat_shared(abb: Abb, parts: list[SharedVector]) -> SharedVector:
    rows = []
    for i in range(abb.n):
        row: list[int] = []
        for part in parts:
            row.extend(part.shares[i])
        rows.append(tuple(row))
    tag = next((p.corrupted_by for p in parts if p.corrupted_by is not None), None)
    return SharedVector(abb.domain, tuple(rows), tag)


def _slice_features(abb: Abb, flat: SharedVector, ds: ml.Dataset, n_feat: int) -> SharedVector:
    cut = ds.n_rows * n_feat
    rows = tuple(tuple(sh[:cut]) for sh in flat.shares)
    return SharedVector(abb.domain, rows, flat.corrupted_by)


def _slice_labels(abb: Abb, flat: SharedVector, ds: ml.Dataset, n_feat: int) -> SharedVector:
    cut = ds.n_rows * n_feat
    rows = tuple(tuple(sh[cut:]) for sh in flat.shares)
    return SharedVector(abb.domain, rows, flat.corrupted_by)


def _split_rows(
    abb: Abb, ds_shared: list[SharedVector], row_counts: list[int], n_feat: int
) -> tuple[list[SharedVector], list[SharedVector]]:
    """Per-sample feature rows and per-party label slices."""
    feats = []
    labels = []
    for shared, count in zip(ds_shared, row_counts):
        for rix in range(count):
            rows = tuple(
                tuple(sh[rix * n_feat : (rix + 1) * n_feat]) for sh in shared.shares
            )
            feats.append(SharedVector(abb.domain, rows, shared.corrupted_by))
        cut = count * n_feat
        lab = tuple(tuple(sh[cut:]) for sh in shared.shares)
        labels.append(SharedVector(abb.domain, lab, shared.corrupted_by))
    return feats, labels


def _element_sv(abb: Abb, v: SharedVector, idx: int) -> SharedVector:
    rows = tuple((sh[idx],) for sh in v.shares)
    return SharedVector(abb.domain, rows, v.corrupted_by)


def _const_shared(abb: Abb, values: list[int]) -> SharedVector:
    """Public constants as a sharing (party 0 holds the value)."""
    rows = [tuple(v % abb.domain.mod for v in values)]
    for _ in range(abb.n - 1):
        rows.append(tuple(0 for _ in values))
    return SharedVector(abb.domain, tuple(rows))


def _lcm_upto(m: int) -> int:
    import math
    acc = 1
    for i in range(1, m + 1):
        acc = acc * i // math.gcd(acc, i)
    return acc


def _div_signed(fmt: FxFormat, v: int, count: int) -> int:
    s = fmt.signed(v)
    q = abs(s) // count
    return (q if s >= 0 else -q) % fmt.mod


def fmt_signed_ring(fmt: FxFormat, v: int) -> int:
    return fmt.signed(v)
