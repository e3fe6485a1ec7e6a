"""Receipts: the signature-chained commitment bundles clients keep.

Canonical byte layout: every field is length-prefixed with 4 big-endian
bytes, signature messages concatenate fields in protocol order
(c_D1..c_DN, c_M, c_J for the training signature; the training bundle
followed by c_x and c_y for the inference computing parties' signature),
and receipt files are hex-armored with a 4-byte version header.
"""

from __future__ import annotations

from dataclasses import dataclass

from .poc import PocCommitment

VERSION_HEADER = b"ARC1"


class ReceiptError(Exception):
    pass


def frame(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def concat_frames(fields: list[bytes]) -> bytes:
    return b"".join(frame(f) for f in fields)


def read_frames(data: bytes) -> list[bytes]:
    out = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ReceiptError("truncated frame header")
        n = int.from_bytes(data[pos : pos + 4], "big")
        pos += 4
        if pos + n > len(data):
            raise ReceiptError("truncated frame body")
        out.append(data[pos : pos + n])
        pos += n
    return out


def u32(n: int) -> bytes:
    return n.to_bytes(4, "big")


@dataclass
class TrainingReceipt:
    variant: str
    c_datasets: list[bytes]  # canonical commitment bytes per data holder
    c_model: bytes
    c_randomness: bytes
    sigs_dh: list[bytes]     # one per data holder
    sigs_tc: list[bytes]     # one per training computer (emulated DistSign)

    def bundle_bytes(self) -> bytes:
        """The c of Figure-style messages: c_D1 .. c_DN, c_M, c_J."""
        return concat_frames(self.c_datasets + [self.c_model, self.c_randomness])

    def message(self) -> bytes:
        """What the data holders and computing parties sign."""
        return self.bundle_bytes()

    def to_bytes(self) -> bytes:
        fields = [
            self.variant.encode(),
            u32(len(self.c_datasets)),
            *self.c_datasets,
            self.c_model,
            self.c_randomness,
            u32(len(self.sigs_dh)),
            *self.sigs_dh,
            u32(len(self.sigs_tc)),
            *self.sigs_tc,
        ]
        return VERSION_HEADER + concat_frames(fields)

    @staticmethod
    def from_bytes(data: bytes) -> "TrainingReceipt":
        if data[:4] != VERSION_HEADER:
            raise ReceiptError("bad version header")
        fields = read_frames(data[4:])
        it = iter(fields)
        variant = next(it).decode(errors="replace")
        if variant not in ("poly", "hash", "pedersen"):
            raise ReceiptError(f"unknown commitment variant {variant!r}")
        n_dh = int.from_bytes(next(it), "big")
        c_ds = [next(it) for _ in range(n_dh)]
        c_m = next(it)
        c_j = next(it)
        n_sig = int.from_bytes(next(it), "big")
        sigs_dh = [next(it) for _ in range(n_sig)]
        n_tc = int.from_bytes(next(it), "big")
        sigs_tc = [next(it) for _ in range(n_tc)]
        return TrainingReceipt(variant, c_ds, c_m, c_j, sigs_dh, sigs_tc)


@dataclass
class InferenceReceipt:
    training: TrainingReceipt
    c_x: bytes
    c_y: bytes
    sigs_ic: list[bytes]
    sig_model_owner: bytes  # signs c || c_x || c_y || sig_T || sig_TC || sig_IC

    def ic_message(self) -> bytes:
        return concat_frames(
            [self.training.bundle_bytes(), self.c_x, self.c_y]
        )

    def owner_message(self) -> bytes:
        return concat_frames(
            [
                self.training.bundle_bytes(),
                self.c_x,
                self.c_y,
                concat_frames(self.training.sigs_dh),
                concat_frames(self.training.sigs_tc),
                concat_frames(self.sigs_ic),
            ]
        )

    def to_bytes(self) -> bytes:
        fields = [
            self.training.to_bytes(),
            self.c_x,
            self.c_y,
            u32(len(self.sigs_ic)),
            *self.sigs_ic,
            self.sig_model_owner,
        ]
        return VERSION_HEADER + concat_frames(fields)

    @staticmethod
    def from_bytes(data: bytes) -> "InferenceReceipt":
        if data[:4] != VERSION_HEADER:
            raise ReceiptError("bad version header")
        fields = read_frames(data[4:])
        it = iter(fields)
        training = TrainingReceipt.from_bytes(next(it))
        c_x = next(it)
        c_y = next(it)
        n_ic = int.from_bytes(next(it), "big")
        sigs_ic = [next(it) for _ in range(n_ic)]
        sig_owner = next(it)
        return InferenceReceipt(training, c_x, c_y, sigs_ic, sig_owner)


def to_hex_armor(data: bytes) -> str:
    return data.hex()


def from_hex_armor(text: str) -> bytes:
    return bytes.fromhex(text.strip())


def receipt_size(receipt) -> int:
    """Exact serialized byte length."""
    return len(receipt.to_bytes())


# ---------------------------------------------------------------------------
# Local verification (the T.4 / I.4 checklists)
# ---------------------------------------------------------------------------

from . import commit as cm


@dataclass
class VerifyReport:
    ok: bool
    failed_at: str | None = None


def verify_training_receipt(
    r: TrainingReceipt, pk_dhs: list[bytes], pk_tcs: list[bytes]
) -> VerifyReport:
    msg = r.message()
    if len(r.sigs_dh) != len(pk_dhs):
        return VerifyReport(False, "data-holder signature count")
    for i, (pk, sig) in enumerate(zip(pk_dhs, r.sigs_dh)):
        if not cm.verify(pk, msg, sig):
            return VerifyReport(False, f"data-holder signature {i}")
    ok, idx = cm.dist_verify(pk_tcs, msg, r.sigs_tc)
    if not ok:
        return VerifyReport(False, f"computing-party signature {idx}")
    return VerifyReport(True)


def verify_inference_receipt(
    r: InferenceReceipt,
    pk_dhs: list[bytes],
    pk_tcs: list[bytes],
    pk_ics: list[bytes],
    pk_owner: bytes,
) -> VerifyReport:
    base = verify_training_receipt(r.training, pk_dhs, pk_tcs)
    if not base.ok:
        return base
    ok, idx = cm.dist_verify(pk_ics, r.ic_message(), r.sigs_ic)
    if not ok:
        return VerifyReport(False, f"inference-party signature {idx}")
    if not cm.verify(pk_owner, r.owner_message(), r.sig_model_owner):
        return VerifyReport(False, "model-owner signature")
    return VerifyReport(True)
