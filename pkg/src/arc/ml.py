"""Desk-scale logistic regression over fixed-point arithmetic.

The same integer core runs in two modes: directly on plaintext values,
and under the MPC layer (Beaver products for secret*secret work, ideal
ABB primitives for truncation and the piecewise-linear sigmoid).  Both
paths execute identical integer operations in identical order, so the
resulting models agree bit for bit.

The sigmoid is the three-segment piecewise-linear approximation with
slope 1/4 between knees at -2 and +2; training minimizes the matching
loss of that link function (the convex integral whose gradient in the
pre-activation is exactly sigma(t) - y, so updates do not vanish in the
saturated segments) with mini-batch gradient descent whose batch order
is drawn from the committed randomness J.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass

from .algebra import stable_seed
from .fixedpoint import FxFormat, DEFAULT_FX
from .mpc import Abb, SharedVector

LN2_FX16 = 45426  # round(ln 2 * 2^16)


@dataclass
class Model:
    weights: list[int]  # fx-encoded, length n_features + 1 (bias last)
    fmt: FxFormat = DEFAULT_FX

    @property
    def n_features(self) -> int:
        return len(self.weights) - 1


@dataclass
class Dataset:
    features: list[list[int]]  # fx-encoded rows
    labels: list[int]          # fx-encoded 0.0 / 1.0 (soft labels allowed)
    fmt: FxFormat = DEFAULT_FX

    @property
    def n_rows(self) -> int:
        return len(self.features)

    @property
    def n_features(self) -> int:
        return len(self.features[0]) if self.features else 0

    def flatten(self) -> list[int]:
        """Row-major features followed by labels; the committed encoding."""
        out: list[int] = []
        for row in self.features:
            out.extend(row)
        out.extend(self.labels)
        return out


def load_csv(path: str, fmt: FxFormat = DEFAULT_FX) -> Dataset:
    """Header row, float feature columns, integer label in the last column."""
    features: list[list[int]] = []
    labels: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            if not row:
                continue
            features.append([fmt.encode(float(v)) for v in row[:-1]])
            labels.append(fmt.encode(int(row[-1])))
    return Dataset(features, labels, fmt)


# ---------------------------------------------------------------------------
# Integer core (shared between the plaintext and MPC paths)
# ---------------------------------------------------------------------------


def sigmoid_pwl(fmt: FxFormat, t: int) -> int:
    """0 below -2, 1 above +2, 0.25*t + 0.5 in between."""
    s = fmt.signed(t)
    two = 2 * fmt.scale
    if s <= -two:
        return 0
    if s >= two:
        return fmt.scale
    return ((s >> 2) + (fmt.scale >> 1)) % fmt.mod


def sigmoid_integral(fmt: FxFormat, t: int) -> int:
    """S(t) = integral of the piecewise-linear sigmoid from -inf to t.

    0 below -2, (t+2)^2 / 8 between the knees, t at and above +2.
    """
    s = fmt.signed(t)
    two = 2 * fmt.scale
    if s <= -two:
        return 0
    if s >= two:
        return s % fmt.mod
    shifted = (s + two) % fmt.mod
    sq = fmt.mul_trunc(shifted, shifted)
    return ((fmt.signed(sq)) >> 3) % fmt.mod


def dot_raw(fmt: FxFormat, w: list[int], x: list[int]) -> int:
    """Sum of signed products; carries 2f fractional bits (no truncation)."""
    return sum(fmt.signed(a) * fmt.signed(b) for a, b in zip(w, x))


def preactivation(fmt: FxFormat, weights: list[int], row: list[int]) -> int:
    """w . x + bias with a single truncation of the raw accumulator."""
    raw = dot_raw(fmt, weights[:-1], row) + (fmt.signed(weights[-1]) << fmt.f)
    return fmt.trunc(raw % fmt.mod)


def predict(model: Model, row: list[int]) -> tuple[int, int]:
    """Class score and thresholded label for one sample."""
    if len(row) != model.n_features:
        raise ValueError(
            f"feature width mismatch: {len(row)} vs {model.n_features}"
        )
    fmt = model.fmt
    score = sigmoid_pwl(fmt, preactivation(fmt, model.weights, row))
    label = 1 if fmt.signed(score) * 2 >= fmt.scale else 0
    return score, label


def batch_order(j_values: tuple[int, ...], epoch: int, n: int) -> list[int]:
    """Deterministic sample permutation derived from the committed J."""
    rng = random.Random(stable_seed("batch-order", j_values, epoch))
    order = list(range(n))
    rng.shuffle(order)
    return order


def _div_toward_zero(fmt: FxFormat, v: int, count: int) -> int:
    s = fmt.signed(v)
    q = abs(s) // count
    return (q if s >= 0 else -q) % fmt.mod


def sample_gradient(
    fmt: FxFormat, weights: list[int], row: list[int], label: int
) -> list[int]:
    """Gradient of the matching loss S(t) - y*t at t = w.x + b.

    d/dt is sigma(t) - y, so the partials are (sigma(t) - y) * x_i and
    the bias picks up the error itself.  Returns fx-encoded values.
    """
    t = preactivation(fmt, weights, row)
    err = (sigmoid_pwl(fmt, t) - label) % fmt.mod
    grads = [fmt.mul_trunc(err, x) for x in row]
    grads.append(err)
    return grads


def matching_loss(fmt: FxFormat, weights: list[int], row: list[int], label: int) -> int:
    """S(t) - y*t; the convex loss whose t-gradient is sigma(t) - y."""
    t = preactivation(fmt, weights, row)
    return (sigmoid_integral(fmt, t) - fmt.mul_trunc(label, t)) % fmt.mod


def train(
    dataset: Dataset,
    j_values: tuple[int, ...],
    epochs: int,
    lr: float | int,
    batch_size: int = 4,
    initial: list[int] | None = None,
    fmt: FxFormat = DEFAULT_FX,
) -> Model:
    """Mini-batch gradient descent; epochs=0 yields the zero model."""
    n_feat = dataset.n_features
    weights = list(initial) if initial is not None else [0] * (n_feat + 1)
    lr_fx = lr if isinstance(lr, int) else fmt.encode(lr)
    for epoch in range(epochs):
        order = batch_order(j_values, epoch, dataset.n_rows)
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            acc = [0] * (n_feat + 1)
            for idx in batch:
                g = sample_gradient(fmt, weights, dataset.features[idx],
                                    dataset.labels[idx])
                for i in range(n_feat + 1):
                    acc[i] = (acc[i] + g[i]) % fmt.mod
            for i in range(n_feat + 1):
                avg = _div_toward_zero(fmt, acc[i], len(batch))
                step = fmt.mul_trunc(lr_fx, avg)
                weights[i] = (weights[i] - step) % fmt.mod
    return Model(weights, fmt)


def fx_log(fmt: FxFormat, v: int) -> int:
    """Natural log of a positive fixed-point value, pure integer math.

    Clamps the argument to the smallest representable positive value;
    uses ln(v) = shift*ln2 + 2*atanh((m-1)/(m+1)) on the normalized
    mantissa, accurate to a few ulp at f=16.
    """
    s = max(fmt.signed(v), 1)
    shift = s.bit_length() - 1 - fmt.f
    mant = (s >> shift) if shift >= 0 else (s << -shift)  # in [2^f, 2^(f+1))
    num = (mant - fmt.scale) << fmt.f
    u = num // (mant + fmt.scale)
    u2 = (u * u) >> fmt.f
    term, total = u, 0
    for k in (1, 3, 5, 7, 9):
        total += term // k
        term = (term * u2) >> fmt.f
    ln2 = LN2_FX16 if fmt.f == 16 else fmt.encode(math.log(2))
    return (shift * ln2 + 2 * total) % fmt.mod


def cross_entropy(fmt: FxFormat, score: int, label: int) -> int:
    """-(y ln s + (1-y) ln(1-s)) on fx values, scores clamped away from 0/1."""
    y = fmt.signed(label)
    s = fmt.signed(score)
    one = fmt.scale
    term1 = y * fmt.signed(fx_log(fmt, s))
    term0 = (one - y) * fmt.signed(fx_log(fmt, (one - s) % fmt.mod))
    return (-((term1 + term0) >> fmt.f)) % fmt.mod


# ---------------------------------------------------------------------------
# MPC execution path
# ---------------------------------------------------------------------------


def _tile(sv: SharedVector, times: int) -> SharedVector:
    """Valid sharing of the length-1 secret repeated ``times`` times."""
    rows = tuple(tuple(sh[0] for _ in range(times)) for sh in sv.shares)
    return SharedVector(sv.domain, rows, sv.corrupted_by)


def _element(sv: SharedVector, idx: int) -> SharedVector:
    rows = tuple((sh[idx],) for sh in sv.shares)
    return SharedVector(sv.domain, rows, sv.corrupted_by)


def _mpc_preactivation(
    abb: Abb, fmt: FxFormat, weights: SharedVector, row: SharedVector
) -> SharedVector:
    n_feat = row.length
    w_feat = SharedVector(
        weights.domain,
        tuple(sh[:n_feat] for sh in weights.shares),
        weights.corrupted_by,
    )
    prods = abb.mul(w_feat, row)  # raw products, 2f fractional bits
    mod = fmt.mod
    raw_rows = []
    for i in range(abb.n):
        acc = sum(prods.shares[i]) % mod
        acc = (acc + (weights.shares[i][n_feat] << fmt.f)) % mod
        raw_rows.append((acc,))
    raw = SharedVector(abb.domain, tuple(raw_rows), prods.corrupted_by
                       if prods.corrupted_by is not None else weights.corrupted_by)
    return abb.ideal_op("trunc", lambda v: [fmt.trunc(v[0])], raw)


def mpc_predict(
    abb: Abb, fmt: FxFormat, weights: SharedVector, row: SharedVector
) -> tuple[SharedVector, SharedVector]:
    """Shared (score, label) of one sample under the ABB."""
    t = _mpc_preactivation(abb, fmt, weights, row)
    score = abb.ideal_op("sigmoid", lambda v: [sigmoid_pwl(fmt, v[0])], t)
    label = abb.ideal_op(
        "threshold",
        lambda v: [1 if fmt.signed(v[0]) * 2 >= fmt.scale else 0],
        score,
    )
    return score, label


def mpc_train(
    abb: Abb,
    fmt: FxFormat,
    features: SharedVector,
    labels: SharedVector,
    n_rows: int,
    n_feat: int,
    shared_j: SharedVector,
    epochs: int,
    lr: float | int,
    batch_size: int = 4,
    initial: SharedVector | None = None,
) -> SharedVector:
    """Training under the ABB; mirrors ``train`` operation for operation.

    ``features`` holds the row-major flattened matrix.  The batch order
    derives from the secret J inside the functionality (J itself is never
    opened to the parties).
    """
    lr_fx = lr if isinstance(lr, int) else fmt.encode(lr)
    j_values = tuple(abb.reconstruct(shared_j))  # functionality-internal
    if initial is None:
        zeros = [0] * (n_feat + 1)
        weights = SharedVector(
            abb.domain, tuple(tuple(zeros) for _ in range(abb.n))
        )
    else:
        weights = initial

    def row_slice(idx: int) -> SharedVector:
        rows = tuple(
            tuple(sh[idx * n_feat : (idx + 1) * n_feat]) for sh in features.shares
        )
        return SharedVector(abb.domain, rows, features.corrupted_by)

    for epoch in range(epochs):
        order = batch_order(j_values, epoch, n_rows)
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            acc = None
            for idx in batch:
                row = row_slice(idx)
                t = _mpc_preactivation(abb, fmt, weights, row)
                score = abb.ideal_op(
                    "sigmoid", lambda v: [sigmoid_pwl(fmt, v[0])], t
                )
                err = abb.lincomb([1, -1], [score, _element(labels, idx)])
                g_raw = abb.mul(_tile(err, n_feat), row)
                g = abb.ideal_op(
                    "trunc", lambda v: [fmt.trunc(x) for x in v], g_raw
                )
                grads = SharedVector(
                    abb.domain,
                    tuple(
                        tuple(list(gr) + [ef[0]])
                        for gr, ef in zip(g.shares, err.shares)
                    ),
                    g.corrupted_by,
                )
                acc = grads if acc is None else abb.lincomb([1, 1], [acc, grads])
            stepped = abb.ideal_op(
                "batch-step",
                lambda v: [
                    fmt.mul_trunc(lr_fx, _div_toward_zero(fmt, x, len(batch)))
                    for x in v
                ],
                acc,
            )
            weights = abb.lincomb([1, -1], [weights, stepped])
    return weights
