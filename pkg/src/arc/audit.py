"""Post-hoc auditing functions.

Four families, all computed over the same value abstraction as the ML
layer so they run identically in plaintext and under the MPC simulator:

* randomized-smoothing certification (robustness, and individual
  fairness via a metric-shaped covariance),
* KNN-based Shapley attribution of training samples (closed-form
  recursion, exact rational values),
* party attribution by unlearning and MAD outlier scoring,
* KernelSHAP feature attribution via a weighted least-squares fit.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import norm

from .fixedpoint import FxFormat, DEFAULT_FX
from . import ml


class AuditError(Exception):
    pass


@dataclass
class ShapleyResult:
    """Attribution values; ``values[i]`` belongs to input index i."""

    values: list

    def top(self, k: int = 1) -> list[int]:
        order = sorted(range(len(self.values)), key=lambda i: -self.values[i])
        return order[:k]


# ---------------------------------------------------------------------------
# Randomized smoothing certification
# ---------------------------------------------------------------------------


def binomial_upper_tail(count: int, n: int, tau: Fraction) -> Fraction:
    """Exact P[X >= count] for X ~ Bin(n, tau); no normal approximation."""
    tau = Fraction(tau)
    total = Fraction(0)
    for j in range(count, n + 1):
        total += (
            Fraction(math.comb(n, j)) * tau**j * (1 - tau) ** (n - j)
        )
    return total


def gaussian_noise_vectors(
    chol_rows: list[list[float]], n: int, dim: int, rng: random.Random
) -> list[list[float]]:
    """n samples of L*z with z standard normal; L is a Cholesky factor."""
    out = []
    for _ in range(n):
        z = [rng.gauss(0.0, 1.0) for _ in range(dim)]
        out.append([sum(chol_rows[i][j] * z[j] for j in range(dim)) for i in range(dim)])
    return out


def certify_core(
    predict_label,
    x: list[int],
    y_label: int,
    tau: Fraction,
    chol_rows: list[list[float]],
    n: int,
    alpha: Fraction,
    rng: random.Random,
    fmt: FxFormat = DEFAULT_FX,
) -> bool:
    """Count prediction stability under Gaussian perturbations and run the
    one-sided binomial test: certify iff P[X >= count | Bin(n, tau)] <= alpha.

    The noise is protocol randomness (public, dealer-derived), encoded to
    fixed point and added to the sample before prediction.
    """
    dim = len(x)
    count = 0
    for delta in gaussian_noise_vectors(chol_rows, n, dim, rng):
        perturbed = [(x[i] + fmt.encode(delta[i])) % fmt.mod for i in range(dim)]
        if predict_label(perturbed) == y_label:
            count += 1
    pv = binomial_upper_tail(count, n, tau)
    return pv <= alpha


def certify_rs(
    predict_label,
    x: list[int],
    y_label: int,
    radius: float,
    sigma: float,
    n: int,
    alpha,
    rng: random.Random,
    fmt: FxFormat = DEFAULT_FX,
) -> bool:
    """Local robustness: tau = Phi(R / sigma), isotropic noise sigma^2 I."""
    if sigma <= 0:
        raise AuditError("sigma must be positive")
    tau = Fraction(float(norm.cdf(radius / sigma)))
    dim = len(x)
    chol = [[sigma if i == j else 0.0 for j in range(dim)] for i in range(dim)]
    return certify_core(predict_label, x, y_label, tau, chol, n,
                        Fraction(alpha), rng, fmt)


def certify_fair(
    predict_label,
    x: list[int],
    y_label: int,
    lipschitz: float,
    theta: list[list[float]],
    n: int,
    alpha,
    rng: random.Random,
    fmt: FxFormat = DEFAULT_FX,
) -> bool:
    """Individual fairness: tau = Phi(sqrt(1/L)), covariance Theta^-1."""
    if lipschitz <= 0:
        raise AuditError("Lipschitz constant must be positive")
    arr = np.array(theta, dtype=float)
    if not np.allclose(arr, arr.T):
        raise AuditError("similarity matrix must be symmetric")
    try:
        cov = np.linalg.inv(arr)
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise AuditError("similarity matrix must be positive definite") from exc
    tau = Fraction(float(norm.cdf(math.sqrt(1.0 / lipschitz))))
    return certify_core(
        predict_label, x, y_label, tau, chol.tolist(), n, Fraction(alpha), rng, fmt
    )


# ---------------------------------------------------------------------------
# KNN-Shapley sample attribution
# ---------------------------------------------------------------------------


def latent_distances(
    fmt: FxFormat, x: list[int], rows: list[list[int]]
) -> list[int]:
    """Squared L2 distances in the model's latent space.

    For logistic regression the latent map is the identity on raw
    features; deeper models would override this hook.
    """
    out = []
    for row in rows:
        acc = 0
        for a, b in zip(row, x):
            d = fmt.signed(a) - fmt.signed(b)
            acc += d * d
        out.append(acc)
    return out


def knn_shapley(
    x: list[int],
    y_label: int,
    rows: list[list[int]],
    labels01: list[int],
    k: int,
    fmt: FxFormat = DEFAULT_FX,
) -> ShapleyResult:
    """Closed-form Shapley values of the K-NN surrogate, one backward pass.

    Samples are sorted by latent distance to x (stable, ties by original
    index); the recursion starts from Z[|D|]/|D| and the output is exact
    rational arithmetic aligned to the original indices.
    """
    if k < 1:
        raise AuditError("k must be >= 1")
    m = len(rows)
    if m == 0:
        raise AuditError("empty dataset")
    dists = latent_distances(fmt, x, rows)
    order = sorted(range(m), key=lambda i: (dists[i], i))
    z = [1 if labels01[order[i]] == y_label else 0 for i in range(m)]
    s = [Fraction(0)] * m
    # base case Z[m] * min(K, m) / (K * m); the min() generalizes the
    # K <= |D| closed form so it stays exact when K exceeds the dataset
    s[m - 1] = Fraction(z[m - 1] * min(k, m), k * m)
    for i in range(m - 1, 0, -1):
        # s_i = s_{i+1} + (Z[i] - Z[i+1]) * min(K, i) / (K * i), 1-indexed
        s[i - 1] = s[i] + Fraction((z[i - 1] - z[i]) * min(k, i), k * i)
    values: list = [Fraction(0)] * m
    for pos, idx in enumerate(order):
        values[idx] = s[pos]
    return ShapleyResult(values)


def knn_utility(
    subset: tuple[int, ...],
    order_pos: dict[int, int],
    z_by_index: dict[int, int],
    k: int,
) -> Fraction:
    """Brute-force utility u(S): label agreement among the top-min(K,|S|)
    nearest members of S, averaged over K.  Oracle for the recursion."""
    if not subset:
        return Fraction(0)
    ranked = sorted(subset, key=lambda i: order_pos[i])
    top = ranked[: min(k, len(ranked))]
    return Fraction(sum(z_by_index[i] for i in top), k)


def knn_shapley_bruteforce(
    x: list[int],
    y_label: int,
    rows: list[list[int]],
    labels01: list[int],
    k: int,
    fmt: FxFormat = DEFAULT_FX,
) -> ShapleyResult:
    """Exact Shapley values of the K-NN utility by coalition enumeration."""
    from itertools import combinations

    m = len(rows)
    dists = latent_distances(fmt, x, rows)
    order = sorted(range(m), key=lambda i: (dists[i], i))
    order_pos = {idx: pos for pos, idx in enumerate(order)}
    z_by_index = {i: (1 if labels01[i] == y_label else 0) for i in range(m)}
    fact = [math.factorial(i) for i in range(m + 1)]
    values = []
    for i in range(m):
        others = [j for j in range(m) if j != i]
        total = Fraction(0)
        for size in range(m):
            for sub in combinations(others, size):
                weight = Fraction(fact[size] * fact[m - size - 1], fact[m])
                gain = knn_utility(tuple(sub) + (i,), order_pos, z_by_index, k) - \
                    knn_utility(sub, order_pos, z_by_index, k)
                total += weight * gain
        values.append(total)
    return ShapleyResult(values)


# ---------------------------------------------------------------------------
# Party attribution by unlearning (MAD outliers)
# ---------------------------------------------------------------------------


def _median_fx(fmt: FxFormat, values: list[int]) -> int:
    s = sorted(fmt.signed(v) for v in values)
    mid = len(s) // 2
    if len(s) % 2 == 1:
        return s[mid] % fmt.mod
    return ((s[mid - 1] + s[mid]) >> 1) % fmt.mod


def camel_attribution(
    x: list[int],
    y_label01: int,
    model: ml.Model,
    party_datasets: list[ml.Dataset],
    unlearn_epochs: int,
    tau_mad: float,
    j_values: tuple[int, ...] = (7,),
    lr: float = 0.5,
    fmt: FxFormat = DEFAULT_FX,
) -> set[int]:
    """Flag parties whose removal most changes the prediction's loss.

    For each party, fine-tunes a copy of the model with that party's
    labels replaced by the uniform value 1/2 (the unlearning step), then
    scores the cross-entropy of the suspicious prediction and flags
    MAD-normalized outliers above tau_mad.

    Unlearning runs full-batch so the score of a party depends only on
    the multiset of (sample, label) pairs, not on its block position;
    identical party datasets then tie exactly.
    """
    half = fmt.scale >> 1
    scores = []
    y_fx = fmt.encode(y_label01)
    for i in range(len(party_datasets)):
        feats: list[list[int]] = []
        labels: list[int] = []
        for j, ds in enumerate(party_datasets):
            feats.extend(ds.features)
            labels.extend([half] * ds.n_rows if j == i else ds.labels)
        merged = ml.Dataset(feats, labels, fmt)
        unlearned = ml.train(
            merged, j_values, unlearn_epochs, lr,
            batch_size=merged.n_rows, initial=model.weights, fmt=fmt,
        )
        score, _ = ml.predict(unlearned, x)
        scores.append(ml.cross_entropy(fmt, score, y_fx))
    med = _median_fx(fmt, scores)
    devs = [abs(fmt.signed(s) - fmt.signed(med)) % fmt.mod for s in scores]
    mad = _median_fx(fmt, devs)
    eps = 1  # one fx unit; keeps the ratio finite when all scores tie
    tau_fx = fmt.encode(tau_mad)
    flagged = set()
    for i, d in enumerate(devs):
        ratio = fmt.div(d, (mad + eps) % fmt.mod)
        if fmt.signed(ratio) > fmt.signed(tau_fx):
            flagged.add(i)
    return flagged


# ---------------------------------------------------------------------------
# KernelSHAP feature attribution
# ---------------------------------------------------------------------------


def shapley_kernel_weight(n_features: int, size: int) -> float:
    return (n_features - 1) / (
        math.comb(n_features, size) * size * (n_features - size)
    )


def sample_coalitions(
    n_features: int, budget: int, rng: random.Random
) -> list[tuple[int, ...]]:
    """Indicator vectors with 1 <= |z| <= n-1; the empty and full
    coalitions carry infinite kernel weight and are handled as exact
    anchor constraints by the solver instead."""
    all_proper = []
    for mask in range(1, (1 << n_features) - 1):
        all_proper.append(tuple((mask >> i) & 1 for i in range(n_features)))
    if budget >= len(all_proper):
        return all_proper
    return rng.sample(all_proper, budget)


def kernel_shap(
    predict_score,
    x: list,
    background_rows: list[list],
    n_samples: int,
    rng: random.Random,
    ridge: float = 1e-8,
) -> ShapleyResult:
    """Weighted least-squares fit of an additive explanation model.

    ``predict_score`` maps a feature row to a numeric score; marginals
    are exact averages over the background rows with masked features
    taken from x.  The normal equations are solved with a small ridge
    term; only the prediction vector is private, so under MPC the solve
    is a single public linear combination of the secret marginals.
    """
    n_feat = len(x)
    if n_feat < 2:
        raise AuditError("need at least two features")
    # the two anchor rows always join the system, so n_feat - 1 sampled
    # coalitions suffice to determine the n_feat + 1 coefficients
    if n_samples + 2 < n_feat + 1:
        raise AuditError("not enough coalitions to fit the explanation")
    coalitions = sample_coalitions(n_feat, n_samples, rng)

    def marginal(z: tuple[int, ...]) -> float:
        total = 0.0
        for row in background_rows:
            masked = [x[i] if z[i] else row[i] for i in range(n_feat)]
            total += float(predict_score(masked))
        return total / len(background_rows)

    rows = []
    targets = []
    weights = []
    for z in coalitions:
        rows.append([1.0] + list(z))
        targets.append(marginal(z))
        weights.append(shapley_kernel_weight(n_feat, sum(z)))
    # exact anchors: the empty and all-ones coalitions pin the intercept
    # and the total attribution (their kernel weight is infinite)
    anchor_w = 1e9
    rows.append([1.0] + [0.0] * n_feat)
    targets.append(marginal(tuple([0] * n_feat)))
    weights.append(anchor_w)
    rows.append([1.0] + [1.0] * n_feat)
    targets.append(marginal(tuple([1] * n_feat)))
    weights.append(anchor_w)

    Z = np.array(rows)
    W = np.diag(weights)
    yv = np.array(targets)
    A = Z.T @ W @ Z + ridge * np.eye(n_feat + 1)
    try:
        phi = np.linalg.solve(A, Z.T @ W @ yv)
    except np.linalg.LinAlgError as exc:
        raise AuditError("singular system in the explanation fit") from exc
    return ShapleyResult([float(v) for v in phi])


def shapley_bruteforce(value_fn, n_features: int) -> list[float]:
    """Exact Shapley values of an arbitrary coalition value function."""
    from itertools import combinations

    fact = [math.factorial(i) for i in range(n_features + 1)]
    out = []
    for i in range(n_features):
        others = [j for j in range(n_features) if j != i]
        total = 0.0
        for size in range(n_features):
            for sub in combinations(others, size):
                w = fact[size] * fact[n_features - size - 1] / fact[n_features]
                with_i = tuple(1 if (j in sub or j == i) else 0 for j in range(n_features))
                without = tuple(1 if j in sub else 0 for j in range(n_features))
                total += w * (value_fn(with_i) - value_fn(without))
        out.append(total)
    return out


# ---------------------------------------------------------------------------
# Registry (the allow-list used by the audit phase)
# ---------------------------------------------------------------------------

AUDIT_FUNCTIONS = (
    "robustness",
    "fairness",
    "knn-shapley",
    "camel",
    "kernel-shap",
)
