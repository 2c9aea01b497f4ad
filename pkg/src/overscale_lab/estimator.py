"""Layer-wise budget estimators and their aggregation.

Each estimator is a single-hidden-layer ReLU MLP with a sigmoid output that
regresses the normalized optimal budget from one layer's feature vector.
Per-layer validation MSEs drive inverse-variance weights; the full
generalized-least-squares solution is kept alongside as the covariance-aware
optimum it approximates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .trace_model import LayerFeatureSet, SchemaError, canonical_json

EPS_VAR = 1e-12
DEFAULT_HIDDEN_RATIO = 0.125


@dataclass
class MlpEstimator:
    """sigmoid(w2 . relu(W1 h + b1) + b2); parameters are float64 arrays."""

    w1: np.ndarray   # (hidden, dim)
    b1: np.ndarray   # (hidden,)
    w2: np.ndarray   # (hidden,)
    b2: float

    def __post_init__(self) -> None:
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = float(self.b2)
        h, d = self.w1.shape
        if h < 1 or d < 1:
            raise ValueError("estimator needs at least one hidden unit and input")
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise ValueError("parameter shapes are inconsistent")

    @property
    def dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    epochs: int = 300
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    seed: int = 0
    hidden_ratio: float = DEFAULT_HIDDEN_RATIO

    def __post_init__(self) -> None:
        if (self.batch_size < 1 or self.epochs < 1 or self.learning_rate <= 0
                or self.weight_decay < 0 or self.hidden_ratio <= 0):
            raise ValueError("training hyperparameters must be positive")


@dataclass(frozen=True)
class LayerWeightVector:
    weights: tuple[float, ...]
    sigma_hat_sq: tuple[float, ...]

    def __post_init__(self) -> None:
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("aggregation weights must sum to 1")


@dataclass(frozen=True)
class ErrorCovariance:
    """Symmetric positive-definite error covariance across layers."""

    sigma: np.ndarray

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=np.float64)
        object.__setattr__(self, "sigma", sigma)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValueError("covariance must be symmetric within 1e-10")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive-definite") from exc

    @property
    def num_layers(self) -> int:
        return self.sigma.shape[0]

    @property
    def d_part(self) -> np.ndarray:
        return np.diag(np.diag(self.sigma))

    @property
    def r_part(self) -> np.ndarray:
        return self.sigma - self.d_part


def init_estimator(dim: int, seed: int,
                   hidden_ratio: float = DEFAULT_HIDDEN_RATIO) -> MlpEstimator:
    """Uniform init in +-1/sqrt(fan_in), deterministic per seed."""
    hidden = max(1, int(hidden_ratio * dim))
    rng = np.random.Generator(np.random.Philox(key=seed))
    bound1 = 1.0 / math.sqrt(dim)
    bound2 = 1.0 / math.sqrt(hidden)
    return MlpEstimator(
        w1=rng.uniform(-bound1, bound1, size=(hidden, dim)),
        b1=rng.uniform(-bound1, bound1, size=hidden),
        w2=rng.uniform(-bound2, bound2, size=hidden),
        b2=float(rng.uniform(-bound2, bound2)),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mlp_forward(est: MlpEstimator, h: np.ndarray) -> np.ndarray | float:
    """Estimator output in (0, 1); accepts one vector or a batch."""
    h = np.asarray(h, dtype=np.float64)
    single = h.ndim == 1
    batch = h[None, :] if single else h
    if batch.shape[1] != est.dim:
        raise ValueError(f"feature dim {batch.shape[1]} != estimator dim {est.dim}")
    hidden = np.maximum(batch @ est.w1.T + est.b1, 0.0)
    out = _sigmoid(hidden @ est.w2 + est.b2)
    return float(out[0]) if single else out


def squared_loss_and_grads(est: MlpEstimator, x: np.ndarray, y: np.ndarray
                           ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared loss on a batch and its analytic parameter gradients."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    z1 = x @ est.w1.T + est.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ est.w2 + est.b2
    pred = _sigmoid(z2)
    residual = pred - y
    loss = float(np.mean(residual ** 2))
    dz2 = (2.0 / n) * residual * pred * (1.0 - pred)
    grads = {
        "w2": a1.T @ dz2,
        "b2": np.array([dz2.sum()]),
    }
    da1 = np.outer(dz2, est.w2)
    dz1 = da1 * (z1 > 0.0)
    grads["w1"] = dz1.T @ x
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


def gradient_check(est: MlpEstimator, x: np.ndarray, y: np.ndarray,
                   step: float = 1e-5) -> float:
    """Max relative error of analytic vs central finite-difference gradients."""
    _, grads = squared_loss_and_grads(est, x, y)
    flat_params = np.concatenate([est.w1.ravel(), est.b1, est.w2, [est.b2]])
    flat_grads = np.concatenate([grads["w1"].ravel(), grads["b1"],
                                 grads["w2"], grads["b2"]])

    def loss_at(theta: np.ndarray) -> float:
        h, d = est.w1.shape
        w1 = theta[: h * d].reshape(h, d)
        b1 = theta[h * d: h * d + h]
        w2 = theta[h * d + h: h * d + 2 * h]
        b2 = float(theta[-1])
        probe = MlpEstimator(w1, b1, w2, b2)
        loss, _ = squared_loss_and_grads(probe, x, y)
        return loss

    worst = 0.0
    scale = float(np.max(np.abs(flat_grads))) + 1e-12
    for i in range(flat_params.size):
        bumped = flat_params.copy()
        bumped[i] += step
        up = loss_at(bumped)
        bumped[i] -= 2 * step
        down = loss_at(bumped)
        numeric = (up - down) / (2 * step)
        rel = abs(numeric - flat_grads[i]) / max(abs(flat_grads[i]), scale * 1e-3)
        worst = max(worst, rel)
    return worst


@dataclass
class TrainResult:
    estimator: MlpEstimator
    epoch_losses: list[float] = field(default_factory=list)


def train_estimator(x: np.ndarray, y: np.ndarray,
                    cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Minibatch AdamW on the squared loss; shuffle order fixed by the seed."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("training data must be a non-empty (n, d) matrix")
    if y.shape != (x.shape[0],):
        raise ValueError("labels must be a vector matching the data rows")
    if np.any((y < 0.0) | (y > 1.0)):
        raise ValueError("labels must lie in [0, 1]")
    est = init_estimator(x.shape[1], cfg.seed, cfg.hidden_ratio)
    rng = np.random.Generator(np.random.Philox(key=cfg.seed + 0x5EED))
    params = {"w1": est.w1, "b1": est.b1, "w2": est.w2,
              "b2": np.array([est.b2])}
    moment1 = {k: np.zeros_like(v) for k, v in params.items()}
    moment2 = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    step = 0
    n = x.shape[0]
    losses: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            batch_idx = order[start:start + cfg.batch_size]
            current = MlpEstimator(params["w1"], params["b1"], params["w2"],
                                   float(params["b2"][0]))
            loss, grads = squared_loss_and_grads(current, x[batch_idx], y[batch_idx])
            if math.isnan(loss):
                raise FloatingPointError(f"NaN training loss at epoch {epoch}")
            epoch_loss += loss
            batches += 1
            step += 1
            for key in params:
                g = grads[key]
                moment1[key] = beta1 * moment1[key] + (1 - beta1) * g
                moment2[key] = beta2 * moment2[key] + (1 - beta2) * g * g
                m_hat = moment1[key] / (1 - beta1 ** step)
                v_hat = moment2[key] / (1 - beta2 ** step)
                params[key] = params[key] - cfg.learning_rate * (
                    m_hat / (np.sqrt(v_hat) + adam_eps)
                    + cfg.weight_decay * params[key]
                )
        losses.append(epoch_loss / batches)
    final = MlpEstimator(params["w1"], params["b1"], params["w2"],
                         float(params["b2"][0]))
    return TrainResult(estimator=final, epoch_losses=losses)


def validation_mse(est: MlpEstimator, x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared residual of normalized predictions."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] < 1:
        raise ValueError("validation set must be non-empty")
    pred = mlp_forward(est, x)
    return float(np.mean((pred - y) ** 2))


def validation_mae(est: MlpEstimator, x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] < 1:
        raise ValueError("validation set must be non-empty")
    pred = mlp_forward(est, x)
    return float(np.mean(np.abs(pred - y)))


def inverse_variance_weights(sigma_hat_sq: Sequence[float]) -> LayerWeightVector:
    """w_l proportional to 1/sigma_l^2, floored to avoid division by zero."""
    if len(sigma_hat_sq) < 1:
        raise ValueError("need at least one layer")
    inv = [1.0 / max(float(s), EPS_VAR) for s in sigma_hat_sq]
    total = sum(inv)
    return LayerWeightVector(
        weights=tuple(v / total for v in inv),
        sigma_hat_sq=tuple(float(s) for s in sigma_hat_sq),
    )


def gls_weights(cov: ErrorCovariance) -> LayerWeightVector:
    """Covariance-optimal affine weights sigma^-1 1 / (1' sigma^-1 1)."""
    if np.linalg.cond(cov.sigma) > 1e12:
        raise ValueError("covariance is ill-conditioned (cond > 1e12)")
    ones = np.ones(cov.num_layers)
    solved = np.linalg.solve(cov.sigma, ones)
    w = solved / (ones @ solved)
    return LayerWeightVector(
        weights=tuple(float(v) for v in w),
        sigma_hat_sq=tuple(float(v) for v in np.diag(cov.sigma)),
    )


def aggregate_estimate(per_layer: Sequence[float], weights: LayerWeightVector,
                       n_max: int) -> int:
    """Weighted normalized estimates scaled to a clamped integer budget."""
    if len(per_layer) != len(weights.weights):
        raise ValueError("per-layer estimates and weights differ in length")
    value = n_max * sum(w * e for w, e in zip(weights.weights, per_layer))
    rounded = math.floor(value + 0.5)
    return min(max(rounded, 1), n_max)


@dataclass(frozen=True)
class Theorem2Report:
    mse_gls: float
    analytic_gls: float
    mse_single: tuple[float, ...]
    beats_best_single: bool
    beats_random: bool
    matches_analytic: bool

    @property
    def all_pass(self) -> bool:
        return self.beats_best_single and self.beats_random and self.matches_analytic


def theorem2_mc_check(cov: ErrorCovariance, trials: int = 100_000,
                      seed: int = 0, n_random: int = 50) -> Theorem2Report:
    """Monte-Carlo check that GLS weights minimize aggregation MSE.

    Draws zero-mean Gaussian errors with the given covariance and compares
    the GLS aggregate against every single layer and random feasible weight
    vectors, using paired 4-sigma tolerances.
    """
    if trials < 10_000:
        raise ValueError("need at least 10^4 trials")
    n_layers = cov.num_layers
    rng = np.random.Generator(np.random.Philox(key=seed))
    chol = np.linalg.cholesky(cov.sigma)
    eps = rng.standard_normal((trials, n_layers)) @ chol.T
    w_star = np.array(gls_weights(cov).weights)
    sq_gls = (eps @ w_star) ** 2
    mse_gls = float(sq_gls.mean())

    def paired_ok(sq_other: np.ndarray) -> bool:
        diff = sq_gls - sq_other
        stderr = float(diff.std(ddof=1)) / math.sqrt(trials)
        return float(diff.mean()) <= 4.0 * stderr

    singles = []
    beats_best_single = True
    for layer in range(n_layers):
        sq = eps[:, layer] ** 2
        singles.append(float(sq.mean()))
        if not paired_ok(sq):
            beats_best_single = False
    beats_random = True
    for _ in range(n_random):
        raw = rng.dirichlet(np.ones(n_layers))
        if rng.uniform() < 0.5:
            # signed affine weights still satisfy the sum-to-one constraint
            signs = rng.choice((-1.0, 1.0), size=n_layers)
            raw = raw * signs
            total = raw.sum()
            if abs(total) < 1e-6:
                continue
            raw = raw / total
        if not paired_ok((eps @ raw) ** 2):
            beats_random = False
    analytic = float(w_star @ cov.sigma @ w_star)
    stderr_gls = float(sq_gls.std(ddof=1)) / math.sqrt(trials)
    matches_analytic = abs(mse_gls - analytic) <= 4.0 * stderr_gls
    return Theorem2Report(
        mse_gls=mse_gls,
        analytic_gls=analytic,
        mse_single=tuple(singles),
        beats_best_single=beats_best_single,
        beats_random=beats_random,
        matches_analytic=matches_analytic,
    )


@dataclass(frozen=True)
class DiagSurrogateReport:
    r_inf: float
    off_energy: float
    mse_dev: float
    bounds_hold: bool


def diag_surrogate_diagnostics(cov: ErrorCovariance,
                               weights: Sequence[float]) -> DiagSurrogateReport:
    """Quantifies what ignoring cross-layer error correlations can cost."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (cov.num_layers,):
        raise ValueError("weight vector does not match the covariance size")
    r = cov.r_part
    d = cov.d_part
    r_inf = float(np.max(np.abs(r).sum(axis=1)))
    sigma_norm = float(np.linalg.norm(cov.sigma))
    off_energy = float(np.linalg.norm(r)) / sigma_norm if sigma_norm else 0.0
    quad_r = float(w @ r @ w)
    quad_d = float(w @ d @ w)
    quad_sigma = float(w @ cov.sigma @ w)
    mse_dev = abs(quad_r) / quad_d if quad_d else 0.0
    bounds_hold = (abs(quad_r) <= r_inf + 1e-12
                   and quad_d - r_inf - 1e-12 <= quad_sigma <= quad_d + r_inf + 1e-12)
    return DiagSurrogateReport(
        r_inf=r_inf,
        off_energy=off_energy,
        mse_dev=mse_dev,
        bounds_hold=bounds_hold,
    )


# --- the deployable bundle --------------------------------------------------

@dataclass
class EstimatorBundle:
    """Trained per-layer estimators plus their aggregation weights."""

    estimators: list[MlpEstimator]
    weights: LayerWeightVector
    hidden_ratio: float = DEFAULT_HIDDEN_RATIO

    def __post_init__(self) -> None:
        if len(self.estimators) != len(self.weights.weights):
            raise ValueError("one weight per estimator required")
        dims = {e.dim for e in self.estimators}
        if len(dims) != 1:
            raise ValueError("estimators must share one input dimension")

    @property
    def num_layers(self) -> int:
        return len(self.estimators)

    @property
    def dim(self) -> int:
        return self.estimators[0].dim


def pipeline_estimate(features: Sequence[LayerFeatureSet],
                      bundle: EstimatorBundle, n_max: int) -> list[int]:
    """Layer-wise forward passes then weighted aggregation, per question."""
    budgets = []
    for f in features:
        if f.num_layers != bundle.num_layers:
            raise ValueError(
                f"features {f.question_id!r} have {f.num_layers} layers, "
                f"bundle has {bundle.num_layers}"
            )
        per_layer = [mlp_forward(est, np.asarray(vec))
                     for est, vec in zip(bundle.estimators, f.layer_vectors)]
        budgets.append(aggregate_estimate(per_layer, bundle.weights, n_max))
    return budgets


def bundle_to_json(bundle: EstimatorBundle) -> str:
    obj = {
        "layers": bundle.num_layers,
        "dim": bundle.dim,
        "hidden_ratio": float(bundle.hidden_ratio),
        "estimators": [
            {
                "w1": [[float(v) for v in row] for row in est.w1],
                "b1": [float(v) for v in est.b1],
                "w2": [float(v) for v in est.w2],
                "b2": float(est.b2),
            }
            for est in bundle.estimators
        ],
        "sigma_hat_sq": [float(s) for s in bundle.weights.sigma_hat_sq],
        "weights": [float(w) for w in bundle.weights.weights],
    }
    return canonical_json(obj)


def save_bundle(bundle: EstimatorBundle, path: str | Path) -> None:
    Path(path).write_text(bundle_to_json(bundle) + "\n", encoding="utf-8")


def load_bundle(path: str | Path) -> EstimatorBundle:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    try:
        estimators = [
            MlpEstimator(
                w1=np.array(e["w1"], dtype=np.float64),
                b1=np.array(e["b1"], dtype=np.float64),
                w2=np.array(e["w2"], dtype=np.float64),
                b2=float(e["b2"]),
            )
            for e in obj["estimators"]
        ]
        weights = LayerWeightVector(
            weights=tuple(float(w) for w in obj["weights"]),
            sigma_hat_sq=tuple(float(s) for s in obj["sigma_hat_sq"]),
        )
        bundle = EstimatorBundle(
            estimators=estimators,
            weights=weights,
            hidden_ratio=float(obj["hidden_ratio"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed estimator bundle: {exc}") from exc
    if obj.get("layers") != bundle.num_layers or obj.get("dim") != bundle.dim:
        raise SchemaError(f"{path}: bundle header disagrees with contents")
    return bundle


def train_bundle(train_features: Sequence[LayerFeatureSet],
                 val_features: Sequence[LayerFeatureSet],
                 cfg: TrainConfig = TrainConfig()) -> tuple[EstimatorBundle, dict]:
    """Train one estimator per layer and weight them by validation MSE."""
    if not train_features or not val_features:
        raise ValueError("training and validation sets must be non-empty")
    n_layers = train_features[0].num_layers
    unlabeled = [f.question_id for f in (*train_features, *val_features)
                 if f.label is None]
    if unlabeled:
        raise ValueError(f"unlabeled features cannot train: {unlabeled[:5]}")
    x_train = [np.array([f.layer_vectors[layer] for f in train_features])
               for layer in range(n_layers)]
    x_val = [np.array([f.layer_vectors[layer] for f in val_features])
             for layer in range(n_layers)]
    y_train = np.array([f.label for f in train_features], dtype=np.float64)
    y_val = np.array([f.label for f in val_features], dtype=np.float64)
    estimators = []
    sigma_hat_sq = []
    maes = []
    losses = []
    for layer in range(n_layers):
        result = train_estimator(
            x_train[layer], y_train,
            TrainConfig(batch_size=cfg.batch_size, epochs=cfg.epochs,
                        learning_rate=cfg.learning_rate,
                        weight_decay=cfg.weight_decay,
                        seed=cfg.seed + layer,
                        hidden_ratio=cfg.hidden_ratio),
        )
        estimators.append(result.estimator)
        sigma_hat_sq.append(validation_mse(result.estimator, x_val[layer], y_val))
        maes.append(validation_mae(result.estimator, x_val[layer], y_val))
        losses.append(result.epoch_losses)
    weights = inverse_variance_weights(sigma_hat_sq)
    bundle = EstimatorBundle(estimators=estimators, weights=weights,
                             hidden_ratio=cfg.hidden_ratio)
    stats = {
        "sigma_hat_sq": sigma_hat_sq,
        "val_mae": maes,
        "epoch_losses": losses,
    }
    return bundle, stats
