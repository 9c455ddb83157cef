"""Conditional-Gaussian predictive models over embedded histories.

Two model families share one prediction contract: given a history row they
emit a Gaussian over the current target sample.

* ``var_linear`` — vector autoregression fit by ridge-stabilized least
  squares with an intercept; homoscedastic full residual covariance.
* ``mlp_gaussian`` — a small tanh network emitting per-dimension mean and
  log-variance, trained by minibatch gradient descent on the Gaussian
  negative log-likelihood.  Training is deterministic under a fixed seed.

Baseline conditioning uses target history only; augmented conditioning
appends the source history.  The entropy gap between the two is what the
transfer-entropy layer consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddedDataset
from .errors import DataFormatError, TrainingDivergedError

VARIANCE_FLOOR = 1e-8
RIDGE_SCALE = 1e-6
_SCALE_FLOOR = 1e-12

BASELINE = "baseline"
AUGMENTED = "augmented"
CONDITIONINGS = (BASELINE, AUGMENTED)

VAR_LINEAR = "var_linear"
MLP_GAUSSIAN = "mlp_gaussian"


@dataclass(frozen=True)
class GaussianPrediction:
    """A single predictive Gaussian: ``mean`` (D,), ``cov`` (D,) diag or (D, D), time ``t``."""

    mean: np.ndarray
    cov: np.ndarray
    t: float


class GaussianPredictions:
    """Batched predictive Gaussians for a run of timesteps.

    Stores either per-dimension variances (``var``, shape (T, D)) or one
    shared full covariance (``cov``, shape (D, D)).  Behaves as a sequence
    of :class:`GaussianPrediction` for spot checks while exposing vectorized
    entropy/log-density for the transfer-entropy layer.
    """

    def __init__(self, mean: np.ndarray, times: np.ndarray, *,
                 var: np.ndarray | None = None, cov: np.ndarray | None = None):
        mean = np.asarray(mean, dtype=float)
        if mean.ndim != 2:
            raise DataFormatError("mean must have shape (T, D)")
        if (var is None) == (cov is None):
            raise DataFormatError("provide exactly one of var=, cov=")
        self.mean = mean
        self.times = np.asarray(times, dtype=float)
        if self.times.shape != (mean.shape[0],):
            raise DataFormatError("times length must match mean rows")
        self.var = None
        self.cov = None
        if var is not None:
            var = np.asarray(var, dtype=float)
            if var.shape != mean.shape:
                raise DataFormatError("var must match mean shape (T, D)")
            if not (np.isfinite(var).all() and (var > 0).all()):
                raise DataFormatError("variances must be positive and finite")
            self.var = var
        else:
            cov = np.asarray(cov, dtype=float)
            d = mean.shape[1]
            if cov.shape != (d, d):
                raise DataFormatError(f"cov must have shape ({d}, {d})")
            if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
                raise DataFormatError("covariance must be symmetric")
            try:
                self._chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise DataFormatError("covariance must be positive definite") from None
            self.cov = cov

    def __len__(self) -> int:
        return self.mean.shape[0]

    def __getitem__(self, i: int) -> GaussianPrediction:
        c = self.var[i] if self.var is not None else self.cov
        return GaussianPrediction(mean=self.mean[i], cov=c, t=float(self.times[i]))

    @property
    def dim(self) -> int:
        return self.mean.shape[1]

    def log_det(self) -> np.ndarray:
        """ln|Sigma_t| for every timestep, shape (T,)."""
        if self.var is not None:
            return np.sum(np.log(self.var), axis=1)
        ld = 2.0 * np.sum(np.log(np.diag(self._chol)))
        return np.full(len(self), ld)

    def entropy(self) -> np.ndarray:
        """Differential entropy in nats per timestep, shape (T,)."""
        d = self.dim
        return 0.5 * d * (1.0 + np.log(2.0 * np.pi)) + 0.5 * self.log_det()

    def log_density(self, x: np.ndarray) -> np.ndarray:
        """ln N(x_t; mean_t, Sigma_t) per timestep for rows ``x`` of shape (T, D)."""
        x = np.asarray(x, dtype=float)
        if x.shape != self.mean.shape:
            raise DataFormatError(f"x shape {x.shape} does not match predictions {self.mean.shape}")
        r = x - self.mean
        d = self.dim
        if self.var is not None:
            maha = np.sum(r * r / self.var, axis=1)
        else:
            z = np.linalg.solve(self._chol, r.T)
            maha = np.sum(z * z, axis=0)
        return -0.5 * (d * np.log(2.0 * np.pi) + self.log_det() + maha)


@dataclass(frozen=True)
class TrainReport:
    """Final mean NLL (nats/sample, original units) and optimizer step count."""

    final_nll: float
    n_iter: int


@dataclass(frozen=True)
class FittedModel:
    """A trained predictor plus everything needed to reapply or serialize it."""

    kind: str
    conditioning: str
    input_dim: int
    output_dim: int
    params: dict[str, np.ndarray]
    hidden: tuple[int, ...] = ()
    seed: int = 0
    train_report: TrainReport = field(default=TrainReport(float("nan"), 0))

    def __post_init__(self) -> None:
        if self.kind not in (VAR_LINEAR, MLP_GAUSSIAN):
            raise DataFormatError(f"unknown model kind {self.kind!r}")
        if self.conditioning not in CONDITIONINGS:
            raise DataFormatError(f"unknown conditioning {self.conditioning!r}")


def _design_rows(ds: EmbeddedDataset, conditioning: str) -> np.ndarray:
    if conditioning == BASELINE:
        return ds.target_hist
    if conditioning == AUGMENTED:
        return ds.joint_hist
    raise DataFormatError(f"unknown conditioning {conditioning!r}")


# ---------------------------------------------------------------------------
# Linear-Gaussian (VAR) fit
# ---------------------------------------------------------------------------

def fit_var(ds: EmbeddedDataset, conditioning: str = BASELINE) -> FittedModel:
    """Least-squares VAR with intercept and homoscedastic residual covariance.

    The normal equations carry a ridge term ``1e-6 * trace(X'X) / dim`` on
    the non-intercept block, which keeps degenerate designs (constant
    channels, duplicated lags) solvable without biasing healthy fits.
    Residual covariance uses the maximum-likelihood 1/T scaling with a
    ``VARIANCE_FLOOR`` added to the diagonal.
    """
    x = _design_rows(ds, conditioning)
    y = ds.targets
    t_rows, p = x.shape
    if t_rows <= p + 1:
        raise DataFormatError(
            f"need more rows than parameters to fit: T={t_rows}, dim={p + 1}"
        )
    z = np.column_stack([np.ones(t_rows), x])
    g = z.T @ z
    lam = RIDGE_SCALE * np.trace(x.T @ x) / p
    reg = lam * np.eye(p + 1)
    reg[0, 0] = 0.0  # intercept is never shrunk
    theta = np.linalg.solve(g + reg, z.T @ y)
    resid = y - z @ theta
    cov = resid.T @ resid / t_rows + VARIANCE_FLOOR * np.eye(y.shape[1])
    d = y.shape[1]
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise DataFormatError("residual covariance is not positive definite")
    nll = 0.5 * d * np.log(2.0 * np.pi) + 0.5 * logdet \
        + 0.5 * np.trace(np.linalg.solve(cov, resid.T @ resid)) / t_rows
    return FittedModel(
        kind=VAR_LINEAR,
        conditioning=conditioning,
        input_dim=p,
        output_dim=d,
        params={"intercept": theta[0], "coef": theta[1:], "cov": cov},
        train_report=TrainReport(final_nll=float(nll), n_iter=1),
    )


# ---------------------------------------------------------------------------
# Heteroscedastic MLP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    """Minibatch gradient-descent settings for :func:`fit_mlp`."""

    epochs: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 256
    seed: int = 0


def _init_layers(input_dim: int, output_dim: int, hidden, rng) -> list[np.ndarray]:
    sizes = [input_dim, *hidden, 2 * output_dim]
    layers: list[np.ndarray] = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        layers.append(np.zeros(fan_out))
    return layers


def _forward(layers, x, output_dim):
    a = x
    acts = [a]
    n_hidden = len(layers) // 2 - 1
    for i in range(n_hidden):
        a = np.tanh(a @ layers[2 * i] + layers[2 * i + 1])
        acts.append(a)
    out = a @ layers[-2] + layers[-1]
    return out[:, :output_dim], out[:, output_dim:], acts


def _nll_and_grads(layers, x, y, output_dim):
    """Mean Gaussian NLL over the batch and its gradient w.r.t. every layer."""
    b = x.shape[0]
    mu, lv, acts = _forward(layers, x, output_dim)
    inv_var = np.exp(-lv)
    resid = y - mu
    nll = 0.5 * np.mean(np.sum(np.log(2.0 * np.pi) + lv + resid**2 * inv_var, axis=1))
    d_mu = -(resid * inv_var) / b
    d_lv = 0.5 * (1.0 - resid**2 * inv_var) / b
    d_out = np.hstack([d_mu, d_lv])
    grads = [np.zeros_like(p) for p in layers]
    grads[-2] = acts[-1].T @ d_out
    grads[-1] = d_out.sum(axis=0)
    d_a = d_out @ layers[-2].T
    n_hidden = len(layers) // 2 - 1
    for i in range(n_hidden - 1, -1, -1):
        d_z = d_a * (1.0 - acts[i + 1] ** 2)
        grads[2 * i] = acts[i].T @ d_z
        grads[2 * i + 1] = d_z.sum(axis=0)
        d_a = d_z @ layers[2 * i].T
    return nll, grads


def fit_mlp(ds: EmbeddedDataset, conditioning: str = BASELINE,
            hidden: tuple[int, ...] = (64, 64),
            train: TrainConfig | None = None) -> FittedModel:
    """Train the heteroscedastic Gaussian network with Adam.

    Inputs and targets are standardized internally (the stored scalers map
    predictions back to original units), which keeps the default learning
    rate usable across data scales.  Raises
    :class:`~cueflow.errors.TrainingDivergedError` on a non-finite batch
    objective.
    """
    train = train or TrainConfig()
    x_raw = _design_rows(ds, conditioning)
    y_raw = ds.targets
    n, p = x_raw.shape
    d = y_raw.shape[1]
    if n < 2:
        raise DataFormatError("need at least two rows to train")

    x_mean, x_scale = x_raw.mean(axis=0), np.maximum(x_raw.std(axis=0), _SCALE_FLOOR)
    y_mean, y_scale = y_raw.mean(axis=0), np.maximum(y_raw.std(axis=0), _SCALE_FLOOR)
    x = (x_raw - x_mean) / x_scale
    y = (y_raw - y_mean) / y_scale

    rng = np.random.default_rng(train.seed)
    layers = _init_layers(p, d, hidden, rng)
    m = [np.zeros_like(q) for q in layers]
    v = [np.zeros_like(q) for q in layers]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    batch = max(1, min(train.batch_size, n))
    for epoch in range(train.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch):
            idx = order[lo:lo + batch]
            nll, grads = _nll_and_grads(layers, x[idx], y[idx], d)
            if not np.isfinite(nll):
                raise TrainingDivergedError(
                    f"non-finite NLL at epoch {epoch}, step {step}"
                )
            step += 1
            for j, g in enumerate(grads):
                m[j] = beta1 * m[j] + (1 - beta1) * g
                v[j] = beta2 * v[j] + (1 - beta2) * g * g
                m_hat = m[j] / (1 - beta1**step)
                v_hat = v[j] / (1 - beta2**step)
                layers[j] = layers[j] - train.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

    final_nll, _ = _nll_and_grads(layers, x, y, d)
    final_nll = float(final_nll + np.sum(np.log(y_scale)))  # back to original units
    params = {f"layer_{i}": q for i, q in enumerate(layers)}
    params.update(x_mean=x_mean, x_scale=x_scale, y_mean=y_mean, y_scale=y_scale)
    return FittedModel(
        kind=MLP_GAUSSIAN,
        conditioning=conditioning,
        input_dim=p,
        output_dim=d,
        params=params,
        hidden=tuple(hidden),
        seed=train.seed,
        train_report=TrainReport(final_nll=final_nll, n_iter=step),
    )


def _mlp_layers(model: FittedModel) -> list[np.ndarray]:
    n_layers = 2 * (len(model.hidden) + 1)
    return [model.params[f"layer_{i}"] for i in range(n_layers)]


def predict(model: FittedModel, rows: np.ndarray,
            times: np.ndarray | None = None) -> GaussianPredictions:
    """Predictive Gaussians for history rows, in original data units.

    Every returned variance is clamped below by ``VARIANCE_FLOOR``.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.shape[1] != model.input_dim:
        raise DataFormatError(
            f"rows have {rows.shape[1]} columns, model expects {model.input_dim}"
        )
    if times is None:
        times = np.arange(rows.shape[0], dtype=float)
    if model.kind == VAR_LINEAR:
        mean = model.params["intercept"] + rows @ model.params["coef"]
        return GaussianPredictions(mean=mean, times=times, cov=model.params["cov"])
    xs = (rows - model.params["x_mean"]) / model.params["x_scale"]
    mu, lv, _ = _forward(_mlp_layers(model), xs, model.output_dim)
    mean = model.params["y_mean"] + model.params["y_scale"] * mu
    var = np.maximum(model.params["y_scale"] ** 2 * np.exp(lv), VARIANCE_FLOOR)
    return GaussianPredictions(mean=mean, times=times, var=var)


def predict_dataset(model: FittedModel, ds: EmbeddedDataset) -> GaussianPredictions:
    """Convenience: predict on an embedded dataset's own rows and timestamps."""
    return predict(model, _design_rows(ds, model.conditioning), times=ds.times)


# ---------------------------------------------------------------------------
# Verification and serialization
# ---------------------------------------------------------------------------

def gradient_check(hidden: tuple[int, ...] = (8,), input_dim: int = 3,
                   output_dim: int = 2, n_rows: int = 16, seed: int = 0,
                   step: float = 1e-5,
                   probe: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """Max relative error between analytic and central-difference NLL gradients.

    ``probe`` optionally supplies the (rows, targets) batch; otherwise a
    small random one is drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    if probe is None:
        x = rng.normal(size=(n_rows, input_dim))
        y = rng.normal(size=(n_rows, output_dim))
    else:
        x, y = (np.asarray(a, dtype=float) for a in probe)
        input_dim, output_dim = x.shape[1], y.shape[1]
    layers = _init_layers(input_dim, output_dim, hidden, rng)
    _, grads = _nll_and_grads(layers, x, y, output_dim)
    worst = 0.0
    for j, layer in enumerate(layers):
        flat = layer.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            hi, _ = _nll_and_grads(layers, x, y, output_dim)
            flat[k] = orig - step
            lo, _ = _nll_and_grads(layers, x, y, output_dim)
            flat[k] = orig
            numeric = (hi - lo) / (2.0 * step)
            analytic = grads[j].ravel()[k]
            err = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
            worst = max(worst, err)
    return worst


def save_model(model: FittedModel, path) -> None:
    """Serialize to self-describing JSON; float round-trip is exact."""
    doc = {
        "kind": model.kind,
        "conditioning": model.conditioning,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "hidden": list(model.hidden),
        "seed": model.seed,
        "train_report": {"final_nll": model.train_report.final_nll,
                         "n_iter": model.train_report.n_iter},
        "params": {k: {"shape": list(np.asarray(p).shape),
                       "data": np.asarray(p, dtype=float).ravel().tolist()}
                   for k, p in model.params.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> FittedModel:
    """Inverse of :func:`save_model`."""
    with open(path) as fh:
        doc = json.load(fh)
    try:
        params = {k: np.asarray(rec["data"], dtype=float).reshape(rec["shape"])
                  for k, rec in doc["params"].items()}
        return FittedModel(
            kind=doc["kind"],
            conditioning=doc["conditioning"],
            input_dim=int(doc["input_dim"]),
            output_dim=int(doc["output_dim"]),
            params=params,
            hidden=tuple(int(h) for h in doc["hidden"]),
            seed=int(doc["seed"]),
            train_report=TrainReport(final_nll=float(doc["train_report"]["final_nll"]),
                                     n_iter=int(doc["train_report"]["n_iter"])),
        )
    except KeyError as exc:
        raise DataFormatError(f"{path}: missing model field {exc}") from None
