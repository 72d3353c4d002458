"""Class-weighted maximum-entropy (binary logistic) classifier.

The loss is the class-weighted negative conditional log-likelihood plus an L2
penalty on the weights (bias unpenalized): positive examples are multiplied
by the negative/positive training-count ratio, which is how the classifier
counteracts the heavy skew toward non-intervened threads. Training is
deterministic; two independent optimizers are provided (L-BFGS-B as the
default, a backtracking gradient descent as a cross-check) and with lambda>0
they must agree on the unique optimum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.optimize
import scipy.sparse as sp
from scipy.special import expit

from .features import FeatureSpace, FeatureVector

logger = logging.getLogger(__name__)

MODEL_FORMAT_HEADER = "forum-sentinel-model 1"


class ModelFormatError(ValueError):
    """Raised when a model file cannot be parsed; reports the byte offset."""


@dataclass(frozen=True)
class TrainConfig:
    l2_lambda: float = 1e-4
    max_iterations: int = 500
    convergence_tol: float = 1e-6
    class_weight_mode: str = "neg_over_pos"  # or "none"
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.class_weight_mode not in ("none", "neg_over_pos"):
            raise ValueError(f"unknown class_weight_mode {self.class_weight_mode!r}")


@dataclass
class MaxentModel:
    weights: dict[str, float]
    bias: float
    feature_space: FeatureSpace
    train_config: TrainConfig
    class_weight_value: float = 1.0
    converged: bool = True
    n_iterations: int = 0

    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights.get(n, 0.0) for n in self.feature_space.names])


def class_weight(n_pos: int, n_neg: int) -> float:
    """Ratio of negative to positive examples, the positive-loss multiplier."""
    if n_pos == 0:
        raise ValueError("no positive examples: class weight undefined")
    return n_neg / n_pos


Dataset = Sequence[tuple[FeatureVector, int]]


def _dataset_space(dataset: Dataset) -> FeatureSpace:
    if not dataset:
        raise ValueError("empty dataset")
    space = dataset[0][0].space
    for vec, _y in dataset:
        if vec.space != space:
            raise ValueError("dataset mixes feature spaces")
    return space


def _to_arrays(dataset: Dataset, space: FeatureSpace) -> tuple[sp.csr_matrix, np.ndarray]:
    rows, cols, data = [], [], []
    y = np.zeros(len(dataset))
    for i, (vec, label) in enumerate(dataset):
        y[i] = float(label)
        # fixed insertion order keeps summation order, hence bits, reproducible
        for name, value in sorted(vec.values.items(), key=lambda kv: space.index(kv[0])):
            rows.append(i)
            cols.append(space.index(name))
            data.append(value)
    X = sp.csr_matrix((data, (rows, cols)), shape=(len(dataset), len(space)))
    return X, y


def _derive_class_weight(y: np.ndarray, config: TrainConfig) -> float:
    if config.class_weight_mode == "none":
        return 1.0
    n_pos = int(y.sum())
    return class_weight(n_pos, len(y) - n_pos)


def _loss_grad_arrays(
    w: np.ndarray,
    b: float,
    X: sp.csr_matrix,
    y: np.ndarray,
    sample_weight: np.ndarray,
    lam: float,
) -> tuple[float, np.ndarray, float]:
    z = X @ w + b
    # log(1 + e^z) - y z, elementwise-stable
    nll = np.logaddexp(0.0, z) - y * z
    loss = float(sample_weight @ nll + 0.5 * lam * (w @ w))
    residual = sample_weight * (expit(z) - y)
    grad_w = X.T @ residual + lam * w
    grad_b = float(residual.sum())
    return loss, grad_w, grad_b


def loss_and_gradient(
    model: MaxentModel,
    dataset: Dataset,
    config: TrainConfig,
    class_weight_override: float | None = None,
) -> tuple[float, dict[str, float], float]:
    """Exact loss and gradient of the weighted objective at the model's point."""
    space = _dataset_space(dataset)
    if space != model.feature_space:
        raise ValueError("dataset feature space differs from the model's")
    X, y = _to_arrays(dataset, space)
    cw = class_weight_override if class_weight_override is not None else _derive_class_weight(y, config)
    sample_weight = np.where(y == 1.0, cw, 1.0)
    loss, grad_w, grad_b = _loss_grad_arrays(
        model.weight_vector(), model.bias, X, y, sample_weight, config.l2_lambda
    )
    grad = {name: float(g) for name, g in zip(space.names, grad_w)}
    return loss, grad, grad_b


def _optimize_lbfgs(fun, theta0, max_iterations, tol):
    result = scipy.optimize.minimize(
        fun,
        theta0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": max_iterations,
            "gtol": tol,
            "ftol": 1e-16,
            "maxfun": max(10 * max_iterations, 15000),
        },
    )
    return result.x, int(result.nit)


def _optimize_gd(fun, theta0, max_iterations, tol):
    """Plain gradient descent with Armijo backtracking; the cross-check optimizer."""
    theta = theta0.copy()
    loss, grad = fun(theta)
    step = 1.0
    it = 0
    while it < max_iterations and np.max(np.abs(grad)) > tol:
        direction = -grad
        slope = grad @ direction
        while True:
            candidate = theta + step * direction
            new_loss, new_grad = fun(candidate)
            if new_loss <= loss + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-18:
                return theta, it
        theta, loss, grad = candidate, new_loss, new_grad
        step = min(step * 2.0, 1e6)
        it += 1
    return theta, it


_OPTIMIZERS = {"lbfgs": _optimize_lbfgs, "gd": _optimize_gd}


def train(dataset: Dataset, config: TrainConfig, method: str = "lbfgs") -> MaxentModel:
    """Fit the classifier; deterministic given (dataset order, config, seed)."""
    if method not in _OPTIMIZERS:
        raise ValueError(f"unknown optimizer {method!r}")
    space = _dataset_space(dataset)
    X, y = _to_arrays(dataset, space)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("training data must contain both classes")
    cw = _derive_class_weight(y, config)
    sample_weight = np.where(y == 1.0, cw, 1.0)

    scale = np.ones(X.shape[1])
    X_opt = X
    if config.standardize:
        # scale-only standardization keeps the design matrix sparse
        mean_sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
        mean = np.asarray(X.mean(axis=0)).ravel()
        std = np.sqrt(np.maximum(mean_sq - mean**2, 0.0))
        scale = np.where(std > 0, std, 1.0)
        X_opt = X @ sp.diags(1.0 / scale)

    def fun(theta: np.ndarray):
        loss, grad_w, grad_b = _loss_grad_arrays(
            theta[:-1], theta[-1], X_opt, y, sample_weight, config.l2_lambda
        )
        return loss, np.append(grad_w, grad_b)

    theta0 = np.zeros(X.shape[1] + 1)
    theta, n_iter = _OPTIMIZERS[method](fun, theta0, config.max_iterations, config.convergence_tol)
    _loss, final_grad = fun(theta)
    grad_inf = float(np.max(np.abs(final_grad))) if final_grad.size else 0.0
    converged = grad_inf <= config.convergence_tol
    if not converged:
        logger.info(
            "optimizer stopped at max_iterations=%d (grad inf-norm %.3g > tol %.3g)",
            config.max_iterations,
            grad_inf,
            config.convergence_tol,
        )
    w = theta[:-1] / scale
    weights = {name: float(value) for name, value in zip(space.names, w)}
    return MaxentModel(
        weights=weights,
        bias=float(theta[-1]),
        feature_space=space,
        train_config=config,
        class_weight_value=cw,
        converged=converged,
        n_iterations=n_iter,
    )


def score(model: MaxentModel, vector: FeatureVector) -> float:
    if vector.space != model.feature_space:
        raise ValueError("vector feature space differs from the model's")
    total = model.bias
    for name, value in vector.values.items():
        total += model.weights.get(name, 0.0) * value
    return total


def predict_proba(model: MaxentModel, vector: FeatureVector) -> float:
    """Probability that the thread draws an intervention."""
    return float(expit(score(model, vector)))


def predict(model: MaxentModel, vector: FeatureVector) -> int:
    """1 (intervened) iff the predicted probability is >= 0.5."""
    return 1 if predict_proba(model, vector) >= 0.5 else 0


def _fmt(x: float) -> str:
    return format(x, ".17g")


def save_model(model: MaxentModel, path: str | Path) -> None:
    """Serialize to the versioned text format (17 significant digits)."""
    cfg = model.train_config
    lines = [
        MODEL_FORMAT_HEADER,
        "config\t"
        + "\t".join(
            [
                f"l2_lambda={_fmt(cfg.l2_lambda)}",
                f"max_iterations={cfg.max_iterations}",
                f"convergence_tol={_fmt(cfg.convergence_tol)}",
                f"class_weight_mode={cfg.class_weight_mode}",
                f"seed={cfg.seed}",
                f"standardize={int(cfg.standardize)}",
            ]
        ),
        "fit\t"
        + "\t".join(
            [
                f"class_weight={_fmt(model.class_weight_value)}",
                f"converged={int(model.converged)}",
                f"n_iterations={model.n_iterations}",
            ]
        ),
        f"space\t{model.feature_space.config}\t{model.feature_space.provenance}\t{len(model.feature_space)}",
    ]
    lines += [f"w\t{name}\t{_fmt(model.weights.get(name, 0.0))}" for name in model.feature_space.names]
    lines.append(f"bias\t{_fmt(model.bias)}")
    lines.append("end")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


class _LineReader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.offset = 0

    def next_line(self, what: str) -> str:
        if self.offset >= len(self.raw):
            raise ModelFormatError(f"truncated model file: expected {what} at byte {self.offset}")
        end = self.raw.find(b"\n", self.offset)
        if end == -1:
            raise ModelFormatError(
                f"truncated model file: unterminated {what} at byte {self.offset}"
            )
        line = self.raw[self.offset : end].decode("utf-8")
        self.offset = end + 1
        return line


def load_model(path: str | Path) -> MaxentModel:
    reader = _LineReader(Path(path).read_bytes())
    at = lambda: reader.offset  # noqa: E731

    if reader.next_line("header") != MODEL_FORMAT_HEADER:
        raise ModelFormatError("not a forum-sentinel model file (bad header at byte 0)")

    def parse_kv(line: str, tag: str) -> dict[str, str]:
        parts = line.split("\t")
        if parts[0] != tag:
            raise ModelFormatError(f"expected {tag!r} line at byte {at()}")
        return dict(p.split("=", 1) for p in parts[1:])

    cfg_kv = parse_kv(reader.next_line("config line"), "config")
    fit_kv = parse_kv(reader.next_line("fit line"), "fit")
    try:
        config = TrainConfig(
            l2_lambda=float(cfg_kv["l2_lambda"]),
            max_iterations=int(cfg_kv["max_iterations"]),
            convergence_tol=float(cfg_kv["convergence_tol"]),
            class_weight_mode=cfg_kv["class_weight_mode"],
            seed=int(cfg_kv["seed"]),
            standardize=bool(int(cfg_kv["standardize"])),
        )
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"bad config line ({exc}) before byte {at()}") from None

    space_line = reader.next_line("space line").split("\t")
    if len(space_line) != 4 or space_line[0] != "space":
        raise ModelFormatError(f"expected space line at byte {at()}")
    _tag, space_config, provenance, ndims_s = space_line
    try:
        ndims = int(ndims_s)
    except ValueError:
        raise ModelFormatError(f"bad dimension count before byte {at()}") from None

    names: list[str] = []
    weights: dict[str, float] = {}
    for _ in range(ndims):
        parts = reader.next_line("weight line").split("\t")
        if len(parts) != 3 or parts[0] != "w":
            raise ModelFormatError(f"expected weight line at byte {at()}")
        try:
            weights[parts[1]] = float(parts[2])
        except ValueError:
            raise ModelFormatError(f"bad weight value before byte {at()}") from None
        names.append(parts[1])

    bias_parts = reader.next_line("bias line").split("\t")
    if len(bias_parts) != 2 or bias_parts[0] != "bias":
        raise ModelFormatError(f"expected bias line at byte {at()}")
    try:
        bias = float(bias_parts[1])
    except ValueError:
        raise ModelFormatError(f"bad bias value before byte {at()}") from None
    if reader.next_line("end marker") != "end":
        raise ModelFormatError(f"expected end marker at byte {at()}")

    space = FeatureSpace(tuple(names), space_config)
    if space.provenance != provenance:
        raise ModelFormatError("feature-space hash mismatch: file is corrupt or edited")
    return MaxentModel(
        weights=weights,
        bias=bias,
        feature_space=space,
        train_config=config,
        class_weight_value=float(fit_kv.get("class_weight", 1.0)),
        converged=bool(int(fit_kv.get("converged", 1))),
        n_iterations=int(fit_kv.get("n_iterations", 0)),
    )
