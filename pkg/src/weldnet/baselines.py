"""Comparison methods: plain ANN (no gradient reinforcement, no output
shift), adagrad/rmsprop/Nesterov-momentum update rules on the same block
architecture, closed-form normal-equation regression, and polynomial
least-squares fitted by gradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .block import (
    MAX_DEGREE,
    MAX_ITERATIONS,
    MIN_DEGREE,
    MIN_ITERATIONS,
    BlockMetaParams,
    TraceRecord,
    TrainingTrace,
    _forward_all,
    _reg_sum,
    _tau_cost,
    block_gradients,
    init_block,
    train,
)
from .dataset import Dataset, append_bias, expand_features
from .errors import Diverged, ShapeMismatch

OPTIMIZER_KINDS = ("plain", "adagrad", "rmsprop", "nesterov")


@dataclass
class OptimizerState:
    """Update rule plus per-matrix accumulator (squared-gradient sum, moving
    average, or velocity, depending on kind).  One state per weight matrix;
    the accumulator is created lazily on the first step."""

    kind: str
    eta: float
    rho: float = 0.9
    momentum: float = 0.9
    eps: float = 1e-8
    accum: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if not (0.0 < self.rho < 1.0):
            raise ValueError("rho must be in (0, 1)")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must be in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")


def optimizer_step(state: OptimizerState, weights: np.ndarray,
                   gradient: np.ndarray):
    """Apply one update; returns (new state, new weights).

    plain:    w - eta * g
    adagrad:  acc += g^2;                w - eta * g / (sqrt(acc) + eps)
    rmsprop:  acc = rho*acc + (1-rho)g^2; w - eta * g / (sqrt(acc) + eps)
    nesterov: v = mu*v - eta*g;           w + v   (g evaluated by the caller
              at the look-ahead point, see lookahead())
    """
    weights = np.asarray(weights, dtype=np.float64)
    gradient = np.asarray(gradient, dtype=np.float64)
    if weights.shape != gradient.shape:
        raise ShapeMismatch(f"weights {weights.shape} vs gradient {gradient.shape}")
    acc = state.accum
    if acc is None:
        acc = np.zeros_like(weights)
    elif acc.shape != weights.shape:
        raise ShapeMismatch(f"accumulator {acc.shape} vs weights {weights.shape}")

    if state.kind == "plain":
        return state, weights - state.eta * gradient
    if state.kind == "adagrad":
        acc = acc + gradient * gradient
        new_w = weights - state.eta * gradient / (np.sqrt(acc) + state.eps)
    elif state.kind == "rmsprop":
        acc = state.rho * acc + (1.0 - state.rho) * gradient * gradient
        new_w = weights - state.eta * gradient / (np.sqrt(acc) + state.eps)
    else:  # nesterov
        acc = state.momentum * acc - state.eta * gradient
        new_w = weights + acc
    return replace(state, accum=acc), new_w


def lookahead(state: OptimizerState, weights: np.ndarray) -> np.ndarray:
    """Point where the gradient should be evaluated for this state."""
    if state.kind == "nesterov" and state.accum is not None:
        return weights + state.momentum * state.accum
    return weights


def plain_ann_train(meta: BlockMetaParams, X: np.ndarray, y: np.ndarray,
                    seed: int):
    """Block trained with gamma forced to 1 and the output shift disabled.

    The meta's gamma setting is ignored; everything else follows the
    reinforced training path exactly, so results are bit-comparable.
    """
    plain_meta = replace(meta, gamma=1.0)
    block = init_block(plain_meta, np.asarray(X).shape[1], seed)
    return train(block, X, y, use_tau=False)


def optimizer_train(kind: str, meta: BlockMetaParams, X: np.ndarray,
                    y: np.ndarray, seed: int, eta: float, rho: float = 0.9,
                    momentum: float = 0.9, eps: float = 1e-8):
    """Train a block with the named update rule instead of the reinforced
    update; gamma is fixed to 1 and the output shift stays off, so the
    comparison isolates the rule itself.  Returns (block, trace)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = y.size
    block = init_block(replace(meta, gamma=1.0), X.shape[1], seed)
    states = [OptimizerState(kind, eta, rho, momentum, eps)
              for _ in block.matrices()]

    trace = TrainingTrace()
    for t in range(1, meta.iterations + 1):
        mats = block.matrices()
        with np.errstate(over="ignore", invalid="ignore"):
            shifted = [lookahead(st, th) for st, th in zip(states, mats)]
            probe = replace(block, theta1=shifted[0], hidden=shifted[1:-1],
                            theta2=shifted[-1])
            activations, raw = _forward_all(probe, X)
            deltas = block_gradients(probe, X, y, tau=0.0, gamma=1.0,
                                     activations=activations, raw=raw)
            step_cost = _tau_cost(raw, y, 0.0, meta.lam, _reg_sum(probe), m)

            new_states, new_mats = [], []
            for st, th, sh, delta in zip(states, mats, shifted, deltas):
                nobias = sh.copy()
                nobias[0] = 0.0
                grad = (-delta + meta.lam * nobias) / m
                st, new_th = optimizer_step(st, th, grad)
                new_states.append(st)
                new_mats.append(new_th)

        if (not np.isfinite(step_cost)
                or any(not np.all(np.isfinite(th)) for th in new_mats)):
            raise Diverged(iteration=t, trace=trace)
        states = new_states
        block = replace(block, theta1=new_mats[0], hidden=new_mats[1:-1],
                        theta2=new_mats[-1])
        trace.records.append(TraceRecord(
            iteration=t, cost=step_cost,
            grad1_norm=float(np.linalg.norm(deltas[0])),
            grad2_norm=float(np.linalg.norm(deltas[-1])),
            tau=0.0, nu=0.0, cost_tau_zero=step_cost))
    return block, trace


def normal_equation_fit(train_data: Dataset, degree: int) -> np.ndarray:
    """Closed-form least squares on polynomial-expanded, bias-augmented
    features via SVD pseudoinverse (singular values below 1e-12 relative
    are dropped).  Returns a (d'+1) x N weight matrix."""
    Xb = append_bias(expand_features(train_data.features, degree))
    return np.linalg.pinv(Xb, rcond=1e-12) @ train_data.targets


def linear_predict(theta: np.ndarray, features: np.ndarray,
                   degree: int) -> np.ndarray:
    """Apply a NER/MCR weight matrix to raw features."""
    return append_bias(expand_features(features, degree)) @ theta


@dataclass(frozen=True)
class McrParams:
    """Hyperparameters of the gradient-descent polynomial regression."""

    alpha: float
    lam: float
    degree: int
    iterations: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not (MIN_DEGREE <= self.degree <= MAX_DEGREE):
            raise ValueError(f"degree must be in [{MIN_DEGREE}, {MAX_DEGREE}]")
        if not (MIN_ITERATIONS <= self.iterations <= MAX_ITERATIONS):
            raise ValueError(
                f"iterations must be in [{MIN_ITERATIONS}, {MAX_ITERATIONS}]")


def mcr_fit(params: McrParams, train_data: Dataset, seed: int) -> np.ndarray:
    """Full-batch gradient descent on regularized least squares over
    polynomial-expanded features (bias weight unregularized).  Returns the
    (d'+1) x N weight matrix."""
    Xb = append_bias(expand_features(train_data.features, params.degree))
    Y = train_data.targets
    m = Y.shape[0]
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-0.01, 0.01, (Xb.shape[1], Y.shape[1]))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, params.iterations + 1):
            resid = Xb @ theta - Y
            nobias = theta.copy()
            nobias[0] = 0.0
            theta = theta - params.alpha * ((Xb.T @ resid + params.lam * nobias) / m)
            if not np.all(np.isfinite(theta)):
                raise Diverged(iteration=t)
    return theta
