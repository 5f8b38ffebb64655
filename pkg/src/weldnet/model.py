"""Aggregate estimator: one independently-trained block per target column,
an optional input scaler, runtime hidden-width resizing, and JSON persistence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import dataset as ds
from .block import (
    BlockMetaParams,
    RegressionBlock,
    TrainingTrace,
    _forward_all,
    cost,
    init_block,
    run_steps,
    weighted_estimate,
)
from .errors import DimensionMismatch, Diverged, FormatError, IoError, TooFewRows
from .rng import derive_seed

MODEL_FILE_VERSION = 1

RESIZE_PERIOD = 250      # training iterations between width probes
PROBE_ITERATIONS = 50    # probe budget per candidate width
RESIZE_MARGIN = 1e-4     # relative validation-cost improvement to adopt
VAL_FRACTION = 0.2       # rows carved out for width probes


@dataclass
class AggregateModel:
    """Deployable estimator: N blocks, one per target, plus the input scaler."""

    blocks: list
    scaler: ds.ScalerParams | None
    target_names: list

    def __post_init__(self):
        if len(self.blocks) != len(self.target_names):
            raise ValueError("need exactly one block per target")

    @property
    def input_dim(self) -> int:
        if self.scaler is not None:
            return len(self.scaler.means)
        b = self.blocks[0]
        return b.input_dim // (b.meta.degree + 1)


def _prepare_features(model_scaler, features, degree):
    scaled = model_scaler.apply(features) if model_scaler is not None else features
    return ds.expand_features(scaled, degree)


def train_all(metas, train_data: ds.Dataset, seed: int, standardize: bool = True,
              use_tau: bool = True, dynamic_width: bool = False,
              gamma_jitter: bool = False):
    """Train one block per target column; returns (AggregateModel, traces).

    Each block gets a seed derived from (seed, target name), so results do
    not depend on target order.  With dynamic_width, each block holds out a
    validation slice and probes neighboring hidden widths every
    RESIZE_PERIOD iterations.
    """
    metas = list(metas)
    if len(metas) != train_data.n_targets:
        raise ValueError(f"need {train_data.n_targets} meta sets, got {len(metas)}")

    scaler = None
    features = train_data.features
    if standardize:
        scaled_ds, scaler = ds.standardize(train_data)
        features = scaled_ds.features

    blocks, traces = [], []
    for k, (meta, tname) in enumerate(zip(metas, train_data.target_names)):
        bseed = derive_seed(seed, tname)
        X = ds.expand_features(features, meta.degree)
        y = train_data.targets[:, k]
        jitter_rng = (np.random.default_rng(derive_seed(seed, tname, "jitter"))
                      if gamma_jitter else None)
        try:
            if dynamic_width:
                blk, trace = _train_dynamic(meta, X, y, seed, tname,
                                            use_tau, jitter_rng)
            else:
                blk = init_block(meta, X.shape[1], bseed)
                blk = replace(blk, prev_estimates=np.zeros_like(y))
                blk, records = run_steps(blk, X, y, meta.iterations,
                                         use_tau=use_tau, jitter_rng=jitter_rng)
                trace = TrainingTrace(records)
        except Diverged as exc:
            raise Diverged(iteration=exc.iteration, trace=exc.trace,
                           target=tname) from exc
        blocks.append(blk)
        traces.append(trace)
    return AggregateModel(blocks=blocks, scaler=scaler,
                          target_names=list(train_data.target_names)), traces


def _train_dynamic(meta, X, y, seed, tname, use_tau, jitter_rng):
    """Chunked training with width probes on a held-out validation slice."""
    m = y.size
    if m < 3:
        raise TooFewRows("dynamic width needs at least 3 training rows")
    n_val = min(max(1, int(m * VAL_FRACTION)), m - 2)
    perm = np.random.default_rng(derive_seed(seed, tname, "val")).permutation(m)
    val_idx = np.sort(perm[:n_val])
    fit_idx = np.sort(perm[n_val:])
    names = [f"x{j}" for j in range(X.shape[1])]
    fit_ds = ds.Dataset(X[fit_idx], y[fit_idx, None], names, [tname])
    val_ds = ds.Dataset(X[val_idx], y[val_idx, None], names, [tname])

    block = init_block(meta, X.shape[1], derive_seed(seed, tname))
    block = replace(block, prev_estimates=np.zeros(fit_idx.size))
    records = []
    done = 0
    while done < meta.iterations:
        n = min(RESIZE_PERIOD, meta.iterations - done)
        try:
            block, recs = run_steps(block, fit_ds.features, fit_ds.targets[:, 0],
                                    n, start_iteration=done + 1,
                                    use_tau=use_tau, jitter_rng=jitter_rng)
        except Diverged as exc:
            raise Diverged(iteration=exc.iteration,
                           trace=TrainingTrace(records + exc.trace.records)) from exc
        records.extend(recs)
        done += n
        if done < meta.iterations:
            block = resize_hidden(block, fit_ds, val_ds,
                                  derive_seed(seed, tname, "resize", done),
                                  use_tau=use_tau)
    return block, TrainingTrace(records)


def _candidate_widths(k: int) -> list:
    from .block import MAX_NEURONS, MIN_NEURONS
    return sorted(w for w in {k - 1, k, k + 1} if MIN_NEURONS <= w <= MAX_NEURONS)


def _resize_width(block: RegressionBlock, width: int, rng) -> RegressionBlock:
    """Copy of the block grown or shrunk to the given hidden width.

    Growth appends a unit with uniform(-0.01, 0.01) weights and zero bias to
    every layer; shrinkage drops the unit whose theta1 column has the least
    norm, removing the matching row/column in every deeper matrix.
    """
    k = block.width
    if width == k:
        return block
    theta1, theta2 = block.theta1, block.theta2
    hidden = list(block.hidden)
    if width == k + 1:
        new_col = np.zeros((theta1.shape[0], 1))
        new_col[1:, 0] = rng.uniform(-0.01, 0.01, theta1.shape[0] - 1)
        theta1 = np.hstack([theta1, new_col])
        grown = []
        for th in hidden:
            mat = np.zeros((k + 2, k + 1))
            mat[:k + 1, :k] = th
            mat[1:, k] = rng.uniform(-0.01, 0.01, k + 1)
            mat[k + 1, :k] = rng.uniform(-0.01, 0.01, k)
            grown.append(mat)
        hidden = grown
        theta2 = np.vstack([theta2, rng.uniform(-0.01, 0.01, (1, 1))])
    elif width == k - 1:
        j = int(np.argmin(np.linalg.norm(block.theta1, axis=0)))
        theta1 = np.delete(block.theta1, j, axis=1)
        hidden = [np.delete(np.delete(th, 1 + j, axis=0), j, axis=1)
                  for th in hidden]
        theta2 = np.delete(block.theta2, 1 + j, axis=0)
    else:
        raise ValueError(f"can only resize by one unit, got {k} -> {width}")
    meta = replace(block.meta, neurons=width)
    return replace(block, theta1=theta1, theta2=theta2, hidden=hidden, meta=meta)


def resize_hidden(block: RegressionBlock, train: ds.Dataset, val: ds.Dataset,
                  seed: int, use_tau: bool = True) -> RegressionBlock:
    """Probe widths {k-1, k, k+1} and adopt a better one, else stay put.

    Every candidate (current width included) is probe-trained for
    PROBE_ITERATIONS from the current weights; a new width is adopted only
    if its validation cost beats the probed current width by RESIZE_MARGIN
    relative and does not exceed the block's entry validation cost.  With
    no adoption the original block is returned untouched.
    """
    if train.n_targets != 1 or val.n_targets != 1:
        raise DimensionMismatch("resize_hidden expects single-target datasets")
    if train.d != block.input_dim or val.d != block.input_dim:
        raise DimensionMismatch("dataset width does not match block input")
    Xt, yt = train.features, train.targets[:, 0]
    Xv, yv = val.features, val.targets[:, 0]

    probed = {}
    for w in _candidate_widths(block.width):
        rng = np.random.default_rng(derive_seed(seed, "width", w))
        cand = _resize_width(block, w, rng)
        try:
            cand, _ = run_steps(cand, Xt, yt, PROBE_ITERATIONS, use_tau=use_tau)
            probed[w] = (cand, cost(cand, Xv, yv))
        except Diverged:
            probed[w] = (None, np.inf)

    k = block.width
    entry_cost = cost(block, Xv, yv)
    current_cost = probed[k][1]
    best_w, best_cost = None, np.inf
    for w in sorted(probed):
        if w == k:
            continue
        if probed[w][1] < best_cost:
            best_w, best_cost = w, probed[w][1]
    if (best_w is not None and probed[best_w][0] is not None
            and best_cost < current_cost * (1.0 - RESIZE_MARGIN)
            and best_cost <= entry_cost):
        return probed[best_w][0]
    return block


def predict(model: AggregateModel, X_raw: np.ndarray) -> np.ndarray:
    """Estimates for every target; column k comes from block k."""
    X_raw = np.asarray(X_raw, dtype=np.float64)
    if X_raw.ndim != 2 or X_raw.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"expected {model.input_dim} feature columns, got {X_raw.shape}")
    cols = []
    for blk in model.blocks:
        X = _prepare_features(model.scaler, X_raw, blk.meta.degree)
        _, raw = _forward_all(blk, X)
        cols.append(weighted_estimate(raw, blk.tau))
    return np.column_stack(cols)


def _mat_to_doc(mat: np.ndarray) -> dict:
    return {"rows": mat.shape[0], "cols": mat.shape[1],
            "data": [float(v) for v in mat.ravel()]}


def _mat_from_doc(doc: dict) -> np.ndarray:
    mat = np.array(doc["data"], dtype=np.float64)
    return mat.reshape(int(doc["rows"]), int(doc["cols"]))


def save(model: AggregateModel, path) -> None:
    """Write the model as versioned JSON (lossless decimal floats)."""
    doc = {
        "version": MODEL_FILE_VERSION,
        "targets": list(model.target_names),
        "scaler": None if model.scaler is None else {
            "means": [float(v) for v in model.scaler.means],
            "stds": [float(v) for v in model.scaler.stds],
        },
        "blocks": [
            {
                "meta": blk.meta.to_dict(),
                "theta1": _mat_to_doc(blk.theta1),
                "theta2": _mat_to_doc(blk.theta2),
                "hidden": [_mat_to_doc(th) for th in blk.hidden],
                "tau": float(blk.tau),
            }
            for blk in model.blocks
        ],
    }
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load(path) -> AggregateModel:
    """Read a model written by save(); predictions round-trip exactly."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(None, f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != MODEL_FILE_VERSION:
        raise FormatError(doc.get("version") if isinstance(doc, dict) else None)

    scaler = None
    if doc.get("scaler") is not None:
        scaler = ds.ScalerParams(np.array(doc["scaler"]["means"], dtype=np.float64),
                                 np.array(doc["scaler"]["stds"], dtype=np.float64))
    blocks = []
    for bdoc in doc["blocks"]:
        blocks.append(RegressionBlock(
            theta1=_mat_from_doc(bdoc["theta1"]),
            theta2=_mat_from_doc(bdoc["theta2"]),
            hidden=[_mat_from_doc(h) for h in bdoc["hidden"]],
            tau=float(bdoc["tau"]),
            meta=BlockMetaParams.from_dict(bdoc["meta"]),
            prev_estimates=None,
        ))
    return AggregateModel(blocks=blocks, scaler=scaler,
                          target_names=list(doc["targets"]))
