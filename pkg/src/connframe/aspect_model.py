"""Aspect-level prediction: one independent multiclass log-linear
(maximum-entropy) classifier per aspect, mapping a verb's embedding plus a
bias feature to a distribution over the three polarities.

Training minimizes the class-weighted negative log-likelihood plus an L2
penalty on the non-bias weights, with a quasi-Newton batch optimizer (or
plain gradient descent).  Class weighting realizes the sample re-weighting
knob: "balanced" is inverse class frequency, "grid" additionally tunes a
per-class multiplier from {0.5, 1, 2} on dev macro-F1.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .base import ParamsMixin, check_fitted, check_matrix
from .core import ASPECTS, POLARITIES, Aspect, Polarity, parse_polarity
from .embeddings import EmbeddingTable
from .errors import DataError, FormatError
from .numutil import logsumexp, softmax
from .optim import minimize

CLASS_ORDER = POLARITIES  # row order of every weight matrix: (-, =, +)

_GRID_MULTIPLIERS = (0.5, 1.0, 2.0)


def featurize(verb: str, table: EmbeddingTable) -> np.ndarray:
    """Embedding vector with a constant 1.0 bias feature appended."""
    vec = table[verb]
    out = np.empty(vec.size + 1)
    out[:-1] = vec
    out[-1] = 1.0
    return out


def featurize_many(verbs, table: EmbeddingTable) -> np.ndarray:
    return np.array([featurize(v, table) for v in verbs])


def nll_loss_and_grad(w_flat, X, y_idx, sample_weights, l2):
    """Class-weighted multinomial NLL + (l2/2)|W|^2 (bias column excluded).

    w_flat is the row-major flattening of the 3 x (dim+1) weight matrix.
    Returns (loss, flat gradient).
    """
    n, d = X.shape
    W = w_flat.reshape(3, d)
    logits = X @ W.T                      # (n, 3)
    lse = logsumexp(logits, axis=1)       # (n,)
    picked = logits[np.arange(n), y_idx]
    loss = float(np.sum(sample_weights * (lse - picked)))

    P = softmax(logits, axis=1)           # (n, 3)
    R = P.copy()
    R[np.arange(n), y_idx] -= 1.0
    R *= sample_weights[:, None]
    grad = R.T @ X                        # (3, d)

    if l2 > 0.0:
        penalized = W.copy()
        penalized[:, -1] = 0.0            # bias column is not penalized
        loss += 0.5 * l2 * float(np.sum(penalized * penalized))
        grad = grad + l2 * penalized
    return loss, grad.ravel()


def _class_counts(y_idx):
    return np.bincount(y_idx, minlength=3).astype(float)


def _balanced_weights(y_idx):
    """w_c = N / (3 * N_c); classes with no examples get weight 0 (unused)."""
    counts = _class_counts(y_idx)
    n = float(len(y_idx))
    with np.errstate(divide="ignore"):
        w = np.where(counts > 0, n / (3.0 * counts), 0.0)
    return w


class AspectClassifier(ParamsMixin):
    """Maximum-entropy classifier for a single aspect.

    Parameters
    ----------
    aspect : Aspect the classifier predicts.
    l2 : L2 strength on non-bias weights (default 1.0).
    optimizer : "lbfgs" or "gd".
    max_iter : optimizer iteration cap.
    tol : convergence threshold on the gradient sup-norm.
    class_weight : "uniform", "balanced", "grid", or an explicit
        {Polarity: weight} dict.  "grid" requires dev data at fit time.
    seed : kept for interface uniformity; batch training is deterministic.

    Fitted attributes: weights_ (3 x (dim+1)), n_iter_, converged_,
    loss_trace_.
    """

    def __init__(self, aspect, l2=1.0, optimizer="lbfgs", max_iter=500,
                 tol=1e-6, class_weight="uniform", seed=1):
        self.aspect = aspect
        self.l2 = l2
        self.optimizer = optimizer
        self.max_iter = max_iter
        self.tol = tol
        self.class_weight = class_weight
        self.seed = seed

    # -- fitting -----------------------------------------------------------

    def _per_class_weights(self, y_idx):
        mode = self.class_weight
        if isinstance(mode, dict):
            return np.array([float(mode.get(p, 1.0)) for p in CLASS_ORDER])
        if mode == "uniform":
            return np.ones(3)
        if mode in ("balanced", "grid"):
            return _balanced_weights(y_idx)
        raise DataError(f"unknown class_weight mode {mode!r}")

    def _fit_with_weights(self, X, y_idx, class_w):
        sample_w = class_w[y_idx]
        fg = lambda w: nll_loss_and_grad(w, X, y_idx, sample_w, self.l2)
        result = minimize(
            fg,
            np.zeros(3 * X.shape[1]),
            max_iter=self.max_iter,
            tol=self.tol,
            method=self.optimizer,
        )
        return result

    def fit(self, X, y, dev=None):
        """Fit on features X (n, dim+1) and Polarity labels y.

        dev: optional (X_dev, y_dev) pair, used only by class_weight="grid".
        """
        X = check_matrix(X, name="X")
        y = list(y)
        if len(y) == 0:
            raise DataError("cannot train on an empty data set")
        if len(y) != X.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but y has {len(y)} labels")
        y_idx = np.array([int(label) for label in y], dtype=int)

        base_w = self._per_class_weights(y_idx)
        if self.class_weight == "grid":
            if dev is None:
                raise DataError('class_weight="grid" requires dev=(X_dev, y_dev)')
            result, chosen = self._grid_search(X, y_idx, base_w, dev)
            self.grid_multipliers_ = chosen
        else:
            result = self._fit_with_weights(X, y_idx, base_w)

        self.weights_ = result.x.reshape(3, X.shape[1])
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        self.loss_trace_ = result.loss_trace
        return self

    def _grid_search(self, X, y_idx, base_w, dev):
        # Local import: evaluation depends only on core, no cycle back here.
        from .evaluation import macro_f1

        X_dev, y_dev = dev
        X_dev = check_matrix(X_dev, n_columns=X.shape[1], name="X_dev")
        y_dev = list(y_dev)
        best = None
        for m_neg in _GRID_MULTIPLIERS:
            for m_neu in _GRID_MULTIPLIERS:
                for m_pos in _GRID_MULTIPLIERS:
                    mult = np.array([m_neg, m_neu, m_pos])
                    result = self._fit_with_weights(X, y_idx, base_w * mult)
                    W = result.x.reshape(3, X.shape[1])
                    pred = [CLASS_ORDER[i] for i in np.argmax(X_dev @ W.T, axis=1)]
                    score = macro_f1(y_dev, pred)
                    if best is None or score > best[0]:
                        best = (score, result, (m_neg, m_neu, m_pos))
        return best[1], best[2]

    # -- prediction --------------------------------------------------------

    def predict_proba(self, X) -> np.ndarray:
        check_fitted(self, "weights_")
        X = check_matrix(X, n_columns=self.weights_.shape[1], name="X")
        return softmax(X @ self.weights_.T, axis=1)

    def predict(self, X):
        """Argmax labels; exact ties resolve to the lowest polarity."""
        probs = self.predict_proba(X)
        return [CLASS_ORDER[i] for i in np.argmax(probs, axis=1)]


# ---------------------------------------------------------------------------
# Verb-level convenience API used by the frame model and the CLI.
# ---------------------------------------------------------------------------


def train_aspect(data, aspect: Aspect, table: EmbeddingTable, dev=None, **params):
    """Train one classifier from (verb, Polarity) pairs.

    dev, when given, is a list of (verb, Polarity) pairs for grid tuning.
    """
    data = list(data)
    if not data:
        raise DataError("cannot train on an empty data set")
    X = featurize_many([v for v, _ in data], table)
    y = [label for _, label in data]
    clf = AspectClassifier(aspect, **params)
    dev_xy = None
    if dev is not None:
        dev = [(v, l) for v, l in dev if v in table]
        if dev:
            dev_xy = (featurize_many([v for v, _ in dev], table), [l for _, l in dev])
    return clf.fit(X, y, dev=dev_xy)


def predict_label(model: AspectClassifier, verb: str, table: EmbeddingTable) -> Polarity:
    return model.predict(featurize(verb, table)[None, :])[0]


def predict_probs(model: AspectClassifier, verb: str, table: EmbeddingTable) -> np.ndarray:
    return model.predict_proba(featurize(verb, table)[None, :])[0]


def train_all_aspects(frames, table, dev_frames=None, jobs=1, **params):
    """Train the nine per-aspect classifiers from gold frames.

    Verbs missing from the embedding table are filtered out; the count is
    available as the .n_filtered attribute of the returned dict-like.
    Returns {Aspect: AspectClassifier}.
    """
    frames = list(frames)
    usable = [f for f in frames if f.verb in table]
    n_filtered = len(frames) - len(usable)
    if not usable:
        raise DataError("no training verbs are present in the embedding table")

    dev_by_aspect = {a: None for a in ASPECTS}
    if dev_frames is not None:
        dev_usable = [f for f in dev_frames if f.verb in table]
        for a in ASPECTS:
            dev_by_aspect[a] = [(f.verb, f.labels[a]) for f in dev_usable]

    jobs = max(1, int(jobs))
    models = {}
    if jobs == 1:
        for aspect in ASPECTS:
            data = [(f.verb, f.labels[aspect]) for f in usable]
            models[aspect] = train_aspect(
                data, aspect, table, dev=dev_by_aspect[aspect], **params
            )
    else:
        from concurrent.futures import ProcessPoolExecutor

        tasks = [
            (
                [(f.verb, f.labels[aspect]) for f in usable],
                aspect,
                table,
                dev_by_aspect[aspect],
                params,
            )
            for aspect in ASPECTS
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for aspect, model in zip(ASPECTS, pool.map(_train_one, tasks)):
                models[aspect] = model

    models = TrainedAspects(models)
    models.n_filtered = n_filtered
    return models


def _train_one(task):
    data, aspect, table, dev, params = task
    return train_aspect(data, aspect, table, dev=dev, **params)


class TrainedAspects(dict):
    """Plain dict of {Aspect: AspectClassifier} plus a filter counter."""

    n_filtered = 0


def predict_aspect_labels(models, verb, table) -> dict[Aspect, Polarity]:
    return {a: predict_label(models[a], verb, table) for a in ASPECTS}


def predict_aspect_probs(models, verb, table) -> dict[Aspect, np.ndarray]:
    return {a: predict_probs(models[a], verb, table) for a in ASPECTS}


# ---------------------------------------------------------------------------
# Model files: one JSON document per aspect.
# ---------------------------------------------------------------------------


def model_to_dict(model: AspectClassifier) -> dict:
    check_fitted(model, "weights_")
    return {
        "aspect": model.aspect.value,
        "dim": model.weights_.shape[1] - 1,
        "class_order": [p.symbol for p in CLASS_ORDER],
        "weights": [[float(x) for x in row] for row in model.weights_],
        "params": {
            "l2": model.l2,
            "optimizer": model.optimizer,
            "max_iter": model.max_iter,
            "tol": model.tol,
            "seed": model.seed,
        },
    }


def model_from_dict(doc: dict) -> AspectClassifier:
    from .core import parse_aspect

    try:
        aspect = parse_aspect(doc["aspect"])
        weights = np.asarray(doc["weights"], dtype=float)
        class_order = [parse_polarity(s) for s in doc["class_order"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad aspect model document: {exc}") from None
    if weights.shape != (3, int(doc["dim"]) + 1):
        raise FormatError(
            f"aspect model weights have shape {weights.shape}, expected "
            f"(3, {int(doc['dim']) + 1})"
        )
    if list(class_order) != list(CLASS_ORDER):
        raise FormatError("aspect model class order must be -, =, +")
    model = AspectClassifier(aspect, **doc.get("params", {}))
    model.weights_ = weights
    return model


def save_models(models, directory, header=None):
    os.makedirs(directory, exist_ok=True)
    for aspect in ASPECTS:
        doc = model_to_dict(models[aspect])
        if header:
            doc["_header"] = header
        path = os.path.join(directory, f"{aspect.value}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")


def load_models(directory) -> dict[Aspect, AspectClassifier]:
    models = {}
    for aspect in ASPECTS:
        path = os.path.join(directory, f"{aspect.value}.json")
        if not os.path.exists(path):
            raise DataError(f"missing aspect model file: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            models[aspect] = model_from_dict(json.load(fh))
    return models
