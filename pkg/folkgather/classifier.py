"""Expert/novice classification: logistic regression, cross-validation,
self-training against an external labeler, and feature ranking.
"""

import hashlib
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.stats import chi2_contingency
from sklearn.metrics import mutual_info_score, precision_recall_fscore_support
from sklearn.model_selection import LeaveOneOut, StratifiedKFold
from sklearn.preprocessing import KBinsDiscretizer

from folkgather.errors import InputError, ModelError, OracleError

logger = logging.getLogger(__name__)

EXPERT = 'expert'
NOVICE = 'novice'

DEFAULT_REG = 0.1
MAX_ITERATIONS = 10000
GRADIENT_TOLERANCE = 1e-6
THRESHOLD = 0.5
RANKING_METHODS = ('info_gain', 'chi_squared', 'model_weight')


def schema_hash(columns):
    return hashlib.sha256('\n'.join(columns).encode('utf-8')).hexdigest()


def _as_signs(labels):
    """Map expert/novice strings, booleans or +-1 to a +1/-1 int array."""
    values = []
    for label in labels:
        if isinstance(label, str):
            if label not in (EXPERT, NOVICE):
                raise InputError(f"unknown label '{label}' (expected expert or novice)")
            values.append(1 if label == EXPERT else -1)
        else:
            values.append(1 if label > 0 else -1)
    return np.asarray(values, dtype=int)


class ClassifierModel:
    """Standardized L2 logistic regression model."""

    def __init__(self, weights, bias, reg, mean, scale, columns):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = float(bias)
        self.reg = float(reg)
        self.mean = np.asarray(mean, dtype=float)     # training-column means (also used to impute)
        self.scale = np.asarray(scale, dtype=float)   # training-column std, 1.0 for constants
        self.columns = list(columns)
        self.iterations = 0
        self.converged = False

    @property
    def schema_hash(self):
        return schema_hash(self.columns)

    def to_dict(self):
        return {
            'weights': self.weights.tolist(),
            'bias': self.bias,
            'reg': self.reg,
            'standardization': {'mean': self.mean.tolist(), 'scale': self.scale.tolist()},
            'columns': self.columns,
            'schema_hash': self.schema_hash,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            model = cls(data['weights'], data['bias'], data['reg'],
                        data['standardization']['mean'], data['standardization']['scale'],
                        data['columns'])
        except (KeyError, TypeError) as e:
            raise InputError(f"model file is missing field {e}")
        if data.get('schema_hash') and data['schema_hash'] != model.schema_hash:
            raise ModelError("model schema hash does not match its column list")
        return model

    def __repr__(self):
        return (f"ClassifierModel(features={len(self.columns)}, reg={self.reg}, "
                f"iterations={self.iterations}, converged={self.converged})")


def save_model(model, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(model.to_dict(), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def load_model(path):
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: cannot read model ({e})")
    return ClassifierModel.from_dict(data)


def _matrix(features):
    if isinstance(features, pd.DataFrame):
        return features.to_numpy(dtype=float), list(features.columns)
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    return X, [f"f{i}" for i in range(X.shape[1])]


def _column_means(X):
    """Per-column means ignoring NaN; 0.0 for columns with no values."""
    if not X.size:
        return np.zeros(X.shape[1])
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RuntimeWarning)
        return np.nan_to_num(np.nanmean(X, axis=0), nan=0.0)


def _impute(X, mean):
    X = X.copy()
    rows, cols = np.nonzero(np.isnan(X))
    X[rows, cols] = mean[cols]
    return X


def logistic_objective(w, b, Z, y, reg):
    """Mean logistic loss plus (reg/2)|w|^2; Z standardized, y in {+1,-1}."""
    margins = y * (Z @ w + b)
    return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * reg * w @ w)


def logistic_gradient(w, b, Z, y, reg):
    """Gradient of logistic_objective as (dw, db)."""
    target = (y > 0).astype(float)
    residual = expit(Z @ w + b) - target
    n = len(y)
    return Z.T @ residual / n + reg * w, float(residual.sum() / n)


def train(features, labels, reg=DEFAULT_REG, max_iterations=MAX_ITERATIONS,
          tolerance=GRADIENT_TOLERANCE):
    """Fit L2 logistic regression by full-batch gradient descent from zero weights.

    The step is 1/L for the Lipschitz constant L of the gradient.
    """
    X, columns = _matrix(features)
    y = _as_signs(labels)
    if len(y) != X.shape[0]:
        raise ModelError(f"{X.shape[0]} feature row(s) but {len(y)} label(s)")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ModelError("training data needs at least one expert and one novice")
    if reg <= 0:
        raise InputError(f"regularization must be positive, got {reg}")

    mean = _column_means(X)
    X = _impute(X, mean)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale

    n = len(y)
    augmented = np.hstack([Z, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.norm(augmented, 2) ** 2 / n + reg
    step = 1.0 / lipschitz

    w = np.zeros(Z.shape[1])
    b = 0.0
    converged = False
    iteration = 0
    while iteration < max_iterations:
        gw, gb = logistic_gradient(w, b, Z, y, reg)
        if math.sqrt(gw @ gw + gb * gb) < tolerance:
            converged = True
            break
        w = w - step * gw
        b = b - step * gb
        iteration += 1
    model = ClassifierModel(w, b, reg, mean, scale, columns)
    model.iterations, model.converged = iteration, converged
    logger.debug(f"Trained on {n} example(s): {iteration} iteration(s), "
                 f"converged={model.converged}")
    return model


def scores(model, features):
    """Sigmoid scores for each row."""
    X, columns = _matrix(features)
    if isinstance(features, pd.DataFrame):
        missing = [c for c in model.columns if c not in features.columns]
        if missing:
            raise ModelError(f"feature table lacks model column(s): {', '.join(missing)}")
        X = features[model.columns].to_numpy(dtype=float)
    if X.shape[1] != len(model.weights):
        raise ModelError(f"expected {len(model.weights)} feature(s), got {X.shape[1]}")
    Z = (_impute(X, model.mean) - model.mean) / model.scale
    return expit(Z @ model.weights + model.bias)


def classify(model, features):
    """Return (label, score) for one feature vector; score >= 0.5 is expert."""
    score = float(scores(model, np.asarray(features, dtype=float).reshape(1, -1))[0])
    return (EXPERT if score >= THRESHOLD else NOVICE), score


def classify_table(model, table):
    """Label every row of a feature table; returns a DataFrame with score and label."""
    s = scores(model, table)
    result = pd.DataFrame({'score': s, 'label': np.where(s >= THRESHOLD, EXPERT, NOVICE)},
                          index=table.index)
    logger.info(f"Classified {len(result)} user(s): "
                f"{int((result['label'] == EXPERT).sum())} expert(s)")
    return result


def _splits(y, folds, seed):
    # folds never exceed the smaller class; tiny classes fall back to leave-one-out
    smallest = int(min((y > 0).sum(), (y < 0).sum()))
    if folds >= len(y) or smallest < 2:
        return list(LeaveOneOut().split(np.zeros(len(y))))
    splitter = StratifiedKFold(n_splits=min(folds, smallest), shuffle=True, random_state=seed)
    return list(splitter.split(np.zeros(len(y)), y))


def _expert_metrics(y, predicted):
    p, r, f, _ = precision_recall_fscore_support(y, predicted, average='binary',
                                                 pos_label=1, zero_division=0)
    return float(p), float(r), float(f)


def cross_validate(features, labels, folds=10, seed=0, reg=DEFAULT_REG, threads=1):
    """Stratified k-fold (leave-one-out when folds >= n) precision, recall and F.

    Expert-class metrics are computed per fold and averaged over the folds.
    Leave-one-out folds hold a single user, so their predictions are pooled
    before scoring instead.
    """
    X, _ = _matrix(features)
    y = _as_signs(labels)
    if folds < 2:
        raise InputError(f"folds must be >= 2, got {folds}")
    splits = _splits(y, folds, seed)
    leave_one_out = all(len(test_idx) == 1 for _, test_idx in splits)

    def predict_fold(split):
        train_idx, test_idx = split
        try:
            model = train(X[train_idx], y[train_idx], reg=reg)
        except ModelError:
            only = 1 if y[train_idx][0] > 0 else -1
            return test_idx, np.full(len(test_idx), only)
        return test_idx, np.where(scores(model, X[test_idx]) >= THRESHOLD, 1, -1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(predict_fold, splits))
    else:
        results = [predict_fold(s) for s in splits]

    if leave_one_out:
        predicted = np.zeros(len(y), dtype=int)
        for test_idx, pred in results:
            predicted[test_idx] = pred
        return _expert_metrics(y, predicted)
    per_fold = np.array([_expert_metrics(y[test_idx], pred) for test_idx, pred in results])
    p, r, f = per_fold.mean(axis=0)
    return float(p), float(r), float(f)


# --- labels and oracles -----------------------------------------------------

def read_labels(path):
    """Read a `user_id,label` CSV into a Series of expert/novice strings."""
    try:
        table = pd.read_csv(path, dtype=str)
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: cannot read labels ({e})")
    if list(table.columns[:2]) != ['user_id', 'label']:
        raise InputError(f"{path}: expected header 'user_id,label'")
    table['label'] = table['label'].str.strip()
    bad = table[~table['label'].isin([EXPERT, NOVICE])]
    if len(bad):
        row = bad.index[0] + 2
        raise InputError(f"{path}: line {row}: label must be expert or novice")
    return pd.Series(table['label'].to_numpy(), index=table['user_id'].to_numpy(), name='label')


def write_labels(labels, path):
    frame = pd.DataFrame({'user_id': list(labels.keys()), 'label': list(labels.values())})
    frame.to_csv(path, index=False)
    return path


class MappingOracle:
    """Labels users from an in-memory mapping (e.g. generator ground truth)."""

    def __init__(self, mapping):
        self.mapping = dict(mapping)

    def __call__(self, user_ids):
        missing = [u for u in user_ids if u not in self.mapping]
        if missing:
            raise OracleError(f"no label for user(s): {', '.join(missing)}")
        return {u: self.mapping[u] for u in user_ids}


class LabelFileOracle:
    """Labels users from a human-edited CSV, re-read on every query."""

    def __init__(self, path):
        self.path = Path(path)

    def __call__(self, user_ids):
        try:
            labels = read_labels(self.path)
        except InputError as e:
            raise OracleError(str(e.message))
        return MappingOracle(labels.to_dict())(user_ids)


class SelfTrainState:
    """Progress of a self-training run."""

    def __init__(self, labels):
        self.iteration = 0
        self.labels = dict(labels)      # user_id -> expert/novice, grows only
        self.history = []               # one dict per iteration
        self.model = None
        self.stopped = None             # 'fixpoint', 'max_iter' or 'oracle'
        self.error = None

    @property
    def positives_found(self):
        return sum(1 for v in self.labels.values() if v == EXPERT)

    @property
    def training_size(self):
        return len(self.labels)

    def history_table(self):
        return pd.DataFrame(self.history, columns=[
            'iteration', 'training_examples', 'positive_examples', 'new_positives',
            'precision', 'recall', 'f_score'])


def _cv_folds(label_values, folds):
    smallest = min(sum(1 for v in label_values if v == EXPERT),
                   sum(1 for v in label_values if v == NOVICE))
    return min(folds, smallest) if smallest >= 2 else len(label_values)


def self_train(table, initial_labels, oracle, max_iter=8, folds=10, seed=0,
               reg=DEFAULT_REG, threads=1):
    """Iteratively train, predict experts in the unlabeled pool, ask the oracle, retrain.

    `table` holds features for every user (labeled and pool); `initial_labels`
    maps user_id -> expert/novice. Stops at max_iter, when no new positives are
    predicted, or when the oracle fails (state keeps everything gathered so far).
    """
    state = SelfTrainState(initial_labels)
    unknown = [u for u in state.labels if u not in table.index]
    if unknown:
        raise InputError(f"labeled user(s) missing from the feature table: {', '.join(unknown[:5])}")

    for iteration in range(1, max_iter + 1):
        state.iteration = iteration
        ids = sorted(state.labels)
        X = table.loc[ids]
        y = [state.labels[u] for u in ids]
        state.model = train(X, y, reg=reg)
        p, r, f = cross_validate(X, y, folds=_cv_folds(y, folds), seed=seed, reg=reg,
                                 threads=threads)

        pool = table.drop(index=ids)
        predicted = classify_table(state.model, pool) if len(pool) else pool
        new_positives = [] if not len(pool) else \
            sorted(predicted.index[predicted['label'] == EXPERT])
        state.history.append({
            'iteration': iteration,
            'training_examples': len(ids),
            'positive_examples': state.positives_found,
            'new_positives': len(new_positives),
            'precision': p, 'recall': r, 'f_score': f,
        })
        logger.info(f"Self-training iteration {iteration}: {len(ids)} example(s), "
                    f"{state.positives_found} positive(s), P={p:.3f} R={r:.3f} F={f:.3f}, "
                    f"{len(new_positives)} new candidate(s)")
        if not new_positives:
            state.stopped = 'fixpoint'
            break
        try:
            answers = oracle(new_positives)
        except OracleError as e:
            logger.warning(f"Oracle failed at iteration {iteration}: {e.message}")
            state.stopped, state.error = 'oracle', e.message
            break
        for user_id in new_positives:
            state.labels[user_id] = answers[user_id]
    else:
        state.stopped = 'max_iter'
    return state


# --- feature ranking --------------------------------------------------------

def discretize(values, n_bins=10):
    """Integer codes: category codes for few distinct values, else equal-frequency bins."""
    values = np.asarray(values, dtype=float)
    distinct = np.unique(values)
    if len(distinct) <= n_bins:
        return np.searchsorted(distinct, values)
    binner = KBinsDiscretizer(n_bins=n_bins, encode='ordinal', strategy='quantile',
                              subsample=None)
    return binner.fit_transform(values.reshape(-1, 1)).ravel().astype(int)


def information_gain(codes, labels):
    """Mutual information (nats) between discretized feature codes and labels."""
    return float(mutual_info_score(_as_signs(labels), codes))


def chi_squared(codes, labels):
    table = pd.crosstab(np.asarray(codes), _as_signs(labels))
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 0.0
    return float(chi2_contingency(table.to_numpy(), correction=False)[0])


def rank_features(table, labels, n_bins=10, reg=DEFAULT_REG):
    """Score and rank every feature by info gain, chi-squared and |model weight|.

    Returns a DataFrame sorted by average rank (1 = most informative).
    Constant features score 0 and rank last in every method.
    """
    y = _as_signs(labels)
    if (y > 0).sum() < 2 or (y < 0).sum() < 2:
        raise ModelError("feature ranking needs at least two examples of each class")
    X, columns = _matrix(table)
    X = _impute(X, _column_means(X))
    constant = np.array([len(np.unique(X[:, j])) <= 1 for j in range(X.shape[1])])

    gains, chis = [], []
    for j in range(X.shape[1]):
        if constant[j]:
            gains.append(0.0)
            chis.append(0.0)
            continue
        codes = discretize(X[:, j], n_bins)
        gains.append(information_gain(codes, y))
        chis.append(chi_squared(codes, y))
    weights = np.abs(train(X, y, reg=reg).weights)
    weights[constant] = 0.0

    result = pd.DataFrame({'info_gain': gains, 'chi_squared': chis, 'model_weight': weights},
                          index=pd.Index(columns, name='feature'))
    for method in RANKING_METHODS:
        ranked = result[method].where(~constant, -np.inf)
        result[f"rank_{method}"] = ranked.rank(ascending=False, method='min').astype(int)
    result['average_rank'] = result[[f"rank_{m}" for m in RANKING_METHODS]].mean(axis=1)
    result['order'] = np.arange(len(result))
    result = result.sort_values(['average_rank', 'order'], kind='mergesort').drop(columns='order')
    return result
