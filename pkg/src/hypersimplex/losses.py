"""Classification losses: hypersimplex surrogate plus standard baselines.

The hypersimplex loss scores a logit vector by half the squared distance
between its projection onto {y in [0,1]^n : sum(y) = k} and a binary
target; because the projection lands in the box, the loss is bounded,
unlike the raw squared loss. The baselines (zero-one, squared,
cross-entropy, hinge) follow the usual mean-reduced conventions and all
return analytic gradients.
"""

from dataclasses import dataclass

import numpy as np

from .backward import loss_grad_from_residual
from .projection import HypersimplexSpec, _as_score_vector, project


@dataclass
class LossEval:
    """Scalar loss value and its gradient with respect to the input scores."""

    value: float
    grad: np.ndarray


def _as_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError(f"scores must be an n x C matrix, got shape {scores.shape}")
    n, C = scores.shape
    if C < 2:
        raise ValueError(f"need at least 2 classes, got {C}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain NaN or Inf")
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError(f"labels have shape {labels.shape}, expected ({n},)")
    if labels.dtype.kind not in "iu":
        raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ValueError(f"labels must lie in [0, {C}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    return scores, labels.astype(np.int64), n, C


def _one_hot(labels, num_classes):
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def zero_one_loss(scores, labels):
    """Fraction of samples whose argmax class (ties to the smallest index)
    differs from the label."""
    scores, labels, n, _ = _as_scores_labels(scores, labels)
    return float(np.mean(np.argmax(scores, axis=1) != labels))


def squared_loss(scores, labels):
    """Mean squared deviation of the scores from the one-hot targets."""
    scores, labels, n, C = _as_scores_labels(scores, labels)
    resid = scores - _one_hot(labels, C)
    return LossEval(value=float(np.sum(resid**2)) / n, grad=2.0 * resid / n)


def cross_entropy_loss(scores, labels):
    """Mean negative log-softmax of the true class, max-shifted for stability."""
    scores, labels, n, C = _as_scores_labels(scores, labels)
    z = scores - scores.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=1, keepdims=True))
    logp = z - lse
    value = -float(np.mean(logp[np.arange(n), labels]))
    grad = (np.exp(logp) - _one_hot(labels, C)) / n
    return LossEval(value=value, grad=grad)


def hinge_loss(scores, labels):
    """Mean multiclass margin loss: sum over wrong classes of
    max(0, 1 + s_c - s_true)."""
    scores, labels, n, C = _as_scores_labels(scores, labels)
    rows = np.arange(n)
    margins = 1.0 + scores - scores[rows, labels][:, None]
    margins[rows, labels] = 0.0
    violating = margins > 0.0
    value = float(np.sum(np.where(violating, margins, 0.0))) / n
    grad = violating.astype(np.float64)
    grad[rows, labels] = -violating.sum(axis=1)
    return LossEval(value=value, grad=grad / n)


def _as_binary_target(y, n):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n,):
        raise ValueError(f"target has shape {y.shape}, expected ({n},)")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("target must be a binary 0/1 vector")
    return y


def hypersimplex_loss(x, y, spec):
    """Half squared distance between the projection of x/tau and binary y.

    Value is (1/2)||y_hat - y||^2 with y_hat the hypersimplex projection;
    the gradient chains the residual through the projection Jacobian and
    the 1/tau scaling. Bounded by n/2 since both y_hat and y live in the
    unit box. spec.k is the caller's choice, typically sum(y).
    """
    result = project(x, spec)
    y = _as_binary_target(y, spec.n)
    resid = result.y - y
    return LossEval(
        value=0.5 * float(np.dot(resid, resid)),
        grad=loss_grad_from_residual(result, resid, spec.tau),
    )


def estimate_k_per_class(targets):
    """Per-class positive counts of a one-hot target matrix (the plug-in
    cardinality for each class's projection)."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim != 2:
        raise ValueError(f"targets must be an n x C matrix, got shape {targets.shape}")
    if not np.all((targets == 0.0) | (targets == 1.0)):
        raise ValueError("targets must be binary")
    if not np.all(targets.sum(axis=1) == 1.0):
        raise ValueError("target rows must be one-hot")
    return targets.sum(axis=0).astype(np.int64)


@dataclass
class ClassBatch:
    """One batch of the multiclass loss: per-class logit and target columns.

    Column c of logits holds the class-c scores of all n samples; the
    class-c projection runs down that column, over the batch dimension.
    k_per_class and tau_per_class give each class its own cardinality and
    temperature.
    """

    logits: np.ndarray
    targets: np.ndarray
    k_per_class: np.ndarray
    tau_per_class: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 2:
            raise ValueError(f"logits must be n x C, got shape {self.logits.shape}")
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits contain NaN or Inf")
        n, C = self.logits.shape
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.targets.shape != (n, C):
            raise ValueError(
                f"targets have shape {self.targets.shape}, expected {(n, C)}"
            )
        if not np.all((self.targets == 0.0) | (self.targets == 1.0)):
            raise ValueError("targets must be binary")
        if not np.all(self.targets.sum(axis=1) == 1.0):
            raise ValueError("target rows must be one-hot")
        self.k_per_class = np.asarray(self.k_per_class)
        if self.k_per_class.shape != (C,) or self.k_per_class.dtype.kind not in "iu":
            raise ValueError("k_per_class must be a length-C integer sequence")
        self.k_per_class = self.k_per_class.astype(np.int64)
        if np.any(self.k_per_class < 0) or np.any(self.k_per_class > n):
            raise ValueError(f"each k_c must lie in [0, {n}]")
        self.tau_per_class = np.asarray(self.tau_per_class, dtype=np.float64)
        if self.tau_per_class.shape != (C,):
            raise ValueError("tau_per_class must be a length-C sequence")
        if not np.all(np.isfinite(self.tau_per_class)) or np.any(self.tau_per_class <= 0.0):
            raise ValueError("each tau_c must be positive and finite")

    @classmethod
    def from_labels(cls, logits, labels, tau=1.0):
        """Build a batch from integer labels: one-hot targets, k_c from the
        batch's own class counts, one shared temperature."""
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim != 2:
            raise ValueError(f"logits must be n x C, got shape {logits.shape}")
        n, C = logits.shape
        labels = np.asarray(labels)
        if labels.shape != (n,) or labels.dtype.kind not in "iu":
            raise ValueError("labels must be a length-n integer sequence")
        if labels.size and (labels.min() < 0 or labels.max() >= C):
            raise ValueError(f"labels must lie in [0, {C})")
        targets = _one_hot(labels.astype(np.int64), C)
        return cls(
            logits=logits,
            targets=targets,
            k_per_class=estimate_k_per_class(targets),
            tau_per_class=np.full(C, float(tau)),
        )


def hypersimplex_loss_multiclass(batch):
    """Sum over classes of the binary hypersimplex loss on each class column.

    Value is (1/2) sum_c ||p_c - y_c||^2 where p_c projects logit column c
    onto the (n, k_c)-hypersimplex at temperature tau_c; grad column c is
    the corresponding chained residual. The reduction is a sum, not a
    mean; trainers divide by the batch size when they want per-sample
    scale. A class with k_c = 0 and an all-zero target column contributes
    nothing. Class columns are independent, so they may be evaluated in
    any order or in parallel.
    """
    if not isinstance(batch, ClassBatch):
        raise TypeError("batch must be a ClassBatch")
    n, C = batch.logits.shape
    value = 0.0
    grad = np.empty((n, C))
    for c in range(C):
        spec = HypersimplexSpec(n, int(batch.k_per_class[c]), float(batch.tau_per_class[c]))
        result = project(batch.logits[:, c], spec)
        resid = result.y - batch.targets[:, c]
        value += 0.5 * float(np.dot(resid, resid))
        grad[:, c] = loss_grad_from_residual(result, resid, spec.tau)
    return LossEval(value=value, grad=grad)
