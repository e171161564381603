"""Desk-scale training harness for the batch-size generalization study.

Trains a two-layer MLP under interchangeable loss layers across a grid of
batch sizes and seeds, recording the best test accuracy per run, and
compares losses with a paired t-test whose p-value is computed from
scratch (regularized incomplete beta). Every run is deterministic given
its seed: one generator drives init and shuffling, and no parallelism
touches the arithmetic.
"""

import csv
import gzip
import math
import struct
from dataclasses import dataclass, fields

import numpy as np

from .losses import (
    ClassBatch,
    cross_entropy_loss,
    hinge_loss,
    hypersimplex_loss_multiclass,
    squared_loss,
    zero_one_loss,
)

CSV_HEADER = "dataset,loss,batch,seed,tau,lr,epochs,best_test_acc,final_train_loss"

LOSS_NAMES = ("ce", "hinge", "mse", "hypersimplex")


class IdxFormatError(ValueError):
    """Raised on malformed IDX files; the message carries a byte offset."""


@dataclass
class Dataset:
    """Feature matrix, integer labels and a train/test index split."""

    name: str
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        m = self.features.shape[0]
        if self.labels.shape != (m,):
            raise ValueError(f"labels have shape {self.labels.shape}, expected ({m},)")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        combined = np.concatenate((self.train_idx, self.test_idx))
        if np.unique(combined).size != combined.size:
            raise ValueError("train and test splits overlap")
        if not np.array_equal(np.sort(combined), np.arange(m)):
            raise ValueError("train and test splits must cover all examples")

    @property
    def m_train(self):
        return self.train_idx.size

    @property
    def m_test(self):
        return self.test_idx.size


@dataclass
class MlpModel:
    """Two-layer rectifier network d -> h -> C with hand-coded backprop."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        d, h = self.W1.shape
        h2, C = self.W2.shape
        if h2 != h or self.b1.shape != (h,) or self.b2.shape != (C,):
            raise ValueError("layer dimensions do not chain")

    @classmethod
    def init(cls, d, h, C, rng):
        # He-scaled Gaussians suit the rectifier; biases start at zero
        return cls(
            W1=rng.standard_normal((d, h)) * math.sqrt(2.0 / d),
            b1=np.zeros(h),
            W2=rng.standard_normal((h, C)) * math.sqrt(2.0 / h),
            b2=np.zeros(C),
        )

    def forward(self, X):
        """Scores plus the activations needed by backward."""
        Z1 = X @ self.W1 + self.b1
        H = np.maximum(Z1, 0.0)
        scores = H @ self.W2 + self.b2
        return scores, (X, Z1, H)

    def scores(self, X):
        return self.forward(X)[0]

    def backward(self, cache, G):
        """Parameter gradients given dL/dscores; zero subgradient at the
        rectifier kink."""
        X, Z1, H = cache
        dW2 = H.T @ G
        db2 = G.sum(axis=0)
        dZ1 = (G @ self.W2.T) * (Z1 > 0.0)
        return (X.T @ dZ1, dZ1.sum(axis=0), dW2, db2)

    def sgd_step(self, grads, lr):
        dW1, db1, dW2, db2 = grads
        self.W1 -= lr * dW1
        self.b1 -= lr * db1
        self.W2 -= lr * dW2
        self.b2 -= lr * db2

    def params_finite(self):
        return all(
            np.all(np.isfinite(p)) for p in (self.W1, self.b1, self.W2, self.b2)
        )


def loss_layer(name, scores, labels, tau):
    """Mean-reduced loss value and dL/dscores for one batch.

    The hypersimplex layer projects each class column over the batch with
    k_c taken from the batch's own label counts, then divides the
    sum-form loss by the batch size so learning rates stay comparable
    across batch sizes (the normalization recorded in RunRecord).
    """
    if name == "ce":
        return cross_entropy_loss(scores, labels)
    if name == "hinge":
        return hinge_loss(scores, labels)
    if name == "mse":
        return squared_loss(scores, labels)
    if name == "hypersimplex":
        ev = hypersimplex_loss_multiclass(ClassBatch.from_labels(scores, labels, tau=tau))
        n = scores.shape[0]
        ev.value /= n
        ev.grad = ev.grad / n
        return ev
    raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")


@dataclass
class RunRecord:
    """Metrics of one trained (loss, batch, seed) cell.

    Loss values are mean-reduced per sample for every loss, including the
    hypersimplex layer (sum form divided by batch size); best_test_acc is
    the maximum test accuracy over all epoch boundaries including the
    untrained model. A diverged run keeps the accuracies seen before the
    divergence, stores NaN as final_train_loss and sets failed (failed is
    derived from the NaN on CSV round-trips, not stored as a column).
    """

    dataset: str
    loss: str
    batch: int
    seed: int
    tau: float
    lr: float
    epochs: int
    best_test_acc: float
    final_train_loss: float
    failed: bool = False


def write_records_csv(records, path):
    """Write records under the fixed header; floats use repr so output is
    byte-stable."""
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.dataset},{r.loss},{r.batch},{r.seed},{r.tau!r},{r.lr!r},"
                f"{r.epochs},{r.best_test_acc!r},{r.final_train_loss!r}\n"
            )


def read_records_csv(path):
    """Parse a records CSV back; raises ValueError with the offending line
    number on malformed input."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty CSV: missing header line") from None
        if header != CSV_HEADER.split(","):
            raise ValueError(f"line 1: bad header {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 9:
                raise ValueError(f"line {lineno}: expected 9 fields, got {len(row)}")
            try:
                rec = RunRecord(
                    dataset=row[0],
                    loss=row[1],
                    batch=int(row[2]),
                    seed=int(row[3]),
                    tau=float(row[4]),
                    lr=float(row[5]),
                    epochs=int(row[6]),
                    best_test_acc=float(row[7]),
                    final_train_loss=float(row[8]),
                )
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
            rec.failed = math.isnan(rec.final_train_loss)
            records.append(rec)
    return records


# ---------------------------------------------------------------------------
# Data loading
# ---------------------------------------------------------------------------


def _read_idx(path, expected_magic, expected_ndim):
    """Decode one IDX file (optionally gzipped) into a uint8 array."""
    with open(path, "rb") as raw:
        head = raw.read(2)
        raw.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(raw) as gz:
                data = gz.read()
        else:
            data = raw.read()
    if len(data) < 4:
        raise IdxFormatError(f"{path}: truncated magic at byte offset {len(data)}")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x} at byte offset 0, expected 0x{expected_magic:08x}"
        )
    header_end = 4 + 4 * expected_ndim
    if len(data) < header_end:
        raise IdxFormatError(f"{path}: truncated dimension header at byte offset {len(data)}")
    dims = struct.unpack(f">{expected_ndim}I", data[4:header_end])
    count = int(np.prod(dims))
    if len(data) - header_end < count:
        raise IdxFormatError(
            f"{path}: payload truncated at byte offset {len(data)}, "
            f"expected {header_end + count} bytes"
        )
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header_end).reshape(dims)


def load_idx(images_path, labels_path, limit=None, num_classes=None, name="idx"):
    """Load an IDX image/label file pair as a Dataset (all examples in the
    train split).

    Pixels are scaled to [0, 1] and flattened; limit keeps the first
    `limit` examples, a deterministic slice. Gzipped files are detected by
    signature.
    """
    images = _read_idx(images_path, 0x00000803, 3)
    labels = _read_idx(labels_path, 0x00000801, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"{images_path}: {images.shape[0]} images but {labels.shape[0]} labels"
        )
    if limit is not None:
        images = images[:limit]
        labels = labels[:limit]
    m = images.shape[0]
    features = images.reshape(m, -1).astype(np.float64) / 255.0
    labels = labels.astype(np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if m else 0
    return Dataset(
        name=name,
        features=features,
        labels=labels,
        num_classes=num_classes,
        train_idx=np.arange(m),
        test_idx=np.arange(0),
    )


def load_fashion_mnist(data_dir, m_train=6000, m_test=1000):
    """Subsampled Fashion-MNIST from user-supplied IDX files in data_dir.

    Expects the standard file names (train-images-idx3-ubyte,
    train-labels-idx1-ubyte, t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte),
    each optionally with a .gz suffix. Keeps the first m_train training and
    first m_test test examples.
    """
    import os

    def find(stem):
        for suffix in ("", ".gz"):
            candidate = os.path.join(data_dir, stem + suffix)
            if os.path.exists(candidate):
                return candidate
        raise FileNotFoundError(f"{stem}[.gz] not found in {data_dir}")

    train = load_idx(
        find("train-images-idx3-ubyte"), find("train-labels-idx1-ubyte"),
        limit=m_train, num_classes=10,
    )
    test = load_idx(
        find("t10k-images-idx3-ubyte"), find("t10k-labels-idx1-ubyte"),
        limit=m_test, num_classes=10,
    )
    return Dataset(
        name="fashion_mnist",
        features=np.vstack((train.features, test.features)),
        labels=np.concatenate((train.labels, test.labels)),
        num_classes=10,
        train_idx=np.arange(train.labels.size),
        test_idx=np.arange(train.labels.size, train.labels.size + test.labels.size),
    )


def make_synthetic(num_classes, m, d, separation, seed, m_train=None):
    """Gaussian blobs: class means at separation * random unit directions,
    unit covariance; deterministic per seed. The first m_train examples
    (default 80%) form the train split."""
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((num_classes, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    labels = rng.integers(0, num_classes, size=m)
    features = separation * dirs[labels] + rng.standard_normal((m, d))
    if m_train is None:
        m_train = int(0.8 * m)
    if not 0 < m_train <= m:
        raise ValueError(f"m_train must lie in (0, {m}], got {m_train}")
    return Dataset(
        name="synthetic",
        features=features,
        labels=labels,
        num_classes=num_classes,
        train_idx=np.arange(m_train),
        test_idx=np.arange(m_train, m),
    )


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _accuracy(model, X, labels):
    return 1.0 - zero_one_loss(model.scores(X), labels)


def train_one(seed, dataset, loss_name, batch_size, tau, lr, epochs, hidden=32):
    """Train one (loss, batch, seed) cell by plain SGD and record its metrics.

    Test accuracy is evaluated before training and after every epoch; the
    best value is kept. The shuffle and the init share one seeded
    generator, so identical arguments reproduce the record exactly. A
    non-finite loss or parameter marks the run failed and stops it instead
    of raising.
    """
    if loss_name not in LOSS_NAMES:
        raise ValueError(f"unknown loss {loss_name!r}; expected one of {LOSS_NAMES}")
    if not 1 <= batch_size <= dataset.m_train:
        raise ValueError(
            f"batch_size must lie in [1, {dataset.m_train}], got {batch_size}"
        )
    if dataset.m_test < 1:
        raise ValueError("dataset has an empty test split")
    rng = np.random.default_rng(seed)
    X_train = dataset.features[dataset.train_idx]
    y_train = dataset.labels[dataset.train_idx]
    X_test = dataset.features[dataset.test_idx]
    y_test = dataset.labels[dataset.test_idx]
    model = MlpModel.init(X_train.shape[1], hidden, dataset.num_classes, rng)

    best_acc = _accuracy(model, X_test, y_test)
    failed = False
    # divergence is detected below via isfinite checks, so FP overflow along
    # the way is expected and must not warn
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            perm = rng.permutation(dataset.m_train)
            for start in range(0, dataset.m_train, batch_size):
                idx = perm[start : start + batch_size]
                scores, cache = model.forward(X_train[idx])
                if not np.all(np.isfinite(scores)):
                    failed = True
                    break
                ev = loss_layer(loss_name, scores, y_train[idx], tau)
                if not math.isfinite(ev.value):
                    failed = True
                    break
                model.sgd_step(model.backward(cache, ev.grad), lr)
                if not model.params_finite():
                    failed = True
                    break
            if failed:
                break
            # finite params can still overflow the forward, so guard the eval
            test_scores = model.scores(X_test)
            if not np.all(np.isfinite(test_scores)):
                failed = True
                break
            best_acc = max(best_acc, 1.0 - zero_one_loss(test_scores, y_test))

        # the last sgd_step is unchecked, so divergence can first surface here
        final_train_loss = float("nan")
        if not failed:
            final_scores = model.scores(X_train)
            if np.all(np.isfinite(final_scores)):
                value = loss_layer(loss_name, final_scores, y_train, tau).value
                if math.isfinite(value):
                    final_train_loss = value
                else:
                    failed = True
            else:
                failed = True
    return RunRecord(
        dataset=dataset.name,
        loss=loss_name,
        batch=int(batch_size),
        seed=int(seed),
        tau=float(tau),
        lr=float(lr),
        epochs=int(epochs),
        best_test_acc=float(best_acc),
        final_train_loss=float(final_train_loss),
        failed=failed,
    )


@dataclass
class SweepConfig:
    """Grid definition for a sweep; unknown keys are rejected up front."""

    dataset: str = "synthetic"
    losses: tuple = ("ce", "hypersimplex", "mse")
    batches: tuple = (32, 64, 128, 256, 512, 1024, 2048)
    seeds: tuple = (0, 1, 2, 3, 4)
    tau: float = 1.0
    lr: float = 0.15
    epochs: int = 40
    hidden: int = 32
    m_train: int = 4096
    m_test: int = 1000
    classes: int = 5
    dims: int = 20
    separation: float = 2.0
    data_seed: int = 0
    data_dir: str = "."
    out_csv: str = "runs.csv"

    def __post_init__(self):
        if self.dataset not in ("synthetic", "fashion_mnist"):
            raise ValueError(f"unknown dataset {self.dataset!r}")
        self.losses = tuple(self.losses)
        for name in self.losses:
            if name not in LOSS_NAMES:
                raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")
        self.batches = tuple(int(b) for b in self.batches)
        if isinstance(self.seeds, int):
            self.seeds = tuple(range(self.seeds))
        else:
            self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("need at least one seed")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)


def _build_dataset(config):
    if config.dataset == "synthetic":
        return make_synthetic(
            config.classes,
            config.m_train + config.m_test,
            config.dims,
            config.separation,
            config.data_seed,
            m_train=config.m_train,
        )
    return load_fashion_mnist(config.data_dir, config.m_train, config.m_test)


def sweep(config):
    """Run the full loss x batch x seed grid on one shared dataset.

    Cells are independent (each owns its RNG via its seed) so they could
    run in parallel; this loop runs them in deterministic grid order and
    the returned list is sorted the same way regardless.
    """
    dataset = _build_dataset(config)
    records = []
    for loss_name in config.losses:
        for batch in config.batches:
            for seed in config.seeds:
                records.append(
                    train_one(
                        seed,
                        dataset,
                        loss_name,
                        batch,
                        config.tau,
                        config.lr,
                        config.epochs,
                        hidden=config.hidden,
                    )
                )
    return records


# ---------------------------------------------------------------------------
# Paired t-test
# ---------------------------------------------------------------------------


@dataclass
class TTestResult:
    """Paired-samples t-test summary; degenerate marks zero-variance input."""

    mean_delta: float
    t_stat: float
    p_value: float
    significant_at_10pct: bool
    degenerate: bool = False


def _betacf(a, b, x, max_iter=200, eps=3e-14):
    """Continued fraction of the incomplete beta (modified Lentz scheme)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction failed to converge")


def _betainc_reg(a, b, x):
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # the continued fraction converges fast only on one side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def paired_t_test(a, b):
    """Paired-samples t-test of b against a on per-seed differences b - a.

    Uses n-1 degrees of freedom and a two-sided p-value from the t
    distribution's CDF, evaluated via the regularized incomplete beta.
    Zero-variance differences make t undefined; that branch reports p = 0
    when the mean difference is nonzero (the runs differ identically on
    every seed) or p = 1 when it is zero, and flags the result degenerate.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be two equal-length 1-D arrays")
    n = a.size
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    diff = b - a
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        p = 1.0 if mean == 0.0 else 0.0
        t = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
        return TTestResult(mean, t, p, p < 0.1, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p = _betainc_reg(df / 2.0, 0.5, df / (df + t * t))
    return TTestResult(mean, float(t), float(p), p < 0.1)
