"""Graph-convolutional feasibility classifier in plain numpy.

Pipeline for a batch of graphs padded to a common node count::

    Z^{t+1} = tanh(D^-1 (A + I) Z^t W^t)      stacked graph convolutions
    Z^{1:h} = [Z^1 | ... | Z^h]               horizontal concatenation
    U       = first k rows (zero padded)      node-count unification
    conv1   : per-node linear map, ReLU       (kernel = stride = sum of channels)
    maxpool : size 2, stride 2 over nodes
    conv2   : 1-D convolution, ReLU
    dense   : ReLU, dropout
    output  : 2-way softmax

Padding rows carry zero features and only a self loop, so they stay zero
through every graph convolution and batching is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, StructuralError
from .graph import ActivityGraph, LabelAlphabet, extract_features

MIN_K = 10


@dataclass(frozen=True)
class Architecture:
    conv_channels: tuple[int, ...] = (32, 32, 32, 1)
    k_fraction: float = 0.6
    k: int | None = None
    conv1_filters: int = 16
    pool_size: int = 2
    conv2_filters: int = 32
    conv2_kernel: int = 5
    dense_units: int = 128
    dropout: float = 0.5

    def __post_init__(self):
        if not self.conv_channels or min(self.conv_channels) < 1:
            raise ConfigurationError("graph convolution channels must be positive")
        if not 0 < self.k_fraction <= 1:
            raise ConfigurationError("k_fraction must lie in (0, 1]")
        if self.k is not None and self.k < self.min_k:
            raise ConfigurationError(f"k must be at least {self.min_k} for this head")
        if not 0 <= self.dropout < 1:
            raise ConfigurationError("dropout must lie in [0, 1)")

    @property
    def total_channels(self) -> int:
        return sum(self.conv_channels)

    @property
    def min_k(self) -> int:
        return max(MIN_K, self.pool_size * self.conv2_kernel)

    def head_length(self, k: int) -> int:
        return k // self.pool_size - self.conv2_kernel + 1


def compute_k(node_counts: Sequence[int], k_fraction: float, floor: int = MIN_K) -> int:
    """Node count below which ``k_fraction`` of the graphs fall (DGCNN rule)."""
    counts = sorted(node_counts)
    if not counts:
        raise ConfigurationError("cannot choose k without graphs")
    k = counts[max(0, int(math.ceil(k_fraction * len(counts))) - 1)]
    return max(floor, int(k))


def init_params(arch: Architecture, in_features: int, k: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    params = {}
    dims = (in_features,) + tuple(arch.conv_channels)
    for t in range(len(arch.conv_channels)):
        params[f"gc{t}"] = glorot(dims[t], dims[t + 1])
    S = arch.total_channels
    params["conv1_w"] = glorot(S, arch.conv1_filters)
    params["conv1_b"] = np.zeros(arch.conv1_filters)
    window = arch.conv2_kernel * arch.conv1_filters
    params["conv2_w"] = glorot(window, arch.conv2_filters)
    params["conv2_b"] = np.zeros(arch.conv2_filters)
    flat = arch.head_length(k) * arch.conv2_filters
    params["dense_w"] = glorot(flat, arch.dense_units)
    params["dense_b"] = np.zeros(arch.dense_units)
    params["out_w"] = glorot(arch.dense_units, 2)
    params["out_b"] = np.zeros(2)
    return params


@dataclass
class Model:
    architecture: Architecture
    params: dict[str, np.ndarray]
    k: int
    in_features: int
    alphabet: LabelAlphabet | None = None
    temporal: bool = True
    horizon: int = 1440
    seed: int = 0
    epochs_seen: int = 0

    def __post_init__(self):
        arch = self.architecture
        dims = (self.in_features,) + tuple(arch.conv_channels)
        expected = {f"gc{t}": (dims[t], dims[t + 1]) for t in range(len(arch.conv_channels))}
        expected.update({
            "conv1_w": (arch.total_channels, arch.conv1_filters), "conv1_b": (arch.conv1_filters,),
            "conv2_w": (arch.conv2_kernel * arch.conv1_filters, arch.conv2_filters),
            "conv2_b": (arch.conv2_filters,),
            "dense_w": (arch.head_length(self.k) * arch.conv2_filters, arch.dense_units),
            "dense_b": (arch.dense_units,), "out_w": (arch.dense_units, 2), "out_b": (2,),
        })
        if set(expected) != set(self.params):
            raise StructuralError("parameter names do not match the architecture")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise StructuralError(f"{name}: shape {self.params[name].shape}, expected {shape}")
        if self.alphabet is not None:
            width = len(self.alphabet) + (4 if self.temporal else 0)
            if width != self.in_features:
                raise StructuralError("alphabet size does not match the input width")

    @classmethod
    def initialise(cls, arch: Architecture, in_features: int, k: int, seed: int = 0, **kw) -> Model:
        return cls(arch, init_params(arch, in_features, k, seed), k, in_features, seed=seed, **kw)

    def features(self, graph: ActivityGraph) -> np.ndarray:
        if self.alphabet is None:
            raise StructuralError("model has no label alphabet")
        return extract_features(graph, self.alphabet, self.horizon, self.temporal)

    def score_graphs(self, graphs: Sequence[ActivityGraph], batch_size: int = 256) -> np.ndarray:
        """Class-1 (feasible) probability of every graph."""
        out = []
        for lo in range(0, len(graphs), batch_size):
            chunk = graphs[lo:lo + batch_size]
            P, X = pack([g.adjacency for g in chunk], [self.features(g) for g in chunk])
            out.append(forward(self, P, X)[0][:, 1])
        return np.concatenate(out) if out else np.zeros(0)


# --------------------------------------------------------------------------
# forward / backward

def normalized_propagation(A: np.ndarray) -> np.ndarray:
    """``D^-1 (A + I)`` for a 0/1 symmetric adjacency matrix with zero diagonal."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructuralError("adjacency must be square")
    if not np.array_equal(A, A.T) or np.any(np.diag(A) != 0):
        raise StructuralError("adjacency must be symmetric with zero diagonal")
    At = A + np.eye(A.shape[0])
    return At / At.sum(axis=1, keepdims=True)


def pack(adjacencies: Sequence[np.ndarray], features: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Stack graphs into ``P (B, n, n)`` and ``X (B, n, c)`` padded to the
    largest node count; padding nodes get only a self loop."""
    if len(adjacencies) != len(features):
        raise StructuralError("adjacency and feature lists differ in length")
    n = max(1, max((a.shape[0] for a in adjacencies), default=1))
    c = features[0].shape[1]
    B = len(adjacencies)
    P = np.zeros((B, n, n))
    X = np.zeros((B, n, c))
    idx = np.arange(n)
    for b, (A, F) in enumerate(zip(adjacencies, features)):
        m = A.shape[0]
        if F.shape != (m, c):
            raise StructuralError(f"feature matrix {F.shape} does not match {m} nodes x {c}")
        P[b, :m, :m] = normalized_propagation(A)
        P[b, idx[m:], idx[m:]] = 1.0
        X[b, :m] = F
    return P, X


@dataclass
class LayerActivations:
    Z: list[np.ndarray]
    concat: np.ndarray
    head: dict[str, np.ndarray] = field(default_factory=dict)


def graph_conv_forward(
    A: np.ndarray,
    X: np.ndarray,
    weights: Sequence[np.ndarray],
    activation: Callable[[np.ndarray], np.ndarray] = np.tanh,
) -> LayerActivations:
    """Stacked graph convolutions on a single graph."""
    P = normalized_propagation(A)
    Z = [np.asarray(X, dtype=float)]
    for W in weights:
        if Z[-1].shape[1] != W.shape[0]:
            raise StructuralError(f"layer input width {Z[-1].shape[1]} does not match weights {W.shape}")
        Z.append(activation(P @ Z[-1] @ W))
    return LayerActivations(Z, np.concatenate(Z[1:], axis=1))


def unify_nodes(Z: np.ndarray, k: int) -> np.ndarray:
    """Keep the first ``k`` rows, zero-padding when there are fewer."""
    n = Z.shape[-2]
    if n >= k:
        return Z[..., :k, :].copy()
    pad = [(0, 0)] * Z.ndim
    pad[-2] = (0, k - n)
    return np.pad(Z, pad)


def forward(
    model: Model,
    P: np.ndarray,
    X: np.ndarray,
    train: bool = False,
    rng: np.random.Generator | None = None,
    dropout_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, dict]:
    """Class probabilities ``(B, 2)`` and the cache needed by :func:`backward`."""
    arch, p = model.architecture, model.params
    h = len(arch.conv_channels)
    if X.shape[-1] != model.in_features:
        raise StructuralError(f"feature width {X.shape[-1]} does not match model input {model.in_features}")
    Z, M = [X], []
    for t in range(h):
        M.append(P @ Z[-1])
        Z.append(np.tanh(M[-1] @ p[f"gc{t}"]))
    concat = np.concatenate(Z[1:], axis=-1)
    U = unify_nodes(concat, model.k)
    B = U.shape[0]

    c1_pre = U @ p["conv1_w"] + p["conv1_b"]
    c1 = np.maximum(c1_pre, 0.0)
    k2 = model.k // arch.pool_size
    blocks = c1[:, :k2 * arch.pool_size].reshape(B, k2, arch.pool_size, arch.conv1_filters)
    arg = blocks.argmax(axis=2)
    pooled = np.take_along_axis(blocks, arg[:, :, None, :], axis=2)[:, :, 0, :]

    L2 = arch.head_length(model.k)
    cols = np.stack([pooled[:, j:j + L2, :] for j in range(arch.conv2_kernel)], axis=2)
    cols = cols.reshape(B, L2, arch.conv2_kernel * arch.conv1_filters)
    c2_pre = cols @ p["conv2_w"] + p["conv2_b"]
    c2 = np.maximum(c2_pre, 0.0)
    flat = c2.reshape(B, L2 * arch.conv2_filters)

    d_pre = flat @ p["dense_w"] + p["dense_b"]
    d = np.maximum(d_pre, 0.0)
    if train and arch.dropout > 0:
        if dropout_mask is None:
            rng = rng if rng is not None else np.random.default_rng()
            dropout_mask = (rng.random(d.shape) >= arch.dropout) / (1.0 - arch.dropout)
        d_out = d * dropout_mask
    else:
        dropout_mask = None
        d_out = d
    logits = d_out @ p["out_w"] + p["out_b"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    cache = dict(
        P=P, Z=Z, M=M, concat=concat, U=U, c1_pre=c1_pre, c1=c1, arg=arg, pooled=pooled,
        cols=cols, c2_pre=c2_pre, c2=c2, flat=flat, d_pre=d_pre, d=d, mask=dropout_mask,
        d_out=d_out, logits=logits, probs=probs, log_probs=shifted - np.log(e.sum(axis=1, keepdims=True)),
    )
    return probs, cache


def cross_entropy(cache: dict, y: np.ndarray) -> float:
    y = np.asarray(y, dtype=int)
    return float(-cache["log_probs"][np.arange(len(y)), y].mean())


def backward(model: Model, cache: dict, y: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy with respect to every parameter."""
    arch, p = model.architecture, model.params
    y = np.asarray(y, dtype=int)
    B = len(y)
    g = {}
    dlogits = cache["probs"].copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits /= B
    g["out_w"] = cache["d_out"].T @ dlogits
    g["out_b"] = dlogits.sum(axis=0)
    dd = dlogits @ p["out_w"].T
    if cache["mask"] is not None:
        dd = dd * cache["mask"]
    dd_pre = dd * (cache["d_pre"] > 0)
    g["dense_w"] = cache["flat"].T @ dd_pre
    g["dense_b"] = dd_pre.sum(axis=0)
    dflat = dd_pre @ p["dense_w"].T

    L2 = arch.head_length(model.k)
    dc2_pre = dflat.reshape(B, L2, arch.conv2_filters) * (cache["c2_pre"] > 0)
    g["conv2_w"] = np.einsum("blw,blf->wf", cache["cols"], dc2_pre)
    g["conv2_b"] = dc2_pre.sum(axis=(0, 1))
    dcols = (dc2_pre @ p["conv2_w"].T).reshape(B, L2, arch.conv2_kernel, arch.conv1_filters)
    dpooled = np.zeros_like(cache["pooled"])
    for j in range(arch.conv2_kernel):
        dpooled[:, j:j + L2, :] += dcols[:, :, j, :]

    k2 = model.k // arch.pool_size
    dblocks = np.zeros((B, k2, arch.pool_size, arch.conv1_filters))
    np.put_along_axis(dblocks, cache["arg"][:, :, None, :], dpooled[:, :, None, :], axis=2)
    dc1 = np.zeros_like(cache["c1"])
    dc1[:, :k2 * arch.pool_size] = dblocks.reshape(B, k2 * arch.pool_size, arch.conv1_filters)
    dc1_pre = dc1 * (cache["c1_pre"] > 0)
    g["conv1_w"] = np.einsum("bks,bkf->sf", cache["U"], dc1_pre)
    g["conv1_b"] = dc1_pre.sum(axis=(0, 1))
    dU = dc1_pre @ p["conv1_w"].T

    n = cache["concat"].shape[1]
    dconcat = np.zeros_like(cache["concat"])
    keep = min(n, model.k)
    dconcat[:, :keep] = dU[:, :keep]
    splits = np.cumsum(arch.conv_channels)[:-1]
    dZ_parts = np.split(dconcat, splits, axis=-1)
    Z, M, P = cache["Z"], cache["M"], cache["P"]
    h = len(arch.conv_channels)
    dZ = dZ_parts[h - 1]
    for t in range(h - 1, -1, -1):
        dH = dZ * (1.0 - Z[t + 1] ** 2)
        g[f"gc{t}"] = np.einsum("bnc,bnd->cd", M[t], dH)
        if t == 0:
            break
        dM = dH @ p[f"gc{t}"].T
        dZ = dZ_parts[t - 1] + np.swapaxes(P, 1, 2) @ dM
    return g


def network_forward(
    X: np.ndarray,
    A: np.ndarray,
    model: Model,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[float, LayerActivations]:
    """Feasibility score of a single graph plus its layer activations."""
    P, Xb = pack([np.asarray(A, dtype=float)], [np.asarray(X, dtype=float)])
    probs, cache = forward(model, P, Xb, train=train_mode, rng=rng)
    n = X.shape[0]
    acts = LayerActivations(
        Z=[z[0, :n] for z in cache["Z"]],
        concat=cache["concat"][0, :n],
        head={name: cache[name][0] for name in ("U", "c1", "pooled", "c2", "d_out", "probs")},
    )
    return float(probs[0, 1]), acts


# --------------------------------------------------------------------------
# training

class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k in sorted(params):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * grads[k]
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * grads[k] ** 2
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def epoch_batches(m: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Index batches for one epoch: a fresh permutation, last batch may be short."""
    if batch_size < 1:
        raise ConfigurationError("batch size must be positive")
    order = np.random.default_rng([seed, epoch]).permutation(m)
    return [order[lo:lo + batch_size] for lo in range(0, m, batch_size)]


@dataclass
class TrainResult:
    model: Model
    losses: list[float]


def train_arrays(
    adjacencies: Sequence[np.ndarray],
    features: Sequence[np.ndarray],
    labels: Sequence[int],
    architecture: Architecture = Architecture(),
    lr: float = 1e-5,
    batch_size: int = 50,
    epochs: int = 200,
    seed: int = 0,
    k: int | None = None,
    model: Model | None = None,
) -> TrainResult:
    """Adam on the mean cross-entropy; deterministic given ``seed``."""
    if not len(labels):
        raise ConfigurationError("cannot train on an empty dataset")
    y = np.asarray(labels, dtype=int)
    if model is None:
        if k is None:
            k = architecture.k or compute_k([a.shape[0] for a in adjacencies], architecture.k_fraction,
                                            architecture.min_k)
        model = Model.initialise(architecture, features[0].shape[1], k, seed)
    opt = Adam(model.params, lr)
    drop_rng = np.random.default_rng([seed, 1])
    losses = []
    for epoch in range(epochs):
        total = 0.0
        for idx in epoch_batches(len(y), batch_size, seed, epoch):
            P, X = pack([adjacencies[i] for i in idx], [features[i] for i in idx])
            _, cache = forward(model, P, X, train=True, rng=drop_rng)
            total += cross_entropy(cache, y[idx]) * len(idx)
            opt.step(model.params, backward(model, cache, y[idx]))
        losses.append(total / len(y))
        model.epochs_seen += 1
    return TrainResult(model, losses)


def train(
    examples: Sequence,
    architecture: Architecture = Architecture(),
    lr: float = 1e-5,
    batch_size: int = 50,
    epochs: int = 200,
    seed: int = 0,
    temporal: bool = True,
    horizon: int = 1440,
) -> TrainResult:
    """Fit a classifier on labelled activity graphs.

    ``examples`` are objects with ``graph`` and ``label`` attributes. The
    label alphabet and ``k`` are derived from these training graphs and
    stored in the model.
    """
    if not len(examples):
        raise ConfigurationError("cannot train on an empty dataset")
    graphs = [ex.graph for ex in examples]
    alphabet = LabelAlphabet.from_graphs(graphs)
    feats = [extract_features(g, alphabet, horizon, temporal) for g in graphs]
    k = architecture.k or compute_k([g.n for g in graphs], architecture.k_fraction, architecture.min_k)
    model = Model.initialise(architecture, feats[0].shape[1], k, seed,
                             alphabet=alphabet, temporal=temporal, horizon=horizon)
    return train_arrays(
        [g.adjacency for g in graphs], feats, [ex.label for ex in examples],
        architecture, lr, batch_size, epochs, seed, model=model,
    )


# --------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class Metrics:
    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else float("nan")

    @property
    def tpr(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else float("nan")

    @property
    def tnr(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else float("nan")

    @property
    def fpr(self) -> float:
        return 1.0 - self.tnr

    @property
    def fnr(self) -> float:
        return 1.0 - self.tpr

    def to_dict(self) -> dict:
        """Counts and rates; undefined rates become None."""
        rate = lambda x: None if math.isnan(x) else x
        return {
            "tn": self.tn, "fp": self.fp, "fn": self.fn, "tp": self.tp,
            "acc": rate(self.accuracy), "tpr": rate(self.tpr), "tnr": rate(self.tnr),
        }


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> Metrics:
    t = np.asarray(y_true, dtype=int)
    q = np.asarray(y_pred, dtype=int)
    return Metrics(
        tn=int(np.sum((t == 0) & (q == 0))), fp=int(np.sum((t == 0) & (q == 1))),
        fn=int(np.sum((t == 1) & (q == 0))), tp=int(np.sum((t == 1) & (q == 1))),
    )


def evaluate(model: Model, examples: Sequence) -> Metrics:
    """Confusion counts of the argmax prediction on labelled examples."""
    scores = model.score_graphs([ex.graph for ex in examples])
    return confusion([ex.label for ex in examples], (scores > 0.5).astype(int))


# --------------------------------------------------------------------------
# persistence

def architecture_to_dict(arch: Architecture) -> dict:
    return {
        "conv_channels": list(arch.conv_channels), "k_fraction": arch.k_fraction, "k": arch.k,
        "conv1_filters": arch.conv1_filters, "pool_size": arch.pool_size,
        "conv2_filters": arch.conv2_filters, "conv2_kernel": arch.conv2_kernel,
        "dense_units": arch.dense_units, "dropout": arch.dropout,
    }


def architecture_from_dict(d: dict) -> Architecture:
    d = dict(d)
    if "conv_channels" in d:
        d["conv_channels"] = tuple(d["conv_channels"])
    return Architecture(**d)


def model_to_dict(model: Model) -> dict:
    return {
        "architecture": architecture_to_dict(model.architecture),
        "k": model.k,
        "in_features": model.in_features,
        "alphabet": list(model.alphabet.labels) if model.alphabet is not None else None,
        "temporal": model.temporal,
        "horizon": model.horizon,
        "seed": model.seed,
        "epochs_seen": model.epochs_seen,
        "params": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in sorted(model.params.items())
        },
    }


def model_from_dict(d: dict) -> Model:
    params = {
        name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in d["params"].items()
    }
    return Model(
        architecture=architecture_from_dict(d["architecture"]),
        params=params,
        k=d["k"],
        in_features=d["in_features"],
        alphabet=LabelAlphabet(tuple(d["alphabet"])) if d.get("alphabet") is not None else None,
        temporal=d["temporal"],
        horizon=d["horizon"],
        seed=d["seed"],
        epochs_seen=d["epochs_seen"],
    )
