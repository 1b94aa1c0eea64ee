"""Learned user selection: dataset generation, an explicit numpy MLP with
sigmoid outputs, Adam/BCE training, and the rounding + reverse-top-k
inference pipeline.

Feature vectors follow a fixed block layout [weights | channels | beams?];
the channel block is one of: diagonal magnitudes `C(D)` (I values), whole
magnitudes `C(W)` (I^2), or real/imag parts `C(R/I)` (2*I^2). Each block is
affinely normalized to zero mean / unit variance with scalar statistics
computed on the training split only and stored with the model, because the
weight and channel blocks differ by orders of magnitude.

Targets are the greedy scheduler's selections, one 0/1 vector per short-time
block; BCE is computed on logits (softplus form) so gradients are exact and
clip-free.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .precoder import SelectionResult, infeasible_selection
from .errors import SingularChannel

INPUT_MODES = ("W", "W+C(D)", "W+C(D)+B", "C(W)", "W+C(W)", "W+C(W)+B", "W+C(R/I)")


@dataclass(frozen=True)
class FeatureSpec:
    """Block layout of one input mode for a fixed user count."""

    mode: str
    n_users: int
    has_weights: bool
    channel_kind: str      # "", "C(D)", "C(W)", "C(R/I)"
    has_beams: bool

    @classmethod
    def parse(cls, mode: str, n_users: int) -> "FeatureSpec":
        if mode not in INPUT_MODES:
            raise ValueError(f"unknown input mode {mode!r}; choose from {INPUT_MODES}")
        tokens = mode.split("+")
        has_weights = "W" in tokens
        has_beams = "B" in tokens
        channel = [t for t in tokens if t.startswith("C")]
        channel_kind = channel[0] if channel else ""
        return cls(mode=mode, n_users=n_users, has_weights=has_weights,
                   channel_kind=channel_kind, has_beams=has_beams)

    @property
    def block_sizes(self) -> list:
        i = self.n_users
        sizes = []
        if self.has_weights:
            sizes.append(("weights", i))
        if self.channel_kind == "C(D)":
            sizes.append(("channels", i))
        elif self.channel_kind == "C(W)":
            sizes.append(("channels", i * i))
        elif self.channel_kind == "C(R/I)":
            sizes.append(("channels", 2 * i * i))
        if self.has_beams:
            sizes.append(("beams", i))
        return sizes

    @property
    def block_slices(self) -> list:
        out, start = [], 0
        for name, size in self.block_sizes:
            out.append((name, slice(start, start + size)))
            start += size
        return out

    @property
    def dim(self) -> int:
        return sum(size for _, size in self.block_sizes)

    def _channel_block(self, u_mag, u_reim):
        i = self.n_users
        if self.channel_kind == "C(D)":
            return u_mag.reshape(-1, i, i)[:, np.arange(i), np.arange(i)]
        if self.channel_kind == "C(W)":
            return u_mag
        if self.channel_kind == "C(R/I)":
            if u_reim is None:
                raise ValueError("mode needs complex effective channels; "
                                 "regenerate the dataset with store_complex=True")
            return u_reim
        return None

    def assemble(self, weights, u_mag, beams, u_reim=None) -> np.ndarray:
        """Stack raw blocks into (n, dim) float64 feature rows."""
        blocks = []
        if self.has_weights:
            blocks.append(np.asarray(weights, dtype=float))
        ch = self._channel_block(
            np.asarray(u_mag, dtype=float),
            None if u_reim is None else np.asarray(u_reim, dtype=float),
        )
        if ch is not None:
            blocks.append(ch)
        if self.has_beams:
            blocks.append(np.asarray(beams, dtype=float))
        return np.concatenate(blocks, axis=1)

    def from_context(self, ctx) -> np.ndarray:
        """Raw (unnormalized) feature vector for one scheduling slot."""
        u = ctx.eff.u
        u_mag = np.abs(u).reshape(1, -1)
        u_reim = None
        if self.channel_kind == "C(R/I)":
            u_reim = np.concatenate([u.real.ravel(), u.imag.ravel()])[None, :]
        if self.has_beams:
            if ctx.assignment is None:
                raise ValueError("mode with beam block needs a beam assignment")
            beams = ctx.assignment.indices[None, :]
        else:
            beams = np.zeros((1, self.n_users))
        return self.assemble(ctx.weights[None, :], u_mag, beams, u_reim)[0]


# ---------------------------------------------------------------------------
# dataset


@dataclass
class SlotDataset:
    """Raw per-slot records from greedy-driven episodes.

    Blocks are stored unassembled so one dataset serves every input mode.
    """

    n_users: int
    n_max: int
    weights: np.ndarray   # (n, I) float64
    u_mag: np.ndarray     # (n, I*I) float32
    beams: np.ndarray     # (n, I) int16
    targets: np.ndarray   # (n, I) uint8
    episode: np.ndarray   # (n,) int32
    u_reim: np.ndarray | None = None   # (n, 2*I*I) float32 when stored

    def __len__(self) -> int:
        return self.targets.shape[0]

    @property
    def n_episodes(self) -> int:
        return int(np.unique(self.episode).size)

    def features(self, mode: str) -> np.ndarray:
        spec = FeatureSpec.parse(mode, self.n_users)
        return spec.assemble(self.weights, self.u_mag, self.beams, self.u_reim)

    def save(self, path) -> None:
        arrays = dict(
            n_users=np.int64(self.n_users), n_max=np.int64(self.n_max),
            weights=self.weights, u_mag=self.u_mag, beams=self.beams,
            targets=self.targets, episode=self.episode,
        )
        if self.u_reim is not None:
            arrays["u_reim"] = self.u_reim
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path) -> "SlotDataset":
        with np.load(path) as data:
            return cls(
                n_users=int(data["n_users"]), n_max=int(data["n_max"]),
                weights=data["weights"], u_mag=data["u_mag"], beams=data["beams"],
                targets=data["targets"], episode=data["episode"],
                u_reim=data["u_reim"] if "u_reim" in data else None,
            )


def generate_dataset(
    config: SystemConfig,
    n_episodes: int,
    steps: int | None = None,
    seed: int = 0,
    store_complex: bool = False,
    progress=None,
) -> SlotDataset:
    """Run greedy-scheduled episodes and record (features, selection) pairs."""
    from .codebook import codebook_from_config
    from .protocol import episode_seed, run_episode
    from .schedulers import greedy_select

    if steps is not None and steps != config.steps:
        config = replace_steps(config, steps)
    i = config.users
    n_total = n_episodes * config.steps
    weights = np.empty((n_total, i))
    u_mag = np.empty((n_total, i * i), dtype=np.float32)
    u_reim = np.empty((n_total, 2 * i * i), dtype=np.float32) if store_complex else None
    beams = np.empty((n_total, i), dtype=np.int16)
    targets = np.zeros((n_total, i), dtype=np.uint8)
    episode_ids = np.empty(n_total, dtype=np.int32)

    codebook = codebook_from_config(config)
    row = 0

    def capture(ctx, result):
        nonlocal row
        weights[row] = ctx.weights
        u = ctx.eff.u
        u_mag[row] = np.abs(u).ravel()
        if u_reim is not None:
            u_reim[row] = np.concatenate([u.real.ravel(), u.imag.ravel()])
        beams[row] = ctx.assignment.indices
        targets[row, list(result.members)] = 1
        row += 1

    for e in range(n_episodes):
        episode_ids[e * config.steps:(e + 1) * config.steps] = e
        run_episode(
            episode_seed(seed, e), config, greedy_select,
            codebook=codebook, episode=e, on_slot=capture,
        )
        if progress is not None:
            progress(e + 1, n_episodes)
    assert row == n_total
    return SlotDataset(
        n_users=i, n_max=config.n_max, weights=weights, u_mag=u_mag,
        beams=beams, targets=targets, episode=episode_ids, u_reim=u_reim,
    )


def replace_steps(config: SystemConfig, steps: int) -> SystemConfig:
    from dataclasses import replace

    return replace(config, steps=steps)


# ---------------------------------------------------------------------------
# network


@dataclass
class SelectorNetwork:
    """Fully connected selector: two ReLU hidden layers, sigmoid outputs."""

    layer_sizes: tuple
    weights: list
    biases: list
    feature_mode: str
    n_users: int
    hidden_activation: str = "relu"
    block_means: np.ndarray | None = None
    block_stds: np.ndarray | None = None

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def save(self, path) -> None:
        meta = dict(
            layer_sizes=list(self.layer_sizes),
            feature_mode=self.feature_mode,
            n_users=self.n_users,
            hidden_activation=self.hidden_activation,
            n_layers=len(self.weights),
        )
        arrays = {"meta": np.array(json.dumps(meta))}
        for idx, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{idx}"] = w
            arrays[f"b{idx}"] = b
        if self.block_means is not None:
            arrays["block_means"] = self.block_means
            arrays["block_stds"] = self.block_stds
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "SelectorNetwork":
        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
            n_layers = meta["n_layers"]
            return cls(
                layer_sizes=tuple(meta["layer_sizes"]),
                weights=[data[f"w{i}"] for i in range(n_layers)],
                biases=[data[f"b{i}"] for i in range(n_layers)],
                feature_mode=meta["feature_mode"],
                n_users=meta["n_users"],
                hidden_activation=meta["hidden_activation"],
                block_means=data["block_means"] if "block_means" in data else None,
                block_stds=data["block_stds"] if "block_stds" in data else None,
            )


def init_network(
    spec: FeatureSpec, hidden=(500, 200), seed: int = 0
) -> SelectorNetwork:
    """He-initialized network for the given feature layout."""
    rng = np.random.default_rng(seed)
    sizes = (spec.dim, *hidden, spec.n_users)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return SelectorNetwork(
        layer_sizes=sizes, weights=weights, biases=biases,
        feature_mode=spec.mode, n_users=spec.n_users,
    )


def normalize_features(net: SelectorNetwork, x: np.ndarray) -> np.ndarray:
    """Apply the stored per-block affine normalization (exactly once)."""
    if net.block_means is None:
        raise ValueError("network has no normalization statistics (untrained?)")
    spec = FeatureSpec.parse(net.feature_mode, net.n_users)
    out = np.array(x, dtype=float)
    for (name, sl), mean, std in zip(spec.block_slices, net.block_means, net.block_stds):
        out[..., sl] = (out[..., sl] - mean) / std
    return out


def _forward(net: SelectorNetwork, x: np.ndarray):
    """Activations per layer plus output logits (x already normalized)."""
    activations = [x]
    a = x
    for idx in range(len(net.weights) - 1):
        z = a @ net.weights[idx] + net.biases[idx]
        a = np.maximum(z, 0.0)
        activations.append(a)
    logits = a @ net.weights[-1] + net.biases[-1]
    return activations, logits


def forward_logits(net: SelectorNetwork, x: np.ndarray) -> np.ndarray:
    return _forward(net, x)[1]


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss_and_grads(net: SelectorNetwork, x: np.ndarray, y: np.ndarray):
    """Mean element-wise BCE on logits and its gradients.

    loss = mean[softplus(z) - y*z]; d loss/d z = (sigmoid(z) - y)/count.
    Returns (loss, grads_w list, grads_b list).
    """
    activations, logits = _forward(net, x)
    count = logits.size
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    dz = (sigmoid(logits) - y) / count
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    for idx in range(len(net.weights) - 1, -1, -1):
        grads_w[idx] = activations[idx].T @ dz
        grads_b[idx] = dz.sum(axis=0)
        if idx > 0:
            dz = (dz @ net.weights[idx].T) * (activations[idx] > 0.0)
    return loss, grads_w, grads_b


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


def _block_stats(spec: FeatureSpec, x: np.ndarray):
    means, stds = [], []
    for _, sl in spec.block_slices:
        block = x[:, sl]
        means.append(float(block.mean()))
        std = float(block.std())
        stds.append(std if std > 0 else 1.0)
    return np.array(means), np.array(stds)


def train(
    dataset: SlotDataset,
    net: SelectorNetwork,
    epochs: int,
    learning_rate: float = 1e-3,
    batch_size: int = 256,
    seed: int = 0,
    val_fraction: float = 0.05,
    verbose=None,
):
    """Adam on element-wise BCE; the last `val_fraction` of episodes is held
    out for accuracy reporting. Returns (net, per-epoch history)."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    x_raw = dataset.features(net.feature_mode)
    y = dataset.targets.astype(float)

    episodes = np.unique(dataset.episode)
    n_val_ep = int(np.ceil(val_fraction * episodes.size)) if episodes.size > 1 else 0
    val_mask = np.isin(dataset.episode, episodes[episodes.size - n_val_ep:]) \
        if n_val_ep else np.zeros(len(dataset), dtype=bool)
    train_idx = np.nonzero(~val_mask)[0]
    val_idx = np.nonzero(val_mask)[0]

    spec = FeatureSpec.parse(net.feature_mode, net.n_users)
    if net.block_means is None:
        net.block_means, net.block_stds = _block_stats(spec, x_raw[train_idx])
    x = normalize_features(net, x_raw)

    rng = np.random.default_rng(seed)
    adam_m = [np.zeros_like(w) for w in net.weights] + [np.zeros_like(b) for b in net.biases]
    adam_v = [np.zeros_like(g) for g in adam_m]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []

    for epoch in range(1, epochs + 1):
        order = rng.permutation(train_idx)
        losses = []
        for start in range(0, order.size, batch_size):
            batch = order[start:start + batch_size]
            loss, grads_w, grads_b = bce_loss_and_grads(net, x[batch], y[batch])
            if not np.isfinite(loss):
                raise RuntimeError(
                    "training loss is not finite; lower the learning rate or "
                    "check feature normalization"
                )
            losses.append(loss)
            step += 1
            params = net.weights + net.biases
            grads = grads_w + grads_b
            corr1 = 1.0 - beta1 ** step
            corr2 = 1.0 - beta2 ** step
            for p, g, m, v in zip(params, grads, adam_m, adam_v):
                m *= beta1
                m += (1.0 - beta1) * g
                v *= beta2
                v += (1.0 - beta2) * g * g
                p -= learning_rate * (m / corr1) / (np.sqrt(v / corr2) + eps)

        if val_idx.size:
            val_logits = forward_logits(net, x[val_idx])
            val_loss = float(np.mean(np.logaddexp(0.0, val_logits) - y[val_idx] * val_logits))
            pred = (sigmoid(val_logits) >= 0.5).astype(float)
            val_acc = 1.0 - float(np.mean(np.abs(pred - y[val_idx])))
        else:
            val_loss, val_acc = float("nan"), float("nan")
        stats = EpochStats(epoch, float(np.mean(losses)), val_loss, val_acc)
        history.append(stats)
        if verbose is not None:
            verbose(stats)
    return net, history


# ---------------------------------------------------------------------------
# inference


def element_accuracy(predicted, target) -> float:
    """1 - (sum |a_pred - a_tgt|) / I for one 0/1 selection vector."""
    a = np.asarray(predicted, dtype=float)
    b = np.asarray(target, dtype=float)
    if a.shape != b.shape:
        raise ValueError("prediction/target length mismatch")
    return 1.0 - float(np.abs(a - b).sum()) / a.size


def prune_reverse_topk(candidates, scores, n_max: int) -> np.ndarray:
    """Drop the lowest-score candidate one at a time until n_max remain.

    Ties at the minimum remove the highest index, so the lowest index is
    kept; equivalent to keeping the n_max largest scores.
    """
    kept = list(int(i) for i in candidates)
    while len(kept) > n_max:
        s = np.asarray([scores[i] for i in kept])
        worst = np.nonzero(s == s.min())[0][-1]
        kept.pop(worst)
    return np.asarray(kept, dtype=np.int64)


def infer_selection(net: SelectorNetwork, features, ctx) -> SelectionResult:
    """Round sigmoid outputs at 0.5, prune to N_max by reverse top-k, fall
    back to top-1 when nothing is predicted, then ZF + rate evaluation."""
    from .schedulers import _evaluate, singleuser_scores

    features = np.asarray(features, dtype=float)
    if features.shape != (net.input_dim,):
        raise ValueError(
            f"feature dimension {features.shape} does not match network input "
            f"({net.input_dim},)"
        )
    x = normalize_features(net, features[None, :])
    probs = sigmoid(forward_logits(net, x))[0]
    candidates = np.nonzero(probs >= 0.5)[0]
    scores = singleuser_scores(ctx)
    if candidates.size > ctx.n_max:
        candidates = np.sort(prune_reverse_topk(candidates, scores, ctx.n_max))
    if candidates.size == 0:
        candidates = np.array([int(np.argmax(scores))], dtype=np.int64)
    try:
        return _evaluate(ctx, candidates)
    except SingularChannel:
        g = ctx.eff.u[np.ix_(candidates, candidates)]
        return infeasible_selection(ctx.n_users, candidates, g)


def make_ml_scheduler(net: SelectorNetwork):
    """Scheduler callable running the DNN inference pipeline each slot."""
    spec = FeatureSpec.parse(net.feature_mode, net.n_users)

    def ml_select(ctx) -> SelectionResult:
        return infer_selection(net, spec.from_context(ctx), ctx)

    ml_select.scheduler_name = "ml"
    return ml_select
