"""Controller network: graph definition, forward/backward, loss.

The architecture is a small convolutional feature extractor (six
conv+relu+batchnorm blocks, aggressive early striding) followed by a
controller head that averages the last two blocks' feature maps over
channels, multiplies the two spatial maps element-wise into a single
activity map, and regresses pan/tilt through a 100-50-10-2 dense stack
with a final tanh.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers

CONV_WIDTHS = {"full": (16, 32, 64, 96, 128, 128), "tiny": (8, 16, 16, 24, 32, 32)}
CONV_STRIDES = (2, 2, 2, 2, 1, 1)
DENSE_WIDTHS = (100, 50, 10, 2)
DROPOUT_RATE = 0.2
LEAKY_SLOPE = 0.1
BN_MOMENTUM = 0.9
BN_EPS = 1e-5
LOSS_EPS = 1e-8


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    name: str
    kind: str
    inputs: tuple[str, ...]
    attrs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Graph:
    nodes: tuple[Node, ...]
    input_w: int
    input_h: int
    scale: str
    output: str = "out"
    activity: str = "activity"


@dataclass
class ForwardPass:
    output: np.ndarray  # (N, 2)
    activity_map: np.ndarray  # (N, 1, ah, aw)
    activations: dict
    caches: dict
    mode: str


def build_graph(input_size: tuple[int, int], scale: str) -> Graph:
    """Lay out the node list for the given input size and scale."""
    w, h = input_size
    if scale not in CONV_WIDTHS:
        raise NetworkError(f"unknown scale {scale!r}; expected one of {sorted(CONV_WIDTHS)}")
    total_stride = 1
    for s in CONV_STRIDES:
        total_stride *= s
    if w % total_stride or h % total_stride:
        raise NetworkError(f"input {w}x{h} not divisible by cumulative stride {total_stride}")

    widths = CONV_WIDTHS[scale]
    nodes: list[Node] = []
    prev = "input"
    in_ch = 3
    for i, (filters, stride) in enumerate(zip(widths, CONV_STRIDES), start=1):
        nodes.append(Node(f"b{i}_conv", "conv", (prev,), {"in": in_ch, "filters": filters, "kernel": 3, "stride": stride}))
        nodes.append(Node(f"b{i}_relu", "relu", (f"b{i}_conv",)))
        nodes.append(Node(f"b{i}_bn", "batchnorm", (f"b{i}_relu",), {"channels": filters}))
        prev = f"b{i}_bn"
        in_ch = filters
        if i == 3:  # mid-extractor dropout
            nodes.append(Node("mid_drop", "dropout", (prev,), {"rate": DROPOUT_RATE}))
            prev = "mid_drop"

    nodes.append(Node("avg5", "channel_mean", ("b5_bn",)))
    nodes.append(Node("avg6", "channel_mean", ("b6_bn",)))
    nodes.append(Node("activity", "elementwise_mul", ("avg5", "avg6")))
    nodes.append(Node("flat", "flatten", ("activity",)))

    flat_len = (w // total_stride) * (h // total_stride)
    prev = "flat"
    in_dim = flat_len
    for i, width in enumerate(DENSE_WIDTHS, start=1):
        last = i == len(DENSE_WIDTHS)
        nodes.append(Node(f"fc{i}", "dense", (prev,), {"in": in_dim, "out": width}))
        prev = f"fc{i}"
        if not last:
            nodes.append(Node(f"fc{i}_act", "leakyrelu", (prev,), {"slope": LEAKY_SLOPE}))
            prev = f"fc{i}_act"
            if i <= 2:  # dropout between the first dense layers only
                nodes.append(Node(f"fc{i}_drop", "dropout", (prev,), {"rate": DROPOUT_RATE}))
                prev = f"fc{i}_drop"
        in_dim = width
    nodes.append(Node("out", "tanh", (prev,)))
    return Graph(tuple(nodes), w, h, scale)


def param_specs(graph: Graph) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map for every tensor the graph owns."""
    specs: dict[str, tuple[int, ...]] = {}
    for node in graph.nodes:
        if node.kind == "conv":
            f, c, k = node.attrs["filters"], node.attrs["in"], node.attrs["kernel"]
            specs[f"{node.name}.kernel"] = (f, c, k, k)
            specs[f"{node.name}.bias"] = (f,)
        elif node.kind == "batchnorm":
            ch = node.attrs["channels"]
            for suffix in ("gamma", "beta", "running_mean", "running_var"):
                specs[f"{node.name}.{suffix}"] = (ch,)
        elif node.kind == "dense":
            specs[f"{node.name}.weight"] = (node.attrs["in"], node.attrs["out"])
            specs[f"{node.name}.bias"] = (node.attrs["out"],)
    return specs


def is_trainable(name: str) -> bool:
    return not name.endswith((".running_mean", ".running_var"))


def init_params(graph: Graph, seed: int) -> dict[str, np.ndarray]:
    """He-uniform kernels and dense weights, zero biases, identity batchnorm."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_specs(graph).items():
        if name.endswith(".kernel"):
            fan_in = shape[1] * shape[2] * shape[3]
            limit = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
        elif name.endswith(".weight"):
            limit = np.sqrt(6.0 / shape[0])
            params[name] = rng.uniform(-limit, limit, size=shape).astype(np.float32)
        elif name.endswith((".beta", ".bias", ".running_mean")):
            params[name] = np.zeros(shape, dtype=np.float32)
        else:  # gamma, running_var
            params[name] = np.ones(shape, dtype=np.float32)
    return params


def build_control_net(input_size: tuple[int, int], scale: str, seed: int = 0):
    """Build the architecture graph plus freshly initialized parameters."""
    graph = build_graph(input_size, scale)
    return graph, init_params(graph, seed)


def param_count(params: dict[str, np.ndarray]) -> int:
    """Trainable parameter count (running statistics excluded)."""
    return int(sum(v.size for k, v in params.items() if is_trainable(k)))


def validate_params(graph: Graph, params: dict[str, np.ndarray]) -> None:
    """Check that params carry exactly the graph's tensors at the right shapes."""
    specs = param_specs(graph)
    for name, shape in specs.items():
        if name not in params:
            raise NetworkError(f"missing tensor {name}")
        if tuple(params[name].shape) != shape:
            raise NetworkError(f"tensor {name}: shape {params[name].shape}, expected {shape}")
    extra = set(params) - set(specs)
    if extra:
        raise NetworkError(f"unexpected tensors: {sorted(extra)}")


def forward(
    graph: Graph,
    params: dict[str, np.ndarray],
    batch: np.ndarray,
    mode: str = "infer",
    rng: np.random.Generator | None = None,
) -> ForwardPass:
    """Run the graph on a (N, 3, H, W) batch of [0,1]-normalized pixels.

    Train mode uses batch statistics (updating the running ones in place in
    `params`) and sampled dropout masks; infer mode is deterministic.
    """
    if mode not in ("train", "infer"):
        raise NetworkError(f"unknown mode {mode!r}")
    if batch.ndim != 4 or batch.shape[1] != 3 or batch.shape[2] != graph.input_h or batch.shape[3] != graph.input_w:
        raise NetworkError(
            f"batch shape {batch.shape}, expected (N, 3, {graph.input_h}, {graph.input_w})"
        )
    if batch.min() < -1e-6 or batch.max() > 1.0 + 1e-6:
        raise NetworkError("batch pixels must be normalized to [0, 1]")
    if mode == "train" and rng is None:
        rng = np.random.default_rng(0)

    acts: dict[str, np.ndarray] = {"input": batch}
    caches: dict[str, object] = {}
    for node in graph.nodes:
        x = acts[node.inputs[0]]
        if node.kind == "conv":
            y, cache = layers.conv2d_forward(
                x, params[f"{node.name}.kernel"], params[f"{node.name}.bias"], node.attrs["stride"]
            )
        elif node.kind == "batchnorm":
            y, cache, new_mean, new_var = layers.batchnorm_forward(
                x,
                params[f"{node.name}.gamma"],
                params[f"{node.name}.beta"],
                params[f"{node.name}.running_mean"],
                params[f"{node.name}.running_var"],
                mode,
                BN_MOMENTUM,
                BN_EPS,
            )
            if mode == "train":
                params[f"{node.name}.running_mean"] = new_mean
                params[f"{node.name}.running_var"] = new_var
        elif node.kind == "relu":
            y, cache = layers.relu_forward(x)
        elif node.kind == "leakyrelu":
            y, cache = layers.leakyrelu_forward(x, node.attrs["slope"])
        elif node.kind == "tanh":
            y, cache = layers.tanh_forward(x)
        elif node.kind == "dense":
            y, cache = layers.dense_forward(x, params[f"{node.name}.weight"], params[f"{node.name}.bias"])
        elif node.kind == "dropout":
            y, cache = layers.dropout_forward(x, node.attrs["rate"], mode, rng)
        elif node.kind == "channel_mean":
            y, cache = layers.channel_mean_forward(x)
        elif node.kind == "elementwise_mul":
            y, cache = layers.elementwise_mul_forward(x, acts[node.inputs[1]])
        elif node.kind == "flatten":
            y, cache = layers.flatten_forward(x)
        else:
            raise NetworkError(f"unknown layer kind {node.kind!r}")
        acts[node.name] = y
        caches[node.name] = cache

    return ForwardPass(acts[graph.output], acts[graph.activity], acts, caches, mode)


def euclidean_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean over the batch of the per-sample 2-D Euclidean distance."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise NetworkError(f"prediction/truth shapes differ: {pred.shape} vs {truth.shape}")
    if pred.shape[0] == 0:
        raise NetworkError("loss of an empty batch is undefined")
    diff = pred - truth
    return float(np.sqrt((diff**2).sum(axis=1)).mean())


def euclidean_loss_grad(pred: np.ndarray, truth: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss plus its gradient w.r.t. the predictions.

    The square root in the derivative is stabilized with a small epsilon so
    a perfect prediction yields a finite (zero) gradient.
    """
    loss = euclidean_loss(pred, truth)
    diff = pred - truth
    dist = np.sqrt((diff**2).sum(axis=1, keepdims=True) + LOSS_EPS)
    grad = diff / dist / pred.shape[0]
    return loss, grad


def backward(
    graph: Graph,
    params: dict[str, np.ndarray],
    fwd: ForwardPass,
    truth: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Backpropagate the Euclidean loss through a retained forward pass.

    Returns (loss, gradient tensor per trainable parameter tensor).
    """
    loss, dout = euclidean_loss_grad(fwd.output, truth)
    grads_out: dict[str, np.ndarray] = {graph.output: dout}
    param_grads: dict[str, np.ndarray] = {}

    for node in reversed(graph.nodes):
        dy = grads_out.pop(node.name, None)
        if dy is None:
            continue
        cache = fwd.caches[node.name]
        if node.kind == "conv":
            dx, dw, db = layers.conv2d_backward(dy, cache, params[f"{node.name}.kernel"])
            param_grads[f"{node.name}.kernel"] = dw
            param_grads[f"{node.name}.bias"] = db
        elif node.kind == "batchnorm":
            dx, dgamma, dbeta = layers.batchnorm_backward(dy, cache, params[f"{node.name}.gamma"])
            param_grads[f"{node.name}.gamma"] = dgamma
            param_grads[f"{node.name}.beta"] = dbeta
        elif node.kind == "relu":
            dx = layers.relu_backward(dy, cache)
        elif node.kind == "leakyrelu":
            dx = layers.leakyrelu_backward(dy, cache)
        elif node.kind == "tanh":
            dx = layers.tanh_backward(dy, cache)
        elif node.kind == "dense":
            dx, dw, db = layers.dense_backward(dy, cache, params[f"{node.name}.weight"])
            param_grads[f"{node.name}.weight"] = dw
            param_grads[f"{node.name}.bias"] = db
        elif node.kind == "dropout":
            dx = layers.dropout_backward(dy, cache)
        elif node.kind == "channel_mean":
            dx = layers.channel_mean_backward(dy, cache)
        elif node.kind == "elementwise_mul":
            dx, dx2 = layers.elementwise_mul_backward(dy, cache)
            other = node.inputs[1]
            grads_out[other] = grads_out.get(other, 0) + dx2
        elif node.kind == "flatten":
            dx = layers.flatten_backward(dy, cache)
        else:  # pragma: no cover - guarded at build time
            raise NetworkError(f"unknown layer kind {node.kind!r}")

        target = node.inputs[0]
        grads_out[target] = grads_out.get(target, 0) + dx

    for name, g in param_grads.items():
        if not np.isfinite(g).all():
            raise NetworkError(f"non-finite gradient in {name}")
    return loss, param_grads


def loss_and_grads(graph, params, batch, truth, mode="train", rng=None):
    """Convenience: forward then backward in one call."""
    fwd = forward(graph, params, batch, mode, rng)
    return backward(graph, params, fwd, truth)
