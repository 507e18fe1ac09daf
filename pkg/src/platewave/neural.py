"""Self-organizing radial-basis classifier, PCA front layer and Kohonen map.

The classifier builds itself during training: hidden units are spawned
wherever no same-class unit responds strongly enough to a sample
(novelty), units that never claim a meaningful share of the activation
mass are pruned (utility), and the linear readout is re-solved by ridge
least squares after every structural change.  If a seeded validation
slice stays below a trigger accuracy, a second radial layer is grown on
top of the first layer's activation vectors, so the depth of the final
network is itself a product of training.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RbfUnit",
    "RbfLayer",
    "TrainConfig",
    "PcaProjection",
    "SnrbNetwork",
    "SomGrid",
    "rbf_activation",
    "snrb_train",
    "snrb_classify",
    "pca_fit",
    "pca_project",
    "som_init",
    "som_step",
    "som_train",
    "som_map",
    "make_two_spirals",
    "save_network",
    "load_network",
    "network_to_text",
    "network_from_text",
]

_RIDGE = 1e-6


@dataclass
class RbfUnit:
    """One Gaussian hidden unit: a prototype vector and a radius."""

    center: np.ndarray
    width: float


@dataclass
class TrainConfig:
    """Growth, pruning and depth knobs of the self-organizing training run.

    novelty_threshold     spawn a unit when the best same-class activation
                          at a sample falls below this
    width_overlap         spawned width = overlap * distance to the
                          nearest existing center (1.0 for the first unit)
    prune_utility         drop units whose best share of the total
                          activation mass over the training set is lower
    max_epochs            cap on grow/prune sweeps
    second_layer_trigger  validation accuracy below which a second radial
                          layer is grown
    """

    novelty_threshold: float = 0.35
    width_overlap: float = 1.0
    prune_utility: float = 0.02
    max_epochs: int = 50
    second_layer_trigger: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.novelty_threshold < 1.0):
            raise ValueError("novelty_threshold must be in (0, 1)")
        if not (self.width_overlap > 0):
            raise ValueError("width_overlap must be positive")
        if self.prune_utility < 0:
            raise ValueError("prune_utility must be >= 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")


@dataclass
class PcaProjection:
    """Mean and orthonormal basis of the leading principal components."""

    mean: np.ndarray
    basis: np.ndarray
    explained_fraction: float


class RbfLayer:
    """Stacked centers/widths of one hidden layer, vectorized activation."""

    def __init__(self, centers, widths, tags=None):
        self.centers = np.asarray(centers, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        self.tags = list(tags) if tags is not None else [None] * len(self.widths)

    def __len__(self):
        return self.centers.shape[0]

    @property
    def input_dim(self):
        return self.centers.shape[1]

    @property
    def units(self):
        return [RbfUnit(c, float(w)) for c, w in zip(self.centers, self.widths)]

    def activations(self, x):
        """Activation vector(s); x is (d,) or (n, d)."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        d2 = ((pts[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        act = np.exp(-d2 / (2.0 * self.widths**2))
        return act[0] if np.ndim(x) == 1 else act


@dataclass
class SnrbNetwork:
    """Trained classifier: optional PCA, 1-2 radial layers, linear readout."""

    pca: PcaProjection | None
    hidden_layers: list
    output_weights: np.ndarray
    labels: list

    @property
    def input_dim(self):
        if self.pca is not None:
            return self.pca.mean.shape[0]
        return self.hidden_layers[0].input_dim


def rbf_activation(unit, x):
    """Gaussian response exp(-||x - center||^2 / (2 width^2)) in (0, 1]."""
    vec = np.asarray(x, dtype=float)
    center = np.asarray(unit.center, dtype=float)
    if vec.shape != center.shape:
        raise ValueError(
            f"dimension mismatch: x has shape {vec.shape}, center {center.shape}"
        )
    d2 = float(((vec - center) ** 2).sum())
    return math.exp(-d2 / (2.0 * unit.width**2))


def pca_fit(samples, variance_target=0.95):
    """Fit the smallest projection whose explained variance meets the target."""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("pca_fit needs at least 2 samples")
    if not (0.0 < variance_target <= 1.0):
        raise ValueError("variance_target must be in (0, 1]")
    mean = data.mean(axis=0)
    centered = data - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    variances = svals**2
    total = variances.sum()
    if total <= 0:
        # degenerate cloud of identical points: keep one arbitrary axis
        return PcaProjection(mean=mean, basis=vt[:1].copy(), explained_fraction=1.0)
    ratios = np.cumsum(variances) / total
    count = int(np.searchsorted(ratios, variance_target - 1e-12) + 1)
    count = min(count, vt.shape[0])
    basis = vt[:count].copy()
    for row in basis:  # deterministic sign convention
        anchor = np.argmax(np.abs(row))
        if row[anchor] < 0:
            row *= -1.0
    return PcaProjection(
        mean=mean, basis=basis, explained_fraction=float(ratios[count - 1])
    )


def pca_project(projection, x):
    """Subtract the mean and project onto the retained components."""
    vec = np.asarray(x, dtype=float)
    return (vec - projection.mean) @ projection.basis.T


def _spawn_width(centers, point, overlap):
    if len(centers) == 0:
        return 1.0
    dists = np.sqrt(((np.asarray(centers) - point) ** 2).sum(axis=1))
    nearest = float(dists.min())
    return overlap * nearest if nearest > 0 else 1.0


def _grow_prune(features, labels, config, rng, max_units):
    """Grow units by novelty and prune by utility until the set stabilizes."""
    n = features.shape[0]
    centers, widths, tags = [], [], []
    for _ in range(config.max_epochs):
        changed = False
        for i in rng.permutation(n):
            if len(centers) >= max_units:
                break
            point, label = features[i], labels[i]
            same = [j for j, t in enumerate(tags) if t == label]
            best = 0.0
            if same:
                sub = np.asarray([centers[j] for j in same])
                w = np.asarray([widths[j] for j in same])
                d2 = ((sub - point) ** 2).sum(axis=1)
                best = float(np.exp(-d2 / (2.0 * w**2)).max())
            if best < config.novelty_threshold:
                widths.append(_spawn_width(centers, point, config.width_overlap))
                centers.append(point.copy())
                tags.append(label)
                changed = True
        if centers and config.prune_utility > 0:
            layer = RbfLayer(centers, widths, tags)
            act = layer.activations(features)
            share = act / (act.sum(axis=1, keepdims=True) + 1e-12)
            utility = share.max(axis=0)
            keep = utility >= config.prune_utility
            for label in set(tags):  # never orphan a class entirely
                members = [j for j, t in enumerate(tags) if t == label]
                best_member = members[int(np.argmax(utility[members]))]
                keep[best_member] = True
            if not keep.all():
                centers = [c for c, k in zip(centers, keep) if k]
                widths = [w for w, k in zip(widths, keep) if k]
                tags = [t for t, k in zip(tags, keep) if k]
                changed = True
        if not changed:
            break
    return RbfLayer(centers, widths, tags)


def _solve_readout(activations, targets):
    design = np.hstack([activations, np.ones((activations.shape[0], 1))])
    gram = design.T @ design + _RIDGE * np.eye(design.shape[1])
    return np.linalg.solve(gram, design.T @ targets)


def _forward(network, points):
    feats = points
    if network.pca is not None:
        feats = pca_project(network.pca, feats)
    act = np.atleast_2d(feats)
    for layer in network.hidden_layers:
        act = layer.activations(act)
    design = np.hstack([act, np.ones((act.shape[0], 1))])
    return design @ network.output_weights


def snrb_train(samples, config=None, use_pca=False):
    """Train the self-organizing radial-basis classifier.

    ``samples`` is a sequence of (vector, label) pairs with at least two
    classes and one sample per class.  The run is fully deterministic for
    a given config seed.  The trained hidden-unit count is always smaller
    than the number of training samples.
    """
    config = config if config is not None else TrainConfig()
    pairs = list(samples)
    if len(pairs) < 2:
        raise ValueError("need at least 2 samples")
    data = np.asarray([np.asarray(v, dtype=float).ravel() for v, _ in pairs])
    labels = [label for _, label in pairs]
    classes = sorted(set(labels), key=lambda c: (str(type(c)), str(c)))
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    if not np.all(np.isfinite(data)):
        raise ValueError("samples contain non-finite values")

    rng = np.random.default_rng(config.seed)
    n = data.shape[0]
    class_index = {c: i for i, c in enumerate(classes)}
    targets = np.zeros((n, len(classes)))
    for i, label in enumerate(labels):
        targets[i, class_index[label]] = 1.0

    pca = pca_fit(data, 0.95) if use_pca else None
    feats = pca_project(pca, data) if pca is not None else data

    # seeded slice used only to judge whether more depth is needed
    holdout = rng.permutation(n)[: int(np.floor(0.1 * n + 0.5))] if n >= 10 else []

    max_units = n - 1 if n > 2 else n  # hard compression bound
    first = _grow_prune(feats, labels, config, rng, max_units)
    act = first.activations(feats)
    weights = _solve_readout(act, targets)
    network = SnrbNetwork(pca, [first], weights, classes)

    if len(holdout) > 0:
        scores = _forward(network, data[holdout])
        predicted = np.argmax(scores, axis=1)
        truth = np.asarray([class_index[labels[i]] for i in holdout])
        holdout_acc = float((predicted == truth).mean())
    else:
        holdout_acc = 1.0

    if holdout_acc < config.second_layer_trigger:
        second = _grow_prune(act, labels, config, rng, max_units)
        act2 = second.activations(act)
        network = SnrbNetwork(
            pca, [first, second], _solve_readout(act2, targets), classes
        )
    return network


def snrb_classify(network, x):
    """Forward pass: (winning label, score vector); ties go to class order."""
    vec = np.asarray(x, dtype=float).ravel()
    if vec.shape[0] != network.input_dim:
        raise ValueError(
            f"dimension mismatch: expected {network.input_dim}, got {vec.shape[0]}"
        )
    scores = _forward(network, vec[None, :])[0]
    return network.labels[int(np.argmax(scores))], scores


# ---------------------------------------------------------------------------
# Kohonen self-organizing map


@dataclass
class SomGrid:
    """2D lattice of prototype vectors; weights has shape (rows, cols, dim)."""

    rows: int
    cols: int
    weights: np.ndarray = field(repr=False)


def som_init(samples, rows, cols, seed=0):
    """Seeded uniform initialization inside the data bounding box."""
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("samples must be a non-empty 2D array")
    if rows * cols < 2:
        raise ValueError("lattice needs at least 2 units")
    rng = np.random.default_rng(seed)
    lo, hi = data.min(axis=0), data.max(axis=0)
    weights = rng.uniform(lo, hi, size=(rows * cols, data.shape[1]))
    return SomGrid(rows=rows, cols=cols, weights=weights.reshape(rows, cols, -1))


def som_step(weights, lattice, x, eta, tau):
    """One online update toward ``x``; returns (new weights, bmu index).

    ``weights`` is (units, dim), ``lattice`` the matching (units, 2) grid
    coordinates.  Every unit moves a fraction eta * h of the way to x,
    with h the Gaussian lattice-distance falloff around the best-matching
    unit (ties resolved to the lowest row-major index).
    """
    d2 = ((weights - x) ** 2).sum(axis=1)
    bmu = int(np.argmin(d2))
    g2 = ((lattice - lattice[bmu]) ** 2).sum(axis=1)
    h = np.exp(-g2 / (2.0 * tau * tau))
    return weights + eta * h[:, None] * (x - weights), bmu


def som_train(samples, rows, cols, epochs=50, seed=0):
    """Classic online Kohonen training, deterministic for a given seed.

    The learning rate decays linearly 0.5 -> 0.01 and the neighborhood
    radius linearly max(rows, cols)/2 -> 0.5 over the epochs; samples are
    presented in a seeded shuffled order each epoch.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("samples must be a non-empty 2D array")
    if epochs < 1:
        raise ValueError("epochs must be positive")
    grid = som_init(data, rows, cols, seed)
    rng = np.random.default_rng([seed, 1])  # presentation order, separate stream
    weights = grid.weights.reshape(rows * cols, -1)
    lattice = np.stack(
        np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij"), axis=-1
    ).reshape(-1, 2).astype(float)
    tau_start = max(rows, cols) / 2.0
    for epoch in range(epochs):
        frac = epoch / (epochs - 1) if epochs > 1 else 0.0
        eta = 0.5 + (0.01 - 0.5) * frac
        tau = tau_start + (0.5 - tau_start) * frac
        for i in rng.permutation(data.shape[0]):
            weights, _ = som_step(weights, lattice, data[i], eta, tau)
    return SomGrid(rows=rows, cols=cols, weights=weights.reshape(rows, cols, -1))


def som_map(grid, x):
    """(row, col) of the best-matching unit; ties to lowest row-major index."""
    vec = np.asarray(x, dtype=float)
    if vec.shape != (grid.weights.shape[2],):
        raise ValueError(
            f"dimension mismatch: expected {grid.weights.shape[2]}, got {vec.shape}"
        )
    flat = grid.weights.reshape(-1, vec.shape[0])
    idx = int(np.argmin(((flat - vec) ** 2).sum(axis=1)))
    return idx // grid.cols, idx % grid.cols


# ---------------------------------------------------------------------------
# Benchmark data


def make_two_spirals(points_per_class=97, turns=2.0, noise=0.0, seed=0):
    """Two intertwined spirals: class 1 is the point reflection of class 0.

    The angle starts at pi/16 rather than 0 so the innermost points of the
    two classes do not coincide at the origin.  Returns a list of
    (vector, label) pairs with labels 0 and 1.
    """
    if points_per_class < 1:
        raise ValueError("points_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    span = 2.0 * math.pi * turns
    theta = np.linspace(math.pi / 16.0, span, points_per_class)
    radius = theta / span
    base = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    if noise > 0:
        base = base + rng.normal(0.0, noise, size=base.shape)
        mirror = -np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
        mirror = mirror + rng.normal(0.0, noise, size=mirror.shape)
    else:
        mirror = -base
    samples = [(base[i], 0) for i in range(points_per_class)]
    samples += [(mirror[i], 1) for i in range(points_per_class)]
    return samples


# ---------------------------------------------------------------------------
# Plain-text model serialization (round-trips bit-exactly)


def _fmt(values):
    return " ".join(f"{v:.17g}" for v in np.asarray(values, dtype=float).ravel())


def network_to_text(network):
    """Serialize to the versioned plain-text model format."""
    lines = ["SNRB v1"]
    if network.pca is None:
        lines.append("pca none")
    else:
        k, d = network.pca.basis.shape
        lines.append(f"pca {k} {d} {network.pca.explained_fraction:.17g}")
        lines.append(_fmt(network.pca.mean))
        lines.extend(_fmt(row) for row in network.pca.basis)
    lines.append(f"layers {len(network.hidden_layers)}")
    for layer in network.hidden_layers:
        lines.append(f"layer {len(layer)} {layer.input_dim}")
        for center, width in zip(layer.centers, layer.widths):
            lines.append(_fmt(center) + " " + f"{width:.17g}")
    rows, cols = network.output_weights.shape
    lines.append(f"weights {rows} {cols}")
    lines.extend(_fmt(row) for row in network.output_weights)
    lines.append("labels " + json.dumps(network.labels))
    return "\n".join(lines) + "\n"


def network_from_text(text):
    """Parse the plain-text model format back into a network."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    cursor = 0

    def take():
        nonlocal cursor
        if cursor >= len(lines):
            raise ValueError("truncated model file")
        line = lines[cursor]
        cursor += 1
        return line

    if take().strip() != "SNRB v1":
        raise ValueError("not an SNRB v1 model file")
    head = take().split()
    if head[0] != "pca":
        raise ValueError("expected pca block")
    if head[1] == "none":
        pca = None
    else:
        k, d = int(head[1]), int(head[2])
        explained = float(head[3])
        mean = np.fromstring(take(), sep=" ")
        basis = np.asarray([np.fromstring(take(), sep=" ") for _ in range(k)])
        if mean.shape != (d,) or basis.shape != (k, d):
            raise ValueError("malformed pca block")
        pca = PcaProjection(mean=mean, basis=basis, explained_fraction=explained)
    head = take().split()
    if head[0] != "layers":
        raise ValueError("expected layers count")
    layers = []
    for _ in range(int(head[1])):
        head = take().split()
        if head[0] != "layer":
            raise ValueError("expected layer header")
        count, dim = int(head[1]), int(head[2])
        centers = np.empty((count, dim))
        widths = np.empty(count)
        for i in range(count):
            row = np.fromstring(take(), sep=" ")
            if row.shape != (dim + 1,):
                raise ValueError("malformed unit line")
            centers[i], widths[i] = row[:dim], row[dim]
        layers.append(RbfLayer(centers, widths))
    head = take().split()
    if head[0] != "weights":
        raise ValueError("expected weights header")
    rows, cols = int(head[1]), int(head[2])
    weights = np.asarray([np.fromstring(take(), sep=" ") for _ in range(rows)])
    if weights.shape != (rows, cols):
        raise ValueError("malformed weights block")
    line = take()
    if not line.startswith("labels "):
        raise ValueError("expected labels line")
    labels = json.loads(line[len("labels ") :])
    if len(labels) != cols:
        raise ValueError("label count does not match weight columns")
    return SnrbNetwork(pca, layers, weights, labels)


def save_network(network, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(network_to_text(network))


def load_network(path):
    with open(path, "r", encoding="ascii") as fh:
        return network_from_text(fh.read())
