"""Fully connected networks with Glorot-normal initialization.

Parameters live in one flat float64 vector ordered layer by layer, weight
matrix (row-major, shape ``(fan_in, fan_out)``) before bias.  The same
:func:`forward` runs on plain arrays, on taped parameters, and on jets.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from dcgd import autodiff as ad

ACTIVATIONS = {"tanh": ad.tanh, "swish": ad.swish}


@dataclass(frozen=True)
class MlpConfig:
    layer_widths: tuple[int, ...]
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 3:
            raise ValueError("need an input layer, at least one hidden layer and an output layer")
        if any(w < 1 for w in widths):
            raise ValueError("layer widths must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        w = self.layer_widths
        return [((w[i], w[i + 1]), (w[i + 1],)) for i in range(len(w) - 1)]

    @property
    def n_params(self) -> int:
        return sum(a * b + b for (a, b), _ in self.shapes)

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_dim(self) -> int:
        return self.layer_widths[-1]


@dataclass
class MlpParams:
    config: MlpConfig
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if self.vector.shape != (self.config.n_params,):
            raise ValueError(f"expected {self.config.n_params} parameters, got {self.vector.shape}")

    def layers(self):
        return unflatten(self.config, self.vector)

    def copy(self) -> "MlpParams":
        return MlpParams(self.config, self.vector.copy())


def unflatten(config: MlpConfig, vector):
    """Split a flat vector (array or taped ``Var``) into ``[(W, b), ...]``."""
    out = []
    pos = 0
    for (fi, fo), _ in config.shapes:
        w = ad.reshape(ad.getitem(vector, slice(pos, pos + fi * fo)), (fi, fo))
        pos += fi * fo
        b = ad.getitem(vector, slice(pos, pos + fo))
        pos += fo
        out.append((w, b))
    return out


def flatten(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([np.ravel(w), np.ravel(b)]) for w, b in layers])


def layer_generators(seed: int, n_layers: int) -> list[np.random.Generator]:
    """One PCG64 stream per layer, spawned from ``SeedSequence(seed)``.

    Layer ``i`` always draws from child ``i``, whatever the order in which
    layers are initialized.
    """
    children = np.random.SeedSequence(int(seed)).spawn(n_layers)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def glorot_init(config: MlpConfig) -> MlpParams:
    gens = layer_generators(config.seed, len(config.shapes))
    layers = []
    for ((fi, fo), _), rng in zip(config.shapes, gens):
        std = np.sqrt(2.0 / (fi + fo))
        layers.append((rng.normal(0.0, std, size=(fi, fo)), np.zeros(fo)))
    return MlpParams(config, flatten(layers))


def forward(config: MlpConfig, params, x):
    """Evaluate the network.

    ``params`` is a flat vector (ndarray or taped ``Var``); ``x`` is an
    ``(N, d)`` array or a :class:`~dcgd.autodiff.TapeValue` seeded on the
    inputs.  The last layer is affine.
    """
    if isinstance(params, MlpParams):
        params = params.vector
    width = x.primal.shape[-1] if isinstance(x, ad.TapeValue) else np.shape(x)[-1]
    if width != config.input_dim:
        raise ValueError(f"input dimension {width} does not match network input {config.input_dim}")
    act = ACTIVATIONS[config.activation]
    layers = unflatten(config, params)
    h = x
    for i, (w, b) in enumerate(layers):
        h = ad.jet_affine(h, w, b) if isinstance(h, ad.TapeValue) else h @ w + b
        if i < len(layers) - 1:
            h = act(h)
    return h


def predict(params: MlpParams, x) -> np.ndarray:
    """Plain-array forward pass."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return forward(params.config, params.vector, x)


def save_params(params: MlpParams, path) -> None:
    """JSON header line with the config, then little-endian float64 data."""
    header = json.dumps({"config": asdict(params.config), "n_params": params.config.n_params})
    with open(path, "wb") as fh:
        fh.write(header.encode() + b"\n")
        fh.write(params.vector.astype("<f8").tobytes())


def load_params(path) -> MlpParams:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    meta = json.loads(raw[:nl])
    cfg = meta["config"]
    config = MlpConfig(tuple(cfg["layer_widths"]), cfg["activation"], cfg["seed"])
    vec = np.frombuffer(raw[nl + 1:], dtype="<f8").astype(np.float64)
    if vec.size != meta["n_params"]:
        raise ValueError("parameter file is truncated")
    return MlpParams(config, vec)
