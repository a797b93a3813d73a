"""Dense ReLU-network energies, weight files, and latent-space composition.

Two network roles exist.  A *descriptor* scores a state with a scalar F
and defines the energy  E(x) = -F(x) + ||x||^2 / (2 sigma^2).  A
*generator* maps a low-dimensional latent vector to the descriptor's
input space; composing the two gives an energy over the latent space.

Weight files are a short ASCII header (shapes, activations, sigma^2)
followed by raw little-endian float32 blocks, so externally trained
weights load without any deep-learning dependency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CompositionError, NumericError, ParseError, RejectedInput, Unsupported
from .landscapes import EnergyModel
from .rng import stream

_ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise RejectedInput(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise RejectedInput("layer weight/bias shapes disagree")


@dataclass(frozen=True)
class ReluNetworkSpec:
    """Ordered dense layers plus the role metadata needed to build a model."""

    layers: tuple[Layer, ...]
    role: str = "descriptor"  # or "generator"
    sigma2: float = 1.0  # prior variance of the descriptor's quadratic term

    def __post_init__(self):
        if self.role not in ("descriptor", "generator"):
            raise RejectedInput(f"unknown network role {self.role!r}")
        if self.sigma2 <= 0:
            raise RejectedInput("sigma2 must be positive")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.weight.shape[1] != prev.weight.shape[0]:
                raise RejectedInput(
                    f"adjacent layer dims disagree: {prev.weight.shape[0]} then "
                    f"{nxt.weight.shape[1]}"
                )
        if self.role == "descriptor" and self.layers[-1].weight.shape[0] != 1:
            raise RejectedInput("descriptor network must end in a scalar output")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]


def _apply(activation: str, z: np.ndarray) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    return z


def _apply_prime(activation: str, z: np.ndarray) -> np.ndarray:
    # subgradient 0 exactly at a ReLU kink
    if activation == "relu":
        return (z > 0.0).astype(float)
    if activation == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def forward(spec: ReluNetworkSpec, x: np.ndarray, keep_cache: bool = False):
    """Run the network; returns (output, cache of pre-activations)."""
    h = np.asarray(x, dtype=float)
    cache = [] if keep_cache else None
    for idx, layer in enumerate(spec.layers):
        with np.errstate(over="ignore", invalid="ignore"):
            z = layer.weight @ h + layer.bias
        if not np.isfinite(z).all():
            raise NumericError(f"non-finite forward pass at layer {idx}", layer=idx)
        if keep_cache:
            cache.append(z)
        h = _apply(layer.activation, z)
    return h, cache


def backward(spec: ReluNetworkSpec, cache, upstream: np.ndarray) -> np.ndarray:
    """Vector-Jacobian product through the cached forward pass."""
    g = np.asarray(upstream, dtype=float)
    for layer, z in zip(reversed(spec.layers), reversed(cache)):
        g = layer.weight.T @ (g * _apply_prime(layer.activation, z))
    return g


def activation_pattern(spec: ReluNetworkSpec, x: np.ndarray) -> tuple:
    """On/off pattern of every ReLU unit at ``x`` (identifies the linear region)."""
    h = np.asarray(x, dtype=float)
    bits = []
    for layer in spec.layers:
        z = layer.weight @ h + layer.bias
        if layer.activation == "relu":
            bits.extend((z > 0.0).astype(np.int8).tolist())
        h = _apply(layer.activation, z)
    return tuple(bits)


class ReluNetworkModel(EnergyModel):
    """Descriptor-network energy  E(x) = -F(x) + ||x||^2 / (2 sigma^2)."""

    kind = "continuous"

    def __init__(self, spec: ReluNetworkSpec, name: str = "relu-energy"):
        if spec.role != "descriptor":
            raise RejectedInput("ReluNetworkModel needs a descriptor spec")
        self.spec = spec
        self.dim = spec.in_dim
        self.sigma2 = spec.sigma2
        self.name = name

    def energy(self, x: np.ndarray) -> float:
        x = self.check_state(x).astype(float)
        score, _ = forward(self.spec, x)
        return float(-score[0] + x @ x / (2.0 * self.sigma2))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = self.check_state(x).astype(float)
        _, cache = forward(self.spec, x, keep_cache=True)
        dscore = backward(self.spec, cache, np.ones(1))
        return -dscore + x / self.sigma2


class ComposedModel(EnergyModel):
    """Descriptor energy pulled back through a generator: E(z) = E_desc(g(z))."""

    kind = "continuous"

    def __init__(self, generator: ReluNetworkSpec, descriptor: ReluNetworkModel,
                 name: str = "composed-energy"):
        if generator.role != "generator":
            raise RejectedInput("compose() needs a generator spec first")
        if generator.out_dim != descriptor.dim:
            raise CompositionError(
                f"generator output dim {generator.out_dim} != descriptor input dim "
                f"{descriptor.dim}"
            )
        self.generator = generator
        self.descriptor = descriptor
        self.dim = generator.in_dim
        self.latent_dim = generator.in_dim
        self.name = name

    def decode(self, z: np.ndarray) -> np.ndarray:
        out, _ = forward(self.generator, z)
        return out

    def energy(self, z: np.ndarray) -> float:
        z = self.check_state(z).astype(float)
        return self.descriptor.energy(self.decode(z))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        z = self.check_state(z).astype(float)
        img, cache = forward(self.generator, z, keep_cache=True)
        upstream = self.descriptor.gradient(img)
        return backward(self.generator, cache, upstream)


def compose(generator: ReluNetworkSpec, descriptor) -> ComposedModel:
    """Build a latent-space energy from a generator and a descriptor."""
    if isinstance(descriptor, ReluNetworkSpec):
        descriptor = ReluNetworkModel(descriptor)
    return ComposedModel(generator, descriptor)


# ---------------------------------------------------------------------------
# Weight-file format
# ---------------------------------------------------------------------------

_MAGIC = b"relu-network v1\n"


def save_network(spec: ReluNetworkSpec, path) -> None:
    lines = [_MAGIC.decode().strip(), f"role {spec.role}", f"sigma2 {spec.sigma2!r}",
             f"layers {len(spec.layers)}"]
    for layer in spec.layers:
        out_d, in_d = layer.weight.shape
        lines.append(f"layer {in_d} {out_d} {layer.activation}")
    lines.append("end")
    blob = bytearray(("\n".join(lines) + "\n").encode())
    for layer in spec.layers:
        blob += np.ascontiguousarray(layer.weight, dtype="<f4").tobytes()
        blob += np.ascontiguousarray(layer.bias, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)


def load_network(path) -> ReluNetworkSpec:
    """Parse a weight file; malformed input raises ParseError with a byte offset."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(_MAGIC):
        raise ParseError("missing relu-network v1 header", 0)
    offset = len(_MAGIC)
    role, sigma2, n_layers = None, 1.0, None
    shapes = []
    while True:
        end = data.find(b"\n", offset)
        if end < 0:
            raise ParseError("header not terminated by 'end'", offset)
        line = data[offset:end].decode("ascii", errors="replace").strip()
        line_start = offset
        offset = end + 1
        if line == "end":
            break
        parts = line.split()
        try:
            if parts[0] == "role":
                role = parts[1]
            elif parts[0] == "sigma2":
                sigma2 = float(parts[1])
            elif parts[0] == "layers":
                n_layers = int(parts[1])
            elif parts[0] == "layer":
                shapes.append((int(parts[1]), int(parts[2]), parts[3]))
            else:
                raise ParseError(f"unknown header line {line!r}", line_start)
        except (IndexError, ValueError) as exc:
            raise ParseError(f"bad header line {line!r}: {exc}", line_start) from exc
    if role not in ("descriptor", "generator"):
        raise ParseError(f"missing or invalid role {role!r}", 0)
    if n_layers is None or n_layers != len(shapes):
        raise ParseError(f"declared {n_layers} layers, found {len(shapes)}", 0)

    def take(count):
        nonlocal offset
        nbytes = count * 4
        if offset + nbytes > len(data):
            raise ParseError("weight payload truncated", offset)
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += nbytes
        return arr.astype(np.float64)

    layers = []
    for in_d, out_d, act in shapes:
        weight = take(out_d * in_d).reshape(out_d, in_d)
        bias = take(out_d)
        layers.append(Layer(weight, bias, act))
    if offset != len(data):
        raise ParseError(f"{len(data) - offset} trailing bytes after weights", offset)
    return ReluNetworkSpec(tuple(layers), role=role, sigma2=sigma2)


def load_relu_network(path, name: str | None = None) -> ReluNetworkModel:
    """Load a descriptor weight file as an energy model."""
    spec = load_network(path)
    if spec.role != "descriptor":
        raise Unsupported(
            "file holds a generator network; pass it to compose() with a descriptor"
        )
    return ReluNetworkModel(spec, name=name or f"relu-energy[{path}]")


def random_network(seed: int, dims, role: str = "descriptor", sigma2: float = 1.0,
                   scale: float = 1.0, final_activation: str = "identity") -> ReluNetworkSpec:
    """Randomly initialized dense net; hidden layers use ReLU."""
    rng = stream(seed, "random-network", role)
    layers = []
    for i, (in_d, out_d) in enumerate(zip(dims, dims[1:])):
        w = rng.normal(0.0, scale / np.sqrt(in_d), size=(out_d, in_d))
        b = rng.normal(0.0, 0.1, size=out_d)
        act = final_activation if i == len(dims) - 2 else "relu"
        layers.append(Layer(w, b, act))
    return ReluNetworkSpec(tuple(layers), role=role, sigma2=sigma2)
