"""Layer-level description of the inception-residual classifier and its parameter calculus.

Reconciled layout of the reduced inception layers 2-4 (the only one that
reproduces the published per-layer counts):

* every layer transition t has a pooled residual ``Q_t = maxpool_s(prev)``
  (256 maps, shared, no parameters);
* each projection owns two 1x1 reducers (256 -> w_t, each followed by
  maxpool_s, valid padding, stride s) feeding the 3x3 and 5x5 branches;
* the 1x1 branch and the pool-projection branch read ``Q_t``;
* the module output (256 maps) is added to ``Q_t``.

The last transition (layer 4 -> features) has a single reducer per projection.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


class NetSpecError(ValueError):
    pass


class InconsistentConfig(NetSpecError):
    pass


class ShapeMismatch(NetSpecError):
    pass


class LayerKind(enum.Enum):
    CONV2D = "Conv2D"
    MAXPOOL = "MaxPool"
    INCEPTION_NAIVE = "InceptionNaive"
    INCEPTION_REDUCED = "InceptionReduced"
    RESIDUAL_ADD = "ResidualAdd"
    REDUCER_1X1 = "Reducer1x1"
    FLATTEN = "Flatten"
    DENSE = "Dense"
    SOFTMAX = "Softmax"
    DROPOUT = "Dropout"


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: LayerKind
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    in_channels: int = 0
    out_channels: int = 0
    padding: str = "same"
    activation: str = "none"
    rate: float = 0.0
    branches: tuple["LayerSpec", ...] = ()

    def __post_init__(self):
        if self.kind in (LayerKind.CONV2D, LayerKind.DENSE, LayerKind.REDUCER_1X1) \
                and self.out_channels < 1:
            raise NetSpecError(f"{self.name}: out_channels must be >= 1")
        if self.kind is LayerKind.DROPOUT and not 0 <= self.rate < 1:
            raise NetSpecError(f"{self.name}: dropout rate must lie in [0, 1)")

    def n_params(self) -> int:
        if self.kind in (LayerKind.CONV2D, LayerKind.REDUCER_1X1):
            kh, kw = self.kernel
            return kh * kw * self.in_channels * self.out_channels + self.out_channels
        if self.kind is LayerKind.DENSE:
            return self.in_channels * self.out_channels + self.out_channels
        return sum(b.n_params() for b in self.branches)


@dataclass(frozen=True)
class ArchConfig:
    """Hyperparameters of the brain-inception-residual network (defaults: full scale)."""
    inc1: int = 128
    inc3: int = 64
    inc5: int = 32
    pool_proj: int = 32
    inc_total: int = 256
    inc_pool: int = 3
    reducer_widths: tuple[int, int, int, int] = (32, 32, 64, 64)
    reducer_pools: tuple[int, int, int, int] = (4, 3, 2, 2)
    hidden: tuple[int, int] = (100, 50)
    n_classes: int = 3
    dropout: float = 0.5
    n_projections: int = 24
    input_size: int = 128
    in_channels: int = 21

    def validate(self):
        if self.inc1 + self.inc3 + self.inc5 + self.pool_proj != self.inc_total:
            raise InconsistentConfig(
                f"inception branches sum to {self.inc1 + self.inc3 + self.inc5 + self.pool_proj},"
                f" expected {self.inc_total}")
        if len(self.reducer_widths) != 4 or len(self.reducer_pools) != 4:
            raise InconsistentConfig("four reducer stages are required")
        side = self.input_size
        for s in self.reducer_pools:
            side //= s
            if side < 1:
                raise InconsistentConfig(f"input {self.input_size} collapses under pools {self.reducer_pools}")


@dataclass
class NetworkGraph:
    config: ArchConfig
    shared_trunk: list[LayerSpec]
    per_projection_reducers: list[list[LayerSpec]]
    head: list[LayerSpec]
    spatial: list[int] = field(default_factory=list)

    @property
    def flatten_width(self) -> int:
        return self.head[0].out_channels

    def layers(self):
        yield from self.shared_trunk
        for reducers in self.per_projection_reducers:
            yield from reducers
        yield from self.head


def _conv(name, k, cin, cout, act="swish"):
    return LayerSpec(name, LayerKind.CONV2D, (k, k), (1, 1), cin, cout, "same", act)


def _inception(name, cfg: ArchConfig, wide_in: int, narrow3: int | None, narrow5: int | None):
    kind = LayerKind.INCEPTION_NAIVE if narrow3 is None else LayerKind.INCEPTION_REDUCED
    return LayerSpec(
        name, kind, in_channels=wide_in, out_channels=cfg.inc_total,
        branches=(
            _conv(f"{name}.b1", 1, wide_in, cfg.inc1),
            _conv(f"{name}.b3", 3, narrow3 or wide_in, cfg.inc3),
            _conv(f"{name}.b5", 5, narrow5 or wide_in, cfg.inc5),
            LayerSpec(f"{name}.pool", LayerKind.MAXPOOL, (cfg.inc_pool,) * 2, (1, 1),
                      wide_in, wide_in, "same"),
            _conv(f"{name}.bp", 1, wide_in, cfg.pool_proj, act="relu"),
        ))


def build_architecture(cfg: ArchConfig = ArchConfig()) -> NetworkGraph:
    cfg.validate()
    width = cfg.inc_total
    trunk = [_inception("L1", cfg, cfg.in_channels, None, None)]
    spatial = [cfg.input_size]
    for t in range(1, 4):
        s = cfg.reducer_pools[t - 1]
        w = cfg.reducer_widths[t - 1]
        spatial.append(spatial[-1] // s)
        trunk.append(LayerSpec(f"Q{t}", LayerKind.MAXPOOL, (s, s), (s, s), width, width, "valid"))
        trunk.append(_inception(f"L{t + 1}", cfg, width, w, w))
        trunk.append(LayerSpec(f"L{t + 1}.add", LayerKind.RESIDUAL_ADD,
                               in_channels=width, out_channels=width))

    reducers = []
    for p in range(cfg.n_projections):
        seq = []
        for t in range(1, 5):
            s, w = cfg.reducer_pools[t - 1], cfg.reducer_widths[t - 1]
            heads = ("a", "b") if t < 4 else ("a",)
            for h in heads:
                seq.append(LayerSpec(f"P{p:02d}.T{t}{h}", LayerKind.REDUCER_1X1, (1, 1), (1, 1),
                                     width, w, "same", "swish"))
            seq.append(LayerSpec(f"P{p:02d}.T{t}.pool", LayerKind.MAXPOOL, (s, s), (s, s),
                                 w, w, "valid"))
        reducers.append(seq)

    final_side = spatial[-1] // cfg.reducer_pools[3]
    flat = cfg.n_projections * final_side * final_side * cfg.reducer_widths[3]
    h1, h2 = cfg.hidden
    head = [
        LayerSpec("flatten", LayerKind.FLATTEN, in_channels=flat, out_channels=flat),
        LayerSpec("D1", LayerKind.DENSE, in_channels=flat, out_channels=h1, activation="swish"),
        LayerSpec("D1.drop", LayerKind.DROPOUT, rate=cfg.dropout),
        LayerSpec("D2", LayerKind.DENSE, in_channels=h1, out_channels=h2, activation="swish"),
        LayerSpec("D2.drop", LayerKind.DROPOUT, rate=cfg.dropout),
        LayerSpec("D3", LayerKind.DENSE, in_channels=h2, out_channels=cfg.n_classes,
                  activation="softmax"),
    ]
    spatial.append(final_side)
    return NetworkGraph(cfg, trunk, reducers, head, spatial)


@dataclass
class ParamReport:
    rows: list[tuple[str, int, int, int]]

    @property
    def total(self) -> int:
        return sum(r[3] for r in self.rows)

    def by_name(self) -> dict[str, tuple[int, int, int]]:
        return {r[0]: r[1:] for r in self.rows}

    def table(self) -> str:
        buf = io.StringIO()
        buf.write(f"{'component':<24}{'per instance':>14}{'instances':>11}{'total':>13}\n")
        for name, per, n, tot in self.rows:
            buf.write(f"{name:<24}{per:>14,}{n:>11}{tot:>13,}\n")
        buf.write(f"{'TOTAL':<24}{'':>14}{'':>11}{self.total:>13,}\n")
        return buf.getvalue()


def count_parameters(g: NetworkGraph) -> ParamReport:
    """Shared trunk counted once, per-projection reducers per instance, then the dense head."""
    rows = []
    for layer in g.shared_trunk:
        n = layer.n_params()
        if n:
            rows.append((f"{layer.name} inception", n, 1, n))
    groups: dict[str, list[int]] = {}
    for reducers in g.per_projection_reducers:
        for layer in reducers:
            if layer.kind is LayerKind.REDUCER_1X1:
                stage = layer.name.split(".")[1][:2]
                groups.setdefault(stage, []).append(layer.n_params())
    for stage in sorted(groups):
        sizes = groups[stage]
        if len(set(sizes)) != 1:
            raise NetSpecError(f"reducers of stage {stage} differ in size")
        rows.append((f"{stage} reducer 1x1", sizes[0], len(sizes), sum(sizes)))
    for layer in g.head:
        n = layer.n_params()
        if n:
            rows.append((f"{layer.name} dense", n, 1, n))
    # interleave reducers after their trunk layer, mirroring the published table
    order = {"L1": 0, "T1": 1, "L2": 2, "T2": 3, "L3": 4, "T3": 5, "L4": 6, "T4": 7}
    rows.sort(key=lambda r: order.get(r[0][:2], 100))
    return ParamReport(rows)


def feature_ratio(n_structures: int, g: NetworkGraph) -> float:
    if n_structures < 1:
        raise ValueError("n_structures must be >= 1")
    c = g.config
    n_in = n_structures * c.n_projections * c.input_size ** 2 * c.in_channels
    return n_in / count_parameters(g).total


def reduction_width_solutions(target: int, c_in: int, cfg: ArchConfig = ArchConfig(),
                              max_width: int = 512) -> list[tuple[int, int]]:
    """Integer 1x1-reduction widths (r3, r5) that give `target` parameters for a
    textbook reduced inception module reading `c_in` channels everywhere."""
    fixed = (c_in * cfg.inc1 + cfg.inc1) + (c_in * cfg.pool_proj + cfg.pool_proj) \
        + cfg.inc3 + cfg.inc5
    per3 = c_in + 1 + 9 * cfg.inc3
    per5 = c_in + 1 + 25 * cfg.inc5
    out = []
    for r3 in range(1, max_width + 1):
        rest = target - fixed - per3 * r3
        if rest > 0 and rest % per5 == 0 and rest // per5 <= max_width:
            out.append((r3, rest // per5))
    return out


# --- baseline ----------------------------------------------------------------

@dataclass(frozen=True)
class BaselineConfig:
    d: tuple[int, int, int, int] = (32, 32, 64, 64)
    s: tuple[int, int, int, int] = (4, 2, 2, 2)
    p: int = 3
    pad: int = 2
    h1: int = 100
    h2: int = 50
    n_classes: int = 3
    n_projections: int = 24
    input_size: int = 128
    in_channels: int = 21


def baseline_flatten(cfg: BaselineConfig) -> int:
    side = cfg.input_size
    for s in cfg.s:
        side //= s
    return cfg.n_projections * side * side * cfg.d[-1]


def count_baseline_parameters(cfg: BaselineConfig = BaselineConfig()) -> int:
    """Four shared conv layers (size-preserving) + pools, then three dense layers."""
    if not 3 <= cfg.p <= 7:
        raise ValueError("kernel size p must lie in [3, 7]")
    total = 0
    cin = cfg.in_channels
    for d in cfg.d:
        total += cfg.p * cfg.p * cin * d + d
        cin = d
    widths = [baseline_flatten(cfg), cfg.h1, cfg.h2, cfg.n_classes]
    for a, b in zip(widths, widths[1:]):
        total += a * b + b
    return total


# --- weights files -------------------------------------------------------------

WEIGHTS_MAGIC = b"S2FW"
WEIGHTS_VERSION = 1


class WeightsFormatError(ValueError):
    pass


def write_weights(weights: dict[str, np.ndarray], path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(WEIGHTS_MAGIC + struct.pack("<H", WEIGHTS_VERSION))
        for name, arr in weights.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw = name.encode()
            fh.write(struct.pack("<H", len(raw)) + raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())
    tmp.replace(path)


def read_weights(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:4] != WEIGHTS_MAGIC:
        raise WeightsFormatError(f"{path}: bad magic")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != WEIGHTS_VERSION:
        raise WeightsFormatError(f"{path}: unsupported version {version}")
    pos, out = 6, {}
    try:
        while pos < len(raw):
            (n,) = struct.unpack_from("<H", raw, pos)
            name = raw[pos + 2:pos + 2 + n].decode()
            pos += 2 + n
            (ndim,) = struct.unpack_from("<B", raw, pos)
            dims = struct.unpack_from(f"<{ndim}I", raw, pos + 1)
            pos += 1 + 4 * ndim
            count = int(np.prod(dims))
            if pos + 4 * count > len(raw):
                raise WeightsFormatError(f"{path}: truncated payload for {name}")
            out[name] = np.frombuffer(raw, "<f4", count, pos).reshape(dims).astype(np.float32)
            pos += 4 * count
    except struct.error as exc:
        raise WeightsFormatError(f"{path}: truncated record") from exc
    return out


def small_config(**overrides) -> ArchConfig:
    """Desk-scale configuration (a few hundred parameters)."""
    base = ArchConfig(inc1=4, inc3=2, inc5=1, pool_proj=1, inc_total=8,
                      reducer_widths=(2, 2, 2, 2), reducer_pools=(2, 2, 2, 2),
                      hidden=(6, 4), dropout=0.0, n_projections=2, input_size=16,
                      in_channels=3)
    return replace(base, **overrides)
