"""Executable (torch) form of a NetworkGraph: forward pass, seeded init, toy training."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .netspec import NetworkGraph, ShapeMismatch


class Divergence(RuntimeError):
    pass


def swish(x):
    return x * torch.sigmoid(x)


class _Inception(nn.Module):
    def __init__(self, cfg, wide_in, narrow3, narrow5):
        super().__init__()
        self.b1 = nn.Conv2d(wide_in, cfg.inc1, 1)
        self.b3 = nn.Conv2d(narrow3, cfg.inc3, 3, padding="same")
        self.b5 = nn.Conv2d(narrow5, cfg.inc5, 5, padding="same")
        self.bp = nn.Conv2d(wide_in, cfg.pool_proj, 1)
        self.pool = cfg.inc_pool

    def forward(self, wide, r3, r5):
        pooled = F.max_pool2d(wide, self.pool, stride=1, padding=self.pool // 2)
        return torch.cat([
            swish(self.b1(wide)),
            swish(self.b3(r3)),
            swish(self.b5(r5)),
            F.relu(self.bp(pooled)),
        ], dim=1)


class BrainInceptionResidual(nn.Module):
    """Shared inception trunk, per-projection 1x1 reducers, dense head."""

    def __init__(self, g: NetworkGraph):
        super().__init__()
        c = g.config
        self.cfg = c
        w = c.inc_total
        rw = c.reducer_widths
        self.trunk = nn.ModuleDict({
            "L1": _Inception(c, c.in_channels, c.in_channels, c.in_channels),
            "L2": _Inception(c, w, rw[0], rw[0]),
            "L3": _Inception(c, w, rw[1], rw[1]),
            "L4": _Inception(c, w, rw[2], rw[2]),
        })
        self.reducers = nn.ModuleList()
        for _ in range(c.n_projections):
            self.reducers.append(nn.ModuleDict({
                **{f"T{t}{h}": nn.Conv2d(w, rw[t - 1], 1) for t in (1, 2, 3) for h in "ab"},
                "T4a": nn.Conv2d(w, rw[3], 1),
            }))
        h1, h2 = c.hidden
        self.D1 = nn.Linear(g.flatten_width, h1)
        self.D2 = nn.Linear(h1, h2)
        self.D3 = nn.Linear(h2, c.n_classes)
        self.drop = nn.Dropout(c.dropout)

    def project_features(self, x, p):
        c = self.cfg
        red = self.reducers[p]
        h = self.trunk["L1"](x, x, x)
        for t in (1, 2, 3):
            s = c.reducer_pools[t - 1]
            r3 = F.max_pool2d(swish(red[f"T{t}a"](h)), s, stride=s)
            r5 = F.max_pool2d(swish(red[f"T{t}b"](h)), s, stride=s)
            q = F.max_pool2d(h, s, stride=s)
            out = self.trunk[f"L{t + 1}"](q, r3, r5)
            if out.shape != q.shape:
                raise ShapeMismatch(f"residual branches differ: {tuple(out.shape)} vs {tuple(q.shape)}")
            h = out + q
        s = c.reducer_pools[3]
        return F.max_pool2d(swish(red["T4a"](h)), s, stride=s).flatten(1)

    def forward(self, x):
        # x: (batch, projections, H, W, channels)
        c = self.cfg
        if x.dim() != 5 or x.shape[1] != c.n_projections or x.shape[4] != c.in_channels \
                or x.shape[2] != c.input_size or x.shape[3] != c.input_size:
            raise ShapeMismatch(
                f"expected (B, {c.n_projections}, {c.input_size}, {c.input_size}, {c.in_channels}),"
                f" got {tuple(x.shape)}")
        x = x.permute(0, 1, 4, 2, 3)
        feats = torch.cat([self.project_features(x[:, p], p) for p in range(c.n_projections)], dim=1)
        h = self.drop(swish(self.D1(feats)))
        h = self.drop(swish(self.D2(h)))
        return self.D3(h)


def build_model(g: NetworkGraph, weights: dict | None = None,
                dtype=torch.float32) -> BrainInceptionResidual:
    model = BrainInceptionResidual(g).to(dtype)
    if weights is not None:
        load_weights(model, weights)
    model.eval()
    return model


def glorot_uniform_init(g: NetworkGraph, seed: int) -> dict[str, np.ndarray]:
    """Weights ~ U[-r, r] with r = sqrt(6 / (fan_in + fan_out)); biases zero."""
    rng = np.random.default_rng(seed)
    shapes = {k: tuple(v.shape) for k, v in BrainInceptionResidual(g).state_dict().items()}
    out = {}
    for name, shape in shapes.items():
        if name.endswith(".bias"):
            out[name] = np.zeros(shape, dtype=np.float32)
            continue
        rf = int(np.prod(shape[2:])) if len(shape) > 2 else 1
        r = np.sqrt(6.0 / (shape[1] * rf + shape[0] * rf))
        out[name] = rng.uniform(-r, r, size=shape).astype(np.float32)
    return out


def load_weights(model: nn.Module, weights: dict[str, np.ndarray]) -> None:
    state = model.state_dict()
    missing = set(state) - set(weights)
    if missing:
        raise ShapeMismatch(f"weights missing {sorted(missing)[:3]}...")
    for name, ref in state.items():
        arr = np.asarray(weights[name])
        if tuple(arr.shape) != tuple(ref.shape):
            raise ShapeMismatch(f"{name}: {arr.shape} != {tuple(ref.shape)}")
        state[name] = torch.as_tensor(arr, dtype=ref.dtype)
    model.load_state_dict(state)


def export_weights(model: nn.Module) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy().astype(np.float32) for k, v in model.state_dict().items()}


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(g: NetworkGraph, inputs, weights=None, model=None) -> np.ndarray:
    """Class probabilities for one (P, H, W, C) tensor or a batch of them."""
    x = np.asarray(inputs)
    single = x.ndim == 4
    if single:
        x = x[None]
    if model is None:
        model = build_model(g, weights)
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        logits = model(torch.as_tensor(x, dtype=dtype)).double().numpy()
    probs = softmax(logits)
    return probs[0] if single else probs


@dataclass
class TrainResult:
    weights: dict[str, np.ndarray]
    loss_trace: list[float]
    accuracy: float
    lr_trace: list[float] = field(default_factory=list)


def _full_loss(model, X, y):
    return F.cross_entropy(model(X), y)


def toy_train(g_small: NetworkGraph, X, y, lr: float = 0.5, epochs: int = 200, seed: int = 0,
              grow: float = 1.2, shrink: float = 0.5, max_backtracks: int = 20) -> TrainResult:
    """Full-batch gradient descent with backtracking.

    A step is kept only if the (dropout-free) training loss does not rise, so
    the recorded loss trace is nonincreasing; the step size grows after an
    accepted step and shrinks on rejection.
    """
    torch.manual_seed(seed)
    model = build_model(g_small, glorot_uniform_init(g_small, seed), dtype=torch.float64)
    X = torch.as_tensor(np.asarray(X), dtype=torch.float64)
    y = torch.as_tensor(np.asarray(y), dtype=torch.long)
    params = list(model.parameters())

    with torch.no_grad():
        loss = _full_loss(model, X, y).item()
    trace, lrs = [loss], []
    step = lr
    for _ in range(epochs):
        model.train()
        model.zero_grad()
        _full_loss(model, X, y).backward()
        grads = [p.grad.detach().clone() for p in params]
        model.eval()
        saved = [p.detach().clone() for p in params]
        accepted = False
        if step > 0:
            for _ in range(max_backtracks):
                with torch.no_grad():
                    for p, p0, gr in zip(params, saved, grads):
                        p.copy_(p0 - step * gr)
                    new = _full_loss(model, X, y).item()
                if not np.isfinite(new):
                    step *= shrink
                    continue
                if new <= loss:
                    accepted = True
                    break
                step *= shrink
        if not accepted:
            with torch.no_grad():
                for p, p0 in zip(params, saved):
                    p.copy_(p0)
            new = loss
        else:
            step *= grow
        if not np.isfinite(new):
            raise Divergence("loss became non-finite")
        loss = new
        trace.append(loss)
        lrs.append(step)

    with torch.no_grad():
        acc = (model(X).argmax(dim=1) == y).double().mean().item()
    return TrainResult(export_weights(model), trace, acc, lrs)


def flat_params(model) -> torch.Tensor:
    return torch.cat([p.detach().reshape(-1) for p in model.parameters()])


def gradient_check(g_small: NetworkGraph, X, y, seed: int = 0, eps: float = 1e-6) -> float:
    """Relative error ||g_autograd - g_fd|| / max(||g_autograd||, ||g_fd||) in float64."""
    model = build_model(g_small, glorot_uniform_init(g_small, seed), dtype=torch.float64)
    rng = np.random.default_rng(seed + 1)
    with torch.no_grad():
        for p in model.parameters():
            p.copy_(torch.as_tensor(rng.normal(0, 0.5, size=p.shape)))
    X = torch.as_tensor(np.asarray(X), dtype=torch.float64)
    y = torch.as_tensor(np.asarray(y), dtype=torch.long)

    model.zero_grad()
    _full_loss(model, X, y).backward()
    analytic = torch.cat([p.grad.reshape(-1) for p in model.parameters()]).numpy()

    numeric = np.zeros_like(analytic)
    k = 0
    with torch.no_grad():
        for p in model.parameters():
            flat = p.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = _full_loss(model, X, y).item()
                flat[i] = orig - eps
                down = _full_loss(model, X, y).item()
                flat[i] = orig
                numeric[k] = (up - down) / (2 * eps)
                k += 1
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-300)
    return float(np.linalg.norm(analytic - numeric) / denom)


def make_blobs(g: NetworkGraph, n: int = 200, seed: int = 0, noise: float = 0.5,
               signal: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic 3-class tensors: class k lifts channel k inside a class-specific patch."""
    c = g.config
    rng = np.random.default_rng(seed)
    y = np.arange(n) % c.n_classes
    rng.shuffle(y)
    X = rng.normal(0.0, noise, size=(n, c.n_projections, c.input_size, c.input_size, c.in_channels))
    half = c.input_size // 2
    for i, k in enumerate(y):
        r0 = (k % 2) * half
        c0 = (k // 2 % 2) * half
        X[i, :, r0:r0 + half, c0:c0 + half, k % c.in_channels] += signal
    return X, y
