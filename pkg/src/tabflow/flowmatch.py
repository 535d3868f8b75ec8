"""Rectified-flow training and transport over paired latent chunks.

Training regresses a velocity field v(t, x_t) onto the constant target
velocity x1 - x0 along the straight interpolant x_t = (1-t) x0 + t x1; the
loss is the mean squared error over batch and elements. Transport solves
dx/dt = v(t, x) from t=0 to t=1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import neuralnet as nn
from . import odesolve
from .errors import DataError, NumericError
from .latentcodec import ChunkPair, LatentSeq
from .neuralnet import tensor as T


@dataclass(frozen=True)
class FlowSample:
    """One training draw: endpoints, time, interpolant, target velocity."""

    x0: np.ndarray
    x1: np.ndarray
    t: float
    x_t: np.ndarray
    u: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    lr: float = 1e-4
    epochs: int = 50
    seed: int = 0
    dims: int = 64
    chunk_seconds: float = 4.0
    base_channels: int = 32

    def __post_init__(self):
        if min(self.batch_size, self.epochs, self.dims) < 1 or self.lr <= 0 \
                or self.chunk_seconds <= 0:
            raise DataError("train config values must be positive")


def make_sample(x0, x1, t: float | None = None,
                rng: np.random.Generator | None = None) -> FlowSample:
    """Build the interpolant x_t and target velocity u = x1 - x0.

    t is drawn uniformly from [0, 1] when omitted and an rng is given.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise DataError(f"endpoint shapes differ: {x0.shape} vs {x1.shape}")
    if t is None:
        if rng is None:
            raise DataError("need an explicit t or an rng to draw one")
        t = float(rng.uniform())
    if not 0.0 <= t <= 1.0:
        raise DataError(f"t must be in [0, 1], got {t}")
    return FlowSample(x0=x0, x1=x1, t=t, x_t=(1.0 - t) * x0 + t * x1, u=x1 - x0)


def cfm_loss(net, samples: list[FlowSample], dtype=np.float32) -> T.Tensor:
    """Mean over batch and elements of ||v(t, x_t) - (x1 - x0)||^2.

    net may be any callable taking (states, times) Tensors and returning a
    Tensor of matching shape.
    """
    if not samples:
        raise DataError("empty batch")
    x_t = T.Tensor(np.stack([s.x_t for s in samples]).astype(dtype))
    u = T.Tensor(np.stack([s.u for s in samples]).astype(dtype))
    t = T.Tensor(np.array([s.t for s in samples], dtype=dtype))
    v = net(x_t, t)
    return T.mse(v, u)


def _stack_pairs(pairs: list[ChunkPair]) -> tuple[np.ndarray, np.ndarray]:
    """ChunkPairs to [N, D, F] arrays (net layout: channels = latent dims)."""
    x0 = np.stack([p.source.frames.T for p in pairs])
    x1 = np.stack([p.target.frames.T for p in pairs])
    return x0, x1


def train_arrays(net, x0: np.ndarray, x1: np.ndarray, cfg: TrainConfig,
                 pad_to_16: bool = True,
                 state: nn.AdamState | None = None) -> list[tuple[int, int, float]]:
    """Core loop over endpoint arrays [N, ...]; returns (step, epoch, loss) rows.

    Batches are reshuffled every epoch; an epoch runs ceil(n / batch) steps
    with a ragged final batch (batch size is clamped when the dataset is
    smaller than one batch).
    """
    if x0.shape != x1.shape or len(x0) < 1:
        raise DataError(f"bad endpoint arrays: {x0.shape} vs {x1.shape}")
    n = len(x0)
    batch = min(cfg.batch_size, n)
    steps_per_epoch = -(-n // batch)
    rng = np.random.default_rng(cfg.seed)
    if state is None:
        state = nn.AdamState(lr=cfg.lr)
    params = net.parameters()
    dtype = net.dtype if hasattr(net, "dtype") else np.float32

    if pad_to_16:
        f = x0.shape[-1]
        target = -(-f // nn.unet.DOWN_FACTOR) * nn.unet.DOWN_FACTOR
        widths = [(0, 0)] * (x0.ndim - 1) + [(0, target - f)]
        x0 = np.pad(x0, widths)
        x1 = np.pad(x1, widths)

    history: list[tuple[int, int, float]] = []
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for b in range(steps_per_epoch):
            idx = order[b * batch:(b + 1) * batch]
            ts = rng.uniform(size=len(idx))
            samples = [make_sample(x0[i], x1[i], float(t)) for i, t in zip(idx, ts)]
            for p in params.values():
                p.zero_grad()
            try:
                loss = cfm_loss(net, samples, dtype=dtype)
            except NumericError as exc:
                raise NumericError(f"{exc} (epoch {epoch}, batch {b})") from exc
            loss.backward()
            nn.adam_step(params, state)
            history.append((step, epoch, loss.item()))
            step += 1
    return history


def train(pairs: list[ChunkPair], cfg: TrainConfig,
          net: nn.VelocityNet | None = None, state: nn.AdamState | None = None):
    """Train a UNet velocity field on content-aligned chunk pairs.

    Returns (net, history). Deterministic for a fixed cfg.seed. Pass an
    AdamState to keep the optimizer state after training (checkpointing).
    """
    if not pairs:
        raise DataError("no training pairs")
    dims = pairs[0].source.dims
    if any(p.source.dims != dims or p.source.n_frames != pairs[0].source.n_frames
           for p in pairs):
        raise DataError("training pairs must share one latent shape")
    if dims != cfg.dims:
        raise DataError(f"latent dims {dims} do not match config dims {cfg.dims}")
    x0, x1 = _stack_pairs(pairs)
    if net is None:
        net = nn.VelocityNet(dims, base_channels=cfg.base_channels, seed=cfg.seed,
                             input_gain=input_gain_for(x0, x1))
    history = train_arrays(net, x0, x1, cfg, state=state)
    return net, history


def input_gain_for(x0: np.ndarray, x1: np.ndarray) -> float:
    """Standardization gain: 1 / pooled RMS of the endpoint latents."""
    rms = float(np.sqrt((np.square(x0).mean() + np.square(x1).mean()) / 2.0))
    return 1.0 / rms if rms > 0 else 1.0


def transfer(net, x0: LatentSeq, solver: odesolve.SolverKind | None = None,
             steps: int | None = None) -> LatentSeq:
    """Transport one latent sequence through the learned flow ODE."""
    if solver is None:
        solver = odesolve.Dopri5()
    if steps is not None:
        solver = replace(solver, steps=steps) if hasattr(solver, "steps") else solver
    frames = transfer_batch(net, x0.frames.T[None, ...], solver)[0]
    return LatentSeq(frames.T, frame_hop=x0.frame_hop, frame_len=x0.frame_len,
                     sample_rate=x0.sample_rate)


def transfer_batch(net, states: np.ndarray, solver: odesolve.SolverKind) -> np.ndarray:
    """Transport a [B, D, F] batch jointly; returns the same shape.

    The ODE state keeps the input dtype; casts happen only at the network
    boundary, so a zero velocity field transports exactly.
    """
    b, d, f = states.shape
    target = -(-f // nn.unet.DOWN_FACTOR) * nn.unet.DOWN_FACTOR
    padded = np.pad(states, ((0, 0), (0, 0), (0, target - f)))
    net_dtype = net.dtype if hasattr(net, "dtype") else np.float32

    def velocity(t: float, y: np.ndarray) -> np.ndarray:
        with nn.no_grad():
            x = T.Tensor(y.reshape(b, d, target).astype(net_dtype))
            tt = T.Tensor(np.full(b, t, dtype=net_dtype))
            return net(x, tt).data.astype(y.dtype).reshape(-1)

    trace = odesolve.integrate(velocity, padded.reshape(-1), (0.0, 1.0), solver)
    return trace.final_state.reshape(b, d, target)[:, :, :f]
