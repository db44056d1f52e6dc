"""Feature extractors mapping observations into the shared latent space.

Three variants: identity (grid observations are already compact vectors),
per-feature standardization, and a dense variational autoencoder trained on
reconstruction plus a KL penalty whose weight ramps linearly over training.
Inference always uses the mean head, so encoding is deterministic and every
downstream consumer (agents, retrieval index) sees the same latents.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nets import AdamState, DenseNet, adam_step, backward, forward, mlp
from .seeding import spawn_rng


@dataclass
class VaeTrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 3e-4
    beta_max: float = 5e-8
    ramp_start: float = 0.1  # fraction of epochs where the ramp begins
    ramp_end: float = 0.9

    def __post_init__(self) -> None:
        if not 0.0 <= self.ramp_start < self.ramp_end <= 1.0:
            raise ValueError("need 0 <= ramp_start < ramp_end <= 1")
        if self.beta_max < 0.0:
            raise ValueError("beta_max must be >= 0")


def beta_schedule(epoch: int, total_epochs: int, cfg: VaeTrainConfig) -> float:
    """KL weight: 0 before the ramp, linear across it, beta_max after."""
    if not 0 <= epoch < total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs})")
    start = cfg.ramp_start * total_epochs
    end = cfg.ramp_end * total_epochs
    frac = (epoch - start) / (end - start)
    return cfg.beta_max * min(1.0, max(0.0, frac))


class IdentityEncoder:
    def __init__(self, dim: int):
        self.dim = dim

    @property
    def latent_dim(self) -> int:
        return self.dim

    @property
    def encoder_id(self) -> str:
        return f"identity:{self.dim}"

    def encode(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.dim,):
            raise ShapeError(f"observation shape {obs.shape} != ({self.dim},)")
        return obs

    def encode_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.dim:
            raise ShapeError(f"batch shape {batch.shape} incompatible with dim {self.dim}")
        return batch


class StandardizeEncoder:
    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError("mean and std must be 1-D and aligned")
        if np.any(self.std <= 0.0):
            raise ValueError("std entries must be > 0")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.dim

    @property
    def encoder_id(self) -> str:
        tag = zlib.crc32(self.mean.tobytes() + self.std.tobytes()) & 0xFFFFFFFF
        return f"standardize:{self.dim}:{tag:08x}"

    def encode(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != self.mean.shape:
            raise ShapeError(f"observation shape {obs.shape} != {self.mean.shape}")
        return (obs - self.mean) / self.std

    def encode_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.dim:
            raise ShapeError(f"batch shape {batch.shape} incompatible with dim {self.dim}")
        return (batch - self.mean) / self.std


def fit_standardizer(observations: np.ndarray, std_floor: float = 1e-8) -> StandardizeEncoder:
    obs = np.asarray(observations, dtype=np.float64)
    std = np.maximum(obs.std(axis=0), std_floor)  # floor keeps the >0 invariant
    return StandardizeEncoder(obs.mean(axis=0), std)


class DenseVaeEncoder:
    """Dense VAE: encoder emits (mu, log-variance); decode reconstructs."""

    def __init__(self, enc_net: DenseNet, dec_net: DenseNet, latent_dim: int,
                 noise_seed: int = 0):
        if enc_net.output_dim != 2 * latent_dim:
            raise ShapeError(
                f"encoder must emit 2*latent_dim={2 * latent_dim} values, "
                f"got {enc_net.output_dim}"
            )
        if dec_net.input_dim != latent_dim or dec_net.output_dim != enc_net.input_dim:
            raise ShapeError("decoder dims must invert the encoder")
        self.enc_net = enc_net
        self.dec_net = dec_net
        self.latent_dim = latent_dim
        self.noise_rng = spawn_rng(noise_seed, "vae-noise")

    @property
    def dim(self) -> int:
        return self.enc_net.input_dim

    @property
    def encoder_id(self) -> str:
        tag = zlib.crc32(b"".join(p.tobytes() for p in self.enc_net.param_arrays()))
        return f"vae:{self.latent_dim}:{tag & 0xFFFFFFFF:08x}"

    def encode(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.dim,):
            raise ShapeError(f"observation shape {obs.shape} != ({self.dim},)")
        return forward(self.enc_net, obs[None, :]).final[0, : self.latent_dim].copy()

    def encode_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.dim:
            raise ShapeError(f"batch shape {batch.shape} incompatible with dim {self.dim}")
        return forward(self.enc_net, batch).final[:, : self.latent_dim].copy()


Encoder = IdentityEncoder | StandardizeEncoder | DenseVaeEncoder


def new_vae(input_dim: int, latent_dim: int, hidden: tuple[int, ...] = (64, 64),
            seed: int = 0) -> DenseVaeEncoder:
    enc = mlp(input_dim, 2 * latent_dim, hidden, spawn_rng(seed, "vae-enc"))
    dec = mlp(latent_dim, input_dim, hidden, spawn_rng(seed, "vae-dec"))
    return DenseVaeEncoder(enc, dec, latent_dim, noise_seed=seed)


@dataclass
class VaeLossParts:
    total: float
    reconstruction: float
    kl: float


def kl_standard_normal(mu: np.ndarray, log_var: np.ndarray) -> np.ndarray:
    """Per-sample KL against a standard normal; always >= 0."""
    return -0.5 * np.sum(1.0 + log_var - np.square(mu) - np.exp(log_var), axis=1)


def vae_loss_and_grads(vae: DenseVaeEncoder, batch: np.ndarray, beta: float,
                       noise: np.ndarray):
    """Reconstruction + beta*KL with explicit (frozen) reparameterization noise.

    Returns (parts, enc_grads, dec_grads); grads are batch means aligned with
    each net's param_arrays().
    """
    batch = np.asarray(batch, dtype=np.float64)
    n_features = batch.shape[1]
    enc_acts = forward(vae.enc_net, batch)
    mu = enc_acts.final[:, : vae.latent_dim]
    log_var = enc_acts.final[:, vae.latent_dim:]
    sigma = np.exp(0.5 * log_var)
    if noise.shape != mu.shape:
        raise ShapeError(f"noise shape {noise.shape} != latent shape {mu.shape}")
    z = mu + sigma * noise

    dec_acts = forward(vae.dec_net, z)
    recon = dec_acts.final
    per_sample_mse = np.mean(np.square(recon - batch), axis=1)
    per_sample_kl = kl_standard_normal(mu, log_var)
    parts = VaeLossParts(
        total=float(per_sample_mse.mean() + beta * per_sample_kl.mean()),
        reconstruction=float(per_sample_mse.mean()),
        kl=float(per_sample_kl.mean()),
    )

    dec_out_grad = 2.0 * (recon - batch) / n_features  # per-sample MSE grad
    dec_grads, dz = backward(vae.dec_net, dec_acts, dec_out_grad)
    d_mu = dz + beta * mu
    d_log_var = dz * noise * 0.5 * sigma + beta * 0.5 * (np.exp(log_var) - 1.0)
    enc_grads, _ = backward(vae.enc_net, enc_acts, np.hstack([d_mu, d_log_var]))
    return parts, enc_grads, dec_grads


def vae_train_step(vae: DenseVaeEncoder, batch: np.ndarray, beta: float,
                   enc_opt: AdamState, dec_opt: AdamState) -> VaeLossParts:
    """One optimization step; noise comes from the encoder's seeded stream."""
    batch = np.asarray(batch, dtype=np.float64)
    noise = vae.noise_rng.standard_normal((batch.shape[0], vae.latent_dim))
    parts, enc_grads, dec_grads = vae_loss_and_grads(vae, batch, beta, noise)
    if not np.isfinite(parts.total):
        raise FloatingPointError(f"non-finite loss {parts.total}: step rejected")
    adam_step(vae.enc_net.param_arrays(), enc_grads, enc_opt)
    adam_step(vae.dec_net.param_arrays(), dec_grads, dec_opt)
    return parts


def train_vae(observations: np.ndarray, latent_dim: int,
              cfg: VaeTrainConfig | None = None, seed: int = 0,
              hidden: tuple[int, ...] = (64, 64)) -> tuple[DenseVaeEncoder, list[VaeLossParts]]:
    """Train a dense VAE over an observation corpus with the ramped KL weight."""
    cfg = cfg or VaeTrainConfig()
    observations = np.asarray(observations, dtype=np.float64)
    vae = new_vae(observations.shape[1], latent_dim, hidden=hidden, seed=seed)
    enc_opt = AdamState.for_params(vae.enc_net.param_arrays(), cfg.learning_rate)
    dec_opt = AdamState.for_params(vae.dec_net.param_arrays(), cfg.learning_rate)
    order_rng = spawn_rng(seed, "vae-batches")
    history: list[VaeLossParts] = []
    for epoch in range(cfg.epochs):
        beta = beta_schedule(epoch, cfg.epochs, cfg)
        perm = order_rng.permutation(observations.shape[0])
        epoch_parts = None
        for start in range(0, len(perm), cfg.batch_size):
            chunk = observations[perm[start:start + cfg.batch_size]]
            if len(chunk) == 0:
                continue
            epoch_parts = vae_train_step(vae, chunk, beta, enc_opt, dec_opt)
        if epoch_parts is not None:
            history.append(epoch_parts)
    return vae, history


def encoder_to_arrays(enc: Encoder) -> tuple[dict[str, np.ndarray], dict]:
    """Flatten an encoder into the named-array container (arrays, meta)."""
    if isinstance(enc, IdentityEncoder):
        return {}, {"kind": "identity", "dim": enc.dim}
    if isinstance(enc, StandardizeEncoder):
        return {"mean": enc.mean, "std": enc.std}, {"kind": "standardize"}
    arrays: dict[str, np.ndarray] = {}
    for prefix, net in (("enc", enc.enc_net), ("dec", enc.dec_net)):
        for name, arr in zip(net.param_names(), net.param_arrays()):
            arrays[f"{prefix}.{name}"] = arr
    meta = {
        "kind": "vae",
        "latent_dim": enc.latent_dim,
        "enc_activations": [l.activation for l in enc.enc_net.layers],
        "dec_activations": [l.activation for l in enc.dec_net.layers],
    }
    return arrays, meta


def encoder_from_arrays(arrays: dict[str, np.ndarray], meta: dict) -> Encoder:
    kind = meta.get("kind")
    if kind == "identity":
        return IdentityEncoder(int(meta["dim"]))
    if kind == "standardize":
        return StandardizeEncoder(arrays["mean"], arrays["std"])
    if kind == "vae":
        from .nets import Layer

        nets = {}
        for prefix, acts in (("enc", meta["enc_activations"]),
                             ("dec", meta["dec_activations"])):
            layers = []
            for i, act in enumerate(acts):
                layers.append(Layer(
                    arrays[f"{prefix}.layer{i}.weights"],
                    arrays[f"{prefix}.layer{i}.biases"],
                    act,
                ))
            nets[prefix] = DenseNet(layers)
        return DenseVaeEncoder(nets["enc"], nets["dec"], int(meta["latent_dim"]))
    raise ValueError(f"unknown encoder kind {kind!r}")


def save_encoder(enc: Encoder, path: str) -> None:
    from .snapshots import save_arrays

    arrays, meta = encoder_to_arrays(enc)
    save_arrays(path, arrays, meta={"encoder": meta})


def load_encoder(path: str) -> Encoder:
    from .snapshots import load_arrays

    arrays, meta = load_arrays(path)
    return encoder_from_arrays(arrays, meta["encoder"])


def collect_random_observations(spec, n_traj: int = 50, seed: int = 0) -> np.ndarray:
    """Roll a uniform-random policy to build a VAE pre-training corpus."""
    from . import envs  # deferred: envs has no need to exist for pure-VAE use

    from .seeding import spawn_seed

    rows = []
    for i in range(n_traj):
        state, obs = envs.reset(spec, seed=spawn_seed(seed, "vae-corpus", i))
        rng = spawn_rng(seed, "vae-corpus-actions", i)
        rows.append(obs)
        while not state.done:
            res = envs.step(spec, state, int(rng.integers(spec.action_count)))
            rows.append(res.observation)
    return np.asarray(rows, dtype=np.float64)
