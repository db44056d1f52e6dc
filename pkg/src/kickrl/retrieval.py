"""Latent similarity search over the demo store and the search-based expert.

Search is exact and exhaustive: at desk-scale store sizes (around 1.5k rows)
a full distance pass is microseconds and removes every source of approximate
nondeterminism.  Ties break toward the lowest row index via a stable sort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .demos import DemoStore
from .encoders import Encoder
from .errors import ShapeError

METRICS = ("l2", "cosine")


@dataclass
class LatentIndex:
    latents: np.ndarray  # (N, d)
    actions: np.ndarray  # (N,)
    rewards: np.ndarray  # (N,) diagnostics only
    provenance: list[tuple[int, int]]  # (trajectory, t) per row
    encoder_id: str
    env_id: str
    action_count: int
    _sq_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.latents = np.asarray(self.latents, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        n = self.latents.shape[0]
        if self.latents.ndim != 2:
            raise ShapeError("latents must be a 2-D matrix")
        if not (len(self.actions) == len(self.rewards) == len(self.provenance) == n):
            raise ShapeError("index arrays are not aligned")
        if n and not np.all(np.isfinite(self.latents)):
            raise ValueError("latents contain non-finite values")
        self._sq_norms = np.einsum("ij,ij->i", self.latents, self.latents)

    def __len__(self) -> int:
        return self.latents.shape[0]

    @property
    def dim(self) -> int:
        return self.latents.shape[1]


class QueryResult(NamedTuple):
    indices: np.ndarray  # ascending distance, ties by lowest row index
    distances: np.ndarray  # squared L2 (or cosine distance)


class SearchPolicyResult(NamedTuple):
    probs: np.ndarray  # empirical neighbor action frequencies, length K
    counts: np.ndarray  # raw neighbor action counts (the evidence vector)


def build_index(store: DemoStore, encoder: Encoder) -> LatentIndex:
    """Encode every stored transition, preserving store order."""
    rows, actions, rewards, provenance = [], [], [], []
    for ti, traj in enumerate(store.trajectories):
        for tr in traj.transitions:
            rows.append(tr.obs)
            actions.append(tr.action)
            rewards.append(tr.reward)
            provenance.append((ti, tr.t))
    if rows:
        obs = np.asarray(rows, dtype=np.float64)
        latents = encoder.encode_batch(obs)
    else:
        latents = np.zeros((0, getattr(encoder, "latent_dim", store.obs_dim)))
    return LatentIndex(
        latents=latents,
        actions=np.asarray(actions, dtype=np.int64),
        rewards=np.asarray(rewards, dtype=np.float64),
        provenance=provenance,
        encoder_id=encoder.encoder_id,
        env_id=store.env_id,
        action_count=store.action_count,
    )


def _distances_batch(index: LatentIndex, queries: np.ndarray, metric: str) -> np.ndarray:
    if metric == "l2":
        q_norms = np.einsum("ij,ij->i", queries, queries)
        return q_norms[:, None] - 2.0 * (queries @ index.latents.T) + index._sq_norms[None, :]
    if metric == "cosine":
        qn = np.linalg.norm(queries, axis=1, keepdims=True)
        ln = np.sqrt(index._sq_norms)
        denom = np.maximum(qn * ln[None, :], 1e-300)
        return 1.0 - (queries @ index.latents.T) / denom
    raise ValueError(f"unknown metric {metric!r}")


def knn_batch(index: LatentIndex, queries: np.ndarray, k: int,
              metric: str = "l2") -> tuple[np.ndarray, np.ndarray]:
    """Vectorized exact search: (B, k) neighbor indices and distances."""
    if len(index) == 0:
        raise RuntimeError("cannot query an empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != index.dim:
        raise ShapeError(f"query shape {queries.shape} incompatible with index dim {index.dim}")
    k = min(k, len(index))
    d2 = _distances_batch(index, queries, metric)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(d2, order, axis=1)


def knn(index: LatentIndex, query: np.ndarray, k: int, metric: str = "l2") -> QueryResult:
    """Exact k-nearest rows by squared L2 distance (cosine optional).

    Distances come from the direct form sum((row - query)^2) so they match a
    brute-force pass bit for bit.  The batched training path (knn_batch) uses
    the gemm expansion instead; on this package's integer-valued grid latents
    the two forms are exactly equal, and a regression test pins that.
    """
    if len(index) == 0:
        raise RuntimeError("cannot query an empty index")
    if k < 1:
        raise ValueError("k must be >= 1")
    query = np.asarray(query, dtype=np.float64)
    if query.ndim != 1 or query.shape[0] != index.dim:
        raise ShapeError(f"query shape {query.shape} incompatible with index dim {index.dim}")
    k = min(k, len(index))
    if metric == "l2":
        d2 = np.sum(np.square(index.latents - query), axis=1)
    elif metric == "cosine":
        d2 = _distances_batch(index, query[None, :], metric)[0]
    else:
        raise ValueError(f"unknown metric {metric!r}")
    order = np.argsort(d2, kind="stable")[:k]
    return QueryResult(indices=order, distances=d2[order])


def expert_estimate(index: LatentIndex, result: QueryResult,
                    q_target: Callable[[np.ndarray, int], float]) -> float:
    """Mean target-network value over retrieved (latent, stored action) pairs."""
    if len(result.indices) == 0:
        raise ValueError("empty query result")
    total = 0.0
    for i in result.indices:
        total += float(q_target(index.latents[i], int(index.actions[i])))
    return total / len(result.indices)


def search_policy(index: LatentIndex, query: np.ndarray, k: int,
                  metric: str = "l2") -> SearchPolicyResult:
    """Empirical action distribution of the k nearest stored transitions."""
    result = knn(index, query, k, metric=metric)
    counts = np.bincount(index.actions[result.indices], minlength=index.action_count)
    return SearchPolicyResult(
        probs=counts / counts.sum(),
        counts=counts,
    )


@dataclass
class DirichletBelief:
    alpha: np.ndarray

    def __post_init__(self) -> None:
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.alpha.ndim != 1:
            raise ShapeError("alpha must be a vector")
        if np.any(self.alpha <= 0.0):
            raise ValueError("all concentration parameters must be > 0")

    @property
    def action_count(self) -> int:
        return self.alpha.shape[0]

    def mean(self) -> np.ndarray:
        return self.alpha / self.alpha.sum()


def posterior_update(belief: DirichletBelief, counts: np.ndarray) -> DirichletBelief:
    """Add observed action counts to the concentration vector."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.shape != belief.alpha.shape:
        raise ShapeError(f"counts shape {counts.shape} != alpha shape {belief.alpha.shape}")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    return DirichletBelief(belief.alpha + counts)


def q_values_prior(q_row: np.ndarray) -> np.ndarray:
    """Synthesize an action prior from Q-values: softmax at temperature 1."""
    z = np.asarray(q_row, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def fused_action_distribution(prior_probs: np.ndarray, index: LatentIndex,
                              query: np.ndarray, k: int,
                              metric: str = "l2") -> np.ndarray:
    """Evaluation-time belief fusion: posterior mean after neighbor evidence.

    The prior probabilities become the concentration vector; the retrieved
    neighbors' action counts are the evidence added to it.
    """
    belief = DirichletBelief(np.asarray(prior_probs, dtype=np.float64))
    evidence = search_policy(index, query, k, metric=metric).counts
    return posterior_update(belief, evidence).mean()
