"""Algorithm variants: clipped double Q-learning, its retrieval-kickstarted
form, teacher distillation, advantage-weighted actor-critic, hindsight
relabeling, and behavioral cloning.

Loss conventions (LossBreakdown.total):

* ``cdql`` / ``her``        total = td
* ``cdql-ae`` target-shaping  total = td on shaped targets; ``ae`` logs the
  batch-mean adversarial estimate as a diagnostic
* ``cdql-ae`` q-regression / kl-penalty  total = td + penalty (the penalty
  value already carries its scaling factor)
* ``qdagger``               total = td + lam * distill
* ``awac``                  total = td + actor
* ``bc``                    total = actor (cross-entropy)
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .demos import Transition
from .nets import AdamState, DenseNet, adam_step, backward, forward, mlp, soft_update
from .retrieval import LatentIndex, expert_estimate, knn, knn_batch
from .seeding import spawn_rng

AGENT_KINDS = ("cdql", "cdql-ae", "qdagger", "awac", "her", "bc")
AE_MODES = ("target-shaping", "q-regression", "kl-penalty")

REFERENCE_TOTAL_STEPS = 2_500_000  # step scale the published budgets assume
WEIGHT_CAP = float(np.exp(20.0))
PROB_FLOOR = 1e-12

KINDS_NEEDING_DEMOS = ("cdql-ae", "qdagger", "awac", "bc")


@dataclass
class Hyperparams:
    gamma: float = 0.99
    lam: float = 0.0
    tau: float = 1.0
    buffer_capacity: int = 250_000
    batch_size: int = 32
    eps_start: float = 1.0
    eps_end: float = 0.05
    exploration_fraction: float = 0.1
    target_update_period: int = 1000
    train_frequency: int = 4
    k_neighbors: int = 8
    ae_mode: str = "target-shaping"
    twin_critic: bool = False
    learning_rate: float = 1e-4
    hidden: tuple[int, ...] = (256, 256)
    teacher_steps: int = 125_000
    offline_steps: int = 0
    her_extra: int = 16
    distill_temperature: float = 1.0
    knn_metric: str = "l2"

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.lam < 0.0:
            raise ValueError("lam must be >= 0")
        if not (0.0 <= self.eps_start <= 1.0 and 0.0 <= self.eps_end <= 1.0):
            raise ValueError("epsilon endpoints must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.ae_mode not in AE_MODES:
            raise ValueError(f"unknown ae_mode {self.ae_mode!r}")
        for name in ("buffer_capacity", "batch_size", "target_update_period",
                     "train_frequency", "k_neighbors"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        self.hidden = tuple(int(h) for h in self.hidden)


def defaults_for(kind: str) -> Hyperparams:
    """Published hyperparameters with the per-kind scaling-term default."""
    if kind not in AGENT_KINDS:
        raise ValueError(f"unknown agent kind {kind!r}")
    hp = Hyperparams()
    if kind == "cdql-ae":
        hp.lam = 1.0
    elif kind == "qdagger":
        hp.lam = 1.0
        hp.offline_steps = 125_000
    elif kind == "awac":
        hp.lam = 0.3
        hp.offline_steps = 100_000
    return hp


def scale_step_budgets(hp: Hyperparams, total_steps: int) -> Hyperparams:
    """Co-scale step-denominated budgets with the training horizon.

    Buffer capacity and the teacher/offline budgets shrink by the same factor
    as total steps relative to the published horizon; the target-update period
    stays fixed at its published value.
    """
    factor = total_steps / REFERENCE_TOTAL_STEPS
    return replace(
        hp,
        buffer_capacity=max(hp.batch_size, int(round(hp.buffer_capacity * factor))),
        teacher_steps=max(1, int(round(hp.teacher_steps * factor))),
        offline_steps=(0 if hp.offline_steps == 0
                       else max(1, int(round(hp.offline_steps * factor)))),
    )


@dataclass
class LossBreakdown:
    td: float | None = None
    ae: float | None = None
    distill: float | None = None
    actor: float | None = None
    total: float = 0.0


# -- schedules and action selection ------------------------------------------


def eps_at(t: int, total_steps: int, hp: Hyperparams) -> float:
    """Linear decay over exploration_fraction * total_steps, then constant."""
    if t < 0:
        raise ValueError("t must be >= 0")
    window = hp.exploration_fraction * total_steps
    if window <= 0 or t >= window:
        return hp.eps_end
    return hp.eps_start + (hp.eps_end - hp.eps_start) * (t / window)


def greedy_action(qnet: DenseNet, latent: np.ndarray) -> int:
    """Argmax over Q-values; ties resolve to the lowest action index."""
    return int(np.argmax(forward(qnet, latent[None, :]).final[0]))


def act_eps_greedy(qnet: DenseNet, latent: np.ndarray, eps: float,
                   rng: np.random.Generator) -> int:
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if rng.random() < eps:
        return int(rng.integers(qnet.output_dim))
    return greedy_action(qnet, latent)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


# -- batches ------------------------------------------------------------------


@dataclass
class ArrayBatch:
    latents: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_latents: np.ndarray
    terminated: np.ndarray  # 0/1 floats; truncation bootstraps normally
    truncated: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)

    @classmethod
    def from_transitions(cls, transitions: list[Transition], encoder) -> "ArrayBatch":
        obs = np.stack([tr.obs for tr in transitions])
        next_obs = np.stack([tr.next_obs for tr in transitions])
        return cls(
            latents=encoder.encode_batch(obs),
            actions=np.asarray([tr.action for tr in transitions], dtype=np.int64),
            rewards=np.asarray([tr.reward for tr in transitions], dtype=np.float64),
            next_latents=encoder.encode_batch(next_obs),
            terminated=np.asarray([float(tr.terminated) for tr in transitions]),
            truncated=np.asarray([float(tr.truncated) for tr in transitions]),
        )


# -- temporal-difference core -------------------------------------------------


def _min_bootstrap(batch: ArrayBatch, q_online: DenseNet, q_target: DenseNet,
                   gamma: float) -> np.ndarray:
    """gamma * min(online, target) at the online argmax, masked on termination."""
    next_online = forward(q_online, batch.next_latents).final
    a_star = np.argmax(next_online, axis=1)
    next_target = forward(q_target, batch.next_latents).final
    rows = np.arange(len(batch))
    boot = np.minimum(next_online[rows, a_star], next_target[rows, a_star])
    return gamma * boot * (1.0 - batch.terminated)


def clipped_target(batch: ArrayBatch, q_online: DenseNet, q_target: DenseNet,
                   gamma: float) -> np.ndarray:
    """Bootstrap on the smaller of the online and target estimates."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    return batch.rewards + _min_bootstrap(batch, q_online, q_target, gamma)


def td_loss_and_grad_rows(q_values: np.ndarray, actions: np.ndarray,
                          targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Squared error on the taken actions; targets are treated as constants."""
    rows = np.arange(len(actions))
    resid = q_values[rows, actions] - targets
    grad_rows = np.zeros_like(q_values)
    grad_rows[rows, actions] = 2.0 * resid
    return float(np.mean(np.square(resid))), grad_rows


def td_step(batch: ArrayBatch, targets: np.ndarray, q_online: DenseNet,
            opt: AdamState) -> float:
    """One TD regression step toward fixed targets."""
    if len(targets) != len(batch):
        raise ValueError("targets not aligned with batch")
    acts = forward(q_online, batch.latents)
    loss, grad_rows = td_loss_and_grad_rows(acts.final, batch.actions, targets)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite TD loss {loss}: step rejected")
    grads, _ = backward(q_online, acts, grad_rows)
    adam_step(q_online.param_arrays(), grads, opt)
    return loss


# -- adversarial estimates ------------------------------------------------------


def adversarial_estimate(transition: Transition, index: LatentIndex, q_target_eval,
                         encoder, k: int) -> float:
    """Mean target-net value over the k most similar stored transitions,
    minus the reward this transition actually observed."""
    latent = encoder.encode(transition.obs)
    result = knn(index, latent, k)
    return expert_estimate(index, result, q_target_eval) - transition.reward


@dataclass
class AEApplication:
    """Outcome of applying the kickstarting penalty in one of three modes."""

    mode: str
    targets: np.ndarray | None = None  # target-shaping only
    penalty_loss: float = 0.0  # scaled auxiliary value (other modes)
    penalty_grad_rows: np.ndarray | None = None


def ae_apply(batch: ArrayBatch, z_values: np.ndarray, lam: float, mode: str,
             q_online: DenseNet, q_target: DenseNet, gamma: float,
             q_values: np.ndarray | None = None,
             search_probs: np.ndarray | None = None) -> AEApplication:
    """Turn per-transition estimates into a training-signal modification.

    target-shaping: the penalty enters as shaped reward r - lam*z inside the
    usual clipped bootstrap, so at lam=0 the targets are bit-for-bit the
    vanilla ones.  q-regression and kl-penalty return an auxiliary loss and
    per-sample gradient rows to add to the TD gradient; both need the current
    ``q_values`` forward of the online net (kl-penalty also needs the search
    policy's per-row action distributions).
    """
    if mode not in AE_MODES:
        raise ValueError(f"unknown ae mode {mode!r}")
    if len(z_values) != len(batch):
        raise ValueError("z values not aligned with batch")
    if mode == "target-shaping":
        shaped = (batch.rewards - lam * z_values) + _min_bootstrap(
            batch, q_online, q_target, gamma)
        return AEApplication(mode=mode, targets=shaped)
    if q_values is None:
        raise ValueError(f"{mode} needs the current online q_values")
    rows = np.arange(len(batch))
    if mode == "q-regression":
        estimates = z_values + batch.rewards  # recover the raw expert estimate
        resid = q_values[rows, batch.actions] - estimates
        grad_rows = np.zeros_like(q_values)
        grad_rows[rows, batch.actions] = lam * 2.0 * resid
        return AEApplication(
            mode=mode,
            penalty_loss=float(lam * np.mean(np.square(resid))),
            penalty_grad_rows=grad_rows,
        )
    # kl-penalty: lam * KL(softmax(q) || search policy), forward direction
    if search_probs is None:
        raise ValueError("kl-penalty needs the search policy distributions")
    p = softmax(q_values)
    log_p = np.log(np.maximum(p, 1e-300))
    log_q = np.log(np.maximum(search_probs, PROB_FLOOR))
    per_sample = np.sum(p * (log_p - log_q), axis=1)
    grad_rows = lam * p * ((log_p - log_q) - per_sample[:, None])
    return AEApplication(
        mode=mode,
        penalty_loss=float(lam * per_sample.mean()),
        penalty_grad_rows=grad_rows,
    )


# -- distillation ---------------------------------------------------------------


def distill_loss_and_grad(teacher_probs: np.ndarray, student_logits: np.ndarray,
                          temperature: float) -> tuple[float, np.ndarray]:
    if temperature <= 0.0:
        raise ValueError("temperature must be > 0")
    log_s = log_softmax(student_logits / temperature)
    s = np.exp(log_s)
    log_s_floored = np.log(np.maximum(s, PROB_FLOOR))
    p_safe = np.maximum(teacher_probs, 1e-300)
    per_sample = np.sum(teacher_probs * (np.log(p_safe) - log_s_floored), axis=1)
    grad_rows = (s - teacher_probs) / temperature
    return float(per_sample.mean()), grad_rows


def distill_loss(teacher_probs: np.ndarray, student_logits: np.ndarray,
                 temperature: float) -> float:
    """Batch-mean KL from the teacher distribution to the tempered student."""
    return distill_loss_and_grad(teacher_probs, student_logits, temperature)[0]


def qdagger_schedule(step: int, hp: Hyperparams) -> str:
    """Phase for a unified tick counter: collect, then distill, then online."""
    if step < 0:
        raise ValueError("step must be >= 0")
    if step < hp.teacher_steps:
        return "teacher-collect"
    if step < hp.teacher_steps + hp.offline_steps:
        return "offline-distill"
    return "online"


# -- advantage weighting ----------------------------------------------------------


def awac_weights(advantages: np.ndarray, lam: float,
                 cap: float = WEIGHT_CAP) -> np.ndarray:
    """exp(A/lam), capped; never returns a non-finite weight."""
    with np.errstate(over="ignore"):  # overflow saturates into the cap
        w = np.minimum(np.exp(np.asarray(advantages, dtype=np.float64) / lam), cap)
    return np.where(np.isnan(w), cap, w)


def awac_update(batch: ArrayBatch, actor: DenseNet, critic: DenseNet,
                critic_target: DenseNet, lam: float, actor_opt: AdamState,
                critic_opt: AdamState, gamma: float) -> LossBreakdown:
    """Critic TD step on clipped targets, then advantage-weighted actor step.

    Advantages are read from the pre-update critic and treated as constants
    in the actor gradient.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    rows = np.arange(len(batch))
    q_values = forward(critic, batch.latents).final
    actor_acts = forward(actor, batch.latents)
    log_probs = log_softmax(actor_acts.final)
    probs = np.exp(log_probs)
    value = np.sum(probs * q_values, axis=1)
    advantage = q_values[rows, batch.actions] - value
    weights = awac_weights(advantage, lam)

    y = clipped_target(batch, critic, critic_target, gamma)
    td = td_step(batch, y, critic, critic_opt)

    actor_loss = float(-np.mean(weights * log_probs[rows, batch.actions]))
    if not np.isfinite(actor_loss):
        raise FloatingPointError(f"non-finite actor loss {actor_loss}: step rejected")
    onehot = np.zeros_like(probs)
    onehot[rows, batch.actions] = 1.0
    grad_rows = weights[:, None] * (probs - onehot)
    grads, _ = backward(actor, actor_acts, grad_rows)
    adam_step(actor.param_arrays(), grads, actor_opt)
    return LossBreakdown(td=td, actor=actor_loss, total=td + actor_loss)


# -- hindsight relabeling -----------------------------------------------------------


def her_augment(batch: list[Transition], buffer, n_extra: int,
                rng: np.random.Generator) -> list[Transition]:
    """Append n_extra uniformly sampled transitions relabeled as successes.

    The originals pass through untouched; relabeled copies get reward 1 and
    the terminated flag (truncated cleared so the flags stay exclusive).
    Sampling is with replacement, so small buffers are fine.
    """
    out = list(batch)
    if n_extra == 0:
        return out
    if len(buffer) == 0:
        raise ValueError("buffer is empty")
    for _ in range(n_extra):
        src = buffer.transitions[int(rng.integers(len(buffer)))]
        out.append(replace(src, reward=1.0, terminated=True, truncated=False))
    return out


# -- behavioral cloning ---------------------------------------------------------------


def bc_update(batch: ArrayBatch, policy: DenseNet, opt: AdamState) -> float:
    """Cross-entropy between demo actions and the policy softmax; one step."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    rows = np.arange(len(batch))
    acts = forward(policy, batch.latents)
    log_p = log_softmax(acts.final)
    loss = float(-np.mean(log_p[rows, batch.actions]))
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite BC loss {loss}: step rejected")
    grad_rows = np.exp(log_p)
    grad_rows[rows, batch.actions] -= 1.0
    grads, _ = backward(policy, acts, grad_rows)
    adam_step(policy.param_arrays(), grads, opt)
    return loss


def discounted_return(rewards, gamma: float) -> float:
    total = 0.0
    weight = 1.0
    for r in rewards:
        total += weight * float(r)
        weight *= gamma
    return total


# -- learners -----------------------------------------------------------------------


class QLearner:
    """Value learner: one online net plus a target net (optionally twins)."""

    kind = "cdql"

    def __init__(self, latent_dim: int, n_actions: int, hp: Hyperparams, seed: int):
        self.hp = hp
        self.q = mlp(latent_dim, n_actions, hp.hidden, spawn_rng(seed, "init", "q1"))
        self.q_target = self.q.copy()
        self.opt = AdamState.for_params(self.q.param_arrays(), hp.learning_rate)
        self.q2 = self.q2_target = self.opt2 = None
        if hp.twin_critic:
            self.q2 = mlp(latent_dim, n_actions, hp.hidden, spawn_rng(seed, "init", "q2"))
            self.q2_target = self.q2.copy()
            self.opt2 = AdamState.for_params(self.q2.param_arrays(), hp.learning_rate)

    def act(self, latent: np.ndarray, eps: float, rng: np.random.Generator) -> int:
        return act_eps_greedy(self.q, latent, eps, rng)

    def greedy(self, latent: np.ndarray) -> int:
        return greedy_action(self.q, latent)

    def compute_targets(self, batch: ArrayBatch) -> np.ndarray:
        if self.q2_target is None:
            return clipped_target(batch, self.q, self.q_target, self.hp.gamma)
        next_online = forward(self.q, batch.next_latents).final
        a_star = np.argmax(next_online, axis=1)
        rows = np.arange(len(batch))
        b1 = forward(self.q_target, batch.next_latents).final[rows, a_star]
        b2 = forward(self.q2_target, batch.next_latents).final[rows, a_star]
        boot = self.hp.gamma * np.minimum(b1, b2) * (1.0 - batch.terminated)
        return batch.rewards + boot

    def _train_second_critic(self, batch: ArrayBatch, targets: np.ndarray) -> float | None:
        if self.q2 is None:
            return None
        return td_step(batch, targets, self.q2, self.opt2)

    def train_batch(self, batch: ArrayBatch) -> LossBreakdown:
        targets = self.compute_targets(batch)
        td = td_step(batch, targets, self.q, self.opt)
        td2 = self._train_second_critic(batch, targets)
        if td2 is not None:
            td = (td + td2) / 2.0
        return LossBreakdown(td=td, total=td)

    def update_targets(self) -> None:
        soft_update(self.q_target, self.q, self.hp.tau)
        if self.q2 is not None:
            soft_update(self.q2_target, self.q2, self.hp.tau)

    def param_snapshot(self) -> dict[str, np.ndarray]:
        return dict(zip((f"q.{n}" for n in self.q.param_names()), self.q.param_arrays()))


class AdversarialKickstartLearner(QLearner):
    """cdql plus the retrieval-based penalty.

    The target net is constant between target updates, so its values over
    every index row (at the stored actions) are cached and refreshed exactly
    when the targets move; a contract test pins this cache to the slow
    per-transition path.  With lam == 0 the penalty machinery is skipped
    entirely and training steps are bit-for-bit vanilla.
    """

    kind = "cdql-ae"

    def __init__(self, latent_dim: int, n_actions: int, hp: Hyperparams,
                 seed: int, index: LatentIndex):
        super().__init__(latent_dim, n_actions, hp, seed)
        if len(index) == 0:
            raise ValueError("cdql-ae needs a non-empty retrieval index")
        self.index = index
        self._demo_q: np.ndarray | None = None
        self._refresh_demo_cache()

    def _refresh_demo_cache(self) -> None:
        values = forward(self.q_target, self.index.latents).final
        self._demo_q = values[np.arange(len(self.index)), self.index.actions]

    def update_targets(self) -> None:
        super().update_targets()
        self._refresh_demo_cache()

    def _neighbors(self, batch: ArrayBatch) -> np.ndarray:
        idx, _ = knn_batch(self.index, batch.latents, self.hp.k_neighbors,
                           metric=self.hp.knn_metric)
        return idx

    def z_for_batch(self, batch: ArrayBatch, neighbor_idx: np.ndarray) -> np.ndarray:
        return self._demo_q[neighbor_idx].mean(axis=1) - batch.rewards

    def _search_probs(self, neighbor_idx: np.ndarray) -> np.ndarray:
        counts = np.zeros((neighbor_idx.shape[0], self.index.action_count))
        np.add.at(counts, (np.repeat(np.arange(neighbor_idx.shape[0]),
                                     neighbor_idx.shape[1]),
                           self.index.actions[neighbor_idx].ravel()), 1.0)
        return counts / neighbor_idx.shape[1]

    def train_batch(self, batch: ArrayBatch) -> LossBreakdown:
        if self.hp.lam == 0.0:
            return super().train_batch(batch)  # disabled penalty
        neighbor_idx = self._neighbors(batch)
        z = self.z_for_batch(batch, neighbor_idx)
        if self.hp.ae_mode == "target-shaping":
            app = ae_apply(batch, z, self.hp.lam, "target-shaping",
                           self.q, self.q_target, self.hp.gamma)
            td = td_step(batch, app.targets, self.q, self.opt)
            td2 = self._train_second_critic(batch, app.targets)
            if td2 is not None:
                td = (td + td2) / 2.0
            return LossBreakdown(td=td, ae=float(z.mean()), total=td)

        targets = self.compute_targets(batch)
        acts = forward(self.q, batch.latents)
        td_loss, td_rows = td_loss_and_grad_rows(acts.final, batch.actions, targets)
        kwargs = {"q_values": acts.final}
        if self.hp.ae_mode == "kl-penalty":
            kwargs["search_probs"] = self._search_probs(neighbor_idx)
        app = ae_apply(batch, z, self.hp.lam, self.hp.ae_mode,
                       self.q, self.q_target, self.hp.gamma, **kwargs)
        total = td_loss + app.penalty_loss
        if not np.isfinite(total):
            raise FloatingPointError(f"non-finite loss {total}: step rejected")
        grads, _ = backward(self.q, acts, td_rows + app.penalty_grad_rows)
        adam_step(self.q.param_arrays(), grads, self.opt)
        self._train_second_critic(batch, targets)
        return LossBreakdown(td=td_loss, ae=float(z.mean()), total=total)


class QDaggerLearner(QLearner):
    """Value learner with a distillation pull toward a cloned teacher."""

    kind = "qdagger"

    def __init__(self, latent_dim: int, n_actions: int, hp: Hyperparams,
                 seed: int, teacher: DenseNet):
        super().__init__(latent_dim, n_actions, hp, seed)
        self.teacher = teacher

    def teacher_probs(self, latents: np.ndarray) -> np.ndarray:
        return softmax(forward(self.teacher, latents).final)

    def teacher_action(self, latent: np.ndarray) -> int:
        return greedy_action(self.teacher, latent)

    def train_batch(self, batch: ArrayBatch) -> LossBreakdown:
        targets = self.compute_targets(batch)
        acts = forward(self.q, batch.latents)
        td_loss, td_rows = td_loss_and_grad_rows(acts.final, batch.actions, targets)
        p = self.teacher_probs(batch.latents)
        d_value, d_rows = distill_loss_and_grad(p, acts.final,
                                                self.hp.distill_temperature)
        total = td_loss + self.hp.lam * d_value
        if not np.isfinite(total):
            raise FloatingPointError(f"non-finite loss {total}: step rejected")
        grads, _ = backward(self.q, acts, td_rows + self.hp.lam * d_rows)
        adam_step(self.q.param_arrays(), grads, self.opt)
        self._train_second_critic(batch, targets)
        return LossBreakdown(td=td_loss, distill=d_value, total=total)


class AwacLearner:
    """Discrete actor-critic with advantage-weighted policy regression."""

    kind = "awac"

    def __init__(self, latent_dim: int, n_actions: int, hp: Hyperparams, seed: int):
        self.hp = hp
        self.actor = mlp(latent_dim, n_actions, hp.hidden, spawn_rng(seed, "init", "actor"))
        self.critic = mlp(latent_dim, n_actions, hp.hidden, spawn_rng(seed, "init", "critic"))
        self.critic_target = self.critic.copy()
        self.actor_opt = AdamState.for_params(self.actor.param_arrays(), hp.learning_rate)
        self.critic_opt = AdamState.for_params(self.critic.param_arrays(), hp.learning_rate)

    def act(self, latent: np.ndarray, eps: float, rng: np.random.Generator) -> int:
        # policy-head sampling; the eps argument is ignored by design
        probs = softmax(forward(self.actor, latent[None, :]).final)[0]
        return int(rng.choice(len(probs), p=probs))

    def greedy(self, latent: np.ndarray) -> int:
        return greedy_action(self.actor, latent)

    def train_batch(self, batch: ArrayBatch) -> LossBreakdown:
        return awac_update(batch, self.actor, self.critic, self.critic_target,
                           self.hp.lam, self.actor_opt, self.critic_opt,
                           self.hp.gamma)

    def update_targets(self) -> None:
        soft_update(self.critic_target, self.critic, self.hp.tau)

    def param_snapshot(self) -> dict[str, np.ndarray]:
        named = dict(zip((f"actor.{n}" for n in self.actor.param_names()),
                         self.actor.param_arrays()))
        named.update(zip((f"critic.{n}" for n in self.critic.param_names()),
                         self.critic.param_arrays()))
        return named


class BCLearner:
    """Supervised action prediction on demonstration batches."""

    kind = "bc"

    def __init__(self, latent_dim: int, n_actions: int, hp: Hyperparams, seed: int):
        self.hp = hp
        self.policy = mlp(latent_dim, n_actions, hp.hidden, spawn_rng(seed, "init", "policy"))
        self.opt = AdamState.for_params(self.policy.param_arrays(), hp.learning_rate)

    def act(self, latent: np.ndarray, eps: float, rng: np.random.Generator) -> int:
        return greedy_action(self.policy, latent)  # argmax; no exploration head

    def greedy(self, latent: np.ndarray) -> int:
        return greedy_action(self.policy, latent)

    def train_batch(self, batch: ArrayBatch) -> LossBreakdown:
        loss = bc_update(batch, self.policy, self.opt)
        return LossBreakdown(actor=loss, total=loss)

    def update_targets(self) -> None:  # no target net
        pass

    def param_snapshot(self) -> dict[str, np.ndarray]:
        return dict(zip((f"policy.{n}" for n in self.policy.param_names()),
                        self.policy.param_arrays()))
