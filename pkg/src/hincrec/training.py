"""Replayed-click environment, cross-entropy pretraining, and REINFORCE.

An episode recommends concepts to one user against their held-out
clicks: a correct pick earns +1 and wires a new click edge (changing the
user's embedding), a wrong pick earns -1 and ends the episode with the
graph untouched. Policy-gradient updates maximize the discounted-return
objective plus an entropy bonus.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .autodiff import Tape, Var
from .graph import HinGraph, NodeRef, NodeType, Relation
from .metapath import MetaPath, PathCorpus
from .model import ModelParams
from .embedding import build_user_embedding
from .policy import ActionSet, build_action_distribution, select_action

logger = logging.getLogger("hincrec.training")

GroundTruth = Mapping[NodeRef, frozenset]


def step(
    graph: HinGraph,
    targets: GroundTruth,
    user: NodeRef,
    action: int,
) -> tuple[float, bool]:
    """Apply one recommendation: (+1, edge inserted) when `action` is a
    held-out click of `user`, else (-1, graph untouched)."""
    if action in targets.get(user, ()):
        inserted = graph.add_edge(
            user, NodeRef(NodeType.CONCEPT, action), Relation.CLICK
        )
        return 1.0, inserted
    return -1.0, False


def discounted_returns(rewards: list[float], gamma: float) -> list[float]:
    """Suffix-discounted returns R_t = r_t + gamma * R_{t+1}."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be within [0, 1]")
    out = [0.0] * len(rewards)
    acc = 0.0
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


@dataclass
class StepRecord:
    embedding: Var
    action: int
    log_prob: Var
    reward: float
    dist: Var
    n_available: int


@dataclass
class Episode:
    user: NodeRef
    steps: list[StepRecord]
    horizon: int
    gamma: float
    tape: Tape
    leaves: dict[str, Var]
    added_edges: list[tuple[NodeRef, NodeRef]]
    saved_bags: dict
    embed_count: int

    def total_reward(self) -> float:
        return sum(s.reward for s in self.steps)


@dataclass
class ObjectiveResult:
    value: float          # maximized objective: policy term + entropy bonus
    policy_term: float    # sum_t log pi(c_t | u_t) * R_t
    entropy_raw: float    # sum_t sum_c pi log pi (negative entropy, <= 0)
    grads: dict[str, np.ndarray]


def objective_and_gradients(
    episode: Episode,
    lam: float,
    baseline: Optional[float] = None,
) -> ObjectiveResult:
    """Build the episode objective on its tape and backpropagate.

    The objective is sum_t log pi(c_t|u_t) * R_t - lam * sum_t sum_c
    pi log pi, i.e. the entropy term is a bonus under maximization.
    Gradients come back per tensor name, pointing in the ascent direction.
    """
    if not episode.steps:
        raise ValueError("episode has no steps")
    tape = episode.tape
    returns = discounted_returns([s.reward for s in episode.steps], episode.gamma)
    pg = None
    for rec, ret in zip(episode.steps, returns):
        weight = ret - baseline if baseline is not None else ret
        term = tape.scale(rec.log_prob, weight)
        pg = term if pg is None else tape.vecadd(pg, term)
    negent = None
    for rec in episode.steps:
        e = tape.vsum(tape.plogp(rec.dist))
        negent = e if negent is None else tape.vecadd(negent, e)
    obj = tape.vecadd(pg, tape.scale(negent, -lam))
    grads = tape.gradients(obj, episode.leaves)
    return ObjectiveResult(
        value=float(obj.value),
        policy_term=float(pg.value),
        entropy_raw=float(negent.value),
        grads=grads,
    )


class Adam:
    """Standard Adam with bias correction; updates tensors in place."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(
        self,
        tensors: dict[str, np.ndarray],
        grads: dict[str, np.ndarray],
        maximize: bool = False,
    ) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, arr in tensors.items():
            g = grads.get(name)
            if g is None:
                continue
            if maximize:
                g = -g
            m = self._m.setdefault(name, np.zeros_like(arr))
            v = self._v.setdefault(name, np.zeros_like(arr))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            arr -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainingEnv:
    """Frozen base graph plus the sampled corpus and per-user targets."""

    graph: HinGraph
    corpus: PathCorpus
    targets: dict[NodeRef, frozenset]
    users: list[NodeRef]
    n_concepts: int
    walks_per_path: int = 10
    max_walk_len: Optional[int] = None


def make_training_env(
    graph: HinGraph,
    targets: dict[NodeRef, frozenset],
    metapaths: list[MetaPath],
    walks_per_path: int = 10,
    max_walk_len: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> TrainingEnv:
    users = sorted((u for u in targets if targets[u]), key=lambda r: r.index)
    if not users:
        raise ValueError("no users with held-out targets")
    corpus = PathCorpus.build(
        graph, users, metapaths, n=walks_per_path, max_len=max_walk_len, rng=rng
    )
    return TrainingEnv(
        graph=graph,
        corpus=corpus,
        targets=targets,
        users=users,
        n_concepts=graph.node_count(NodeType.CONCEPT),
        walks_per_path=walks_per_path,
        max_walk_len=max_walk_len,
    )


def play_episode(
    model: ModelParams,
    env: TrainingEnv,
    user: NodeRef,
    horizon: int,
    epsilon: float,
    gamma: float,
    rng: np.random.Generator,
) -> Episode:
    """Roll out one episode, mutating env.graph on correct steps.

    The user's embedding is recomputed (with freshly sampled walks) after
    every correct step and never after the episode-ending incorrect one.
    Call `rollback_episode` afterwards to restore the base graph.
    """
    tape = Tape()
    leaves = model.leaves(tape)
    saved_bags = env.corpus.snapshot_user(user)
    added: list[tuple[NodeRef, NodeRef]] = []
    u_var, _ = build_user_embedding(tape, leaves, model.embed, env.corpus, user, rng=rng)
    embed_count = 1
    actions = ActionSet.full(env.n_concepts)
    steps: list[StepRecord] = []
    t = 1
    while True:
        dist = build_action_distribution(tape, leaves, model.policy, u_var, actions)
        action, _ = select_action(dist.value, actions, epsilon, rng)
        log_prob = tape.log(tape.gather_row(dist, action))
        reward, mutated = step(env.graph, env.targets, user, action)
        steps.append(
            StepRecord(u_var, action, log_prob, reward, dist, actions.count())
        )
        actions = actions.shrink(action)
        if mutated:
            added.append((user, NodeRef(NodeType.CONCEPT, action)))
            env.corpus.resample_user(
                env.graph,
                user,
                n=env.walks_per_path,
                max_len=env.max_walk_len,
                rng=rng,
            )
            u_var, _ = build_user_embedding(
                tape, leaves, model.embed, env.corpus, user, rng=rng
            )
            embed_count += 1
        if reward < 0 or t >= horizon or actions.count() == 0:
            break
        t += 1
    return Episode(
        user=user,
        steps=steps,
        horizon=horizon,
        gamma=gamma,
        tape=tape,
        leaves=leaves,
        added_edges=added,
        saved_bags=saved_bags,
        embed_count=embed_count,
    )


def rollback_episode(env: TrainingEnv, episode: Episode) -> None:
    """Remove episode-added click edges and restore the user's path bags."""
    for a, b in episode.added_edges:
        env.graph.remove_edge(a, b, Relation.CLICK)
    env.corpus.restore_user(episode.user, episode.saved_bags)


@dataclass
class EpisodeStats:
    total_reward: float
    length: int
    embed_count: int
    objective: float
    seconds: float = 0.0


def pretrain(
    model: ModelParams,
    env: TrainingEnv,
    episodes: int = 10_000,
    lr: float = 1e-3,
    batch: int = 8,
    rng: Optional[np.random.Generator] = None,
) -> tuple[ModelParams, list[float]]:
    """Cross-entropy pretraining against held-out next clicks.

    One episode is one mini-batch of `batch` uniformly drawn
    (user, target-concept) pairs scored over the full unmasked action
    set. Returns the model and the per-episode mean loss trace.
    """
    if rng is None:
        rng = np.random.default_rng()
    instances = [
        (user, concept)
        for user in env.users
        for concept in sorted(env.targets[user])
    ]
    if not instances:
        raise ValueError("no (user, target) pairs to pretrain on")
    adam = Adam(lr)
    full_actions = ActionSet.full(env.n_concepts)
    losses: list[float] = []
    for ep in range(episodes):
        tape = Tape()
        leaves = model.leaves(tape)
        total = None
        for _ in range(batch):
            user, target = instances[int(rng.integers(len(instances)))]
            u_var, _ = build_user_embedding(
                tape, leaves, model.embed, env.corpus, user, rng=rng
            )
            dist = build_action_distribution(
                tape, leaves, model.policy, u_var, full_actions
            )
            nll = tape.scale(tape.log(tape.gather_row(dist, target)), -1.0)
            total = nll if total is None else tape.vecadd(total, nll)
        loss = tape.scale(total, 1.0 / batch)
        grads = tape.gradients(loss, leaves)
        adam.step(model.tensors, grads, maximize=False)
        losses.append(float(loss.value))
        if (ep + 1) % 500 == 0:
            recent = float(np.mean(losses[-500:]))
            logger.info("pretrain episode %d/%d: loss %.4f", ep + 1, episodes, recent)
    return model, losses


def train_rl(
    model: ModelParams,
    env: TrainingEnv,
    episodes: int,
    horizon: int = 20,
    gamma: float = 0.9,
    epsilon: float = 0.18,
    lam: float = 0.08,
    lr: float = 1e-4,
    rng: Optional[np.random.Generator] = None,
    use_baseline: bool = False,
) -> tuple[ModelParams, list[EpisodeStats]]:
    """REINFORCE fine-tuning with entropy regularization.

    Every episode picks a training user uniformly, replays clicks until
    the first miss or the horizon, applies one Adam ascent step on the
    entropy-regularized return objective, and rolls the graph back to its
    base state.
    """
    if rng is None:
        rng = np.random.default_rng()
    adam = Adam(lr)
    stats: list[EpisodeStats] = []
    baseline = 0.0
    for ep in range(episodes):
        t0 = time.perf_counter()
        user = env.users[int(rng.integers(len(env.users)))]
        episode = play_episode(model, env, user, horizon, epsilon, gamma, rng)
        result = objective_and_gradients(
            episode, lam, baseline=baseline if use_baseline else None
        )
        adam.step(model.tensors, result.grads, maximize=True)
        rollback_episode(env, episode)
        if use_baseline:
            first_return = discounted_returns(
                [s.reward for s in episode.steps], gamma
            )[0]
            baseline = 0.9 * baseline + 0.1 * first_return
        elapsed = time.perf_counter() - t0
        stat = EpisodeStats(
            total_reward=episode.total_reward(),
            length=len(episode.steps),
            embed_count=episode.embed_count,
            objective=result.value,
            seconds=elapsed,
        )
        stats.append(stat)
        logger.debug(
            "episode %d: user %s reward %.0f length %d",
            ep + 1,
            episode.user,
            stat.total_reward,
            stat.length,
        )
        if (ep + 1) % 200 == 0:
            recent = float(np.mean([s.total_reward for s in stats[-200:]]))
            logger.info(
                "rl episode %d/%d: mean reward %.2f", ep + 1, episodes, recent
            )
    return model, stats
