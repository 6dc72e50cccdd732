"""Bundled embedding + policy parameters and checkpoint round-tripping."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np

from .autodiff import Tape, Var
from .embedding import EmbedConfig, EmbedParams
from .graph import HinGraph, NodeType
from .metapath import MetaPath, builtin_metapaths
from .policy import PolicyParams
from .serialize import CheckpointError, load_tensors, save_tensors


class ModelParams:
    """Everything learnable, as one named-tensor dictionary."""

    def __init__(self, embed: EmbedParams, policy: PolicyParams):
        self.embed = embed
        self.policy = policy

    @property
    def tensors(self) -> dict[str, np.ndarray]:
        merged = dict(self.embed.tensors)
        merged.update(self.policy.tensors)
        return merged

    def leaves(self, tape: Tape) -> dict[str, Var]:
        return {name: tape.leaf(arr) for name, arr in self.tensors.items()}

    def copy(self) -> "ModelParams":
        return ModelParams(self.embed.copy(), self.policy.copy())

    # -- checkpoint IO ---------------------------------------------------

    def save(self, path: Union[str, Path]) -> None:
        cfg = self.embed.cfg
        meta = {
            "meta.metapaths": np.array([mp.id for mp in self.embed.metapaths], float),
            "meta.leaky_slope": np.array(cfg.leaky_slope),
            "meta.flags": np.array(
                [
                    float(cfg.average_path_scores),
                    float(cfg.freeze_instance_choice),
                    float(self.policy.tied),
                ]
            ),
        }
        save_tensors(path, {**self.tensors, **meta})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ModelParams":
        tensors = load_tensors(path)
        try:
            mp_ids = [int(i) for i in np.atleast_1d(tensors.pop("meta.metapaths"))]
            slope = float(tensors.pop("meta.leaky_slope"))
            avg_flag, freeze_flag, tied_flag = (
                bool(v) for v in np.atleast_1d(tensors.pop("meta.flags"))
            )
            by_id = {mp.id: mp for mp in builtin_metapaths()}
            metapaths = [by_id[i] for i in mp_ids]
            attn0 = tensors[f"attn.mp{mp_ids[0]}"]
            heads, two_f1 = attn0.shape
            dim = heads * (two_f1 // 2)
            feat_dim = tensors["feat.user"].shape[1]
            path_hidden = tensors["path.W"].shape[0]
        except (KeyError, IndexError, ValueError) as exc:
            raise CheckpointError(f"checkpoint {path} is missing tensors: {exc}") from exc

        cfg = EmbedConfig(
            dim=dim,
            heads=heads,
            feat_dim=feat_dim,
            path_hidden=path_hidden,
            leaky_slope=slope,
            average_path_scores=avg_flag,
            freeze_instance_choice=freeze_flag,
        )
        embed = object.__new__(EmbedParams)
        embed.cfg = cfg
        embed.metapaths = metapaths
        embed.tensors = {
            k: v for k, v in tensors.items() if not k.startswith("policy.")
        }

        if tied_flag:
            n_concepts = tensors["feat.concept"].shape[0]
        else:
            n_concepts = tensors["policy.scores"].shape[0]
        policy = object.__new__(PolicyParams)
        policy.n_concepts = n_concepts
        policy.dim = dim
        policy.tied = tied_flag
        policy.tensors = {k: v for k, v in tensors.items() if k.startswith("policy.")}
        return cls(embed, policy)


def init_model(
    graph: HinGraph,
    metapaths: Optional[list[MetaPath]] = None,
    embed_cfg: Optional[EmbedConfig] = None,
    rng: Optional[np.random.Generator] = None,
    use_bias: bool = True,
    tie_concept_features: bool = False,
) -> ModelParams:
    """Fresh parameters sized for `graph`."""
    if metapaths is None:
        metapaths = builtin_metapaths()
    if embed_cfg is None:
        embed_cfg = EmbedConfig()
    if rng is None:
        rng = np.random.default_rng()
    embed = EmbedParams(embed_cfg, graph.node_counts, metapaths, rng)
    policy = PolicyParams(
        graph.node_count(NodeType.CONCEPT),
        embed_cfg.dim,
        use_bias=use_bias,
        tie_concept_features=tie_concept_features,
        feat_dim=embed_cfg.feat_dim,
        rng=rng,
    )
    return ModelParams(embed, policy)
