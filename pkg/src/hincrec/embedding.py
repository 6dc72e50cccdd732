"""Meta-path-guided user embeddings with hierarchical attention.

Per-type feature tables are projected into a shared space, neighbors
along each meta-path are combined by multi-head node-level attention,
and the per-path embeddings are fused by path-level attention into a
single user vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .autodiff import Tape, Var
from .graph import HinGraph, NodeRef, NodeType
from .metapath import MetaPath, PathCorpus, metapath_neighbors


@dataclass
class EmbedConfig:
    dim: int = 64              # final user embedding size
    heads: int = 8             # attention heads; dim must divide evenly
    feat_dim: int = 32         # per-type learnable feature width
    path_hidden: int = 128     # hidden size of the path-level scorer
    leaky_slope: float = 0.2
    average_path_scores: bool = False   # score every sampled instance, not one
    freeze_instance_choice: bool = False  # always use the first sampled instance

    def __post_init__(self) -> None:
        if self.dim % self.heads != 0:
            raise ValueError(f"heads ({self.heads}) must divide dim ({self.dim})")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads


@dataclass
class UserEmbedding:
    vector: np.ndarray          # (dim,)
    beta: np.ndarray            # per-meta-path attention weights, sums to 1


class EmbedParams:
    """All learnable tensors of the embedding stage.

    Keys: ``feat.<type>`` feature tables, ``proj.<type>`` projections,
    ``attn.mp<id>`` per-head node-attention vectors (rows are heads, each
    of width 2 * head_dim), and ``path.W`` / ``path.b`` / ``path.q`` for
    the path-level scorer.
    """

    def __init__(
        self,
        cfg: EmbedConfig,
        node_counts: dict[NodeType, int],
        metapaths: Iterable[MetaPath],
        rng: np.random.Generator,
    ):
        self.cfg = cfg
        self.metapaths = list(metapaths)
        f1 = cfg.head_dim
        t: dict[str, np.ndarray] = {}
        for nt in NodeType:
            t[f"feat.{nt.value}"] = rng.normal(0.0, 0.1, (node_counts[nt], cfg.feat_dim))
        for nt in NodeType:
            t[f"proj.{nt.value}"] = rng.normal(
                0.0, 1.0 / np.sqrt(cfg.feat_dim), (f1, cfg.feat_dim)
            )
        for mp in self.metapaths:
            t[f"attn.mp{mp.id}"] = rng.normal(
                0.0, 1.0 / np.sqrt(2 * f1), (cfg.heads, 2 * f1)
            )
        t["path.W"] = rng.normal(0.0, 1.0 / np.sqrt(cfg.dim), (cfg.path_hidden, cfg.dim))
        t["path.b"] = np.zeros(cfg.path_hidden)
        t["path.q"] = rng.normal(0.0, 1.0 / np.sqrt(cfg.path_hidden), (cfg.path_hidden,))
        self.tensors = t

    def copy(self) -> "EmbedParams":
        clone = object.__new__(EmbedParams)
        clone.cfg = self.cfg
        clone.metapaths = list(self.metapaths)
        clone.tensors = {k: v.copy() for k, v in self.tensors.items()}
        return clone


class _ProjectionCache:
    """Projects each node at most once per forward pass."""

    def __init__(self, tape: Tape, leaves: dict[str, Var]):
        self.tape = tape
        self.leaves = leaves
        self._cache: dict[NodeRef, Var] = {}

    def __call__(self, node: NodeRef) -> Var:
        var = self._cache.get(node)
        if var is None:
            h = self.tape.gather_row(self.leaves[f"feat.{node.type.value}"], node.index)
            var = self.tape.matvec(self.leaves[f"proj.{node.type.value}"], h)
            self._cache[node] = var
        return var


def _attention_logits(
    tape: Tape,
    attn_row: Var,
    h_self: Var,
    h_nbrs: Var,
    f1: int,
    slope: float,
) -> Var:
    # a . [h_i || h_j] split into the self and neighbor halves of a.
    a_self = tape.slice1d(attn_row, 0, f1)
    a_nbr = tape.slice1d(attn_row, f1, 2 * f1)
    s_self = tape.dot(a_self, h_self)
    s_nbrs = tape.matvec(h_nbrs, a_nbr)
    return tape.leaky_relu(tape.add_scalar(s_nbrs, s_self), slope)


def build_path_embedding(
    tape: Tape,
    leaves: dict[str, Var],
    params: EmbedParams,
    user: NodeRef,
    neighborhood: list[NodeRef],
    mp: MetaPath,
    project: Optional[_ProjectionCache] = None,
) -> Var:
    """Multi-head attention aggregation over one meta-path neighborhood."""
    cfg = params.cfg
    if project is None:
        project = _ProjectionCache(tape, leaves)
    h_self = project(user)
    h_nbrs = tape.stack_rows([project(j) for j in neighborhood])
    attn = leaves[f"attn.mp{mp.id}"]
    heads = []
    for head in range(cfg.heads):
        row = tape.gather_row(attn, head)
        logits = _attention_logits(tape, row, h_self, h_nbrs, cfg.head_dim, cfg.leaky_slope)
        alpha = tape.softmax(logits)
        agg = tape.matvec_t(h_nbrs, alpha)
        heads.append(tape.leaky_relu(agg, cfg.leaky_slope))
    return heads[0] if len(heads) == 1 else tape.concat(heads)


def _path_score(tape: Tape, leaves: dict[str, Var], emb: Var) -> Var:
    hidden = tape.tanh(tape.vecadd(tape.matvec(leaves["path.W"], emb), leaves["path.b"]))
    return tape.dot(leaves["path.q"], hidden)


def build_user_embedding(
    tape: Tape,
    leaves: dict[str, Var],
    params: EmbedParams,
    corpus: PathCorpus,
    user: NodeRef,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Var, Var]:
    """Returns (user vector Var, per-meta-path beta Var).

    One sampled instance per meta-path defines the neighborhood that is
    aggregated and fused. With ``average_path_scores`` the path-level
    score is instead averaged over an aggregation of every instance in
    the bag, while the fused embedding still uses the drawn instance.
    """
    cfg = params.cfg
    project = _ProjectionCache(tape, leaves)
    per_path: list[Var] = []
    scores: list[Var] = []
    for mp in params.metapaths:
        nbrs = metapath_neighbors(
            corpus, user, mp, rng=rng, freeze=cfg.freeze_instance_choice
        )
        emb = build_path_embedding(tape, leaves, params, user, nbrs, mp, project)
        per_path.append(emb)
        if cfg.average_path_scores:
            bag = corpus.bag(user, mp.id)
            insts = bag if bag else [[user]]
            inst_scores = []
            for inst in insts:
                inst_nbrs = _distinct_with_user(user, inst)
                inst_emb = build_path_embedding(
                    tape, leaves, params, user, inst_nbrs, mp, project
                )
                inst_scores.append(_path_score(tape, leaves, inst_emb))
            total = inst_scores[0]
            for s in inst_scores[1:]:
                total = tape.vecadd(total, s)
            scores.append(tape.scale(total, 1.0 / len(inst_scores)))
        else:
            scores.append(_path_score(tape, leaves, emb))
    beta = tape.softmax(tape.concat(scores))
    fused = None
    for k, emb in enumerate(per_path):
        term = tape.scale(emb, tape.gather_row(beta, k))
        fused = term if fused is None else tape.vecadd(fused, term)
    return fused, beta


def _distinct_with_user(user: NodeRef, inst: list[NodeRef]) -> list[NodeRef]:
    out = [user]
    seen = {user}
    for ref in inst:
        if ref not in seen:
            seen.add(ref)
            out.append(ref)
    return out


# -- numpy-facing wrappers over the tape builders -------------------------


def _const_leaves(tape: Tape, params: EmbedParams) -> dict[str, Var]:
    return {k: tape.leaf(v) for k, v in params.tensors.items()}


def project(params: EmbedParams, node: NodeRef) -> np.ndarray:
    """Projected feature of one node: M_type @ h_node."""
    tape = Tape(record=False)
    return _ProjectionCache(tape, _const_leaves(tape, params))(node).value


def node_attention(
    params: EmbedParams,
    node: NodeRef,
    neighborhood: list[NodeRef],
    mp: MetaPath,
    head: int,
) -> np.ndarray:
    """Attention weights of `node` over `neighborhood` for one head."""
    if not neighborhood:
        raise ValueError("neighborhood must be nonempty")
    tape = Tape(record=False)
    leaves = _const_leaves(tape, params)
    proj = _ProjectionCache(tape, leaves)
    h_self = proj(node)
    h_nbrs = tape.stack_rows([proj(j) for j in neighborhood])
    row = tape.gather_row(leaves[f"attn.mp{mp.id}"], head)
    logits = _attention_logits(
        tape, row, h_self, h_nbrs, params.cfg.head_dim, params.cfg.leaky_slope
    )
    return tape.softmax(logits).value


def node_aggregate(
    params: EmbedParams,
    node: NodeRef,
    mp: MetaPath,
    corpus: PathCorpus,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Concatenated multi-head aggregation along one meta-path."""
    tape = Tape(record=False)
    leaves = _const_leaves(tape, params)
    nbrs = metapath_neighbors(
        corpus, node, mp, rng=rng, freeze=params.cfg.freeze_instance_choice
    )
    return build_path_embedding(tape, leaves, params, node, nbrs, mp).value


def path_attention(
    params: EmbedParams, embeddings: list[np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    """Path-level weights over per-meta-path embeddings: (beta, raw scores)."""
    tape = Tape(record=False)
    leaves = _const_leaves(tape, params)
    scores = [
        _path_score(tape, leaves, tape.leaf(emb)) for emb in embeddings
    ]
    w = tape.concat(scores)
    return tape.softmax(w).value, w.value


def user_embedding(
    params: EmbedParams,
    graph: HinGraph,
    corpus: PathCorpus,
    user: NodeRef,
    rng: Optional[np.random.Generator] = None,
) -> UserEmbedding:
    """Fused user embedding over all configured meta-paths."""
    graph._check_node(user)
    tape = Tape(record=False)
    leaves = _const_leaves(tape, params)
    vec, beta = build_user_embedding(tape, leaves, params, corpus, user, rng=rng)
    return UserEmbedding(vector=vec.value, beta=beta.value)
