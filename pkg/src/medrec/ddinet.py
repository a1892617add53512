"""Drug relation embeddings learned by edge regression on the signed graph.

Two backbones: a GIN-style network whose neighborhoods cover every edge
regardless of sign, and a signed network keeping separate synergy and
antagonism channels that are concatenated into the final embedding.
Training regresses inner-product edge scores onto targets in {-1, 0, +1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Adam, Mlp, Tape, save_checkpoint
from .errors import ConfigError, DivergenceError


@dataclass
class DdiEmbeddings:
    z: np.ndarray  # |V| x d

    def export(self, path):
        save_checkpoint(path, {"z": self.z}, {"kind": "ddi_embeddings"})


def _mean_adjacency(n, neighbor_lists):
    """Row-stochastic matrix averaging over each node's neighbor list;
    zero row for isolated nodes."""
    m = np.zeros((n, n))
    for v, nbrs in enumerate(neighbor_lists):
        if nbrs:
            m[v, nbrs] = 1.0 / len(nbrs)
    return m


class GinBackbone:
    """Stack of GIN layers: z_v <- mlp((1+eps) z_v + mean of neighbor z)."""

    def __init__(self, n_drugs, hidden=64, n_layers=3, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_layers = n_layers
        self.eps = [np.zeros(()) for _ in range(n_layers)]
        self.mlps = []
        for t in range(n_layers):
            d_in = n_drugs if t == 0 else hidden
            self.mlps.append(
                Mlp(
                    [d_in, hidden, hidden],
                    rng,
                    activation="relu",
                    batch_norm=True,
                    final_activation=True,
                    name=f"gin{t}",
                )
            )

    def parameters(self):
        out = {}
        for t, mlp in enumerate(self.mlps):
            out.update(mlp.parameters())
            out[f"gin{t}.eps"] = self.eps[t]
        return out

    def calibrate_bn(self):
        for mlp in self.mlps:
            mlp.calibrate_bn()

    def forward(self, tape, agg, h0, training=False):
        h = tape._lift(h0)
        for t in range(self.n_layers):
            eps = tape.param(f"gin{t}.eps", self.eps[t])
            scaled = tape.mul(h, tape.add(eps, 1.0))
            pooled = tape.matmul(agg, h)
            h = self.mlps[t].forward(tape, tape.add(scaled, pooled), training=training)
        return h


class SgcnBackbone:
    """Signed layers with synergy (B) and antagonism (U) channels.

    Channel updates concatenate [synergy-neighbor mean of the same
    channel's base, antagonism-neighbor mean of the opposite channel,
    self] before the linear map; the final embedding is [h_B, h_U].
    """

    def __init__(self, n_drugs, hidden=64, n_layers=3, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        if hidden % 2 != 0:
            raise ConfigError("sgcn hidden width must be even")
        self.n_layers = n_layers
        self.path_width = hidden // 2
        self.mlps_b = []
        self.mlps_u = []
        for t in range(n_layers):
            d_in = 3 * (n_drugs if t == 0 else self.path_width)
            for tag, store in (("b", self.mlps_b), ("u", self.mlps_u)):
                store.append(
                    Mlp(
                        [d_in, self.path_width],
                        rng,
                        activation="relu",
                        batch_norm=True,
                        final_activation=True,
                        name=f"sgcn{t}{tag}",
                    )
                )

    def parameters(self):
        out = {}
        for mlp in self.mlps_b + self.mlps_u:
            out.update(mlp.parameters())
        return out

    def calibrate_bn(self):
        for mlp in self.mlps_b + self.mlps_u:
            mlp.calibrate_bn()

    def forward(self, tape, agg_syn, agg_ant, h0, training=False):
        hb = tape._lift(h0)
        hu = tape._lift(h0)
        for t in range(self.n_layers):
            cat_b = tape.concat_cols(
                [tape.matmul(agg_syn, hb), tape.matmul(agg_ant, hu), hb]
            )
            cat_u = tape.concat_cols(
                [tape.matmul(agg_syn, hu), tape.matmul(agg_ant, hb), hu]
            )
            hb = self.mlps_b[t].forward(tape, cat_b, training=training)
            hu = self.mlps_u[t].forward(tape, cat_u, training=training)
        return tape.concat_cols([hb, hu])


def gin_forward(graph, embeddings, backbone, training=False):
    """Run the GIN backbone; neighborhoods include edges of every sign."""
    adj = graph.adjacency_by_sign()
    nbrs = [
        sorted(adj[-1][v] + adj[0][v] + adj[1][v]) for v in range(graph.n_drugs)
    ]
    agg = _mean_adjacency(graph.n_drugs, nbrs)
    tape = Tape()
    out = backbone.forward(tape, agg, embeddings, training=training)
    return DdiEmbeddings(out.value)


def sgcn_forward(graph, embeddings, backbone, training=False):
    """Run the signed backbone; only +-1 edges feed the channel means."""
    adj = graph.adjacency_by_sign()
    agg_syn = _mean_adjacency(graph.n_drugs, adj[1])
    agg_ant = _mean_adjacency(graph.n_drugs, adj[-1])
    tape = Tape()
    out = backbone.forward(tape, agg_syn, agg_ant, embeddings, training=training)
    return DdiEmbeddings(out.value)


def edge_score(z_v, z_u):
    """Inner product of two drug representations."""
    z_v = np.asarray(z_v, dtype=np.float64)
    z_u = np.asarray(z_u, dtype=np.float64)
    if z_v.shape != z_u.shape:
        raise ConfigError("edge_score expects equal-length vectors")
    return float(z_v @ z_u)


@dataclass
class DdigcnConfig:
    backbone: str = "gin"  # "gin" or "sgcn"
    hidden: int = 64
    n_layers: int = 3
    lr: float = 0.001
    epochs: int = 400
    seed: int = 0


@dataclass
class DdigcnResult:
    embeddings: DdiEmbeddings
    loss_curve: list = field(default_factory=list)
    backbone: object = None


def _edge_arrays(graph):
    us = np.array([e.u for e in graph.edges], dtype=np.intp)
    vs = np.array([e.v for e in graph.edges], dtype=np.intp)
    targets = np.array([e.sign for e in graph.edges], dtype=np.float64)
    return us, vs, targets.reshape(-1, 1)


def train_ddigcn(graph, config=None, backbone=None):
    """Fit edge-sign regression and return the final drug embeddings.

    The graph should already contain the sampled zero edges; every edge
    present is a training target.  ``backbone`` overrides the freshly
    initialized one (useful for warm starts and tests).
    """
    config = config or DdigcnConfig()
    rng = np.random.default_rng(config.seed)
    n = graph.n_drugs
    one_hot = np.eye(n)
    adj = graph.adjacency_by_sign()

    if config.backbone == "gin":
        backbone = backbone or GinBackbone(n, config.hidden, config.n_layers, rng)
        nbrs = [sorted(adj[-1][v] + adj[0][v] + adj[1][v]) for v in range(n)]
        mats = (_mean_adjacency(n, nbrs),)
    elif config.backbone == "sgcn":
        backbone = backbone or SgcnBackbone(n, config.hidden, config.n_layers, rng)
        mats = (_mean_adjacency(n, adj[1]), _mean_adjacency(n, adj[-1]))
    else:
        raise ConfigError(f"unknown backbone {config.backbone!r}")

    us, vs, targets = _edge_arrays(graph)
    params = backbone.parameters()
    opt = Adam(params, lr=config.lr)
    losses = []
    for epoch in range(config.epochs):
        tape = Tape()
        z = backbone.forward(tape, *mats, one_hot, training=True)
        scores = tape.rowdot(tape.gather_rows(z, us), tape.gather_rows(z, vs))
        loss = tape.mse(scores, targets)
        if not np.isfinite(loss.value):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
        tape.backward(loss)
        opt.step(tape.param_grads())
        losses.append(float(loss.value))

    # refresh batch-norm running statistics so inference mode reproduces
    # the final training-mode forward exactly
    backbone.calibrate_bn()
    backbone.forward(Tape(), *mats, one_hot, training=True)
    final_tape = Tape()
    z = backbone.forward(final_tape, *mats, one_hot, training=False)
    return DdigcnResult(DdiEmbeddings(z.value), losses, backbone)


def ddigcn_loss_fn(graph, config):
    """(loss_fn, params) pair for gradient checking the full objective."""
    config = config or DdigcnConfig()
    rng = np.random.default_rng(config.seed)
    n = graph.n_drugs
    one_hot = np.eye(n)
    adj = graph.adjacency_by_sign()
    if config.backbone == "gin":
        backbone = GinBackbone(n, config.hidden, config.n_layers, rng)
        nbrs = [sorted(adj[-1][v] + adj[0][v] + adj[1][v]) for v in range(n)]
        mats = (_mean_adjacency(n, nbrs),)
    else:
        backbone = SgcnBackbone(n, config.hidden, config.n_layers, rng)
        mats = (_mean_adjacency(n, adj[1]), _mean_adjacency(n, adj[-1]))
    us, vs, targets = _edge_arrays(graph)

    def loss_fn(tape, leaves):
        # rebind the backbone's arrays onto this tape's leaves
        for name, leaf in leaves.items():
            tape._params[name] = leaf
        z = backbone.forward(tape, *mats, one_hot, training=True)
        scores = tape.rowdot(tape.gather_rows(z, us), tape.gather_rows(z, vs))
        return tape.mse(scores, targets)

    return loss_fn, backbone.parameters()
