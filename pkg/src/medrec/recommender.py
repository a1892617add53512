"""Bipartite patient-drug recommender.

Feature encoders map both sides to width 64, light graph convolution
propagates over observed training links without transforms or
nonlinearities, per-layer drug outputs are combined with weights
1/(t+2), drug relation embeddings are added in, and a treatment-
conditioned MLP decoder scores each pair.  Training mixes a factual and
a counterfactual cross-entropy, weighted by delta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Adam, Mlp, Tape, init_weight, load_checkpoint, save_checkpoint
from .errors import ConfigError, DivergenceError, ShapeError

HIDDEN = 64
N_PROP_LAYERS = 2
PROB_CLIP = 1e-12


def layer_weights(n_layers=N_PROP_LAYERS):
    """Combination weights 1/(t+2) for t = 0..n_layers."""
    return np.array([1.0 / (t + 2) for t in range(n_layers + 1)])


@dataclass
class TrainConfig:
    delta: float = 1.0
    epochs: int = 1000
    lr: float = 0.01
    seed: int = 0
    hidden: int = HIDDEN
    n_prop_layers: int = N_PROP_LAYERS
    use_ddi: bool = True

    def __post_init__(self):
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")


class EncoderParams:
    """Two fully connected layers with LeakyReLU, one per node type."""

    def __init__(self, d1, d2, hidden=HIDDEN, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.w1 = init_weight(rng, d1, hidden)
        self.b1 = np.zeros((1, hidden))
        self.w2 = init_weight(rng, d2, hidden)
        self.b2 = np.zeros((1, hidden))

    def parameters(self):
        return {"enc.w1": self.w1, "enc.b1": self.b1,
                "enc.w2": self.w2, "enc.b2": self.b2}

    def encode(self, tape, x, z):
        if x.shape[1] != self.w1.shape[0]:
            raise ShapeError(
                f"patient features have width {x.shape[1]}, expected {self.w1.shape[0]}"
            )
        if z.shape[1] != self.w2.shape[0]:
            raise ShapeError(
                f"drug features have width {z.shape[1]}, expected {self.w2.shape[0]}"
            )
        w1 = tape.param("enc.w1", self.w1)
        b1 = tape.param("enc.b1", self.b1)
        w2 = tape.param("enc.w2", self.w2)
        b2 = tape.param("enc.b2", self.b2)
        h_p = tape.leaky_relu(tape.add(tape.matmul(x, w1), b1))
        h_d = tape.leaky_relu(tape.add(tape.matmul(z, w2), b2))
        return h_p, h_d


def encode_features(x, z, params):
    """Plain-array wrapper over EncoderParams.encode."""
    tape = Tape()
    h_p, h_d = params.encode(tape, np.asarray(x, float), np.asarray(z, float))
    return h_p.value, h_d.value


def bipartite_norm_adjacency(y_train):
    """n x |V| matrix with entries 1/sqrt(|N_i| |N_v|) on observed links."""
    y = (np.asarray(y_train) > 0).astype(np.float64)
    deg_p = y.sum(axis=1)
    deg_d = y.sum(axis=0)
    with np.errstate(divide="ignore"):
        inv_p = np.where(deg_p > 0, 1.0 / np.sqrt(deg_p), 0.0)
        inv_d = np.where(deg_d > 0, 1.0 / np.sqrt(deg_d), 0.0)
    return y * inv_p[:, None] * inv_d[None, :]


def propagate_bipartite(adj_norm, h_p0, h_d0, n_layers=N_PROP_LAYERS, tape=None):
    """Weighted-sum propagation; returns per-layer patient and drug outputs."""
    own_tape = tape is None
    tape = tape or Tape()
    h_p = tape._lift(h_p0)
    h_d = tape._lift(h_d0)
    p_layers, d_layers = [h_p], [h_d]
    for _ in range(n_layers):
        nxt_p = tape.matmul(adj_norm, d_layers[-1])
        nxt_d = tape.matmul(adj_norm.T, p_layers[-1])
        p_layers.append(nxt_p)
        d_layers.append(nxt_d)
    if own_tape:
        return [p.value for p in p_layers], [d.value for d in d_layers]
    return p_layers, d_layers


def combine_layers(drug_layer_outputs, beta=None, tape=None):
    """Weighted sum of the per-layer drug outputs."""
    if beta is None:
        beta = layer_weights(len(drug_layer_outputs) - 1)
    if len(beta) != len(drug_layer_outputs):
        raise ConfigError("need one weight per layer output")
    if tape is None:
        return sum(b * h for b, h in zip(beta, drug_layer_outputs))
    acc = tape.mul(drug_layer_outputs[0], float(beta[0]))
    for b, h in zip(beta[1:], drug_layer_outputs[1:]):
        acc = tape.add(acc, tape.mul(h, float(b)))
    return acc


def fuse_ddi(h_drugs, ddi_embeddings, tape=None):
    """Add the drug relation embeddings elementwise."""
    z = np.asarray(ddi_embeddings, dtype=np.float64)
    if tape is None:
        h = np.asarray(h_drugs, dtype=np.float64)
        if h.shape != z.shape:
            raise ShapeError(f"fuse width mismatch: {h.shape} vs {z.shape}")
        return h + z
    if h_drugs.value.shape != z.shape:
        raise ShapeError(f"fuse width mismatch: {h_drugs.value.shape} vs {z.shape}")
    return tape.add(h_drugs, z)


def make_decoder(hidden=HIDDEN, rng=None):
    """MLP scoring [h_i (.) h'_v, t]; returns logits, sigmoid applied outside."""
    rng = rng if rng is not None else np.random.default_rng(0)
    return Mlp(
        [hidden + 1, hidden, 1],
        rng,
        activation="relu",
        batch_norm=False,
        final_activation=False,
        name="dec",
    )


def decode_logits(tape, decoder, h_pat_rows, h_drug_rows, t_col, training=False):
    feats = tape.concat_cols([tape.mul(h_pat_rows, h_drug_rows), t_col])
    return decoder.forward(tape, feats, training=training)


def decode_pair(h_i, h_v, t_scalar, decoder):
    """Probability for one pair; strictly inside (0, 1)."""
    feats = np.concatenate(
        [np.asarray(h_i, float) * np.asarray(h_v, float), [float(t_scalar)]]
    ).reshape(1, -1)
    logit = float(decoder.predict(feats).item())
    p = 1.0 / (1.0 + np.exp(-np.clip(logit, -500, 500)))
    return float(np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP))


@dataclass
class ModelBundle:
    """Everything needed to score unseen patients and rebuild treatments."""

    encoder: EncoderParams
    decoder: Mlp
    drug_repr: np.ndarray  # combined + fused drug representations (|V| x 64)
    ddi_embeddings: np.ndarray
    centroids: np.ndarray
    train_labels: np.ndarray
    y_train: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    config: TrainConfig
    loss_curve: list = field(default_factory=list)
    cf_loss_curve: list = field(default_factory=list)

    def parameters(self):
        out = dict(self.encoder.parameters())
        out.update(self.decoder.parameters())
        return out

    def save(self, path, meta=None):
        arrays = dict(self.parameters())
        arrays.update(
            drug_repr=self.drug_repr,
            ddi_embeddings=self.ddi_embeddings,
            centroids=self.centroids,
            train_labels=self.train_labels.astype(np.float64),
            y_train=self.y_train,
            feature_mean=self.feature_mean,
            feature_std=self.feature_std,
        )
        meta = dict(meta or {})
        meta.update(
            kind="model_bundle",
            delta=self.config.delta,
            epochs=self.config.epochs,
            lr=self.config.lr,
            seed=self.config.seed,
            hidden=self.config.hidden,
            n_prop_layers=self.config.n_prop_layers,
            use_ddi=self.config.use_ddi,
            d1=int(self.encoder.w1.shape[0]),
            d2=int(self.encoder.w2.shape[0]),
            beta=list(layer_weights(self.config.n_prop_layers)),
        )
        save_checkpoint(path, arrays, meta)

    @classmethod
    def load(cls, path):
        arrays, meta = load_checkpoint(path)
        config = TrainConfig(
            delta=meta["delta"],
            epochs=meta["epochs"],
            lr=meta["lr"],
            seed=meta["seed"],
            hidden=meta["hidden"],
            n_prop_layers=meta["n_prop_layers"],
            use_ddi=meta["use_ddi"],
        )
        enc = EncoderParams(meta["d1"], meta["d2"], meta["hidden"])
        enc.w1[:] = arrays["enc.w1"]
        enc.b1[:] = arrays["enc.b1"]
        enc.w2[:] = arrays["enc.w2"]
        enc.b2[:] = arrays["enc.b2"]
        dec = make_decoder(meta["hidden"])
        for name, arr in dec.parameters().items():
            arr[:] = arrays[name]
        return cls(
            encoder=enc,
            decoder=dec,
            drug_repr=arrays["drug_repr"],
            ddi_embeddings=arrays["ddi_embeddings"],
            centroids=arrays["centroids"],
            train_labels=arrays["train_labels"].astype(np.intp),
            y_train=arrays["y_train"],
            feature_mean=arrays["feature_mean"],
            feature_std=arrays["feature_std"],
            config=config,
        )


def _sample_negatives(rng, y_train, pos_pairs):
    """One uniformly drawn non-linked drug per positive pair."""
    full = np.flatnonzero(y_train.sum(axis=1) >= y_train.shape[1])
    if full.size:
        raise ConfigError(
            f"patients {full.tolist()} are prescribed every drug; "
            "no negative drug can be sampled for them"
        )
    neg = np.empty(len(pos_pairs), dtype=np.intp)
    n_drugs = y_train.shape[1]
    for idx, (i, _) in enumerate(pos_pairs):
        while True:
            u = int(rng.integers(n_drugs))
            if y_train[i, u] == 0:
                neg[idx] = u
                break
    return neg


def _forward_drug_repr(tape, encoder, x_train, z_drugs, adj_norm, ddi_z, config):
    h_p0, h_d0 = encoder.encode(tape, x_train, z_drugs)
    _, d_layers = propagate_bipartite(
        adj_norm, h_p0, h_d0, config.n_prop_layers, tape=tape
    )
    h_drugs = combine_layers(d_layers, tape=tape)
    if config.use_ddi:
        h_drugs = fuse_ddi(h_drugs, ddi_z, tape=tape)
    return h_p0, h_drugs


def train_mdgcn(cohort, treatment_state, ddi_embeddings, drug_features, config=None):
    """Train on the cohort's training split; returns a serializable bundle."""
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed)
    train = cohort.train_idx
    x_train = cohort.x[train]
    z_drugs = np.asarray(drug_features, dtype=np.float64)
    y_train = cohort.y[train]
    ddi_z = np.asarray(ddi_embeddings, dtype=np.float64)
    if config.use_ddi and ddi_z.shape != (z_drugs.shape[0], config.hidden):
        raise ShapeError(
            f"ddi embeddings shaped {ddi_z.shape}, expected "
            f"({z_drugs.shape[0]}, {config.hidden})"
        )

    encoder = EncoderParams(x_train.shape[1], z_drugs.shape[1], config.hidden, rng)
    decoder = make_decoder(config.hidden, rng)
    adj_norm = bipartite_norm_adjacency(y_train)

    pos_pairs = [(int(i), int(v)) for i, v in zip(*np.nonzero(y_train))]
    pos_i = np.array([p[0] for p in pos_pairs], dtype=np.intp)
    pos_v = np.array([p[1] for p in pos_pairs], dtype=np.intp)

    t_mat = treatment_state.t
    t_cf_mat = treatment_state.t_cf
    y_cf_mat = treatment_state.y_cf

    params = dict(encoder.parameters())
    params.update(decoder.parameters())
    opt = Adam(params, lr=config.lr)
    losses, cf_losses = [], []

    for epoch in range(config.epochs):
        neg_v = _sample_negatives(rng, y_train, pos_pairs)
        pair_i = np.concatenate([pos_i, pos_i])
        pair_v = np.concatenate([pos_v, neg_v])
        targets = np.concatenate(
            [np.ones(len(pos_pairs)), np.zeros(len(pos_pairs))]
        ).reshape(-1, 1)
        t_col = t_mat[pair_i, pair_v].reshape(-1, 1)
        t_cf_col = t_cf_mat[pair_i, pair_v].reshape(-1, 1)
        cf_targets = y_cf_mat[pair_i, pair_v].reshape(-1, 1)

        tape = Tape()
        h_p0, h_drugs = _forward_drug_repr(
            tape, encoder, x_train, z_drugs, adj_norm, ddi_z, config
        )
        h_i = tape.gather_rows(h_p0, pair_i)
        h_v = tape.gather_rows(h_drugs, pair_v)
        logits = decode_logits(tape, decoder, h_i, h_v, t_col)
        loss_fact = tape.bce_with_logits(logits, targets)
        if config.delta > 0:
            logits_cf = decode_logits(tape, decoder, h_i, h_v, t_cf_col)
            loss_cf = tape.bce_with_logits(logits_cf, cf_targets)
            loss = tape.add(loss_fact, tape.mul(loss_cf, config.delta))
        else:
            loss_cf = None
            loss = loss_fact
        if not np.isfinite(loss.value):
            raise DivergenceError(f"non-finite loss at epoch {epoch}")
        tape.backward(loss)
        opt.step(tape.param_grads())
        losses.append(float(loss_fact.value))
        cf_losses.append(float(loss_cf.value) if loss_cf is not None else 0.0)

    final_tape = Tape()
    _, h_drugs = _forward_drug_repr(
        final_tape, encoder, x_train, z_drugs, adj_norm, ddi_z, config
    )
    return ModelBundle(
        encoder=encoder,
        decoder=decoder,
        drug_repr=h_drugs.value,
        ddi_embeddings=ddi_z,
        centroids=treatment_state.clusters.centroids,
        train_labels=treatment_state.clusters.labels[train],
        y_train=y_train,
        feature_mean=cohort.feature_mean,
        feature_std=cohort.feature_std,
        config=config,
        loss_curve=losses,
        cf_loss_curve=cf_losses,
    )


def mdgcn_loss_fn(cohort, treatment_state, ddi_embeddings, drug_features, config):
    """(loss_fn, params) for gradient checking; negatives fixed by seed."""
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed)
    train = cohort.train_idx
    x_train = cohort.x[train]
    z_drugs = np.asarray(drug_features, dtype=np.float64)
    y_train = cohort.y[train]
    ddi_z = np.asarray(ddi_embeddings, dtype=np.float64)
    encoder = EncoderParams(x_train.shape[1], z_drugs.shape[1], config.hidden, rng)
    decoder = make_decoder(config.hidden, rng)
    adj_norm = bipartite_norm_adjacency(y_train)
    pos_pairs = [(int(i), int(v)) for i, v in zip(*np.nonzero(y_train))]
    pos_i = np.array([p[0] for p in pos_pairs], dtype=np.intp)
    pos_v = np.array([p[1] for p in pos_pairs], dtype=np.intp)
    neg_v = _sample_negatives(rng, y_train, pos_pairs)
    pair_i = np.concatenate([pos_i, pos_i])
    pair_v = np.concatenate([pos_v, neg_v])
    targets = np.concatenate(
        [np.ones(len(pos_pairs)), np.zeros(len(pos_pairs))]
    ).reshape(-1, 1)
    t_col = treatment_state.t[pair_i, pair_v].reshape(-1, 1)
    t_cf_col = treatment_state.t_cf[pair_i, pair_v].reshape(-1, 1)
    cf_targets = treatment_state.y_cf[pair_i, pair_v].reshape(-1, 1)

    def loss_fn(tape, leaves):
        for name, leaf in leaves.items():
            tape._params[name] = leaf
        h_p0, h_drugs = _forward_drug_repr(
            tape, encoder, x_train, z_drugs, adj_norm, ddi_z, config
        )
        h_i = tape.gather_rows(h_p0, pair_i)
        h_v = tape.gather_rows(h_drugs, pair_v)
        logits = decode_logits(tape, decoder, h_i, h_v, t_col)
        loss = tape.bce_with_logits(logits, targets)
        if config.delta > 0:
            logits_cf = decode_logits(tape, decoder, h_i, h_v, t_cf_col)
            loss = tape.add(
                loss, tape.mul(tape.bce_with_logits(logits_cf, cf_targets), config.delta)
            )
        return loss

    params = dict(encoder.parameters())
    params.update(decoder.parameters())
    return loss_fn, params


def score_patient(bundle, features_raw, ddi_graph):
    """Per-drug probabilities for one unseen patient (raw feature row)."""
    from .causal import ClusterAssignment, inference_treatments

    x_std = (np.asarray(features_raw, float).reshape(1, -1) - bundle.feature_mean) / (
        bundle.feature_std
    )
    clusters = ClusterAssignment(
        bundle.train_labels, bundle.centroids, bundle.centroids.shape[0]
    )
    t_row = inference_treatments(
        x_std, clusters, bundle.y_train, bundle.train_labels, ddi_graph
    )[0]
    tape = Tape()
    w1 = tape.param("enc.w1", bundle.encoder.w1)
    b1 = tape.param("enc.b1", bundle.encoder.b1)
    h_i = tape.leaky_relu(tape.add(tape.matmul(x_std, w1), b1)).value
    n_drugs = bundle.drug_repr.shape[0]
    feats = np.concatenate(
        [np.repeat(h_i, n_drugs, axis=0) * bundle.drug_repr, t_row.reshape(-1, 1)],
        axis=1,
    )
    logits = bundle.decoder.predict(feats).reshape(-1)
    probs = 1.0 / (1.0 + np.exp(-np.clip(logits, -500, 500)))
    return np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)


def suggest_top_k(patient_features, k, bundle, ddi_graph):
    """Ranked (drug_id, score) list; ties go to the lower drug id."""
    n_drugs = bundle.drug_repr.shape[0]
    if not 1 <= k <= n_drugs:
        raise ConfigError(f"k={k} outside 1..{n_drugs}")
    scores = score_patient(bundle, patient_features, ddi_graph)
    order = np.lexsort((np.arange(n_drugs), -scores))
    return [(int(v), float(scores[v])) for v in order[:k]]
