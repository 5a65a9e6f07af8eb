"""Hierarchical document encoder: two bidirectional LSTM levels with
additive attention pooling and inverted dropout on each level's output."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateInputError

INIT_SCALE = 0.1  # uniform [-0.1, 0.1] weight init


@dataclass
class RecurrentLayerParams:
    input_dim: int
    hidden_dim: int
    fw_W: np.ndarray  # [D, 4H]
    fw_U: np.ndarray  # [H, 4H]
    fw_b: np.ndarray  # [4H]
    bw_W: np.ndarray
    bw_U: np.ndarray
    bw_b: np.ndarray

    @classmethod
    def init(cls, rng, input_dim, hidden_dim):
        def weights(shape):
            return rng.uniform(-INIT_SCALE, INIT_SCALE, shape)

        def bias():
            b = np.zeros(4 * hidden_dim)
            b[hidden_dim:2 * hidden_dim] = 1.0  # forget-gate bias
            return b

        return cls(
            input_dim, hidden_dim,
            weights((input_dim, 4 * hidden_dim)), weights((hidden_dim, 4 * hidden_dim)), bias(),
            weights((input_dim, 4 * hidden_dim)), weights((hidden_dim, 4 * hidden_dim)), bias(),
        )

    def named_arrays(self, prefix):
        return {
            f"{prefix}.fw_W": self.fw_W, f"{prefix}.fw_U": self.fw_U, f"{prefix}.fw_b": self.fw_b,
            f"{prefix}.bw_W": self.bw_W, f"{prefix}.bw_U": self.bw_U, f"{prefix}.bw_b": self.bw_b,
        }


@dataclass
class AttentionParams:
    proj_W: np.ndarray   # [in_dim, att_dim]
    proj_b: np.ndarray   # [att_dim]
    context: np.ndarray  # [att_dim]

    @classmethod
    def init(cls, rng, in_dim, att_dim):
        return cls(
            rng.uniform(-INIT_SCALE, INIT_SCALE, (in_dim, att_dim)),
            np.zeros(att_dim),
            rng.uniform(-INIT_SCALE, INIT_SCALE, att_dim),
        )

    def named_arrays(self, prefix):
        return {
            f"{prefix}.proj_W": self.proj_W,
            f"{prefix}.proj_b": self.proj_b,
            f"{prefix}.context": self.context,
        }


@dataclass
class EncoderParams:
    word_rnn: RecurrentLayerParams
    word_att: AttentionParams
    sent_rnn: RecurrentLayerParams
    sent_att: AttentionParams
    dropout_rate: float

    @classmethod
    def init(cls, rng, embed_dim, word_hidden, sent_hidden, att_dim, dropout_rate):
        word_rnn = RecurrentLayerParams.init(rng, embed_dim, word_hidden)
        word_att = AttentionParams.init(rng, 2 * word_hidden, att_dim)
        sent_rnn = RecurrentLayerParams.init(rng, 2 * word_hidden, sent_hidden)
        sent_att = AttentionParams.init(rng, 2 * sent_hidden, att_dim)
        return cls(word_rnn, word_att, sent_rnn, sent_att, dropout_rate)

    @property
    def output_dim(self):
        return 2 * self.sent_rnn.hidden_dim

    def named_parameters(self):
        out = {}
        out.update(self.word_rnn.named_arrays("word_rnn"))
        out.update(self.word_att.named_arrays("word_att"))
        out.update(self.sent_rnn.named_arrays("sent_rnn"))
        out.update(self.sent_att.named_arrays("sent_att"))
        return out


@dataclass(frozen=True)
class DocumentVector:
    values: np.ndarray


def birnn_forward(inputs, mask, params, with_cache=False):
    """Bidirectional LSTM: per-position concat of forward and backward states."""
    mask = np.asarray(mask, dtype=bool)
    if len(inputs) != len(mask):
        raise ValueError("inputs and mask lengths differ")
    if not mask.any():
        raise DegenerateInputError("all positions masked in birnn_forward")
    fw = kernels.lstm_forward(inputs, mask, params.fw_W, params.fw_U, params.fw_b)
    rev_in = np.ascontiguousarray(inputs[::-1])
    rev_mask = mask[::-1]
    bw = kernels.lstm_forward(rev_in, rev_mask, params.bw_W, params.bw_U, params.bw_b)
    out = np.concatenate([fw[0], bw[0][::-1]], axis=1)
    if with_cache:
        cache = {"inputs": inputs, "mask": mask, "fw": fw, "bw": bw,
                 "rev_in": rev_in, "rev_mask": rev_mask}
        return out, cache
    return out


def birnn_backward(cache, dout, params):
    """Returns (dinputs, grads dict keyed fw_W/fw_U/fw_b/bw_W/bw_U/bw_b)."""
    H = params.hidden_dim
    dfw = np.ascontiguousarray(dout[:, :H])
    dbw = np.ascontiguousarray(dout[::-1, H:])
    fw_h, fw_gates, fw_hs, fw_cs = cache["fw"]
    bw_h, bw_gates, bw_hs, bw_cs = cache["bw"]
    dx_f, dW_f, dU_f, db_f = kernels.lstm_backward(
        cache["inputs"], cache["mask"], params.fw_W, params.fw_U,
        fw_gates, fw_hs, fw_cs, dfw)
    dx_b, dW_b, dU_b, db_b = kernels.lstm_backward(
        cache["rev_in"], cache["rev_mask"], params.bw_W, params.bw_U,
        bw_gates, bw_hs, bw_cs, dbw)
    dinputs = dx_f + dx_b[::-1]
    grads = {"fw_W": dW_f, "fw_U": dU_f, "fw_b": db_f,
             "bw_W": dW_b, "bw_U": dU_b, "bw_b": db_b}
    return dinputs, grads


def attention_pool(states, mask, params, with_cache=False):
    """Masked additive attention: softmax(context . tanh(W s + b)) pooling."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise DegenerateInputError("all positions masked in attention_pool")
    proj = np.tanh(states @ params.proj_W + params.proj_b)  # [T, A]
    scores = proj @ params.context                          # [T]
    shifted = scores - scores[mask].max()
    expd = np.where(mask, np.exp(shifted), 0.0)
    weights = expd / expd.sum()
    pooled = weights @ states
    if with_cache:
        cache = {"states": states, "mask": mask, "proj": proj, "weights": weights}
        return pooled, weights, cache
    return pooled, weights


def attention_backward(cache, dpooled, params):
    """Returns (dstates, grads dict keyed proj_W/proj_b/context)."""
    states, mask = cache["states"], cache["mask"]
    proj, weights = cache["proj"], cache["weights"]
    dweights = states @ dpooled                                   # [T]
    dscores = weights * (dweights - weights @ dweights)           # softmax jacobian
    dscores = np.where(mask, dscores, 0.0)
    dcontext = proj.T @ dscores
    dproj = np.outer(dscores, params.context)
    dpre = dproj * (1.0 - proj * proj)
    dstates = np.outer(weights, dpooled) + dpre @ params.proj_W.T
    grads = {
        "proj_W": states.T @ dpre,
        "proj_b": dpre.sum(axis=0),
        "context": dcontext,
    }
    return dstates, grads


def _dropout_forward(vec, rate, rng):
    keep = rng.random(vec.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    return vec * keep * scale, (keep, scale)


def encode_document(enc_input, params, mode="eval", rng=None, with_cache=False):
    """Encode an EncoderInput into a DocumentVector.

    Train mode applies inverted dropout to each level's pooled output and
    requires an rng; eval mode is deterministic and dropout-free.
    """
    train = mode == "train"
    if train and params.dropout_rate > 0 and rng is None:
        raise ValueError("train mode with dropout requires an rng")
    smask = enc_input.sentence_mask
    if not smask.any():
        raise DegenerateInputError("document has no retained sentences")
    n_sent = int(smask.sum())
    sent_caches = []
    sent_vecs = np.zeros((n_sent, 2 * params.word_rnn.hidden_dim))
    retained = np.flatnonzero(smask)
    for row, s in enumerate(retained):
        h, rnn_c = birnn_forward(enc_input.tensor[s], enc_input.token_mask[s],
                                 params.word_rnn, with_cache=True)
        sv, _, att_c = attention_pool(h, enc_input.token_mask[s], params.word_att,
                                      with_cache=True)
        drop = None
        if train and params.dropout_rate > 0:
            sv, drop = _dropout_forward(sv, params.dropout_rate, rng)
        sent_vecs[row] = sv
        sent_caches.append({"rnn": rnn_c, "att": att_c, "drop": drop})
    sent_level_mask = np.ones(n_sent, dtype=bool)
    hs, sent_rnn_c = birnn_forward(sent_vecs, sent_level_mask, params.sent_rnn,
                                   with_cache=True)
    dv, _, sent_att_c = attention_pool(hs, sent_level_mask, params.sent_att,
                                       with_cache=True)
    doc_drop = None
    if train and params.dropout_rate > 0:
        dv, doc_drop = _dropout_forward(dv, params.dropout_rate, rng)
    if not np.all(np.isfinite(dv)):
        raise DegenerateInputError("non-finite document vector")
    if with_cache:
        cache = {"sent_caches": sent_caches, "sent_rnn": sent_rnn_c,
                 "sent_att": sent_att_c, "doc_drop": doc_drop}
        return DocumentVector(dv), cache
    return DocumentVector(dv)


def encode_backward(cache, ddoc, params):
    """Backprop encode_document; returns grads keyed like named_parameters()."""
    grads = {name: np.zeros_like(arr) for name, arr in params.named_parameters().items()}
    dv = ddoc
    if cache["doc_drop"] is not None:
        keep, scale = cache["doc_drop"]
        dv = dv * keep * scale
    dhs, att_g = attention_backward(cache["sent_att"], dv, params.sent_att)
    for key, val in att_g.items():
        grads[f"sent_att.{key}"] += val
    dsent_vecs, rnn_g = birnn_backward(cache["sent_rnn"], dhs, params.sent_rnn)
    for key, val in rnn_g.items():
        grads[f"sent_rnn.{key}"] += val
    for row, sc in enumerate(cache["sent_caches"]):
        dsv = dsent_vecs[row]
        if sc["drop"] is not None:
            keep, scale = sc["drop"]
            dsv = dsv * keep * scale
        dh, att_g = attention_backward(sc["att"], dsv, params.word_att)
        for key, val in att_g.items():
            grads[f"word_att.{key}"] += val
        _, rnn_g = birnn_backward(sc["rnn"], dh, params.word_rnn)
        for key, val in rnn_g.items():
            grads[f"word_rnn.{key}"] += val
    return grads
