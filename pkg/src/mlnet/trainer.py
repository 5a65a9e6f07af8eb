"""Two-stage training: (1) encoder + label head under the pairwise ranking
loss, (2) count head only with early stopping. Adam throughout."""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderParams, encode_backward, encode_document
from .errors import NumericError
from .heads import (
    CountHead,
    LabelScoreHead,
    clamp_count,
    count_head_backward,
    count_loss,
    count_loss_dlogits,
    lsep_loss_sampled_and_gradient,
    predict_count_distribution,
    score_labels,
    score_labels_backward,
)
from .preprocess import embed_document, tokenize_document

GRAD_CLIP_NORM = 5.0


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    stage1_epochs: int = 50
    batch_size: int = 32
    early_stop_patience: int = 5
    stage2_max_epochs: int = 100
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.stage1_epochs < 1 or self.stage2_max_epochs < 1:
            raise ValueError("epoch counts must be >= 1")
        if self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1")


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


@dataclass
class ModelBundle:
    encoder: EncoderParams
    label_head: LabelScoreHead
    count_head: CountHead
    vocab: object                  # LabelVocabulary
    s_max: int
    t_max: int
    embed_dim: int
    n: int                         # maximum permitted labels
    lsep_on_preactivation: bool = False
    lsep_exact_cutoff: int = 256
    lsep_sample_size: int = 1024
    count_head_trained: bool = False

    @classmethod
    def init(cls, rng, vocab, embed_dim, word_hidden, sent_hidden, att_dim,
             dropout_rate, mlp_dims, n, s_max, t_max, **kwargs):
        enc = EncoderParams.init(rng, embed_dim, word_hidden, sent_hidden,
                                 att_dim, dropout_rate)
        label_head = LabelScoreHead.init(rng, len(vocab), enc.output_dim)
        count_head = CountHead.init(rng, enc.output_dim, mlp_dims, n)
        return cls(enc, label_head, count_head, vocab, s_max, t_max,
                   embed_dim, n, **kwargs)

    def named_parameters(self):
        out = {f"encoder.{k}": v for k, v in self.encoder.named_parameters().items()}
        out.update(self.label_head.named_parameters())
        out.update(self.count_head.named_parameters())
        return out


def params_checksum(params):
    """sha256 over parameter bytes in name order; exact-equality fingerprint."""
    digest = hashlib.sha256()
    for name in sorted(params):
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(params[name]).tobytes())
    return digest.hexdigest()


def adam_update(params, grads, state, cfg):
    """Bias-corrected Adam step, in place on the parameter arrays."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    t = state.step
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1 ** t)
        v_hat = state.v[name] / (1 - b2 ** t)
        params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)


def clip_global_norm(grads, max_norm=GRAD_CLIP_NORM):
    """Scale all gradients so the global L2 norm is at most max_norm."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
        return True
    return False


def prepare_items(docs, bundle, table, stoplist=None):
    """Tokenize and embed documents into (enc_input, gold_index_set, gold_count).

    Degenerate documents (nothing left after preprocessing) are skipped and
    returned separately.
    """
    from .stopwords import DEFAULT_STOPWORDS
    stoplist = DEFAULT_STOPWORDS if stoplist is None else stoplist
    items, skipped = [], []
    for doc in docs:
        tok = tokenize_document(doc, stoplist)
        if tok.degenerate:
            skipped.append(doc.id)
            continue
        enc_input = embed_document(tok, table, bundle.s_max, bundle.t_max)
        gold_idx = bundle.vocab.to_indices(doc.gold_labels)
        items.append((enc_input, frozenset(gold_idx), len(doc.gold_labels)))
    return items, skipped


def _stage1_loss(scores_pre, scores, gold_idx, bundle, neg_rng):
    target = scores_pre if bundle.lsep_on_preactivation else scores
    return lsep_loss_sampled_and_gradient(
        target, gold_idx, bundle.lsep_sample_size, neg_rng,
        exact_cutoff=bundle.lsep_exact_cutoff)


def stage1_doc_loss_and_grads(enc_input, gold_idx, bundle, dropout_rng, neg_rng,
                              train=True):
    """Loss and full parameter gradients for one document."""
    mode = "train" if train else "eval"
    dv, cache = encode_document(enc_input, bundle.encoder, mode=mode,
                                rng=dropout_rng, with_cache=True)
    scores, sc = score_labels(dv, bundle.label_head, with_cache=True)
    loss, dscores = _stage1_loss(sc["pre"], scores, gold_idx, bundle, neg_rng)
    dpre = dscores if bundle.lsep_on_preactivation else dscores * (sc["pre"] > 0)
    head_grads, dx = score_labels_backward(sc, dpre, bundle.label_head)
    enc_grads = encode_backward(cache, dx, bundle.encoder)
    grads = {f"encoder.{k}": v for k, v in enc_grads.items()}
    grads.update(head_grads)
    return loss, grads


def stage1_eval_loss(items, bundle, neg_rng):
    """Mean ranking loss over items with the encoder in eval mode."""
    total = 0.0
    for enc_input, gold_idx, _ in items:
        dv = encode_document(enc_input, bundle.encoder, mode="eval")
        scores, sc = score_labels(dv, bundle.label_head, with_cache=True)
        loss, _ = _stage1_loss(sc["pre"], scores, gold_idx, bundle, neg_rng)
        total += loss
    return total / max(len(items), 1)


def _accumulate(total, grads):
    for name, g in grads.items():
        if name in total:
            total[name] += g
        else:
            total[name] = g.copy()


def _check_finite(loss, context):
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss during {context}")


def train_stage1(train_items, val_items, bundle, cfg, log=None):
    """Mini-batch LSEP training of encoder + label head for a fixed epoch count."""
    if not train_items:
        raise ValueError("empty training split")
    log = log if log is not None else []
    params = {name: arr for name, arr in bundle.named_parameters().items()
              if not name.startswith("count_head.")}
    state = OptimizerState()
    for epoch in range(1, cfg.stage1_epochs + 1):
        order = np.random.default_rng([cfg.seed, 1, epoch]).permutation(len(train_items))
        dropout_rng = np.random.default_rng([cfg.seed, 2, epoch])
        neg_rng = np.random.default_rng([cfg.seed, 3, epoch])
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            batch_grads = {}
            for idx in batch:
                enc_input, gold_idx, _ = train_items[idx]
                loss, grads = stage1_doc_loss_and_grads(
                    enc_input, gold_idx, bundle, dropout_rng, neg_rng)
                _check_finite(loss, f"stage 1 epoch {epoch}")
                epoch_loss += loss
                _accumulate(batch_grads, grads)
            for g in batch_grads.values():
                g /= len(batch)
            clip_global_norm(batch_grads)
            adam_update(params, batch_grads, state, cfg)
        train_loss = epoch_loss / len(train_items)
        val_loss = stage1_eval_loss(val_items, bundle,
                                    np.random.default_rng([cfg.seed, 5, epoch]))
        _check_finite(val_loss, f"stage 1 validation epoch {epoch}")
        log.append(("stage1", epoch, train_loss, val_loss))
    return log


def _count_items(items, bundle, n):
    """Frozen eval-mode document vectors paired with clamped gold counts."""
    out = []
    for enc_input, _, gold_count in items:
        dv = encode_document(enc_input, bundle.encoder, mode="eval")
        out.append((dv.values, clamp_count(gold_count, n)))
    return out


def train_stage2(train_items, val_items, bundle, cfg, log=None):
    """Count-head training on frozen document vectors with early stopping."""
    if not train_items:
        raise ValueError("empty training split")
    log = log if log is not None else []
    n = bundle.count_head.n
    train_cd = _count_items(train_items, bundle, n)
    val_cd = _count_items(val_items, bundle, n)
    params = bundle.count_head.named_parameters()
    state = OptimizerState()
    best_val = np.inf
    best_params = None
    since_best = 0

    def mean_val_loss():
        total = 0.0
        for vec, gold in val_cd:
            probs = predict_count_distribution(vec, bundle.count_head)
            total += count_loss(probs, gold)
        return total / max(len(val_cd), 1)

    for epoch in range(1, cfg.stage2_max_epochs + 1):
        order = np.random.default_rng([cfg.seed, 4, epoch]).permutation(len(train_cd))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            batch_grads = {}
            for idx in batch:
                vec, gold = train_cd[idx]
                probs, cache = predict_count_distribution(
                    vec, bundle.count_head, with_cache=True)
                loss = count_loss(probs, gold)
                _check_finite(loss, f"stage 2 epoch {epoch}")
                epoch_loss += loss
                _accumulate(batch_grads,
                            count_head_backward(cache, count_loss_dlogits(probs, gold),
                                                bundle.count_head))
            for g in batch_grads.values():
                g /= len(batch)
            clip_global_norm(batch_grads)
            adam_update(params, batch_grads, state, cfg)
        train_loss = epoch_loss / len(train_cd)
        val_loss = mean_val_loss()
        _check_finite(val_loss, f"stage 2 validation epoch {epoch}")
        log.append(("stage2", epoch, train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: v.copy() for k, v in params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                break
    if best_params is not None:
        for k in params:
            params[k][...] = best_params[k]
    bundle.count_head_trained = True
    return log


def gradient_check(bundle, items, tolerance=1e-3, h=1e-4, _tamper=None):
    """Compare analytic stage-1 gradients against central finite differences.

    Returns {"max_rel_err": float, "passed": bool, "groups": {name: err}}.
    Dropout is disabled so the objective is deterministic. ``_tamper`` is a
    test hook that mutates the analytic gradients before comparison.
    """
    neg_rng_seed = 12345

    def total_loss():
        total = 0.0
        neg_rng = np.random.default_rng(neg_rng_seed)
        for enc_input, gold_idx, _ in items:
            dv = encode_document(enc_input, bundle.encoder, mode="eval")
            scores, sc = score_labels(dv, bundle.label_head, with_cache=True)
            loss, _ = _stage1_loss(sc["pre"], scores, gold_idx, bundle, neg_rng)
            total += loss
        return total

    analytic = {}
    neg_rng = np.random.default_rng(neg_rng_seed)
    for enc_input, gold_idx, _ in items:
        _, grads = stage1_doc_loss_and_grads(enc_input, gold_idx, bundle,
                                             None, neg_rng, train=False)
        _accumulate(analytic, grads)
    if _tamper is not None:
        _tamper(analytic)

    params = {name: arr for name, arr in bundle.named_parameters().items()
              if not name.startswith("count_head.")}
    groups = {}
    for name, arr in params.items():
        worst = 0.0
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = total_loss()
            flat[i] = orig - h
            minus = total_loss()
            flat[i] = orig
            numeric = (plus - minus) / (2 * h)
            a = analytic[name].reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, err)
        groups[name] = worst
    max_err = max(groups.values())
    return {"max_rel_err": max_err, "passed": max_err < tolerance, "groups": groups}
