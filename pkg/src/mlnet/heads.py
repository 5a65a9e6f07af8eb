"""Label-scoring head with the log-sum-exp pairwise ranking loss, and the
label-count head (MLP + softmax over counts 1..n)."""

from dataclasses import dataclass

import numpy as np

from .encoder import INIT_SCALE


@dataclass
class LabelScoreHead:
    weight: np.ndarray  # [L, D]
    bias: np.ndarray    # [L]

    @classmethod
    def init(cls, rng, num_labels, input_dim):
        return cls(rng.uniform(-INIT_SCALE, INIT_SCALE, (num_labels, input_dim)),
                   np.zeros(num_labels))

    def named_parameters(self):
        return {"label_head.weight": self.weight, "label_head.bias": self.bias}


@dataclass
class CountHead:
    layer_dims: tuple          # hidden widths, e.g. (128, 128, 64)
    n: int                     # maximum permitted labels = output width
    weights: list              # [in, out] per layer, hidden layers then output
    biases: list

    @classmethod
    def init(cls, rng, input_dim, layer_dims, n):
        dims = [input_dim, *layer_dims, n]
        weights = [rng.uniform(-INIT_SCALE, INIT_SCALE, (dims[i], dims[i + 1]))
                   for i in range(len(dims) - 1)]
        biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
        return cls(tuple(layer_dims), n, weights, biases)

    def named_parameters(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"count_head.layer{i}.W"] = w
            out[f"count_head.layer{i}.b"] = b
        return out


def score_labels(x, head, with_cache=False):
    """Per-label confidence scores ReLU(Wx + b)."""
    vec = getattr(x, "values", x)
    if vec.shape[0] != head.weight.shape[1]:
        raise ValueError(
            f"document vector width {vec.shape[0]} != head input {head.weight.shape[1]}")
    pre = head.weight @ vec + head.bias
    scores = np.maximum(pre, 0.0)
    if with_cache:
        return scores, {"x": vec, "pre": pre}
    return scores


def score_labels_backward(cache, dpre, head):
    """Gradient of the linear map given d(pre-activation); returns grads + dx."""
    grads = {
        "label_head.weight": np.outer(dpre, cache["x"]),
        "label_head.bias": dpre,
    }
    dx = head.weight.T @ dpre
    return grads, dx


def _lsep_core(scores, relevant, irrelevant, scale):
    """Stable loss/grad of log(1 + scale * sum_{v,u} exp(s_v - s_u))."""
    grad = np.zeros_like(scores)
    if len(relevant) == 0 or len(irrelevant) == 0:
        return 0.0, grad
    sv = scores[irrelevant]
    su = scores[relevant]
    a = sv.max()
    b = su.min()
    ev = np.exp(sv - a)   # all <= 1
    eu = np.exp(b - su)   # all <= 1
    p = ev.sum()
    q = eu.sum()
    log_z = np.log(scale) + (a - b) + np.log(p) + np.log(q)
    loss = np.logaddexp(0.0, log_z)
    wt = np.exp(log_z - loss)  # Z / (1 + Z)
    grad[irrelevant] = (ev / p) * wt
    grad[relevant] = -(eu / q) * wt
    return float(loss), grad


def _check_indices(gold, num_labels):
    idx = sorted(gold)
    if idx and (idx[0] < 0 or idx[-1] >= num_labels):
        raise IndexError(f"label index out of range for {num_labels} labels")
    return np.array(idx, dtype=int)


def lsep_loss(scores, gold):
    """Pairwise ranking loss over all (irrelevant, relevant) label pairs."""
    return lsep_loss_and_gradient(scores, gold)[0]


def lsep_loss_gradient(scores, gold):
    return lsep_loss_and_gradient(scores, gold)[1]


def lsep_loss_and_gradient(scores, gold):
    scores = np.asarray(scores, dtype=float)
    rel = _check_indices(gold, len(scores))
    mask = np.zeros(len(scores), dtype=bool)
    mask[rel] = True
    irr = np.flatnonzero(~mask)
    return _lsep_core(scores, rel, irr, scale=1.0)


def lsep_loss_sampled(scores, gold, neg_sample_size, rng, exact_cutoff=256):
    """LSEP over a uniform negative sample, inner sum rescaled by |V|/m.

    Falls back to the exact loss when the label space is small (<= cutoff)
    or the sample would cover the whole irrelevant set.
    """
    return lsep_loss_sampled_and_gradient(
        scores, gold, neg_sample_size, rng, exact_cutoff)[0]


def lsep_loss_sampled_and_gradient(scores, gold, neg_sample_size, rng,
                                   exact_cutoff=256):
    if neg_sample_size < 1:
        raise ValueError("neg_sample_size must be >= 1")
    scores = np.asarray(scores, dtype=float)
    rel = _check_indices(gold, len(scores))
    mask = np.zeros(len(scores), dtype=bool)
    mask[rel] = True
    irr = np.flatnonzero(~mask)
    if len(scores) <= exact_cutoff or neg_sample_size >= len(irr):
        return _lsep_core(scores, rel, irr, scale=1.0)
    sample = rng.choice(irr, size=neg_sample_size, replace=False)
    return _lsep_core(scores, rel, np.sort(sample), scale=len(irr) / neg_sample_size)


def _softmax(logits):
    z = logits - logits.max()
    ez = np.exp(z)
    return ez / ez.sum()


def predict_count_distribution(x, head, with_cache=False):
    """MLP with ReLU hidden layers and a softmax over counts {1..n}."""
    h = getattr(x, "values", x)
    if h.shape[0] != head.weights[0].shape[0]:
        raise ValueError(
            f"document vector width {h.shape[0]} != head input {head.weights[0].shape[0]}")
    hiddens = []
    for w, b in zip(head.weights[:-1], head.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        hiddens.append(h)
    logits = h @ head.weights[-1] + head.biases[-1]
    probs = _softmax(logits)
    if with_cache:
        return probs, {"input": getattr(x, "values", x), "hiddens": hiddens,
                       "probs": probs}
    return probs


def count_head_backward(cache, dlogits, head):
    """Backprop the MLP from d(logits); returns grads keyed like named_parameters."""
    grads = {}
    acts = [cache["input"], *cache["hiddens"]]
    dh = dlogits
    for i in range(len(head.weights) - 1, -1, -1):
        grads[f"count_head.layer{i}.W"] = np.outer(acts[i], dh)
        grads[f"count_head.layer{i}.b"] = dh
        if i > 0:
            dh = (dh @ head.weights[i].T) * (acts[i] > 0)
    return grads


def count_loss(probs, gold_count):
    """Cross-entropy of the count distribution against a gold count in 1..n."""
    n = len(probs)
    if not 1 <= gold_count <= n:
        raise ValueError(f"gold count {gold_count} outside 1..{n}")
    return float(-np.log(max(probs[gold_count - 1], 1e-300)))


def count_loss_dlogits(probs, gold_count):
    """Gradient of count_loss w.r.t. the pre-softmax logits."""
    d = probs.copy()
    d[gold_count - 1] -= 1.0
    return d


def clamp_count(k, n):
    """Clamp a gold label count into the head's class range {1..n}."""
    return min(max(k, 1), n)
