"""Model artifact container: JSON metadata header plus named, length-prefixed
little-endian float64 tensor payloads. Save/load/save is byte-identical."""

import hashlib
import json
import struct

import numpy as np

from .corpus import LabelVocabulary
from .encoder import AttentionParams, EncoderParams, RecurrentLayerParams
from .errors import DataError
from .heads import CountHead, LabelScoreHead
from .trainer import ModelBundle

MAGIC = b"MLNA1\n"
FORMAT_VERSION = 1


def _payload(tensors):
    chunks = []
    for _, arr in tensors:
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        chunks.append(struct.pack("<Q", len(raw)))
        chunks.append(raw)
    return b"".join(chunks)


def save_model(path, bundle, extra_meta=None):
    """Write a ModelBundle (plus free-form metadata) to a single file."""
    named = sorted(bundle.named_parameters().items())
    meta = {
        "vocab": list(bundle.vocab.labels),
        "s_max": bundle.s_max,
        "t_max": bundle.t_max,
        "embed_dim": bundle.embed_dim,
        "n": bundle.n,
        "word_hidden": bundle.encoder.word_rnn.hidden_dim,
        "sent_hidden": bundle.encoder.sent_rnn.hidden_dim,
        "att_dim": bundle.encoder.word_att.context.shape[0],
        "dropout_rate": bundle.encoder.dropout_rate,
        "mlp_dims": list(bundle.count_head.layer_dims),
        "lsep_on_preactivation": bundle.lsep_on_preactivation,
        "lsep_exact_cutoff": bundle.lsep_exact_cutoff,
        "lsep_sample_size": bundle.lsep_sample_size,
        "count_head_trained": bundle.count_head_trained,
    }
    if extra_meta:
        meta.update(extra_meta)
    payload = _payload(named)
    header = {
        "format_version": FORMAT_VERSION,
        "meta": meta,
        "tensors": [{"name": name, "shape": list(arr.shape)} for name, arr in named],
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def _read_tensors(payload, specs):
    tensors = {}
    offset = 0
    for spec in specs:
        if offset + 8 > len(payload):
            raise DataError("truncated tensor payload")
        (nbytes,) = struct.unpack_from("<Q", payload, offset)
        offset += 8
        raw = payload[offset:offset + nbytes]
        if len(raw) != nbytes:
            raise DataError(f"truncated tensor {spec['name']!r}")
        offset += nbytes
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(spec["shape"])
        tensors[spec["name"]] = arr.copy()
    if offset != len(payload):
        raise DataError("trailing bytes after tensor payload")
    return tensors


def load_model(path):
    """Read a model artifact; verifies checksum. Returns (ModelBundle, meta)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise DataError(f"{path}: not a model artifact")
    (hlen,) = struct.unpack_from("<Q", blob, len(MAGIC))
    start = len(MAGIC) + 8
    header = json.loads(blob[start:start + hlen])
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version")
    payload = blob[start + hlen:]
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise DataError(f"{path}: payload checksum mismatch")
    tensors = _read_tensors(payload, header["tensors"])
    meta = header["meta"]

    def rnn(prefix, input_dim, hidden_dim):
        return RecurrentLayerParams(
            input_dim, hidden_dim,
            tensors[f"{prefix}.fw_W"], tensors[f"{prefix}.fw_U"], tensors[f"{prefix}.fw_b"],
            tensors[f"{prefix}.bw_W"], tensors[f"{prefix}.bw_U"], tensors[f"{prefix}.bw_b"])

    def att(prefix):
        return AttentionParams(tensors[f"{prefix}.proj_W"], tensors[f"{prefix}.proj_b"],
                               tensors[f"{prefix}.context"])

    wh, sh = meta["word_hidden"], meta["sent_hidden"]
    enc = EncoderParams(
        word_rnn=rnn("encoder.word_rnn", meta["embed_dim"], wh),
        word_att=att("encoder.word_att"),
        sent_rnn=rnn("encoder.sent_rnn", 2 * wh, sh),
        sent_att=att("encoder.sent_att"),
        dropout_rate=meta["dropout_rate"],
    )
    label_head = LabelScoreHead(tensors["label_head.weight"], tensors["label_head.bias"])
    mlp_dims = tuple(meta["mlp_dims"])
    n_layers = len(mlp_dims) + 1
    count_head = CountHead(
        layer_dims=mlp_dims, n=meta["n"],
        weights=[tensors[f"count_head.layer{i}.W"] for i in range(n_layers)],
        biases=[tensors[f"count_head.layer{i}.b"] for i in range(n_layers)])
    bundle = ModelBundle(
        encoder=enc, label_head=label_head, count_head=count_head,
        vocab=LabelVocabulary(tuple(meta["vocab"])),
        s_max=meta["s_max"], t_max=meta["t_max"], embed_dim=meta["embed_dim"],
        n=meta["n"], lsep_on_preactivation=meta["lsep_on_preactivation"],
        lsep_exact_cutoff=meta["lsep_exact_cutoff"],
        lsep_sample_size=meta["lsep_sample_size"],
        count_head_trained=meta["count_head_trained"])
    return bundle, meta
