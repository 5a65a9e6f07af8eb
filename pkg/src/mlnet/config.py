"""Run configuration: task presets, flat key=value config files, and the
flag > config file > preset precedence rule."""

from .errors import DataError


def _int_list(text):
    return tuple(int(x) for x in str(text).replace(" ", "").split(",") if x != "")


def _float_list(text):
    return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x != "")


def _bool(text):
    if isinstance(text, bool):
        return text
    if str(text).lower() in ("1", "true", "yes"):
        return True
    if str(text).lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA = {
    "n": int,
    "mlp_dims": _int_list,
    "embed_dim": int,          # validated against the embedding file at load time
    "s_max": int,
    "t_max": int,
    "word_hidden": int,
    "sent_hidden": int,
    "att_dim": int,
    "dropout_rate": float,
    "learning_rate": float,
    "stage1_epochs": int,
    "batch_size": int,
    "early_stop_patience": int,
    "stage2_max_epochs": int,
    "seed": int,
    "split_ratios": _float_list,
    "lsep_on_preactivation": _bool,
    "lsep_exact_cutoff": int,
    "lsep_sample_size": int,
}

DEFAULTS = {
    "n": 5,
    "mlp_dims": (128, 128, 64),
    "embed_dim": 200,
    "s_max": 27,
    "t_max": 83,
    "word_hidden": 50,
    "sent_hidden": 50,
    "att_dim": 50,
    "dropout_rate": 0.5,
    "learning_rate": 0.001,
    "stage1_epochs": 50,
    "batch_size": 32,
    "early_stop_patience": 5,
    "stage2_max_epochs": 100,
    "seed": 0,
    "split_ratios": (0.7, 0.1, 0.2),
    "lsep_on_preactivation": False,
    "lsep_exact_cutoff": 256,
    "lsep_sample_size": 1024,
}

# Published per-task settings: max permitted labels, MLP widths, embedding
# dimension, and truncation limits set to the corpus maxima.
PRESETS = {
    "task1": {"n": 5, "mlp_dims": (128, 128, 64), "embed_dim": 200,
              "s_max": 27, "t_max": 83},
    "task2": {"n": 8, "mlp_dims": (128, 128, 64), "embed_dim": 200,
              "s_max": 34, "t_max": 120},
    "task3": {"n": 70, "mlp_dims": (7024, 7024, 128), "embed_dim": 300,
              "s_max": 904, "t_max": 20},
    "custom": {},
}


def load_config_file(path):
    """Flat `key = value` file with # comments; keys validated against the schema."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in SCHEMA:
                raise DataError(f"{path}:{lineno}: unknown config key {key!r}")
            try:
                out[key] = SCHEMA[key](value)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return out


def resolve_config(task="custom", config_path=None, overrides=None):
    """Merge defaults <- preset <- config file <- explicit CLI overrides."""
    if task not in PRESETS:
        raise ValueError(f"unknown task preset {task!r}")
    cfg = dict(DEFAULTS)
    cfg.update(PRESETS[task])
    if config_path:
        cfg.update(load_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in SCHEMA:
            raise ValueError(f"unknown config key {key!r}")
        cfg[key] = SCHEMA[key](value) if not isinstance(value, tuple) else value
    if cfg["n"] < 1:
        raise ValueError("n must be >= 1")
    return cfg
