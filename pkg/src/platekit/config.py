"""Flat key=value run configuration.

One file drives every subcommand. Keys carry a section prefix
("gan.epochs=30"); blank lines and '#' comments are skipped. Every key
must appear in the schema below, and values must parse, otherwise the
run aborts before touching any data.
"""

from .errors import ConfigError


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


# key -> (parser, default)
SCHEMA = {
    "alphabet": (str, "toy"),          # toy | standard | path to a saved file
    "image.height": (int, 16),
    "image.width": (int, 64),

    "synth.n": (int, 200),
    "synth.length": (int, 5),
    "synth.styles": (str, "blue,yellow"),
    "synth.augment": (_bool, True),
    "synth.crop4": (_bool, False),
    "synth.domain": (str, "script"),   # script | proxy

    "gan.variant": (str, "wgan"),
    "gan.lambda": (float, 10.0),
    "gan.d_iter": (int, 5),
    "gan.clip": (float, 0.01),
    "gan.lr": (float, 0.0),            # 0 means the variant default
    "gan.epochs": (int, 30),
    "gan.batch": (int, 8),
    "gan.base": (int, 8),
    "gan.d_base": (int, 8),
    "gan.d_layers": (int, 3),
    "gan.resblocks": (int, 2),
    "gan.height": (int, 32),
    "gan.width": (int, 32),
    "gan.steps_per_epoch": (int, 0),   # 0 means one pass over the smaller domain
    "gan.source": (str, ""),           # script-style manifest
    "gan.target": (str, ""),           # proxy-real manifest
    "gan.models": (str, ""),           # checkpoint directory for generate
    "gan.last_k": (int, 1),

    "train.network": (str, "crnn"),    # crnn | lightcrnn
    "train.alpha": (float, 1.0),
    "train.stages": (str, ""),         # manifest,epochs[,optimizer];...
    "train.batch": (int, 16),
    "train.holdout": (str, ""),
    "train.init": (str, ""),           # checkpoint to continue from

    "eval.model": (str, ""),
    "eval.data": (str, ""),
    "eval.beam_width": (int, 16),
    "eval.topn": (int, 5),

    "decode.model": (str, ""),
    "decode.data": (str, ""),
    "decode.beam_width": (int, 16),
    "decode.topn": (int, 5),

    "confmap.model": (str, ""),
    "confmap.n": (int, 5000),

    "cost.alpha": (float, 1.0),

    "mix.real": (str, ""),
    "mix.generated": (str, ""),
}


class Config:
    def __init__(self, values: dict):
        self._v = values

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        return self._v[key]

    def require(self, key: str):
        """A value that must have been set explicitly (non-empty)."""
        v = self[key]
        if v == "":
            raise ConfigError(f"config key {key!r} is required for this command")
        return v


def parse_config(path: str | None) -> Config:
    values = {k: d for k, (_, d) in SCHEMA.items()}
    if path is None:
        return Config(values)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    with fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
            key = key.strip()
            if key not in SCHEMA:
                raise ConfigError(f"{path}:{ln}: unknown config key {key!r}")
            parser, _ = SCHEMA[key]
            try:
                values[key] = parser(raw.strip())
            except ValueError as e:
                raise ConfigError(
                    f"{path}:{ln}: bad value for {key}: {raw.strip()!r}") from e
    return Config(values)


def parse_stages(raw: str):
    """"manifest,epochs[,optimizer];..." -> list of (path, epochs, opt).

    The optimizer field is a spec like "adadelta", "adam:1e-3",
    "sgd:0.01:0.9" or "rmsprop:1e-3"; it defaults to adadelta.
    """
    if not raw.strip():
        raise ConfigError("train.stages is empty")
    stages = []
    for part in raw.split(";"):
        fields = [f.strip() for f in part.split(",")]
        if len(fields) not in (2, 3) or not fields[0]:
            raise ConfigError(f"bad stage spec {part.strip()!r}; "
                              "expected manifest,epochs[,optimizer]")
        try:
            epochs = int(fields[1])
        except ValueError:
            raise ConfigError(f"bad epoch count in stage {part.strip()!r}") from None
        if epochs < 1:
            raise ConfigError(f"stage {fields[0]} needs epochs >= 1")
        opt = fields[2] if len(fields) == 3 else "adadelta"
        stages.append((fields[0], epochs, opt))
    return stages
