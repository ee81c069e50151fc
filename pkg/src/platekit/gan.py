"""Unpaired image-to-image translation at desk scale.

Two generator/discriminator pairs map between a source style and a
target style under a cycle-consistency penalty. The adversarial term is
selectable: least-squares scoring, or a clipped critic trained several
steps per generator step. A small unconditional generator/discriminator
pair (latent vectors to images) lives here too, for producing unlabeled
samples.

Training loops in this module follow one hard rule: every layer caches
exactly one forward pass, so each backward call must be the next use of
that network after its matching forward.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, DataError, DivergenceError,
                     InvalidArgumentError, InvalidRangeError, ShapeError)
from .layers import (BatchNorm2D, Conv2D, Layer, LeakyReLU, Linear, ReLU,
                     Sequential, Sigmoid, UpsampleNearest2x)
from .networks import register_builder, save_checkpoint
from .optim import Adam, RMSProp


@dataclass
class GanConfig:
    variant: str = "wgan"
    lam: float = 10.0
    d_iter: int = 5
    clip_c: float = 0.01
    lr: float | None = None
    beta1: float = 0.5
    beta2: float = 0.999
    rms_decay: float = 0.9
    geometry: tuple = (32, 32)
    in_ch: int = 3
    base: int = 8
    d_base: int = 8
    resblocks: int = 2
    d_layers: int = 3
    batch: int = 8
    flip: bool = False
    latent_dim: int = 100
    dcgan_channels: int = 16
    dcgan_d_base: int = 8

    def __post_init__(self):
        if self.variant not in ("lsgan", "wgan"):
            raise ConfigError(f"unknown adversarial variant {self.variant!r}")
        if self.lam <= 0:
            raise InvalidRangeError("cycle weight must be positive")
        if self.d_iter < 1:
            raise InvalidRangeError("d_iter must be at least 1")
        if self.variant == "wgan" and self.clip_c <= 0:
            raise InvalidRangeError("clip bound must be positive")

    def learning_rate(self) -> float:
        if self.lr is not None:
            return self.lr
        return 2e-4 if self.variant == "lsgan" else 5e-5


@dataclass
class CycleModels:
    """Both mappings and both discriminators of one translation task."""
    g: Layer          # source style -> target style
    f: Layer          # target style -> source style
    d_s: Layer        # scores source-style images
    d_r: Layer        # scores target-style images


class Reshape(Layer):
    def __init__(self, shape):
        self.shape = tuple(shape)

    def forward(self, x, train=True):
        self._in = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, dout):
        return dout.reshape(self._in)


class ResBlock(Layer):
    """x + body(x), where the body is conv-norm-relu-conv-norm."""

    def __init__(self, ch, rng, init_std=None):
        self.body = Sequential(
            Conv2D(3, 3, ch, ch, pad=(1, 1), rng=rng, init_std=init_std),
            BatchNorm2D(ch),
            ReLU(),
            Conv2D(3, 3, ch, ch, pad=(1, 1), rng=rng, init_std=init_std),
            BatchNorm2D(ch),
        )

    def sublayers(self):
        return [("body", self.body)]

    def parameters(self):
        return self.body.parameters()

    def forward(self, x, train=True):
        return x + self.body.forward(x, train=train)

    def backward(self, dout):
        return dout + self.body.backward(dout)


GAN_INIT_STD = 0.02


def build_cycle_generator(cfg: GanConfig, rng) -> Sequential:
    """Two stride-2 downsampling convs, a run of residual blocks, two
    nearest-neighbour upsampling convs, and a sigmoid squash to [0,1].

    Output geometry equals input geometry, which must be divisible by 4.
    """
    h, w = cfg.geometry
    if h % 4 or w % 4:
        raise ShapeError(f"geometry {cfg.geometry} not divisible by 4")
    c, s = cfg.base, GAN_INIT_STD
    stack = [
        Conv2D(3, 3, cfg.in_ch, c, stride=(2, 2), pad=(1, 1), rng=rng, init_std=s),
        BatchNorm2D(c), ReLU(),
        Conv2D(3, 3, c, 2 * c, stride=(2, 2), pad=(1, 1), rng=rng, init_std=s),
        BatchNorm2D(2 * c), ReLU(),
    ]
    for _ in range(cfg.resblocks):
        stack.append(ResBlock(2 * c, rng, init_std=s))
    stack += [
        UpsampleNearest2x(),
        Conv2D(3, 3, 2 * c, c, pad=(1, 1), rng=rng, init_std=s),
        BatchNorm2D(c), ReLU(),
        UpsampleNearest2x(),
        Conv2D(3, 3, c, cfg.in_ch, pad=(1, 1), rng=rng, init_std=s),
        Sigmoid(),
    ]
    net = Sequential(*stack)
    net.geometry = (h, w)
    return net


def receptive_field(taps) -> int:
    """Input pixels seen by one output cell of a conv chain given
    (filter, stride) pairs."""
    rf, jump = 1, 1
    for f, s in taps:
        rf += (f - 1) * jump
        jump *= s
    return rf


def _patch_taps(d_layers: int):
    return tuple([(4, 2)] * (d_layers - 1) + [(4, 1)])


def build_patch_discriminator(cfg: GanConfig, rng) -> Sequential:
    """Stride-2 convs ending in a 1-channel score grid. Each cell of the
    grid sees one local patch of the input (size ``net.patch_rf``), so
    the output is a spatial map of realness scores, not a single scalar.

    No normalization layers: the same stack doubles as a clipped critic.
    """
    if cfg.d_layers < 2:
        raise ShapeError("discriminator needs at least 2 conv layers")
    taps = _patch_taps(cfg.d_layers)
    h, w = cfg.geometry
    rf = receptive_field(taps)
    if h < rf or w < rf:
        raise ShapeError(f"geometry {cfg.geometry} smaller than one "
                         f"{rf}x{rf} scoring patch")
    chans = [cfg.in_ch] + [cfg.d_base * 2 ** i for i in range(cfg.d_layers - 1)]
    stack = []
    for i, (f, stride) in enumerate(taps[:-1]):
        stack += [Conv2D(f, f, chans[i], chans[i + 1], stride=(stride, stride),
                         pad=(1, 1), rng=rng, init_std=GAN_INIT_STD),
                  LeakyReLU(0.2)]
    stack.append(Conv2D(4, 4, chans[-1], 1, stride=(1, 1), pad=(1, 1),
                        rng=rng, init_std=GAN_INIT_STD))
    net = Sequential(*stack)
    net.patch_rf = rf
    return net


def _check_grids(d_real, d_fake):
    if d_real is not None and d_real.shape != d_fake.shape:
        raise ShapeError(f"score grids disagree: {d_real.shape} vs {d_fake.shape}")


def lsgan_loss(d_real, d_fake, side: str) -> float:
    """Least-squares adversarial loss. The discriminator pushes real
    scores to 1 and fake scores to 0; the generator pushes fake scores
    to 1. Means run over batch and grid."""
    _check_grids(d_real, d_fake)
    if side == "discriminator":
        return float(np.mean((d_real - 1.0) ** 2) + np.mean(d_fake ** 2))
    if side == "generator":
        return float(np.mean((d_fake - 1.0) ** 2))
    raise InvalidArgumentError(f"side must be generator or discriminator, got {side!r}")


def wgan_loss(d_real, d_fake, side: str) -> float:
    """Critic-style adversarial loss. The critic maximizes the score gap
    mean(real) - mean(fake); this returns its negation so both sides are
    minimized. The generator minimizes -mean(fake)."""
    _check_grids(d_real, d_fake)
    if side == "discriminator":
        return float(np.mean(d_fake) - np.mean(d_real))
    if side == "generator":
        return float(-np.mean(d_fake))
    raise InvalidArgumentError(f"side must be generator or discriminator, got {side!r}")


def cycle_loss(s_batch, r_batch, models: CycleModels) -> float:
    """Mean absolute round-trip error, both directions, evaluation mode."""
    if s_batch.shape[0] == 0 or r_batch.shape[0] == 0:
        raise DataError("cycle loss needs non-empty batches")
    rec_s = models.f.forward(models.g.forward(s_batch, train=False), train=False)
    rec_r = models.g.forward(models.f.forward(r_batch, train=False), train=False)
    if rec_s.shape != s_batch.shape or rec_r.shape != r_batch.shape:
        raise ShapeError("round trip changed the image geometry")
    return float(np.mean(np.abs(rec_s - s_batch)) + np.mean(np.abs(rec_r - r_batch)))


def total_objective(adv_sr: float, adv_rs: float, cyc: float, lam: float) -> float:
    if lam <= 0:
        raise InvalidRangeError("cycle weight must be positive")
    return float(adv_sr + adv_rs + lam * cyc)


def clip_params(net, c: float) -> None:
    """Clamps every parameter into [-c, c], in place."""
    if c <= 0:
        raise InvalidRangeError("clip bound must be positive")
    for p in net.parameters():
        np.clip(p.value, -c, c, out=p.value)


def max_abs_param(net) -> float:
    return max(float(np.max(np.abs(p.value))) for p in net.parameters())


def _draw_batch(images, n, geometry, flip, rng):
    """Random sample with crop jitter down to the working geometry and
    optional horizontal flips."""
    idx = rng.integers(0, images.shape[0], size=n)
    h, w = geometry
    ih, iw = images.shape[1:3]
    if ih < h or iw < w:
        raise ShapeError(f"images {(ih, iw)} smaller than working geometry {(h, w)}")
    out = np.empty((n, h, w, images.shape[3]), dtype=float)
    for k, i in enumerate(idx):
        dy = int(rng.integers(0, ih - h + 1))
        dx = int(rng.integers(0, iw - w + 1))
        crop = images[i, dy:dy + h, dx:dx + w]
        if flip and rng.random() < 0.5:
            crop = crop[:, ::-1]
        out[k] = crop
    return out


def _mean_sq_grad(scores, target):
    # d/d s of mean((s - target)^2)
    return 2.0 * (scores - target) / scores.size


def _disc_update(disc, opt, real, fake, variant, cfg):
    """One discriminator update. Forward/backward pairs are kept
    adjacent because layers hold a single cached activation."""
    disc.zero_grad()
    dr = disc.forward(real)
    if variant == "lsgan":
        disc.backward(_mean_sq_grad(dr, 1.0))
    else:
        disc.backward(np.full_like(dr, -1.0 / dr.size))
    df = disc.forward(fake)
    if variant == "lsgan":
        disc.backward(_mean_sq_grad(df, 0.0))
        loss = lsgan_loss(dr, df, "discriminator")
    else:
        disc.backward(np.full_like(df, 1.0 / df.size))
        loss = wgan_loss(dr, df, "discriminator")
    opt.step()
    if variant == "wgan":
        clip_params(disc, cfg.clip_c)
    return loss


def _adv_gen_grad(scores, variant):
    if variant == "lsgan":
        return _mean_sq_grad(scores, 1.0)
    return np.full_like(scores, -1.0 / scores.size)


def _gen_half(first, second, disc, batch, variant, lam):
    """One direction of the generator update: adversarial score of
    first(batch) plus round-trip error through second. Accumulates
    gradients in both generators; caller steps the optimizer."""
    fake = first.forward(batch)
    scores = disc.forward(fake)
    d_fake = disc.backward(_adv_gen_grad(scores, variant))
    rec = second.forward(fake)
    diff = rec - batch
    d_fake = d_fake + second.backward(lam * np.sign(diff) / diff.size)
    first.backward(d_fake)
    if variant == "lsgan":
        adv = lsgan_loss(None, scores, "generator")
    else:
        adv = wgan_loss(None, scores, "generator")
    return adv, float(np.mean(np.abs(diff)))


def train_cyclegan(cfg: GanConfig, s_images, r_images, epochs: int, rng,
                   out_dir=None, steps_per_epoch=None):
    """Trains both mappings. Returns (CycleModels, history) where history
    rows are (step, phase, values):

      lsgan   "d" -> [loss_dr, loss_ds]
      wgan    "critic" -> [loss_dr, loss_ds, maxabs_dr, maxabs_ds]
      both    "g" -> [adv_sr, adv_rs, cycle, total]

    The wgan variant runs cfg.d_iter critic updates (each followed by a
    clamp of every critic parameter) before each generator update. With
    out_dir set, generators are written once per epoch.
    """
    if s_images.shape[0] == 0 or r_images.shape[0] == 0:
        raise DataError("both domains need at least one image")
    models = CycleModels(
        g=build_cycle_generator(cfg, rng), f=build_cycle_generator(cfg, rng),
        d_s=build_patch_discriminator(cfg, rng),
        d_r=build_patch_discriminator(cfg, rng))
    lr = cfg.learning_rate()
    if cfg.variant == "lsgan":
        opt_g = Adam(models.g.parameters() + models.f.parameters(), lr,
                     cfg.beta1, cfg.beta2)
        opt_dr = Adam(models.d_r.parameters(), lr, cfg.beta1, cfg.beta2)
        opt_ds = Adam(models.d_s.parameters(), lr, cfg.beta1, cfg.beta2)
    else:
        opt_g = RMSProp(models.g.parameters() + models.f.parameters(), lr,
                        cfg.rms_decay)
        opt_dr = RMSProp(models.d_r.parameters(), lr, cfg.rms_decay)
        opt_ds = RMSProp(models.d_s.parameters(), lr, cfg.rms_decay)

    n = min(s_images.shape[0], r_images.shape[0])
    if steps_per_epoch is None:
        steps_per_epoch = max(1, n // cfg.batch)
    d_rounds = cfg.d_iter if cfg.variant == "wgan" else 1
    history, step = [], 0
    draw = lambda pool: _draw_batch(pool, cfg.batch, cfg.geometry, cfg.flip, rng)

    for epoch in range(epochs):
        for _ in range(steps_per_epoch):
            for _ in range(d_rounds):
                loss_dr = _disc_update(models.d_r, opt_dr, draw(r_images),
                                       models.g.forward(draw(s_images)),
                                       cfg.variant, cfg)
                loss_ds = _disc_update(models.d_s, opt_ds, draw(s_images),
                                       models.f.forward(draw(r_images)),
                                       cfg.variant, cfg)
                if not (np.isfinite(loss_dr) and np.isfinite(loss_ds)):
                    raise DivergenceError(
                        f"non-finite discriminator loss at step {step}")
                if cfg.variant == "wgan":
                    history.append((step, "critic",
                                    [loss_dr, loss_ds,
                                     max_abs_param(models.d_r),
                                     max_abs_param(models.d_s)]))
                else:
                    history.append((step, "d", [loss_dr, loss_ds]))
                step += 1
            s_b, r_b = draw(s_images), draw(r_images)
            models.g.zero_grad()
            models.f.zero_grad()
            adv_sr, cyc_s = _gen_half(models.g, models.f, models.d_r, s_b,
                                      cfg.variant, cfg.lam)
            adv_rs, cyc_r = _gen_half(models.f, models.g, models.d_s, r_b,
                                      cfg.variant, cfg.lam)
            opt_g.step()
            total = total_objective(adv_sr, adv_rs, cyc_s + cyc_r, cfg.lam)
            if not np.isfinite(total):
                raise DivergenceError(f"non-finite generator loss at step {step}")
            history.append((step, "g", [adv_sr, adv_rs, cyc_s + cyc_r, total]))
            step += 1
        if out_dir is not None:
            save_cycle_generator(f"{out_dir}/g_epoch_{epoch + 1:03d}.ckpt",
                                 models.g, cfg)
            save_cycle_generator(f"{out_dir}/f_epoch_{epoch + 1:03d}.ckpt",
                                 models.f, cfg)
    return models, history


def _cycle_meta(cfg: GanConfig) -> dict:
    return {"kind": "cycle-generator",
            "geometry": f"{cfg.geometry[0]} {cfg.geometry[1]}",
            "in_channels": str(cfg.in_ch),
            "base": str(cfg.base),
            "resblocks": str(cfg.resblocks)}


def save_cycle_generator(path: str, net, cfg: GanConfig) -> None:
    save_checkpoint(path, net, meta=_cycle_meta(cfg))


def _build_cycle_from_meta(meta, rng):
    h, w = (int(v) for v in meta["geometry"].split())
    cfg = GanConfig(geometry=(h, w), in_ch=int(meta["in_channels"]),
                    base=int(meta["base"]), resblocks=int(meta["resblocks"]))
    return build_cycle_generator(cfg, rng)


def translate(gen, images, batch: int = 32) -> np.ndarray:
    """Maps a stack of images through a trained generator, evaluation
    mode. Any labels ride along outside this function, untouched."""
    if images.ndim != 4:
        raise ShapeError(f"expected (N,H,W,C), got {images.shape}")
    outs = [gen.forward(images[i:i + batch], train=False)
            for i in range(0, images.shape[0], batch)]
    return np.concatenate(outs, axis=0)


def ensemble_translate(gens, images, batch: int = 32) -> np.ndarray:
    """Every checkpoint translates every input: k generators over n
    images yield k*n outputs, grouped by generator."""
    return np.concatenate([translate(g, images, batch) for g in gens], axis=0)


def build_dcgan_generator(cfg: GanConfig, rng):
    """Projects a latent vector to a 4x4 map, then upsamples by 2 with a
    conv after each doubling until the working geometry is reached;
    sigmoid output. Geometry must be square and 4 times a power of 2."""
    h, w = cfg.geometry
    if h != w or h < 8 or h & (h - 1) or h % 4:
        raise ShapeError(f"geometry {cfg.geometry} must be square 4*2^k")
    c, s = cfg.dcgan_channels, GAN_INIT_STD
    stack = [Linear(cfg.latent_dim, 4 * 4 * c, rng=rng, init_std=s),
             Reshape((4, 4, c)),
             BatchNorm2D(c), ReLU()]
    size = 4
    while size < h:
        stack += [UpsampleNearest2x(),
                  Conv2D(3, 3, c, c, pad=(1, 1), rng=rng, init_std=s),
                  BatchNorm2D(c), ReLU()]
        size *= 2
    stack += [Conv2D(3, 3, c, cfg.in_ch, pad=(1, 1), rng=rng, init_std=s),
              Sigmoid()]
    net = Sequential(*stack)
    net.latent_dim = cfg.latent_dim
    net.geometry = (h, w)
    return net


def build_dcgan_discriminator(cfg: GanConfig, rng):
    """Four stride-2 5x5 convs then a single linear score."""
    h, w = cfg.geometry
    if h % 16 or w % 16:
        raise ShapeError(f"geometry {cfg.geometry} must survive four halvings")
    c, s = cfg.dcgan_d_base, GAN_INIT_STD
    chans = [cfg.in_ch, c, 2 * c, 4 * c, 8 * c]
    stack = []
    for i in range(4):
        stack += [Conv2D(5, 5, chans[i], chans[i + 1], stride=(2, 2),
                         pad=(2, 2), rng=rng, init_std=s),
                  LeakyReLU(0.2)]
    fh, fw = h // 16, w // 16
    stack += [Reshape((fh * fw * chans[4],)),
              Linear(fh * fw * chans[4], 1, rng=rng, init_std=s)]
    return Sequential(*stack)


def build_dcgan(cfg: GanConfig, rng):
    return build_dcgan_generator(cfg, rng), build_dcgan_discriminator(cfg, rng)


def train_dcgan(cfg: GanConfig, images, epochs: int, rng, out_dir=None,
                steps_per_epoch=None):
    """Least-squares objective on a single unconditional pair. Returns
    (generator, discriminator, history); history rows are
    (step, "d"/"g", [loss])."""
    if images.shape[0] == 0:
        raise DataError("need at least one training image")
    gen, disc = build_dcgan(cfg, rng)
    lr = cfg.lr if cfg.lr is not None else 2e-4
    opt_g = Adam(gen.parameters(), lr, cfg.beta1, cfg.beta2)
    opt_d = Adam(disc.parameters(), lr, cfg.beta1, cfg.beta2)
    if steps_per_epoch is None:
        steps_per_epoch = max(1, images.shape[0] // cfg.batch)
    history, step = [], 0
    for epoch in range(epochs):
        for _ in range(steps_per_epoch):
            z = rng.uniform(-1.0, 1.0, size=(cfg.batch, cfg.latent_dim))
            loss_d = _disc_update(disc, opt_d,
                                  _draw_batch(images, cfg.batch, cfg.geometry,
                                              cfg.flip, rng),
                                  gen.forward(z), "lsgan", cfg)
            gen.zero_grad()
            z = rng.uniform(-1.0, 1.0, size=(cfg.batch, cfg.latent_dim))
            fake = gen.forward(z)
            scores = disc.forward(fake)
            gen.backward(disc.backward(_mean_sq_grad(scores, 1.0)))
            opt_g.step()
            loss_g = lsgan_loss(None, scores, "generator")
            if not (np.isfinite(loss_d) and np.isfinite(loss_g)):
                raise DivergenceError(f"non-finite loss at step {step}")
            history.append((step, "d", [loss_d]))
            history.append((step, "g", [loss_g]))
            step += 1
        if out_dir is not None:
            save_checkpoint(f"{out_dir}/dcgan_epoch_{epoch + 1:03d}.ckpt", gen,
                            meta=_dcgan_meta(cfg))
    return gen, disc, history


def _dcgan_meta(cfg: GanConfig) -> dict:
    return {"kind": "dcgan-generator",
            "geometry": f"{cfg.geometry[0]} {cfg.geometry[1]}",
            "in_channels": str(cfg.in_ch),
            "latent_dim": str(cfg.latent_dim),
            "channels": str(cfg.dcgan_channels)}


def _build_dcgan_from_meta(meta, rng):
    h, w = (int(v) for v in meta["geometry"].split())
    cfg = GanConfig(geometry=(h, w), in_ch=int(meta["in_channels"]),
                    latent_dim=int(meta["latent_dim"]),
                    dcgan_channels=int(meta["channels"]))
    return build_dcgan_generator(cfg, rng)


def sample_dcgan(gen, n: int, rng) -> np.ndarray:
    """n unlabeled images from uniform(-1,1) latents, evaluation mode."""
    if n < 1:
        raise InvalidRangeError("sample count must be positive")
    z = rng.uniform(-1.0, 1.0, size=(n, gen.latent_dim))
    outs = [gen.forward(z[i:i + 32], train=False) for i in range(0, n, 32)]
    return np.concatenate(outs, axis=0)


register_builder("cycle-generator", _build_cycle_from_meta)
register_builder("dcgan-generator", _build_dcgan_from_meta)
