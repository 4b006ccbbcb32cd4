"""A small pre-norm encoder-decoder transformer, written functionally over named tensors.

Parameters live in a :class:`ParameterSet` (name -> float32 tensor); every
entry point takes the parameter set explicitly, so inference over a loaded
checkpoint never mutates shared state.
"""
from __future__ import annotations

import json
import math
import random
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .errors import (CheckpointError, ConfigError, DivergenceError, PositionError,
                     VocabularyError)

PAD_ID, BOS_ID, EOS_ID = 0, 1, 2
NEG_INF = -1e9
CKPT_MAGIC = "#s2sfe-ckpt v1"


@dataclass(frozen=True)
class TransformerConfig:
    num_layers: int = 2
    num_heads: int = 2
    embed_dim: int = 64
    ffn_dim: int = 128
    vocab_size: int = 64
    max_positions: int = 256
    dropout: float = 0.0

    def __post_init__(self):
        for name in ("num_layers", "num_heads", "embed_dim", "ffn_dim", "vocab_size",
                     "max_positions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.embed_dim % self.num_heads:
            raise ConfigError(f"embed_dim {self.embed_dim} is not divisible by "
                              f"num_heads {self.num_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")

    @classmethod
    def base(cls, vocab_size: int, max_positions: int = 1024) -> "TransformerConfig":
        return cls(num_layers=6, num_heads=8, embed_dim=512, ffn_dim=2048,
                   vocab_size=vocab_size, max_positions=max_positions, dropout=0.1)

    @classmethod
    def desk(cls, vocab_size: int, max_positions: int = 256) -> "TransformerConfig":
        return cls(num_layers=2, num_heads=2, embed_dim=64, ffn_dim=128,
                   vocab_size=vocab_size, max_positions=max_positions)


def _attn_shapes(prefix, d):
    return [(f"{prefix}.q.w", (d, d)), (f"{prefix}.q.b", (d,)),
            (f"{prefix}.k.w", (d, d)), (f"{prefix}.k.b", (d,)),
            (f"{prefix}.v.w", (d, d)), (f"{prefix}.v.b", (d,)),
            (f"{prefix}.o.w", (d, d)), (f"{prefix}.o.b", (d,))]


def _ln_shapes(prefix, d):
    return [(f"{prefix}.g", (d,)), (f"{prefix}.b", (d,))]


def _ffn_shapes(prefix, d, f):
    return [(f"{prefix}.w1", (d, f)), (f"{prefix}.b1", (f,)),
            (f"{prefix}.w2", (f, d)), (f"{prefix}.b2", (d,))]


def parameter_layout(config: TransformerConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) list. The decoder embedding doubles as the output projection."""
    d, f, v = config.embed_dim, config.ffn_dim, config.vocab_size
    layout = [("enc.embed", (v, d))]
    for i in range(config.num_layers):
        p = f"enc.{i}"
        layout += _ln_shapes(f"{p}.ln1", d) + _attn_shapes(f"{p}.self", d)
        layout += _ln_shapes(f"{p}.ln2", d) + _ffn_shapes(f"{p}.ffn", d, f)
    layout += _ln_shapes("enc.ln_f", d)
    layout.append(("dec.embed", (v, d)))
    for i in range(config.num_layers):
        p = f"dec.{i}"
        layout += _ln_shapes(f"{p}.ln1", d) + _attn_shapes(f"{p}.self", d)
        layout += _ln_shapes(f"{p}.ln2", d) + _attn_shapes(f"{p}.cross", d)
        layout += _ln_shapes(f"{p}.ln3", d) + _ffn_shapes(f"{p}.ffn", d, f)
    layout += _ln_shapes("dec.ln_f", d)
    return layout


@dataclass
class ParameterSet:
    config: TransformerConfig
    tensors: "OrderedDict[str, torch.Tensor]"

    def __getitem__(self, name: str) -> torch.Tensor:
        return self.tensors[name]

    def num_parameters(self) -> int:
        return sum(t.numel() for t in self.tensors.values())

    def clone(self) -> "ParameterSet":
        return ParameterSet(self.config, OrderedDict(
            (k, t.detach().clone()) for k, t in self.tensors.items()))

    def to_bytes(self) -> bytes:
        return b"".join(t.detach().contiguous().numpy().astype("<f4").tobytes()
                        for t in self.tensors.values())

    def all_finite(self) -> bool:
        return all(bool(torch.isfinite(t).all()) for t in self.tensors.values())

    def save(self, path, extra: dict | None = None) -> None:
        save_checkpoint(self, path, extra)

    @classmethod
    def load(cls, path) -> "ParameterSet":
        return load_checkpoint(path)[0]


def init(config: TransformerConfig, seed: int = 0) -> ParameterSet:
    """Scaled-uniform (Glorot) weights, zero biases, unit layer-norm gains."""
    gen = torch.Generator().manual_seed(seed)
    tensors = OrderedDict()
    for name, shape in parameter_layout(config):
        leaf = name.rsplit(".", 1)[-1]
        if len(shape) == 2:
            bound = math.sqrt(6.0 / (shape[0] + shape[1]))
            t = (torch.rand(shape, generator=gen, dtype=torch.float32) * 2 - 1) * bound
        elif leaf == "g":
            t = torch.ones(shape, dtype=torch.float32)
        else:
            t = torch.zeros(shape, dtype=torch.float32)
        tensors[name] = t
    return ParameterSet(config, tensors)


# -- forward -----------------------------------------------------------------

def sinusoidal_positions(n: int, d: int, dtype=torch.float32) -> torch.Tensor:
    pos = torch.arange(n, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(torch.arange(0, d, 2, dtype=torch.float64) * (-math.log(10000.0) / d))
    pe = torch.zeros(n, d, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(pos * div)
    pe[:, 1::2] = torch.cos(pos * div)[:, : d // 2]
    return pe.to(dtype)


_PE_CACHE: dict = {}


def _positions(n: int, d: int, dtype) -> torch.Tensor:
    key = (n, d, dtype)
    pe = _PE_CACHE.get(key)
    if pe is None:
        pe = _PE_CACHE[key] = sinusoidal_positions(n, d, dtype)
    return pe


def _attention(p, prefix, x, kv, mask, num_heads):
    b, tq, d = x.shape
    tk = kv.shape[1]
    dh = d // num_heads
    q = (x @ p[f"{prefix}.q.w"] + p[f"{prefix}.q.b"]).view(b, tq, num_heads, dh).transpose(1, 2)
    k = (kv @ p[f"{prefix}.k.w"] + p[f"{prefix}.k.b"]).view(b, tk, num_heads, dh).transpose(1, 2)
    v = (kv @ p[f"{prefix}.v.w"] + p[f"{prefix}.v.b"]).view(b, tk, num_heads, dh).transpose(1, 2)
    scores = (q @ k.transpose(-1, -2)) / math.sqrt(dh)
    scores = scores.masked_fill(mask, NEG_INF)
    out = torch.softmax(scores, dim=-1) @ v
    out = out.transpose(1, 2).reshape(b, tq, d)
    return out @ p[f"{prefix}.o.w"] + p[f"{prefix}.o.b"]


def _ln(p, prefix, x):
    return F.layer_norm(x, (x.shape[-1],), p[f"{prefix}.g"], p[f"{prefix}.b"], eps=1e-5)


def _ffn(p, prefix, x):
    h = F.gelu(x @ p[f"{prefix}.w1"] + p[f"{prefix}.b1"])
    return h @ p[f"{prefix}.w2"] + p[f"{prefix}.b2"]


def _embed(table, ids, d):
    x = F.embedding(ids, table) * math.sqrt(d)
    return x + _positions(ids.shape[1], d, table.dtype)


def _drop(x, rate, training):
    return F.dropout(x, rate, training=True) if training and rate > 0 else x


def encode_batch(p, config: TransformerConfig, src: torch.Tensor, training: bool = False):
    """src: (B, S) ids, PAD-padded. Returns (memory, key padding mask)."""
    d, h = config.embed_dim, config.num_heads
    pad = (src == PAD_ID)
    mask = pad[:, None, None, :]
    x = _drop(_embed(p["enc.embed"], src, d), config.dropout, training)
    for i in range(config.num_layers):
        pre = f"enc.{i}"
        y = _ln(p, f"{pre}.ln1", x)
        x = x + _drop(_attention(p, f"{pre}.self", y, y, mask, h), config.dropout, training)
        y = _ln(p, f"{pre}.ln2", x)
        x = x + _drop(_ffn(p, f"{pre}.ffn", y), config.dropout, training)
    return _ln(p, "enc.ln_f", x), mask


def decode_batch(p, config: TransformerConfig, tgt: torch.Tensor, memory, mem_mask,
                 training: bool = False):
    """tgt: (B, T) decoder input ids starting with BOS. Returns logits (B, T, V)."""
    d, h = config.embed_dim, config.num_heads
    t = tgt.shape[1]
    causal = torch.ones(t, t, dtype=torch.bool).triu(1)[None, None]
    x = _drop(_embed(p["dec.embed"], tgt, d), config.dropout, training)
    for i in range(config.num_layers):
        pre = f"dec.{i}"
        y = _ln(p, f"{pre}.ln1", x)
        x = x + _drop(_attention(p, f"{pre}.self", y, y, causal, h), config.dropout, training)
        y = _ln(p, f"{pre}.ln2", x)
        x = x + _drop(_attention(p, f"{pre}.cross", y, memory, mem_mask, h),
                      config.dropout, training)
        y = _ln(p, f"{pre}.ln3", x)
        x = x + _drop(_ffn(p, f"{pre}.ffn", y), config.dropout, training)
    x = _ln(p, "dec.ln_f", x)
    return x @ p["dec.embed"].t()


def _check_ids(config: TransformerConfig, ids: Sequence[int], what: str):
    for i in ids:
        if not 0 <= i < config.vocab_size:
            raise VocabularyError(f"{what} id {i} outside vocabulary of {config.vocab_size}")
    if len(ids) > config.max_positions:
        raise PositionError(f"{what} length {len(ids)} exceeds max_positions "
                            f"{config.max_positions}")


def forward(params: ParameterSet, src: Sequence[int], tgt_prefix: Sequence[int]) -> torch.Tensor:
    """Logits of shape (len(tgt_prefix), vocab_size); row t sees tgt_prefix[:t + 1] only."""
    cfg = params.config
    _check_ids(cfg, src, "source")
    _check_ids(cfg, tgt_prefix, "target")
    with torch.no_grad():
        s = torch.tensor([list(src)], dtype=torch.long)
        t = torch.tensor([list(tgt_prefix)], dtype=torch.long)
        mem, mask = encode_batch(params.tensors, cfg, s)
        return decode_batch(params.tensors, cfg, t, mem, mask)[0]


# -- batching & loss -----------------------------------------------------------

Pair = tuple[Sequence[int], Sequence[int]]


def _pad(rows: Sequence[Sequence[int]]) -> torch.Tensor:
    width = max(len(r) for r in rows)
    out = torch.full((len(rows), width), PAD_ID, dtype=torch.long)
    for i, r in enumerate(rows):
        if r:
            out[i, :len(r)] = torch.tensor(r, dtype=torch.long)
    return out


def make_batch(pairs: Sequence[Pair]):
    """Source gets EOS appended; target is shifted into BOS+y inputs and y+EOS labels."""
    src = _pad([list(s) + [EOS_ID] for s, _ in pairs])
    tgt_in = _pad([[BOS_ID] + list(t) for _, t in pairs])
    tgt_out = _pad([list(t) + [EOS_ID] for _, t in pairs])
    return src, tgt_in, tgt_out


def batch_loss(p, config: TransformerConfig, batch, training: bool = False) -> torch.Tensor:
    """Mean token cross-entropy over non-PAD labels."""
    src, tgt_in, tgt_out = batch
    mem, mask = encode_batch(p, config, src, training)
    logits = decode_batch(p, config, tgt_in, mem, mask, training)
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), tgt_out.reshape(-1),
                           ignore_index=PAD_ID, reduction="mean")


def loss(params: ParameterSet, pairs: Sequence[Pair]) -> float:
    with torch.no_grad():
        return float(batch_loss(params.tensors, params.config, make_batch(pairs)))


def corpus_loss(params: ParameterSet, pairs: Sequence[Pair], batch_size: int = 256) -> float:
    """Token-weighted mean cross-entropy over a whole corpus."""
    total, count = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(pairs), batch_size):
            chunk = pairs[i:i + batch_size]
            n = sum(len(t) + 1 for _, t in chunk)
            total += float(batch_loss(params.tensors, params.config, make_batch(chunk))) * n
            count += n
    return total / max(count, 1)


# -- training ------------------------------------------------------------------

@dataclass
class TrainSpec:
    learning_rate: float = 0.5
    batch_size: int = 64
    max_steps: int = 1000
    seed: int = 0
    warmup_steps: int = 0
    # plateau stopping on a validation set; 0 disables it
    eval_every: int = 0
    patience: int = 3
    min_delta: float = 1e-3
    log_every: int = 0

    def __post_init__(self):
        # lr = 0 is accepted as a no-op run
        if not self.learning_rate >= 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ConfigError("batch_size must be >= 1 and max_steps >= 0")

    def lr_at(self, step: int) -> float:
        if self.warmup_steps > 0:
            return self.learning_rate * min(1.0, (step + 1) / self.warmup_steps)
        return self.learning_rate


@dataclass
class LossCurve:
    train: list[float] = field(default_factory=list)
    valid: list[tuple[int, float]] = field(default_factory=list)
    stopped_at: int = 0
    best_step: int = 0


def _batches(n: int, batch_size: int, rng: random.Random):
    while True:
        order = list(range(n))
        rng.shuffle(order)
        for i in range(0, n, batch_size):
            yield order[i:i + batch_size]


def train(params: ParameterSet, corpus: Sequence[Pair], spec: TrainSpec,
          valid: Sequence[Pair] | None = None, log=None) -> tuple[ParameterSet, LossCurve]:
    """Teacher-forced cross-entropy, minimized with plain SGD: ``w <- w - lr * g``.

    With ``spec.eval_every`` and a validation set, training stops once the
    validation loss has not improved by ``min_delta`` for ``patience``
    evaluations, and the best-scoring parameters are returned.
    """
    cfg = params.config
    if not corpus:
        raise ValueError("empty training corpus")
    for s, t in corpus:
        if len(s) + 1 > cfg.max_positions or len(t) + 1 > cfg.max_positions:
            raise PositionError(f"pair of lengths {len(s)}, {len(t)} does not fit "
                                f"max_positions {cfg.max_positions} with BOS/EOS")
    work = params.clone()
    tensors = work.tensors
    for t in tensors.values():
        t.requires_grad_(True)
    rng = random.Random(spec.seed)
    torch.manual_seed(spec.seed)
    curve = LossCurve()
    best = None
    best_valid = math.inf
    bad = 0
    batches = _batches(len(corpus), spec.batch_size, rng)
    step = 0
    for step in range(spec.max_steps):
        idx = next(batches)
        rows = [corpus[i] for i in idx]
        if all(t == PAD_ID for _, y in rows for t in y):
            raise DivergenceError(step, "batch has no target tokens")
        batch = make_batch(rows)
        value = batch_loss(tensors, cfg, batch, training=True)
        lv = float(value.detach())
        if not math.isfinite(lv):
            raise DivergenceError(step)
        curve.train.append(lv)
        grads = torch.autograd.grad(value, list(tensors.values()))
        lr = spec.lr_at(step)
        with torch.no_grad():
            for t, g in zip(tensors.values(), grads):
                t.sub_(lr * g)
        if log and spec.log_every and (step + 1) % spec.log_every == 0:
            log(f"step {step + 1} loss {lv:.4f}")
        if valid and spec.eval_every and (step + 1) % spec.eval_every == 0:
            vl = corpus_loss(work, valid)
            curve.valid.append((step + 1, vl))
            if log:
                log(f"step {step + 1} valid loss {vl:.4f}")
            if vl < best_valid - spec.min_delta:
                best_valid = vl
                best = work.clone()
                curve.best_step = step + 1
                bad = 0
            else:
                bad += 1
                if bad >= spec.patience:
                    break
    curve.stopped_at = step + 1 if spec.max_steps else 0
    result = best if best is not None else work
    for t in result.tensors.values():
        t.requires_grad_(False)
    return result.clone(), curve


# -- decoding ------------------------------------------------------------------

def _argmax_lowest(row: torch.Tensor) -> torch.Tensor:
    # torch.argmax returns the first maximal index, i.e. the lowest id on ties
    return torch.argmax(row, dim=-1)


def greedy_decode_batch(params: ParameterSet, sources: Sequence[Sequence[int]],
                        max_len: int) -> list[list[int]]:
    cfg = params.config
    if not sources:
        return []
    for s in sources:
        _check_ids(cfg, list(s) + [EOS_ID], "source")
    max_len = min(max_len, cfg.max_positions - 1)
    if max_len <= 0:
        return [[] for _ in sources]
    p = params.tensors
    with torch.no_grad():
        src = _pad([list(s) + [EOS_ID] for s in sources])
        mem, mask = encode_batch(p, cfg, src)
        ys = torch.full((len(sources), 1), BOS_ID, dtype=torch.long)
        done = torch.zeros(len(sources), dtype=torch.bool)
        for _ in range(max_len):
            logits = decode_batch(p, cfg, ys, mem, mask)[:, -1]
            nxt = _argmax_lowest(logits)
            nxt = torch.where(done, torch.full_like(nxt, PAD_ID), nxt)
            ys = torch.cat([ys, nxt[:, None]], dim=1)
            done |= nxt == EOS_ID
            if bool(done.all()):
                break
    out = []
    for row in ys[:, 1:].tolist():
        seq = []
        for tok in row:
            if tok in (EOS_ID, PAD_ID):
                break
            seq.append(tok)
        out.append(seq)
    return out


def greedy_decode(params: ParameterSet, src: Sequence[int], max_len: int) -> list[int]:
    """Argmax decoding from BOS until EOS or ``max_len`` tokens; ties go to the lowest id."""
    return greedy_decode_batch(params, [src], max_len)[0]


def sequence_score(params: ParameterSet, src: Sequence[int], out: Sequence[int],
                   finished: bool = True) -> float:
    """Length-normalized log-probability; a finished hypothesis includes its EOS step."""
    steps = list(out) + ([EOS_ID] if finished else [])
    if not steps:
        return 0.0
    logits = forward(params, list(src) + [EOS_ID], [BOS_ID] + steps[:-1])
    logp = torch.log_softmax(logits.double(), dim=-1)
    total = float(sum(logp[i, tok] for i, tok in enumerate(steps)))
    return total / len(steps)


def beam_decode(params: ParameterSet, src: Sequence[int], beam: int, max_len: int
                ) -> list[int]:
    """Beam search scored by summed log-probability divided by hypothesis length.

    The greedy hypothesis is always part of the final candidate pool, so a
    wider beam never returns a lower-scoring result than ``beam=1``.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    return beam_search(params, src, beam, max_len)[0]


def beam_search(params: ParameterSet, src: Sequence[int], beam: int, max_len: int
                ) -> tuple[list[int], float]:
    if beam < 1:
        raise ValueError("beam must be >= 1")
    cfg = params.config
    _check_ids(cfg, list(src) + [EOS_ID], "source")
    max_len = min(max_len, cfg.max_positions - 1)
    if max_len <= 0:
        return [], 0.0
    p = params.tensors
    with torch.no_grad():
        s = torch.tensor([list(src) + [EOS_ID]], dtype=torch.long)
        mem, mask = encode_batch(p, cfg, s)
        live: list[tuple[list[int], float]] = [([], 0.0)]
        finished: list[tuple[list[int], float]] = []
        for _ in range(max_len):
            ys = torch.tensor([[BOS_ID] + toks for toks, _ in live], dtype=torch.long)
            m = mem.expand(len(live), -1, -1)
            mk = mask.expand(len(live), -1, -1, -1)
            logp = torch.log_softmax(decode_batch(p, cfg, ys, m, mk)[:, -1].double(), dim=-1)
            cands = []
            for h, (toks, raw) in enumerate(live):
                top = torch.topk(logp[h], min(beam, logp.shape[1]))
                for val, tok in zip(top.values.tolist(), top.indices.tolist()):
                    cands.append((raw + val, h, tok))
            # higher score first, then earlier hypothesis, then lower token id
            cands.sort(key=lambda c: (-c[0], c[1], c[2]))
            nxt = []
            for raw, h, tok in cands[:beam]:
                prev = live[h][0]
                if tok == EOS_ID:
                    finished.append((prev, raw / (len(prev) + 1)))
                else:
                    nxt.append((prev + [tok], raw))
            live = nxt
            if not live or len(finished) >= beam:
                break
        pool = list(finished)
        pool += [(toks, raw / len(toks)) for toks, raw in live if len(toks) >= max_len]
    pool.append((greedy_decode(params, src, max_len), 0.0))
    # rescore every candidate the same way so ties compare exactly
    scored = []
    for toks, _ in pool:
        if toks not in (t for t, _ in scored):
            scored.append((toks, sequence_score(params, src, toks,
                                                finished=len(toks) < max_len)))
    scored.sort(key=lambda c: -c[1])
    return scored[0][0], scored[0][1]


# -- gradient check ------------------------------------------------------------

def analytic_gradients(params: ParameterSet, pairs: Sequence[Pair]) -> dict[str, torch.Tensor]:
    tensors = OrderedDict((k, t.detach().clone().requires_grad_(True))
                          for k, t in params.tensors.items())
    value = batch_loss(tensors, params.config, make_batch(pairs))
    grads = torch.autograd.grad(value, list(tensors.values()), allow_unused=True)
    return {k: (g if g is not None else torch.zeros_like(t))
            for (k, t), g in zip(tensors.items(), grads)}


def sample_coordinates(params: ParameterSet, n: int = 200, seed: int = 0,
                       used_ids: Sequence[int] | None = None) -> list[tuple[str, int]]:
    """At least ``n`` flat coordinates, spread so every tensor contributes.

    With ``used_ids``, embedding coordinates are drawn from those rows only.
    """
    rng = random.Random(seed)
    names = list(params.tensors)
    per = max(1, math.ceil(n / len(names)))
    coords = []
    for name in names:
        t = params.tensors[name]
        if used_ids is not None and name.endswith(".embed"):
            d = t.shape[1]
            pool = [r * d + c for r in sorted(set(used_ids)) for c in range(d)]
        else:
            pool = range(t.numel())
        picks = rng.sample(pool, min(per, len(pool)))
        coords += [(name, i) for i in picks]
    return coords


def grad_check(params: ParameterSet, batch: Sequence[Pair], epsilon: float = 1e-3,
               n_coords: int = 200, seed: int = 0, floor: float = 1e-4) -> float:
    """Max relative error between float32 autograd and central differences.

    The difference quotient is evaluated in float64 on an exact copy of the
    float32 parameters; in float32 the rounding of the loss alone is of the
    order of ``ulp(loss) / epsilon``, which swamps the 1e-3 target. Relative
    error is ``|a - n| / max(|a|, |n|, floor)``: below the floor, agreement
    is judged absolutely (to ``1e-3 * floor``). Float32 rounding of the
    analytic gradient and the eps^2 truncation of the difference quotient
    each leave ~1e-8 on coordinates whose true gradient is zero or tiny, such
    as attention key biases whose effect the softmax cancels.
    """
    if params.config.dropout:
        raise ConfigError("grad_check requires dropout disabled")
    analytic = analytic_gradients(params, batch)
    cfg = params.config
    data = make_batch(batch)
    base = OrderedDict((k, t.detach().double().clone()) for k, t in params.tensors.items())
    worst = 0.0
    with torch.no_grad():
        used = [i for s, t in batch for i in list(s) + list(t)] + [BOS_ID, EOS_ID]
        for name, flat in sample_coordinates(params, n_coords, seed, used):
            view = base[name].view(-1)
            orig = view[flat].item()
            view[flat] = orig + epsilon
            up = float(batch_loss(base, cfg, data))
            view[flat] = orig - epsilon
            down = float(batch_loss(base, cfg, data))
            view[flat] = orig
            numeric = (up - down) / (2 * epsilon)
            a = float(analytic[name].view(-1)[flat])
            denom = max(abs(a), abs(numeric), floor)
            worst = max(worst, abs(a - numeric) / denom)
    return worst


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(params: ParameterSet, path, extra: dict | None = None) -> None:
    """Magic line, one JSON manifest line, then little-endian f32 payloads in manifest order."""
    entries = []
    offset = 0
    for name, t in params.tensors.items():
        nbytes = t.numel() * 4
        entries.append({"name": name, "shape": list(t.shape), "dtype": "f32",
                        "offset": offset})
        offset += nbytes
    header = {"config": asdict(params.config), "tensors": entries}
    if extra:
        header["extra"] = extra
    with open(path, "wb") as fh:
        fh.write((CKPT_MAGIC + "\n").encode("ascii"))
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(params.to_bytes())


def load_checkpoint(path) -> tuple[ParameterSet, dict]:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii", "replace").rstrip("\n")
        if magic != CKPT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (header {magic!r})")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{path}: bad manifest: {exc}") from None
        payload = fh.read()
    config = TransformerConfig(**header["config"])
    expected = parameter_layout(config)
    entries = header["tensors"]
    if [(e["name"], tuple(e["shape"])) for e in entries] != expected:
        raise CheckpointError(f"{path}: manifest does not match the config layout")
    tensors = OrderedDict()
    for e in entries:
        if e["dtype"] != "f32":
            raise CheckpointError(f"{path}: unsupported dtype {e['dtype']}")
        n = int(np.prod(e["shape"]))
        start, end = e["offset"], e["offset"] + 4 * n
        if end > len(payload):
            raise CheckpointError(f"{path}: truncated payload for {e['name']}")
        arr = np.frombuffer(payload, dtype="<f4", count=n, offset=start).astype(np.float32)
        tensors[e["name"]] = torch.from_numpy(arr.reshape(e["shape"]).copy())
    return ParameterSet(config, tensors), header.get("extra", {})
