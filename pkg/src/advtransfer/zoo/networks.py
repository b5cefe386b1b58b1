"""Forward and backward passes for the four classifier families.

Parameters live in a flat ``dict[str, ndarray]``. Every family shares the embedding
stage (word rows, or a mean of character-trigram rows per word) and the output layer
``out_w``/``out_b``; the body between them is family specific. Gradients are exact
derivatives of the summed logits weighted by ``dlogits`` and are checked against
finite differences in the test suite.
"""

from __future__ import annotations

import numpy as np

from .spec import AVG_EMB_MLP, CONV_1D, LINEAR_BOW, RECURRENT, RANDOM, ModelSpec
from .vocab import Batch

CONV_WIDTH = 3


def _glorot(rng, fan_in, fan_out, shape):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


def init_params(
    spec: ModelSpec,
    vocab_size: int,
    dim: int,
    n_labels: int,
    rng: np.random.Generator,
    pretrained: np.ndarray | None = None,
    zero: bool = False,
) -> dict[str, np.ndarray]:
    """Seeded initialization. ``pretrained`` holds rows for PRETRAINED_FILE specs (NaN rows
    fall back to the random draw)."""
    p: dict[str, np.ndarray] = {}
    emb = rng.uniform(-0.1, 0.1, size=(vocab_size, dim))
    if spec.embedding_init != RANDOM and pretrained is not None:
        have = ~np.isnan(pretrained).any(axis=1)
        emb[have] = pretrained[have]
    p["emb"] = emb
    arch = spec.architecture
    if arch == LINEAR_BOW:
        for k in range(1, spec.depth):
            p[f"layer{k}_w"] = _glorot(rng, dim, dim, (dim, dim))
            p[f"layer{k}_b"] = np.zeros(dim)
    elif arch == AVG_EMB_MLP:
        for k in range(1, spec.depth + 1):
            p[f"layer{k}_w"] = _glorot(rng, dim, dim, (dim, dim))
            p[f"layer{k}_b"] = np.zeros(dim)
    elif arch == CONV_1D:
        for k in range(1, spec.depth + 1):
            p[f"layer{k}_w"] = _glorot(rng, CONV_WIDTH * dim, dim, (CONV_WIDTH, dim, dim))
            p[f"layer{k}_b"] = np.zeros(dim)
    elif arch == RECURRENT:
        for k in range(1, spec.depth + 1):
            p[f"layer{k}_w"] = _glorot(rng, dim, dim, (dim, dim))
            p[f"layer{k}_u"] = _glorot(rng, dim, dim, (dim, dim))
            p[f"layer{k}_b"] = np.zeros(dim)
    p["out_w"] = _glorot(rng, dim, n_labels, (n_labels, dim))
    p["out_b"] = np.zeros(n_labels)
    if zero:
        p = {k: np.zeros_like(v) for k, v in p.items()}
    return p


# -- embedding stage -----------------------------------------------------------


def _embed(emb, batch: Batch):
    B, T = batch.mask.shape
    return np.asarray(batch.pool @ emb).reshape(B, T, emb.shape[1])


def _embed_backward(batch: Batch, dx):
    return np.asarray(batch.pool.T @ dx.reshape(-1, dx.shape[-1]))


def _mean_pool(x, mask):
    lens = mask.sum(1, keepdims=True)
    return x.sum(1) / lens, lens


# -- convolution helpers -------------------------------------------------------


def _shifted(x):
    """Stack of the width-3 neighbourhood: (B, T, 3, D) with zero padding at the ends."""
    B, T, D = x.shape
    xp = np.zeros((B, T + 2, D))
    xp[:, 1:-1] = x
    return np.stack([xp[:, 0:T], xp[:, 1 : T + 1], xp[:, 2 : T + 2]], axis=2)


def _conv(xs, w):
    """``xs`` (B, T, K, D) with kernel ``w`` (K, E, D) -> (B, T, E)."""
    B, T, K, D = xs.shape
    w2 = w.transpose(0, 2, 1).reshape(K * D, w.shape[1])
    return (xs.reshape(B * T, K * D) @ w2).reshape(B, T, -1)


def _unshift(dxs):
    B, T, _, D = dxs.shape
    dxp = np.zeros((B, T + 2, D))
    dxp[:, 0:T] += dxs[:, :, 0]
    dxp[:, 1 : T + 1] += dxs[:, :, 1]
    dxp[:, 2 : T + 2] += dxs[:, :, 2]
    return dxp[:, 1:-1]


# -- forward / backward --------------------------------------------------------


def forward(params, spec: ModelSpec, batch: Batch, keep_cache: bool = False):
    """Return ``(logits, cache)``; ``cache`` is None unless ``keep_cache``."""
    x = _embed(params["emb"], batch)
    mask = batch.mask
    cache: dict = {"batch": batch}
    arch = spec.architecture

    if arch in (LINEAR_BOW, AVG_EMB_MLP):
        if arch == LINEAR_BOW:
            h, lens = x.sum(1), np.ones((x.shape[0], 1))
        else:
            h, lens = _mean_pool(x, mask)
        cache["lens"] = lens
        hs = [h]
        n_layers = spec.depth - 1 if arch == LINEAR_BOW else spec.depth
        for k in range(1, n_layers + 1):
            h = h @ params[f"layer{k}_w"].T + params[f"layer{k}_b"]
            if arch == AVG_EMB_MLP:
                h = np.tanh(h)
            hs.append(h)
        cache["hs"] = hs
    elif arch == CONV_1D:
        m = mask[..., None]
        acts, shifts = [x], []
        cur = x
        for k in range(1, spec.depth + 1):
            xs = _shifted(cur)
            y = np.tanh(_conv(xs, params[f"layer{k}_w"]) + params[f"layer{k}_b"]) * m
            shifts.append(xs)
            acts.append(y)
            cur = y
        masked = np.where(m > 0, cur, -np.inf)
        arg = masked.argmax(axis=1)  # (B, D), first max wins
        h = np.take_along_axis(cur, arg[:, None, :], axis=1)[:, 0]
        cache.update(acts=acts, shifts=shifts, arg=arg)
    elif arch == RECURRENT:
        B, T, D = x.shape
        seq = x
        layers = []
        for k in range(1, spec.depth + 1):
            W, U, b = params[f"layer{k}_w"], params[f"layer{k}_u"], params[f"layer{k}_b"]
            pre_in = seq @ W.T + b
            hs = np.zeros((B, T + 1, D))
            news = np.zeros((B, T, D))
            for t in range(T):
                new = np.tanh(pre_in[:, t] + hs[:, t] @ U.T)
                mt = mask[:, t, None]
                news[:, t] = new
                hs[:, t + 1] = mt * new + (1.0 - mt) * hs[:, t]
            layers.append((seq, hs, news))
            seq = hs[:, 1:] * mask[..., None]
        h = layers[-1][1][:, -1]
        cache["layers"] = layers
    else:  # pragma: no cover - guarded by ModelSpec
        raise ValueError(arch)

    cache["h"] = h
    logits = h @ params["out_w"].T + params["out_b"]
    return logits, (cache if keep_cache else None)


def backward(params, spec: ModelSpec, cache, dlogits):
    """Gradients of ``sum(dlogits * logits)`` with respect to every parameter."""
    g = {k: np.zeros_like(v) for k, v in params.items()}
    batch: Batch = cache["batch"]
    mask = batch.mask
    h = cache["h"]
    g["out_w"] = dlogits.T @ h
    g["out_b"] = dlogits.sum(0)
    dh = dlogits @ params["out_w"]
    arch = spec.architecture

    if arch in (LINEAR_BOW, AVG_EMB_MLP):
        hs = cache["hs"]
        for k in range(len(hs) - 1, 0, -1):
            if arch == AVG_EMB_MLP:
                dh = dh * (1.0 - hs[k] ** 2)
            g[f"layer{k}_w"] = dh.T @ hs[k - 1]
            g[f"layer{k}_b"] = dh.sum(0)
            dh = dh @ params[f"layer{k}_w"]
        dx = dh[:, None, :] * mask[..., None] / cache["lens"][..., None]
    elif arch == CONV_1D:
        acts, shifts, arg = cache["acts"], cache["shifts"], cache["arg"]
        top = acts[-1]
        dy = np.zeros_like(top)
        np.put_along_axis(dy, arg[:, None, :], dh[:, None, :], axis=1)
        m = mask[..., None]
        for k in range(spec.depth, 0, -1):
            y = acts[k]
            dpre = dy * m * (1.0 - y**2)
            xs = shifts[k - 1]
            B, T, K, D = xs.shape
            E = dpre.shape[-1]
            flat = dpre.reshape(-1, E)
            g[f"layer{k}_w"] = (flat.T @ xs.reshape(-1, K * D)).reshape(E, K, D).transpose(1, 0, 2)
            g[f"layer{k}_b"] = flat.sum(0)
            w2 = params[f"layer{k}_w"].transpose(0, 2, 1).reshape(K * D, E)
            dy = _unshift((flat @ w2.T).reshape(B, T, K, D))
            if k > 1:
                dy = dy * m
        dx = dy
    elif arch == RECURRENT:
        layers = cache["layers"]
        B, T, D = layers[0][0].shape
        dseq_out = np.zeros((B, T, D))
        dh_final = dh
        for k in range(spec.depth, 0, -1):
            seq, hs, news = layers[k - 1]
            W, U = params[f"layer{k}_w"], params[f"layer{k}_u"]
            dW, dU, db = np.zeros_like(W), np.zeros_like(U), np.zeros(D)
            dseq = np.zeros((B, T, D))
            # gradient arriving at each output state from the layer above
            upstream = dseq_out * mask[..., None] if k < spec.depth else None
            dcarry = dh_final if k == spec.depth else np.zeros((B, D))
            for t in range(T - 1, -1, -1):
                if upstream is not None:
                    dcarry = dcarry + upstream[:, t]
                mt = mask[:, t, None]
                dnew = dcarry * mt
                dpre = dnew * (1.0 - news[:, t] ** 2)
                dW += dpre.T @ seq[:, t]
                dU += dpre.T @ hs[:, t]
                db += dpre.sum(0)
                dseq[:, t] = dpre @ W
                dcarry = dcarry * (1.0 - mt) + dpre @ U
            g[f"layer{k}_w"], g[f"layer{k}_u"], g[f"layer{k}_b"] = dW, dU, db
            dseq_out = dseq
        dx = dseq_out
    else:  # pragma: no cover
        raise ValueError(arch)

    g["emb"] = _embed_backward(batch, dx)
    return g


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grads(params, spec: ModelSpec, batch: Batch, labels: np.ndarray):
    """Mean cross-entropy over the batch and its parameter gradients."""
    logits, cache = forward(params, spec, batch, keep_cache=True)
    logp = log_softmax(logits)
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, logits, backward(params, spec, cache, dlogits)
