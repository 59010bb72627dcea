"""Independent numpy forward pass for the scorer architectures.

Parameters are filled with 0.5*sin(0.7*k + 1.3*p + 0.1), where p is the
tensor's creation index and k the row-major element index. The printed
values are frozen into tests/unit/test_forward_oracle.cpp.
"""
import math
import numpy as np

H, HEADS, LAYERS, FFN, VOCAB, MAXPOS = 4, 2, 2, 6, 10, 8
CLS = 2


def fill(shapes):
    out = {}
    for p, (name, shape) in enumerate(shapes):
        k = np.arange(shape[0] * shape[1], dtype=np.float64)
        out[name] = (0.5 * np.sin(0.7 * k + 1.3 * p + 0.1)).reshape(shape)
    return out


def attention_shapes(prefix):
    s = []
    for part in ("query", "key", "value", "output"):
        s += [(prefix + part + ".weight", (H, H)), (prefix + part + ".bias", (1, H))]
    return s


def norm_shapes(prefix):
    return [(prefix + "gain", (1, H)), (prefix + "bias", (1, H))]


def ffn_shapes(prefix):
    return [(prefix + "in.weight", (H, FFN)), (prefix + "in.bias", (1, FFN)),
            (prefix + "out.weight", (FFN, H)), (prefix + "out.bias", (1, H))]


def shapes_for(arch):
    s = [("embeddings.token", (VOCAB, H)), ("embeddings.position", (MAXPOS, H))]
    for l in range(LAYERS):
        p = "encoder.layer%d." % l
        s += attention_shapes(p + "attention.") + norm_shapes(p + "attention_norm.")
        s += ffn_shapes(p + "ffn.") + norm_shapes(p + "ffn_norm.")
    s += [("head.weight", (H, 1)), ("head.bias", (1, 1))]
    if arch in ("early", "late"):
        s += [("embeddings.slot", (1, H))]
    if arch == "xattn":
        s += attention_shapes("decoder.self_attention.") + norm_shapes("decoder.self_norm.")
        s += attention_shapes("decoder.cross_attention.") + norm_shapes("decoder.cross_norm.")
        s += ffn_shapes("decoder.ffn.") + norm_shapes("decoder.ffn_norm.")
    return s


def gelu(x):
    return 0.5 * x * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0)))


def layer_norm(x, g, b, eps=1e-12):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * g + b


def softmax(s):
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def mha(P, prefix, xq, xkv):
    q = xq @ P[prefix + "query.weight"] + P[prefix + "query.bias"]
    k = xkv @ P[prefix + "key.weight"] + P[prefix + "key.bias"]
    v = xkv @ P[prefix + "value.weight"] + P[prefix + "value.bias"]
    hd = H // HEADS
    heads = []
    for h in range(HEADS):
        c = slice(h * hd, (h + 1) * hd)
        heads.append(softmax(q[:, c] @ k[:, c].T / math.sqrt(hd)) @ v[:, c])
    return np.concatenate(heads, axis=1) @ P[prefix + "output.weight"] + P[prefix + "output.bias"]


def ffn(P, prefix, x):
    return gelu(x @ P[prefix + "in.weight"] + P[prefix + "in.bias"]) @ P[prefix + "out.weight"] + P[prefix + "out.bias"]


def encode(P, arch, tokens, tags=None):
    x = P["embeddings.token"][tokens] + P["embeddings.position"][: len(tokens)]
    slot = np.array(tags, dtype=np.float64)[:, None] * P["embeddings.slot"] if tags else None
    if arch == "early" and tags:
        x = x + slot
    for l in range(LAYERS):
        if arch == "late" and tags and l == LAYERS - 1:
            x = x + slot
        p = "encoder.layer%d." % l
        x = layer_norm(x + mha(P, p + "attention.", x, x), P[p + "attention_norm.gain"], P[p + "attention_norm.bias"])
        x = layer_norm(x + ffn(P, p + "ffn.", x), P[p + "ffn_norm.gain"], P[p + "ffn_norm.bias"])
    return x


def score(arch, tokens, tags=None, slots=None):
    P = fill(shapes_for(arch))
    seq = [CLS] + tokens
    if tags:
        tags = [0] + tags
    x = encode(P, arch, seq, tags)
    if arch == "xattn":
        z = encode(P, arch, slots)
        d = "decoder."
        x = layer_norm(x + mha(P, d + "self_attention.", x, x), P[d + "self_norm.gain"], P[d + "self_norm.bias"])
        x = layer_norm(x + mha(P, d + "cross_attention.", x, z), P[d + "cross_norm.gain"], P[d + "cross_norm.bias"])
        x = layer_norm(x + ffn(P, d + "ffn.", x), P[d + "ffn_norm.gain"], P[d + "ffn_norm.bias"])
    return (x[0:1] @ P["head.weight"] + P["head.bias"])[0, 0]


if __name__ == "__main__":
    print("baseline %.17g" % score("baseline", [5, 7]))
    print("baseline_long %.17g" % score("baseline", [4, 9, 6, 8, 5]))
    print("early %.17g" % score("early", [5, 7, 9], [1, 1, 0]))
    print("late %.17g" % score("late", [5, 7, 9], [1, 1, 0]))
    print("xattn %.17g" % score("xattn", [5, 7], slots=[2, 6, 3]))
    print("xattn_cls_only %.17g" % score("xattn", [5, 7], slots=[2]))
