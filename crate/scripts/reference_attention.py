#!/usr/bin/env python3
"""Produce forward-pass goldens with Hugging Face `GPT2Model`.

Weights are regenerated from the same counter-based splitmix64 recipe as
`headscope::model::synthetic`, loaded into an eager-attention GPT2Model, and
the attention probabilities (plus one query/key probe per config) are saved
as safetensors under fixtures/model/.

    python3 scripts/reference_attention.py
"""
import json
import os

import numpy as np
import torch
from safetensors.numpy import save_file
from transformers import GPT2Config, GPT2Model, GPT2Tokenizer

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
SEED = 20190601

SENTENCES = [
    "The Baptist World Alliance (BWA) opened a library.",
    "Production began in Marietta, Georgia.",
    "The committee didn't approve the survey.",
    "Hello",
    "Fisher, who restored the canal, retired in 1949 and moved to Towson.",
]

CONFIGS = {
    "tiny": dict(n_layers=2, n_heads=4, d_model=32, n_ctx=64, probe=(1, 2)),
    "gpt2_small_shape": dict(n_layers=12, n_heads=12, d_model=768, n_ctx=1024, probe=(8, 6)),
}


def mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def fnv1a(name):
    h = 0xCBF29CE484222325
    for b in name.encode():
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def seeded_values(seed, name, n, offset, scale):
    base = np.uint64(seed ^ fnv1a(name))
    with np.errstate(over="ignore"):
        k = np.arange(1, n + 1, dtype=np.uint64)
        z = mix(base + k * GOLDEN)
    unit = (z >> np.uint64(40)).astype(np.float32) / np.float32(16777216.0)
    two, one = np.float32(2.0), np.float32(1.0)
    return np.float32(offset) + np.float32(scale) * (two * unit - one)


def init_range(name, d):
    root = np.sqrt(np.float32(d))
    norm = "ln_" in name
    if name == "wte.weight":
        return 0.0, np.float32(0.5)
    if name == "wpe.weight":
        return 0.0, np.float32(0.2)
    if norm and name.endswith(".weight"):
        return 1.0, np.float32(0.2)
    if norm:
        return 0.0, np.float32(0.1)
    if name.endswith("attn.c_attn.weight"):
        return 0.0, np.float32(3.0) / root
    if name.endswith("attn.c_attn.bias"):
        return 0.0, np.float32(0.1)
    if name.endswith("mlp.c_proj.weight"):
        return 0.0, np.float32(1.0) / (np.float32(2.0) * root)
    if name.endswith(".weight"):
        return 0.0, np.float32(1.0) / root
    return 0.0, np.float32(0.05)


def required(c, vocab):
    d = c["d_model"]
    out = [("wte.weight", (vocab, d)), ("wpe.weight", (c["n_ctx"], d))]
    for l in range(c["n_layers"]):
        p = f"h.{l}."
        out += [
            (p + "ln_1.weight", (d,)), (p + "ln_1.bias", (d,)),
            (p + "attn.c_attn.weight", (d, 3 * d)), (p + "attn.c_attn.bias", (3 * d,)),
            (p + "attn.c_proj.weight", (d, d)), (p + "attn.c_proj.bias", (d,)),
            (p + "ln_2.weight", (d,)), (p + "ln_2.bias", (d,)),
            (p + "mlp.c_fc.weight", (d, 4 * d)), (p + "mlp.c_fc.bias", (4 * d,)),
            (p + "mlp.c_proj.weight", (4 * d, d)), (p + "mlp.c_proj.bias", (d,)),
        ]
    return out + [("ln_f.weight", (d,)), ("ln_f.bias", (d,))]


def build(c, vocab):
    cfg = GPT2Config(
        vocab_size=vocab, n_positions=c["n_ctx"], n_embd=c["d_model"],
        n_layer=c["n_layers"], n_head=c["n_heads"], layer_norm_epsilon=1e-5,
        activation_function="gelu_new", attn_implementation="eager",
    )
    model = GPT2Model(cfg).eval()
    state = {}
    for name, shape in required(c, vocab):
        off, scale = init_range(name, c["d_model"])
        v = seeded_values(SEED, name, int(np.prod(shape)), off, scale)
        state[name] = torch.from_numpy(v.reshape(shape))
    missing, unexpected = model.load_state_dict(state, strict=False)
    assert not unexpected, unexpected
    assert all(m.endswith("attn.bias") or m.endswith("masked_bias") for m in missing), missing
    return model


def main():
    tok = GPT2Tokenizer(
        vocab=os.path.join(ROOT, "assets/gpt2/vocab.json"),
        merges=os.path.join(ROOT, "assets/gpt2/merges.txt"),
    )
    vocab = len(tok)
    out_dir = os.path.join(ROOT, "fixtures/model")
    os.makedirs(out_dir, exist_ok=True)
    for label, c in CONFIGS.items():
        model = build(c, vocab)
        layer, head = c["probe"]
        dh = c["d_model"] // c["n_heads"]
        captured = {}
        hook = model.h[layer].attn.c_attn.register_forward_hook(
            lambda _m, _i, o: captured.__setitem__("qkv", o.detach()))
        tensors, sentences = {}, []
        with torch.no_grad():
            for k, text in enumerate(SENTENCES):
                ids = tok.encode(text)
                out = model(torch.tensor([ids]), output_attentions=True)
                attn = torch.stack([a[0] for a in out.attentions]).numpy()
                tensors[f"s{k}.attention"] = np.ascontiguousarray(attn, dtype=np.float32)
                qkv = captured["qkv"][0].numpy()
                d = c["d_model"]
                tensors[f"s{k}.probe_query"] = np.ascontiguousarray(qkv[-1, head * dh:(head + 1) * dh])
                tensors[f"s{k}.probe_keys"] = np.ascontiguousarray(qkv[:, d + head * dh:d + (head + 1) * dh])
                sentences.append({"text": text, "ids": ids})
        hook.remove()
        meta = {
            "seed": str(SEED),
            "config": json.dumps({k: v for k, v in c.items() if k != "probe"}),
            "probe": json.dumps({"layer": layer, "head": head, "position": "last"}),
            "sentences": json.dumps(sentences),
            "transformers": __import__("transformers").__version__,
            "torch": torch.__version__,
        }
        save_file(tensors, os.path.join(out_dir, f"{label}.safetensors"), metadata=meta)
        print(label, {k: v.shape for k, v in list(tensors.items())[:3]})
        del model


if __name__ == "__main__":
    main()
