#!/usr/bin/env python3
"""Compare the compiled kernel backend against the numpy fallback.

Times the three hot paths (loss+gradient, span softmax, Adam update) on a
Credit-Default-sized problem, then a full training epoch under each
backend. Run after building the extension:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from cellscope import _kernels_py
from cellscope import backend as backend_mod
from cellscope.schema import AttributeSpec, Kind, Schema

try:
    from cellscope import _core
except ImportError:
    _core = None


def credit_sized_layout(n_cat=10, cat_width=12, n_num=13):
    attrs = [
        AttributeSpec(f"c{j}", Kind.CATEGORICAL, categories=tuple(f"v{i}" for i in range(cat_width)))
        for j in range(n_cat)
    ]
    attrs += [AttributeSpec(f"n{j}", Kind.NUMERIC, mean=0.0, std_dev=1.0) for j in range(n_num)]
    schema = Schema(tuple(attrs))
    return schema, schema.layout()


def bench(label, fn, repeats=200):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    dt = (time.perf_counter() - t0) / repeats
    print(f"  {label:28s} {dt * 1e6:10.1f} us/call")
    return dt


def main():
    rng = np.random.default_rng(0)
    schema, layout = credit_sized_layout()
    b, e, d = 128, layout.width, schema.d_total
    output = np.ascontiguousarray(rng.normal(size=(b, e)) * 3)
    target = np.zeros((b, e))
    for start, width in layout.spans:
        if width == 1:
            target[:, start] = rng.normal(size=b)
        else:
            target[np.arange(b), start + rng.integers(width, size=b)] = 1.0
    weights = np.ascontiguousarray(rng.uniform(size=(b, d)))
    params = rng.normal(size=e * 256)
    grads = rng.normal(size=e * 256)
    m = np.zeros_like(params)
    v = np.zeros_like(params)

    impls = [("numpy", _kernels_py)] + ([("cython", _core)] if _core else [])
    results = {}
    for name, impl in impls:
        print(f"[{name}] batch {b} x width {e} ({d} attributes)")
        results[name, "loss"] = bench(
            "mixed loss + grad",
            lambda impl=impl: impl.mixed_loss_grad(
                output, target, layout.cat_starts, layout.cat_widths,
                layout.cat_attr_idx, layout.num_cols, layout.num_attr_idx, weights,
            ),
        )
        results[name, "softmax"] = bench(
            "span softmax",
            lambda impl=impl: impl.span_softmax(output, layout.cat_starts, layout.cat_widths),
        )
        results[name, "adam"] = bench(
            "adam update (32k params)",
            lambda impl=impl: impl.adam_update(params, grads, m, v, 10, 1e-3, 0.9, 0.999, 1e-8),
        )

    print("[epoch] full training epoch, 4000 rows, width", e)
    from cellscope import TrainConfig
    from cellscope.models import train_ae

    x = rng.normal(size=(4000, e))
    for name, impl in impls:
        saved = {
            k: getattr(backend_mod, k)
            for k in ("leaky_relu", "leaky_relu_grad", "span_softmax", "mixed_loss_grad", "adam_update")
        }
        try:
            for k in saved:
                setattr(backend_mod, k, getattr(impl, k))
            t0 = time.perf_counter()
            train_ae(x, schema, TrainConfig(max_epochs=3, batch_size=128, seed=0))
            dt = (time.perf_counter() - t0) / 3
            print(f"  {name:8s} {dt * 1e3:10.1f} ms/epoch")
            results[name, "epoch"] = dt
        finally:
            for k, fn in saved.items():
                setattr(backend_mod, k, fn)

    if _core:
        print("[speedup] cython vs numpy")
        for key in ("loss", "softmax", "adam", "epoch"):
            ratio = results["numpy", key] / results["cython", key]
            print(f"  {key:8s} {ratio:6.2f}x")


if __name__ == "__main__":
    main()
