"""Compare the compiled and numpy dilated-convolution kernels.

Run ``python3 benchmarks/bench_kernels.py``. Each row times forward and
backward on one representative shape and checks that both backends agree.
A final section times a full M8 training step with each backend.
"""
import argparse
import timeit

import numpy as np

from cistgcn import kernels
from cistgcn.data import synth_dataset
from cistgcn.model import ModelConfig
from cistgcn.training import TrainConfig, Trainer

# (name, x shape (N, C, L, M), out channels, K, dilation, groups)
CASES = [
    ("aptcn d=1", (32, 8, 10, 22), 8, 3, 1, 1),
    ("aptcn d=3", (32, 8, 10, 22), 8, 3, 3, 1),
    ("dae nodes", (32, 8, 22, 1), 4, 3, 1, 1),
    ("ganet depthwise", (32, 8, 10, 1), 8, 3, 1, 8),
    ("wide M64", (32, 64, 25, 22), 64, 3, 2, 1),
]


def _time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_case(case, backends, dtype, repeat, number, rng):
    name, shape, c_out, k, dilation, groups = case
    x = rng.normal(size=shape).astype(dtype)
    w = rng.normal(size=(c_out, shape[1] // groups, k)).astype(dtype)
    pad = dilation * (k - 1) // 2
    L = shape[2]
    g = rng.normal(size=(shape[0], c_out, L, shape[3])).astype(dtype)
    row, outputs = {}, {}
    for label, mod in backends.items():
        fwd = lambda: mod.conv1d_forward(x, w, dilation, pad, L, groups)
        bwd = lambda: mod.conv1d_backward(g, x, w, dilation, pad, groups, True, True)
        outputs[label] = (fwd(), *bwd())
        row[label] = (_time(fwd, repeat, number), _time(bwd, repeat, number))
    ref = outputs["python"]
    err = max(float(np.max(np.abs(a - b)) / (np.max(np.abs(b)) + 1e-30))
              for out in outputs.values() for a, b in zip(out, ref))
    return name, row, err


def bench_step(backends, repeat):
    ds = synth_dataset(60, seed=0)
    out = {}
    for label, mod in backends.items():
        kernels.backend = mod
        trainer = Trainer.create(ModelConfig.preset("M8"), TrainConfig(epochs=1, window_stride=5), ds)
        trainer.train_windows  # build windows outside the timed region
        out[label] = min(timeit.repeat(trainer.train_epoch, repeat=repeat, number=1)) / len(
            range(0, len(trainer.train_windows), trainer.config.batch_size))
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=20)
    p.add_argument("--dtype", default="float32", choices=("float32", "float64"))
    p.add_argument("--skip-step", action="store_true", help="skip the training-step benchmark")
    args = p.parse_args(argv)
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    labels = list(backends)
    print(f"{'case':<16}" + "".join(f"{l + ' fwd ms':>18}{l + ' bwd ms':>18}" for l in labels)
          + f"{'speedup':>10}{'max rel diff':>14}")
    for case in CASES:
        name, row, err = bench_case(case, backends, args.dtype, args.repeat, args.number, rng)
        cells = "".join(f"{row[l][0] * 1e3:>18.3f}{row[l][1] * 1e3:>18.3f}" for l in labels)
        speed = (sum(row["python"]) / sum(row["compiled"])) if "compiled" in row else 1.0
        print(f"{name:<16}{cells}{speed:>9.1f}x{err:>14.2e}")
    if not args.skip_step:
        original = kernels.backend
        try:
            step = bench_step(backends, max(1, args.repeat // 2))
        finally:
            kernels.backend = original
        print("M8 train step, batch 32: " + ", ".join(f"{l} {t * 1e3:.1f} ms" for l, t in step.items()))


if __name__ == "__main__":
    main()
