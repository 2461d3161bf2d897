"""Compare the compiled and numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat N] [--frames N]

Times the correlated bivariate normal raster, the loss accumulator and an
end-to-end frame evaluation under each available backend. End-to-end runs use
a fresh interpreter per backend so the selection at import is honoured.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from pdqeval.kernels import available_backends

_E2E = """
import json, time
from pdqeval.evaluation import FrameTask, score_frames
from pdqeval.kernels import BACKEND
from pdqeval.synth import PerturbationSpec, generate, make_scene
spec = PerturbationSpec(translation_sigma=4, scale_sigma=0.1, covariance_model={model!r}, covariance_value={value})
tasks = []
for f in range({frames}):
    s = make_scene(f, 640, 480, n_objects=10, class_count=5, size_range=(20, 160), frame_index=f)
    tasks.append(FrameTask(f, s.objects, tuple(generate(spec, s))))
t = time.perf_counter()
score_frames(tasks, workers=1)
print(json.dumps({{"backend": BACKEND, "seconds": time.perf_counter() - t}}))
"""


def bench_kernels(repeat: int) -> list[tuple[str, str, float]]:
    rng = np.random.default_rng(0)
    hs = rng.normal(0, 2, 200)
    ks = rng.normal(0, 2, 200)
    values = rng.random((200, 200))
    seg = rng.random((120, 120)) < 0.7
    rows = []
    table = {name: mod.background_table(values, 0.0027, 1e-14) for name, mod in available_backends().items()}
    for name, mod in sorted(available_backends().items()):
        for label, fn in [
            ("bvn_cdf_grid 200x200, r=0.5", lambda: mod.bvn_cdf_grid(hs, ks, 0.5)),
            ("bvn_cdf_grid 200x200, r=0.95", lambda: mod.bvn_cdf_grid(hs, ks, 0.95)),
            ("bvn_cdf scalar", lambda: mod.bvn_cdf(0.3, -0.2, 0.6)),
            ("region_sums 200x200", lambda: mod.region_sums(values, seg, 40, 40, 0.0027, 1e-14)),
            ("background_table 200x200", lambda: mod.background_table(values, 0.0027, 1e-14)),
            ("pair_sums 200x200, 120x120 box", lambda: mod.pair_sums(values, 0, 0, seg, 40, 40, *table[name], 1e-14)),
        ]:
            best = min(timeit.repeat(fn, number=10, repeat=repeat)) / 10
            rows.append((label, name, best))
    return rows


def bench_end_to_end(frames: int, model: str, value: float) -> list[tuple[str, str, float]]:
    rows = []
    for name in sorted(available_backends()):
        env = dict(os.environ)
        env.pop("PDQEVAL_PURE_PYTHON", None)
        if name == "python":
            env["PDQEVAL_PURE_PYTHON"] = "1"
        code = _E2E.format(frames=frames, model=model, value=value)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        res = json.loads(out.stdout)
        rows.append((f"{frames} frames 640x480, {model} covariance", res["backend"], res["seconds"]))
    return rows


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--frames", type=int, default=200)
    args = parser.parse_args(argv)

    rows = bench_kernels(args.repeat)
    rows += bench_end_to_end(args.frames, "percentage", 0.05)
    rows += bench_end_to_end(args.frames, "zero", 0.0)
    width = max(len(r[0]) for r in rows)
    print(f"{'benchmark'.ljust(width)}  {'backend':>8}  {'time':>12}")
    for label, backend, sec in rows:
        if sec < 1e-3:
            unit = f"{sec * 1e6:9.2f} us"
        elif sec < 1:
            unit = f"{sec * 1e3:9.2f} ms"
        else:
            unit = f"{sec:10.2f} s"
        print(f"{label.ljust(width)}  {backend:>8}  {unit:>12}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
