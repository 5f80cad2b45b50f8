"""Compare the compiled and pure-Python kernel backends.

Times each hot kernel on representative inputs, then one short closed-loop
trial per backend, and checks that both backends give the same trial curve.

    python3 benchmarks/bench_kernels.py [--repeat N] [--trial-iterations K]
"""

import argparse
import time
from contextlib import contextmanager

import numpy as np

from rootcomb import kernels
from rootcomb.harness import ExperimentConfig, run_trial
from rootcomb.simulator import make_head_model, natural_field

KERNELS = ("rasterize_strand", "trace_direction", "plane_hypotheses")


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads():
    model = make_head_model()
    field = natural_field(model, 64, jitter=0.3, rng_seed=0)
    h, w = model.shape
    rng = np.random.default_rng(0)
    theta = np.cumsum(rng.normal(0, 0.02, (h, w)), axis=1) + 1.5 * np.pi
    dx = np.ascontiguousarray(np.cos(theta))
    dy = np.ascontiguousarray(-np.sin(theta))
    mask = np.ones((h, w), np.uint8)
    pts = rng.normal(size=(121, 3))
    triples = rng.integers(0, 121, (200, 3)).astype(np.int64)

    def raster(mod):
        th = np.zeros((h, w))
        m = np.zeros((h, w), np.uint8)
        for s in field.strands:
            mod.rasterize_strand(s.path, 2.5, th, m)

    def trace(mod):
        for x in range(60, 200, 10):
            mod.trace_direction(dx, dy, mask, float(x), 20.0, 1.0, 1.0, 200, 0.5)

    def planes(mod):
        for _ in range(32):
            mod.plane_hypotheses(pts, triples, 1.5)

    return {"rasterize_strand": raster, "trace_direction": trace, "plane_hypotheses": planes}


@contextmanager
def backend(mod):
    saved = {k: getattr(kernels, k) for k in KERNELS}
    for k in KERNELS:
        setattr(kernels, k, getattr(mod, k))
    try:
        yield
    finally:
        for k, v in saved.items():
            setattr(kernels, k, v)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--trial-iterations", type=int, default=2)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the pure-Python backend is available")
    work = workloads()
    print(f"{'kernel':<20}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for kname, fn in work.items():
        t = {name: best_of(lambda: fn(mod), args.repeat) for name, mod in backends.items()}
        speed = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{kname:<20}" + "".join(f"{v * 1e3:>10.1f}ms" for v in t.values()) + f"{speed:>9.1f}x")

    cfg = ExperimentConfig(max_iterations=args.trial_iterations)
    curves = {}
    for name, mod in backends.items():
        with backend(mod):
            t0 = time.perf_counter()
            r = run_trial(cfg, "proposed", 0)
            curves[name] = r.curve_csv()
            print(f"trial ({args.trial_iterations} iterations) on {name}: {time.perf_counter() - t0:.2f} s")
    if len(curves) == 2:
        print("trial curves identical across backends:", curves["python"] == curves["cython"])


if __name__ == "__main__":
    main()
