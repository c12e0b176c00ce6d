"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot loops (sequential running-mean updates, batched squared
distances) for each backend, then an end-to-end experiment per backend via
subprocesses so import-time selection applies.

Usage: python3 benchmarks/bench_kernels.py [--end-to-end]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

import numpy as np

from oclncm.kernels import pure

try:
    from oclncm.kernels import _fast
except ImportError:
    _fast = None


def _time(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_mean_update(backend, n_records=100_000, dim=512, n_classes=50):
    rng = np.random.default_rng(0)
    vecs = np.ascontiguousarray(rng.standard_normal((n_records, dim)))
    rows = rng.integers(0, n_classes, size=n_records).astype(np.int64)

    def run():
        means = np.zeros((n_classes, dim))
        counts = np.zeros(n_classes, dtype=np.int64)
        backend.mean_update_chunk(means, counts, vecs, rows)

    return _time(run, repeats=3)


def bench_sq_dist(backend, n_queries=2000, n_classes=100, dim=512):
    rng = np.random.default_rng(0)
    queries = np.ascontiguousarray(rng.standard_normal((n_queries, dim)))
    means = np.ascontiguousarray(rng.standard_normal((n_classes, dim)))
    return _time(backend.sq_dist_chunk, queries, means, repeats=3)


def bench_end_to_end():
    from oclncm import store

    with tempfile.TemporaryDirectory() as tmp:
        _, manifest = store.generate_synthetic_tasks(
            num_classes=100, dim=64, per_class_train=200, per_class_test=20,
            cluster_spread=0.1, mean_scale=1.0, seed=7, out_dir=tmp,
        )
        script = (
            "import json, time; "
            "from oclncm import harness, kernels; "
            f"cfg = harness.RunConfig(manifest={manifest!r}, method='candidate_ncm', step_size=5); "
            "t0 = time.perf_counter(); "
            "harness.run_experiment(cfg); "
            "print(json.dumps({'backend': kernels.BACKEND, 'seconds': time.perf_counter() - t0}))"
        )
        results = {}
        for env_extra in ({}, {"OCLNCM_PURE": "1"}):
            env = dict(os.environ, **env_extra)
            if not env_extra:
                env.pop("OCLNCM_PURE", None)
            out = subprocess.run(
                [sys.executable, "-c", script], capture_output=True, text=True, env=env, check=True
            )
            payload = json.loads(out.stdout)
            results[payload["backend"]] = payload["seconds"]
        return results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--end-to-end", action="store_true",
                        help="also time a full experiment per backend")
    args = parser.parse_args()

    backends = [("numpy", pure)]
    if _fast is not None:
        backends.append(("cython", _fast))
    else:
        print("compiled kernels not built (python3 setup.py build_ext --inplace)")

    print(f"{'kernel':<34}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    rows = [
        ("mean updates (100k x 512, 50 cls)", bench_mean_update),
        ("sq dists (2000 q x 100 cls x 512)", bench_sq_dist),
    ]
    for label, fn in rows:
        times = [fn(mod) for _, mod in backends]
        cells = "".join(f"{t * 1e3:>10.1f}ms" for t in times)
        speedup = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else f"{'-':>10}"
        print(f"{label:<34}{cells}{speedup}")

    if args.end_to_end:
        results = bench_end_to_end()
        print("\nend-to-end candidate-NCM run (100 classes, dim 64):")
        for backend, seconds in results.items():
            print(f"  {backend:<8} {seconds:.2f}s")


if __name__ == "__main__":
    main()
