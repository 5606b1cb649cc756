#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two solver hot spots (Poisson matvec, transport matvec) and one
end-to-end step on representative grids, then prints a speedup table.

    python benchmarks/bench_kernels.py [--repeats 200]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from slotpnp import backend
from slotpnp.grid import CellField, GridSpec
from slotpnp.poisson import PoissonProblem, solve_poisson
from slotpnp.transport import SchemeConfig, Species, State, step


def timeit(fn, repeats: int) -> float:
    fn()  # warm up (JIT compile, caches)
    best = float("inf")
    for _ in range(max(3, repeats // 50)):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def bench_matvecs(name: str, spec: GridSpec, repeats: int) -> dict[str, float]:
    rng = np.random.default_rng(0)
    f = rng.standard_normal(spec.shape)
    w = rng.uniform(0.5, 2.0, spec.shape)
    mob = tuple(rng.uniform(0.5, 2.0, spec.shape) for _ in range(spec.dim))
    out = {}
    out[f"poisson_matvec {name}"] = timeit(
        lambda: backend.neg_laplacian(f, spec.h), repeats)
    out[f"transport_matvec {name}"] = timeit(
        lambda: backend.transport_apply(w, mob, f, 0.01, spec.h), repeats)
    return out


def bench_step(name: str, spec: GridSpec, repeats: int) -> dict[str, float]:
    rng = np.random.default_rng(1)
    x = spec.meshgrid()[0]
    rho_vals = np.cos(2 * np.pi * x)
    rho = CellField(spec, rho_vals - rho_vals.mean())
    cfg = SchemeConfig(kappa=1e-3, dt=spec.h / 10, mean_kind="entropic",
                       species=(Species("p", 1.0), Species("m", -1.0)), rho_f=rho)
    c = CellField.full(spec, 0.1)
    psi = solve_poisson(PoissonProblem(cfg.kappa, rho))
    state = State(psi, (c, c), 0.0)
    return {f"full_step {name}": timeit(lambda: step(state, cfg),
                                        max(3, repeats // 20))}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    grids = [("2d n=64", GridSpec(2, 64)), ("2d n=160", GridSpec(2, 160)),
             ("3d n=24", GridSpec(3, 24))]
    rows: dict[str, dict[str, float]] = {}
    for backend_name in ("numpy", "numba"):
        try:
            backend.select_backend(backend_name)
        except ImportError:
            print(f"backend {backend_name} unavailable; skipping")
            continue
        for label, spec in grids:
            results = bench_matvecs(label, spec, args.repeats)
            results.update(bench_step(label, spec, args.repeats))
            for key, value in results.items():
                rows.setdefault(key, {})[backend_name] = value

    width = max(len(k) for k in rows)
    print(f"{'kernel / grid':<{width}}  {'numpy':>12}  {'numba':>12}  {'speedup':>8}")
    for key, per_backend in rows.items():
        np_t = per_backend.get("numpy")
        nb_t = per_backend.get("numba")
        speedup = f"{np_t / nb_t:7.1f}x" if np_t and nb_t else "     n/a"
        np_s = f"{np_t * 1e6:10.1f}us" if np_t else "       n/a"
        nb_s = f"{nb_t * 1e6:10.1f}us" if nb_t else "       n/a"
        print(f"{key:<{width}}  {np_s}  {nb_s}  {speedup}")


if __name__ == "__main__":
    main()
