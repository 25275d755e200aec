"""Compare the compiled and pure-Python kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``.  Both backends are timed
on element matrices and on a full preconditioned CG solve of an assembled
Ventcel system; results are also checked for agreement.
"""

import argparse
import timeit

import numpy as np

from curvedfem import _kernels
from curvedfem.fem import FESpace, assemble_ventcel, ventcel_disk_problem
from curvedfem.lift import LiftMap
from curvedfem.mesh import elevate, generate_disk_mesh
from curvedfem.reference import lagrange_basis, quadrature


def element_inputs(n_cells, k, order, seed=0):
    rng = np.random.default_rng(seed)
    basis = lagrange_basis(2, k)
    q = quadrature(2, order)
    a = rng.normal(size=(n_cells, len(q.weights), 2, 2))
    ginv = a @ np.swapaxes(a, -1, -2) + np.eye(2)
    wdet = np.abs(rng.normal(size=(n_cells, len(q.weights)))) * q.weights
    c = np.ascontiguousarray
    return c(basis.grad(q.points)), c(basis.eval(q.points)), c(ginv), c(wdet)


def system(level, k, r=2):
    curved = elevate(generate_disk_mesh(level), r)
    space = FESpace(curved, k)
    return assemble_ventcel(space, ventcel_disk_problem(), LiftMap(curved))


def best_of(func, repeat):
    return min(timeit.repeat(func, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cells", type=int, default=4096)
    parser.add_argument("--level", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = _kernels.available_backends()
    print(f"available backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("compiled extension not built; only the Python backend can be timed")

    rows = []
    for k in (1, 2, 4):
        inputs = element_inputs(args.cells, k, 2 * k + 2)
        times, results = {}, {}
        for name in backends:
            mod = _kernels.get_backend(name)
            times[name] = best_of(lambda: mod.element_matrices(*inputs), args.repeat)
            results[name] = mod.element_matrices(*inputs)
        diff = max(
            np.abs(results[n][0] - results["python"][0]).max() for n in backends
        )
        rows.append((f"element_matrices k={k} ({args.cells} cells)", times, diff))

    for k in (1, 3):
        sysm = system(args.level, k)
        a = sysm.matrix
        x0 = np.zeros(sysm.n)
        call = lambda mod: mod.pcg(a.indptr, a.indices, a.data, sysm.rhs, x0, 1e-10, 20 * sysm.n)
        times, sols = {}, {}
        for name in backends:
            mod = _kernels.get_backend(name)
            times[name] = best_of(lambda: call(mod), args.repeat)
            sols[name] = call(mod)[0]
        diff = max(np.abs(sols[n] - sols["python"]).max() for n in backends)
        rows.append((f"pcg k={k} ({sysm.n} dofs)", times, diff))

    width = max(len(r[0]) for r in rows)
    header = f"{'kernel':<{width}}  " + "  ".join(f"{b:>10}" for b in backends) + "     speedup   max|diff|"
    print(header)
    for label, times, diff in rows:
        cols = "  ".join(f"{times[b] * 1e3:8.2f}ms" for b in backends)
        speed = times["python"] / times["compiled"] if "compiled" in times else 1.0
        print(f"{label:<{width}}  {cols}  {speed:9.2f}x  {diff:10.2e}")


if __name__ == "__main__":
    main()
