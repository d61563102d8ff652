"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Workloads mirror one 600-sample, 3-channel, order-2 trial: the EM loop in both
noise modes, and VAR simulation with a 500-sample burn-in.
"""
import argparse
import timeit

import numpy as np

from mvarpdc import _backend, _fallback
from mvarpdc.estimation import build_yule_walker
from mvarpdc.signalgen import INTERACTING_COEFFS, simulate_mvar

try:
    from mvarpdc import _kernels
except ImportError:
    _kernels = None


def _em_case(isotropic):
    series = simulate_mvar(INTERACTING_COEFFS, 1, 600, seed=0)[0]
    system = build_yule_walker(series, 2)
    y = system.targets[0]

    def run(mod):
        nu = np.ones(system.phi.shape[1])
        lam = np.full(len(y), 1.0 / np.var(y))
        mod.sbl_em(system.phi, system.outer, y, nu, lam, 500, 1e-6, 1e12, isotropic)

    return run


def _sim_case():
    innov = np.random.default_rng(0).standard_normal((1100, 3))
    coeffs = np.ascontiguousarray(INTERACTING_COEFFS)
    return lambda mod: mod.simulate_var(coeffs, innov)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"default backend: {_backend.BACKEND}")
    cases = {
        "sbl_em isotropic": _em_case(True),
        "sbl_em diagonal": _em_case(False),
        "simulate_var": _sim_case(),
    }
    print(f"{'kernel':<18}{'fallback ms':>14}{'compiled ms':>14}{'speedup':>10}")
    for name, fn in cases.items():
        timer = timeit.Timer(lambda: fn(_fallback))
        loops, _ = timer.autorange()
        slow = min(timer.repeat(args.repeat, loops)) / loops
        if _kernels is None:
            print(f"{name:<18}{slow * 1e3:>14.3f}{'-':>14}{'-':>10}")
            continue
        timer = timeit.Timer(lambda: fn(_kernels))
        loops, _ = timer.autorange()
        fast = min(timer.repeat(args.repeat, loops)) / loops
        print(f"{name:<18}{slow * 1e3:>14.3f}{fast * 1e3:>14.3f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
