"""Compare the compiled kernels with the NumPy fallback.

Times the occupancy-measure LP (simplex pivots) and the slotted simulator
(truncated policy) on each backend and reports the speedup.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--horizon 20000]
"""
import argparse
import time

import numpy as np

from aoisched import _backend, lp_core
from aoisched.channel import reference_channel
from aoisched.cmdp import SensorSpec, build_reduced_lp
from aoisched.config import rho_values, rr_power
from aoisched.dual import NetworkSpec, run_algorithm1
from aoisched.sim import SimConfig, Truncated, run


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def lp_cases():
    ch = reference_channel()
    for x_max, rho, W in [(32, 0.5, 5.0), (64, 0.2, 10.0), (96, 0.1, 15.0)]:
        sensor = SensorSpec(ch, rho * rr_power(ch, 10, 2))
        yield f"LP x_max={x_max} rho={rho} W={W}", build_reduced_lp(sensor, W, x_max)


def sim_cases(horizon):
    ch = reference_channel()
    for N, M in [(10, 2), (50, 5)]:
        budgets = rho_values(0.2, 1.6, N) * rr_power(ch, N, M)
        net = NetworkSpec([SensorSpec(ch, float(e)) for e in budgets], M)
        policy = Truncated(run_algorithm1(net).policies)
        yield f"sim N={N} M={M} T={horizon}", net, policy


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=3, help="timing repeats, best is kept")
    parser.add_argument("--horizon", type=int, default=20_000, help="simulated slots per run")
    args = parser.parse_args(argv)

    backends = ["python"] + (["compiled"] if _backend.compiled is not None else [])
    if len(backends) == 1:
        print("compiled kernels are not built; timing the fallback only")
    print(f"{'case':40s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")

    def report(name, times):
        speed = times[0] / times[-1] if len(times) > 1 else float("nan")
        print(f"{name:40s}" + "".join(f"{t:11.4f}s" for t in times) + f"{speed:9.1f}x")

    for name, lp in lp_cases():
        values = {}
        times = []
        for b in backends:
            times.append(best_time(lambda: values.__setitem__(b, lp_core.solve(lp, backend=b)), args.repeat))
        if len(values) > 1:
            assert np.array_equal(values["python"].values, values["compiled"].values)
        report(name, times)

    for name, net, policy in sim_cases(args.horizon):
        times = [
            best_time(lambda: run(SimConfig(net, args.horizon, 1, policy, backend=b)), args.repeat)
            for b in backends
        ]
        report(name, times)


if __name__ == "__main__":
    main()
