"""Time the numba and numpy trajectory kernels on the same workload.

Usage::

    python3 benchmarks/bench_kernels.py [--n 10000] [--frames 20] [--repeat 3]

The workload is the head-on crossing of two packets near their overlap, where
step splitting is busiest.  Both backends must end at the same positions; the
script reports the largest difference alongside the timings.
"""

import argparse
import time

import numpy as np

from bohmlab.guidance import Ensemble, FieldFrame, sample_initial_positions
from bohmlab.kernels import load_backend
from bohmlab.propagator import SplitStepper
from bohmlab.wavecore import GaussianPacketSpec, build_state, make_grid


def workload(dims, n, frames, dt=0.005):
    if dims == 1:
        grid = make_grid(1, 512, [-50.0, 50.0])
        specs = [GaussianPacketSpec(-3.0, 1.0, 4.0), GaussianPacketSpec(3.0, 1.0, -4.0)]
    else:
        grid = make_grid(2, [256, 64], [[-40.0, 40.0], [-16.0, 16.0]])
        specs = [GaussianPacketSpec([-3.0, 0.0], 1.0, [4.0, 0.0]), GaussianPacketSpec([3.0, 0.0], 1.0, [-4.0, 0.0])]
    psi = build_state(specs, grid).normalized()
    stepper = SplitStepper(grid, [], dt)
    states = [psi]
    for k in range(frames):
        states.append(psi.with_amplitudes(stepper.run(states[-1].amplitudes, k * dt, 1)))
    fields = [FieldFrame.from_state(s, k * dt) for k, s in enumerate(states)]
    starts = sample_initial_positions(psi, n, 7)
    return grid, fields, starts


def run(backend, grid, fields, starts):
    ens = Ensemble(grid, 1.0, starts.copy(), 0.0, backend=backend)
    t0 = time.perf_counter()
    for a, b in zip(fields[:-1], fields[1:]):
        ens.advance(a, b)
    return time.perf_counter() - t0, ens.last_points()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=10000)
    parser.add_argument("--frames", type=int, default=20)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    backends = {name: load_backend(name) for name in ("numba", "numpy")}
    print(f"{'dims':>4} {'backend':>7} {'best [s]':>10} {'us/traj/frame':>14}")
    for dims in (1, 2):
        grid, fields, starts = workload(dims, args.n, args.frames)
        run(backends["numba"], grid, fields, starts[:8])  # compile outside the timing
        finals = {}
        for name, be in backends.items():
            best = min(run(be, grid, fields, starts)[0] for _ in range(args.repeat))
            finals[name] = run(be, grid, fields, starts)[1]
            per = 1e6 * best / (args.n * args.frames)
            print(f"{dims:>4} {name:>7} {best:>10.4f} {per:>14.3f}")
        diff = float(np.max(np.abs(finals["numba"] - finals["numpy"])))
        print(f"{dims:>4} max |numba - numpy| = {diff:.3e}")


if __name__ == "__main__":
    main()
