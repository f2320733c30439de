"""Time the compiled and pure-Python RK4 kernels on a device-A pumped span.

    python3 benchmarks/bench_kernel.py --steps 200000 --repeat 3
"""

import argparse
import math
import time

import numpy as np

from squidjpa import _pykernel, kernel
from squidjpa.design_space import build_family
from squidjpa.dynamics import SolverOptions, _prepare, amplitude_for_dbm, default_tracking, make_two_tone


def setup():
    params, bias = build_family(15e-12, 8.1)
    fp = 12e9
    drive = make_two_tone(fp, 1e6, 1e6,
                          amplitude_for_dbm(-42.0, 2 * math.pi * fp, params.r_env),
                          amplitude_for_dbm(-140.0, math.pi * fp, params.r_env))
    track = default_tracking(drive)
    prep = _prepare(params, bias, drive, SolverOptions(), track)
    return prep, len(track)


def time_kernel(fn, prep, nh, steps, repeat):
    best = math.inf
    for _ in range(repeat):
        state = np.zeros(2)
        acc = np.zeros(2 * nh + 2)
        t0 = time.perf_counter()
        fn(state, 0, steps, prep["two_m"], prep["h"], prep["coef"], prep["tone_k"],
           prep["b_re"], prep["b_im"], prep["harm_k"], acc, 512)
        best = min(best, time.perf_counter() - t0)
    return best, state


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--python-steps", type=int, default=None,
                    help="steps for the pure-Python kernel (default steps/20)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    prep, nh = setup()
    py_steps = args.python_steps or max(1, args.steps // 20)

    t_py, s_py = time_kernel(_pykernel.run_span, prep, nh, py_steps, args.repeat)
    print(f"python  : {t_py / py_steps * 1e9:9.1f} ns/step ({py_steps} steps)")
    if kernel.BACKEND != "cython":
        print("cython  : not built (pure-Python fallback active)")
        return 0
    from squidjpa import _ckernel

    t_cy, s_cy = time_kernel(_ckernel.run_span, prep, nh, args.steps, args.repeat)
    _, s_same = time_kernel(_ckernel.run_span, prep, nh, py_steps, 1)
    print(f"cython  : {t_cy / args.steps * 1e9:9.1f} ns/step ({args.steps} steps)")
    print(f"speedup : {(t_py / py_steps) / (t_cy / args.steps):9.1f}x")
    print(f"state agreement after {py_steps} steps: {np.max(np.abs(s_same - s_py) / np.abs(s_py)):.2e} relative")
    per_run = prep["two_m"] // 2 * 2 + 20 * 8.1 * 10 * 512
    print(f"device-A gain run (~{per_run:.2e} steps): "
          f"cython {per_run * t_cy / args.steps:.2f} s, python {per_run * t_py / py_steps:.0f} s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
