"""Time the compiled SC/SCL kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --n 1024 --list-size 32 --frames 50
"""

import argparse
import time

import numpy as np

from polarquant import core
from polarquant.channel import NoiseConfig, transmit
from polarquant.codec import CodeConfig, build_message, polar_encode
from polarquant.fa_design import design_decoder
from polarquant.fa_runtime import build_tables, quantize_channel


def per_frame_ms(fn, inputs):
    fn(inputs[0])  # warm-up
    t0 = time.perf_counter()
    for x in inputs:
        fn(x)
    return 1e3 * (time.perf_counter() - t0) / len(inputs)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--n", type=int, default=1024, help="block length")
    p.add_argument("--list-size", type=int, default=32)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--ebn0", type=float, default=2.0)
    p.add_argument("--w", type=int, default=4)
    args = p.parse_args(argv)

    cfg = CodeConfig.construct(args.n, args.n // 2)
    spec = design_decoder(cfg, args.w, 6, 0.5, "ms-cd-uniform")
    tables = build_tables(spec)
    rng = np.random.default_rng(0)
    frozen = np.ascontiguousarray(cfg.frozen_mask)
    llrs = [transmit(polar_encode(build_message(rng.integers(0, 2, cfg.K), cfg), cfg),
                     NoiseConfig(args.ebn0, cfg.rate), rng) for _ in range(args.frames)]
    msgs = [quantize_channel(x, spec).astype(np.float64) for x in llrs]

    backends = ["python"] + (["cython"] if core.BACKEND == "cython" else [])
    cases = {
        "float SC": (llrs, lambda k: lambda x: k.sc_decode(x, frozen)),
        f"float SCL-{args.list_size}": (llrs, lambda k: lambda x: k.scl_decode(x, frozen, args.list_size)),
        "FA SC": (msgs, lambda k: lambda x: k.sc_decode(x, frozen, tables.upper, tables.lower, tables.w)),
        f"FA SCL-{args.list_size}": (msgs, lambda k: lambda x: k.scl_decode(
            x, frozen, args.list_size, tables.upper, tables.lower, tables.w, tables.metric)),
    }
    print(f"N={args.n}  frames={args.frames}  (ms per frame)")
    print(f"{'case':<16}" + "".join(f"{b:>10}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name, (inputs, make) in cases.items():
        times = [per_frame_ms(make(core.get_backend(b)), inputs) for b in backends]
        row = f"{name:<16}" + "".join(f"{t:>10.3f}" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
