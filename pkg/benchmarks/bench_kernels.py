"""Time the compiled and pure-Python sampling kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--samples N] [--blocks M] [--repeats R]
"""
import argparse
import timeit

import numpy as np

from qmemcap import kernels
from qmemcap.lemma_suite import entropy_instance
from qmemcap.markov import mixing_length
from qmemcap import typicality as T


def hmm_inputs(blocks, samples, seed=0):
    channel, inputs, outputs = entropy_instance(seed, blocks)
    hmm = T.build_entropy_hmm(channel.chain, T.block_sigmas(channel, inputs, mixing_length(channel.chain, 0.5)), outputs)
    init = kernels.stable_cdf(hmm.chain.gamma)
    emit = kernels.stable_cdf(hmm.emissions.reshape(hmm.blocks, hmm.chain.size, -1))
    u = np.random.default_rng(seed).random((samples, hmm.blocks + 1))
    return init, emit, u, hmm.n_symbols


def chain_inputs(length, seed=0):
    rng = np.random.default_rng(seed)
    q = rng.random((3, 3)) + 0.2
    q /= q.sum(axis=1, keepdims=True)
    return kernels.stable_cdf(np.full(3, 1 / 3)), kernels.stable_cdf(q), rng.random(length)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=20_000)
    ap.add_argument("--blocks", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if kernels.compiled_available() else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the Python fallback only")
    cases = {
        "sample_hmm": (kernels.sample_hmm, hmm_inputs(args.blocks, args.samples)),
        "sample_chain": (kernels.sample_chain, chain_inputs(args.blocks * args.samples // 10)),
    }
    print(f"{'kernel':<14}{'backend':<9}{'best of ' + str(args.repeats):>12}")
    for name, (fn, inputs) in cases.items():
        results, times = {}, {}
        for be in backends:
            results[be] = fn(*inputs, backend=be)
            times[be] = min(timeit.repeat(lambda: fn(*inputs, backend=be), number=1, repeat=args.repeats))
            print(f"{name:<14}{be:<9}{times[be]:>11.4f}s")
        if len(backends) == 2:
            same = np.array_equal(results["python"], results["cython"])
            print(f"{name:<14}speedup {times['python'] / times['cython']:.1f}x, identical output: {same}")


if __name__ == "__main__":
    main()
