"""Compare the compiled and pure-Python suffix-automaton backends.

Builds random word-id corpora of increasing size, then times index
construction and a fixed query workload (half positive, half random)
against both implementations and reports the speedup.

Run from the repository root:

    python3 benchmarks/bench_substring.py
"""

from __future__ import annotations

import time

import numpy as np

from cdsgen._substring_py import SuffixAutomaton as PyAutomaton

try:
    from cdsgen._substring_fast import SuffixAutomaton as FastAutomaton
except ImportError:
    FastAutomaton = None

SIZES = (2_000, 10_000, 50_000, 200_000)
N_QUERIES = 5_000
VOCAB = 500


def build_corpus(n_words: int, rng: np.random.Generator) -> tuple[list[int], list[list[int]]]:
    """Sentinel-delimited id stream plus the utterance list for queries."""
    stream: list[int] = []
    utterances: list[list[int]] = []
    n = 0
    while len(stream) < n_words:
        length = int(rng.integers(1, 12))
        utt = [int(w) for w in rng.integers(0, VOCAB, size=length)]
        utterances.append(utt)
        stream.extend(utt)
        n += 1
        stream.append(-n)
    return stream, utterances


def build_queries(utterances: list[list[int]], rng: np.random.Generator) -> list[list[int]]:
    queries = []
    for _ in range(N_QUERIES):
        if rng.random() < 0.5:
            utt = utterances[int(rng.integers(0, len(utterances)))]
            start = int(rng.integers(0, len(utt)))
            end = int(rng.integers(start + 1, len(utt) + 1))
            queries.append(utt[start:end])
        else:
            queries.append([int(w) for w in rng.integers(0, VOCAB, size=rng.integers(1, 7))])
    return queries


def bench_one(cls, stream: list[int], queries: list[list[int]]) -> tuple[float, float]:
    start = time.perf_counter()
    automaton = cls(stream)
    build_s = time.perf_counter() - start
    start = time.perf_counter()
    for q in queries:
        automaton.count(q)
    query_s = time.perf_counter() - start
    return build_s, query_s


def main() -> None:
    if FastAutomaton is None:
        print("compiled backend not available; showing pure-Python timings only")
    rng = np.random.default_rng(0)
    header = f"{'words':>9} {'py build':>10} {'py query':>10}"
    if FastAutomaton is not None:
        header += f" {'cy build':>10} {'cy query':>10} {'build x':>8} {'query x':>8}"
    print(header)
    for size in SIZES:
        stream, utterances = build_corpus(size, rng)
        queries = build_queries(utterances, rng)
        py_build, py_query = bench_one(PyAutomaton, stream, queries)

        # sanity: both backends agree before we trust the timings
        row = f"{size:>9} {py_build:>9.3f}s {py_query:>9.3f}s"
        if FastAutomaton is not None:
            cy_build, cy_query = bench_one(FastAutomaton, stream, queries)
            py_auto, cy_auto = PyAutomaton(stream), FastAutomaton(stream)
            for q in queries[:200]:
                assert py_auto.count(q) == cy_auto.count(q)
            row += (f" {cy_build:>9.3f}s {cy_query:>9.3f}s"
                    f" {py_build / cy_build:>7.1f}x {py_query / cy_query:>7.1f}x")
        print(row)


if __name__ == "__main__":
    main()
