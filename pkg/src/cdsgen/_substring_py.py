"""Pure-Python suffix automaton over integer sequences.

Backend for substring-membership and occurrence-count queries; the
compiled twin lives in ``_substring_fast.pyx``. Symbols are arbitrary
ints; negative ids are reserved for the per-utterance sentinels inserted
by the wrapper in :mod:`cdsgen.novelty`.
"""

from __future__ import annotations

from typing import Sequence


class SuffixAutomaton:
    def __init__(self, sequence: Sequence[int]):
        # State 0 is the initial state.
        self._next: list[dict[int, int]] = [{}]
        self._link: list[int] = [-1]
        self._len: list[int] = [0]
        self._count: list[int] = [0]
        self._last = 0
        for symbol in sequence:
            self._extend(symbol)
        self._finalize_counts()

    def _extend(self, symbol: int) -> None:
        nxt, link, length, count = self._next, self._link, self._len, self._count
        cur = len(nxt)
        nxt.append({})
        link.append(-1)
        length.append(length[self._last] + 1)
        count.append(1)
        p = self._last
        while p != -1 and symbol not in nxt[p]:
            nxt[p][symbol] = cur
            p = link[p]
        if p == -1:
            link[cur] = 0
        else:
            q = nxt[p][symbol]
            if length[p] + 1 == length[q]:
                link[cur] = q
            else:
                clone = len(nxt)
                nxt.append(dict(nxt[q]))
                link.append(link[q])
                length.append(length[p] + 1)
                count.append(0)
                while p != -1 and nxt[p].get(symbol) == q:
                    nxt[p][symbol] = clone
                    p = link[p]
                link[q] = clone
                link[cur] = clone
        self._last = cur

    def _finalize_counts(self) -> None:
        # Propagate endpos sizes up the suffix-link tree, longest first.
        order = sorted(range(1, len(self._len)), key=self._len.__getitem__, reverse=True)
        for v in order:
            parent = self._link[v]
            if parent > 0:
                self._count[parent] += self._count[v]
            elif parent == 0:
                self._count[0] += self._count[v]

    def _walk(self, query: Sequence[int]) -> int:
        state = 0
        for symbol in query:
            state = self._next[state].get(symbol, -1)
            if state == -1:
                return -1
        return state

    def contains(self, query: Sequence[int]) -> bool:
        return self._walk(query) != -1

    def count(self, query: Sequence[int]) -> int:
        """Number of occurrences of ``query`` as a contiguous subsequence."""
        if len(query) == 0:
            raise ValueError("empty query")
        state = self._walk(query)
        return 0 if state == -1 else self._count[state]

    @property
    def n_states(self) -> int:
        return len(self._len)
