# cython: language_level=3
"""Compiled suffix automaton over integer sequences.

Mirrors the API of cdsgen._substring_py.SuffixAutomaton; selected at
import time by cdsgen.novelty when the extension is available.
"""

from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector
from libcpp.algorithm cimport sort


cdef struct StateOrder:
    int length
    int index


cdef bint _order_desc(StateOrder a, StateOrder b) noexcept nogil:
    return a.length > b.length


cdef class SuffixAutomaton:
    cdef vector[unordered_map[long, int]] _next
    cdef vector[int] _link
    cdef vector[int] _len
    cdef vector[long long] _count
    cdef int _last

    def __init__(self, sequence):
        self._next.resize(1)
        self._link.push_back(-1)
        self._len.push_back(0)
        self._count.push_back(0)
        self._last = 0
        cdef long symbol
        for symbol in sequence:
            self._extend(symbol)
        self._finalize_counts()

    cdef void _extend(self, long symbol):
        cdef int cur = <int>self._next.size()
        self._next.resize(cur + 1)
        self._link.push_back(-1)
        self._len.push_back(self._len[self._last] + 1)
        self._count.push_back(1)
        cdef int p = self._last
        cdef int q, clone
        while p != -1 and self._next[p].count(symbol) == 0:
            self._next[p][symbol] = cur
            p = self._link[p]
        if p == -1:
            self._link[cur] = 0
        else:
            q = self._next[p][symbol]
            if self._len[p] + 1 == self._len[q]:
                self._link[cur] = q
            else:
                clone = <int>self._next.size()
                self._next.push_back(self._next[q])
                self._link.push_back(self._link[q])
                self._len.push_back(self._len[p] + 1)
                self._count.push_back(0)
                while p != -1 and self._next[p].count(symbol) and self._next[p][symbol] == q:
                    self._next[p][symbol] = clone
                    p = self._link[p]
                self._link[q] = clone
                self._link[cur] = clone
        self._last = cur

    cdef void _finalize_counts(self):
        cdef vector[StateOrder] order
        cdef int n = <int>self._len.size()
        cdef int v, parent
        cdef StateOrder so
        order.reserve(n - 1)
        for v in range(1, n):
            so.length = self._len[v]
            so.index = v
            order.push_back(so)
        sort(order.begin(), order.end(), _order_desc)
        for v in range(<int>order.size()):
            parent = self._link[order[v].index]
            if parent >= 0:
                self._count[parent] += self._count[order[v].index]

    cdef int _walk(self, query):
        cdef int state = 0
        cdef long symbol
        for symbol in query:
            if self._next[state].count(symbol) == 0:
                return -1
            state = self._next[state][symbol]
        return state

    def contains(self, query):
        return self._walk(query) != -1

    def count(self, query):
        if len(query) == 0:
            raise ValueError("empty query")
        cdef int state = self._walk(query)
        if state == -1:
            return 0
        return self._count[state]

    @property
    def n_states(self):
        return self._len.size()
