"""Keyed storage for composite photonic states.

Each allocated mode gets an integer key. Keys that are entangled share one
entry holding a density matrix whose mode order follows the entry's key list.
Cost is exponential in the number of modes in an entry: (N+1)^(2k) numbers
for k modes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from . import fock
from .fock import DensityMatrix, FockSpace, KrausChannel, Ket, Povm

__all__ = ["StateEntry", "QuantumManager", "UnknownKeyError"]


class UnknownKeyError(KeyError):
    pass


@dataclass(frozen=True)
class StateEntry:
    keys: tuple[int, ...]
    state: DensityMatrix


class _Memo:
    """Memoizes pure state operations by the identity of their immutable inputs.

    Every cached value keeps its inputs alive, so an ``id`` cannot be recycled
    while its entry exists. Results are the very objects a fresh computation
    would have produced on first call; repeats are bit-identical.
    """

    def __init__(self, maxsize: int = 512):
        self.maxsize = maxsize
        self._data: dict[tuple, tuple] = {}
        self.hits = 0
        self.misses = 0

    def get(self, key: tuple):
        hit = self._data.get(key)
        if hit is not None:
            self.hits += 1
            return hit[0]
        self.misses += 1
        return None

    def put(self, key: tuple, value, inputs: tuple):
        if len(self._data) >= self.maxsize:
            self._data.clear()
        self._data[key] = (value, inputs)
        return value


# shared by all managers: identical input objects recur across timelines
_SHARED_MEMO = _Memo()


class QuantumManager:
    """Key-to-state store.

    With ``memoize`` (the default), repeated operations on identical state
    objects reuse earlier results instead of recomputing them.
    """

    def __init__(self, space: FockSpace | None = None, memoize: bool = True):
        self.space = space or FockSpace()
        self._entries: dict[int, StateEntry] = {}
        self._next_key = itertools.count()
        self._vacuum = fock.basis_ket(self.space, (0,)).to_density()
        self._memo = _SHARED_MEMO if memoize else None

    def _cached(self, key: tuple, inputs: tuple, compute):
        if self._memo is None:
            return compute()
        value = self._memo.get(key)
        if value is None:
            value = self._memo.put(key, compute(), inputs)
        return value

    def __contains__(self, key: int) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def entry(self, key: int) -> StateEntry:
        try:
            return self._entries[key]
        except KeyError:
            raise UnknownKeyError(key) from None

    def entries(self) -> list[StateEntry]:
        """Distinct entries, each listed once."""
        seen, out = set(), []
        for e in self._entries.values():
            if id(e) not in seen:
                seen.add(id(e))
                out.append(e)
        return out

    def _store(self, keys: Sequence[int], state: DensityMatrix) -> StateEntry:
        entry = StateEntry(tuple(keys), state)
        for k in entry.keys:
            self._entries[k] = entry
        return entry

    def allocate_vacuum(self) -> int:
        key = next(self._next_key)
        self._store([key], self._vacuum)
        return key

    def set_entangled(self, keys: Sequence[int], ket: Ket | DensityMatrix) -> StateEntry:
        """Replace the state of ``keys`` with ``ket`` (a pure state or density matrix).

        Every key must either sit alone in its entry or share it only with other
        members of ``keys``.
        """
        keys = tuple(keys)
        if ket.space != self.space or ket.n_modes != len(keys):
            raise ValueError(f"ket with {ket.n_modes} modes does not fit keys {keys}")
        wanted = set(keys)
        for k in keys:
            if not set(self.entry(k).keys) <= wanted:
                raise ValueError(f"key {k} is entangled with keys outside {keys}")
        return self._store(keys, ket.to_density() if isinstance(ket, Ket) else ket)

    def merge(self, keys: Sequence[int]) -> StateEntry:
        """Combine the entries holding ``keys`` into one, in first-seen order."""
        parts: list[StateEntry] = []
        for k in keys:
            e = self.entry(k)
            if all(e is not p for p in parts):
                parts.append(e)
        if len(parts) == 1:
            return parts[0]
        state = parts[0].state
        for p in parts[1:]:
            a, b = state, p.state
            state = self._cached(("tensor", id(a), id(b)), (a, b), lambda: fock.tensor(a, b))
        return self._store([k for p in parts for k in p.keys], state)

    def apply_channel_at(self, key: int, channel: KrausChannel) -> None:
        e = self.entry(key)
        mode = e.keys.index(key)
        post = self._cached(("channel", id(e.state), id(channel), mode), (e.state, channel),
                            lambda: fock.apply_channel(e.state, channel, mode))
        self._store(e.keys, post)

    def apply_unitary_at(self, keys: int | Sequence[int], unitary: np.ndarray) -> None:
        keys = [keys] if isinstance(keys, int) else list(keys)
        e = self.merge(keys)
        modes = [e.keys.index(k) for k in keys]
        state = e.state
        post = self._cached(("unitary", id(state), id(unitary), tuple(modes)), (state, unitary),
                            lambda: fock.apply_unitary(state, unitary, modes))
        self._store(e.keys, post)

    def measure_at(self, keys: Sequence[int], povm: Povm, random_draw: float, discard: bool = True) -> Hashable:
        """Measure ``keys`` jointly and return the outcome label.

        With ``discard`` the measured modes are traced out and their keys
        retired; otherwise the post-measurement state stays in the entry.
        """
        keys = list(keys)
        e = self.merge(keys)
        modes = [e.keys.index(k) for k in keys]
        if not discard:
            label, post, _ = fock.measure(e.state, povm, modes, random_draw)
            self._store(e.keys, post)
            return label
        if self._memo is None:
            label, post, _ = fock.measure_and_discard(e.state, povm, modes, random_draw)
        else:
            label, post = self._measure_memo(e.state, povm, modes, random_draw)
        for k in keys:
            del self._entries[k]
        if post is not None:
            self._store([k for k in e.keys if k not in keys], post)
        return label

    def _measure_memo(self, state: DensityMatrix, povm: Povm, modes: list[int], random_draw: float):
        key = ("cdf", id(state), id(povm), tuple(modes))
        cdf = self._cached(key, (state, povm), lambda: fock._cdf(fock.outcome_probabilities(state, povm, modes)))
        m = fock._select_from_cdf(cdf, random_draw)
        # same selection and post-state as measure_and_discard, computed once per outcome
        if len(modes) == state.n_modes:
            return povm.labels[m], None
        post_key = ("discard", id(state), id(povm), tuple(modes), m)

        post = self._cached(post_key, (state, povm), lambda: fock.conditional_state(state, povm, modes, m))
        return povm.labels[m], post

    def get_state(self, keys: Sequence[int]) -> DensityMatrix:
        """Reduced state of ``keys`` in the requested order; keys must share an entry."""
        keys = list(keys)
        e = self.entry(keys[0])
        for k in keys[1:]:
            if self.entry(k) is not e:
                return self._product_state(keys)
        keep = tuple(e.keys.index(k) for k in keys)
        state = e.state
        return self._cached(("ptrace", id(state), keep), (state,), lambda: fock.partial_trace(state, keep))

    def _product_state(self, keys: list[int]) -> DensityMatrix:
        # keys spread over independent entries: reduced state is a product, then reorder
        groups: list[list[int]] = []
        for k in keys:
            e = self.entry(k)
            for g in groups:
                if self.entry(g[0]) is e:
                    g.append(k)
                    break
            else:
                groups.append([k])
        state = self.get_state(groups[0])
        for g in groups[1:]:
            state = fock.tensor(state, self.get_state(g))
        order = [k for g in groups for k in g]
        return fock.partial_trace(state, [order.index(k) for k in keys])

    def remove(self, keys: Sequence[int]) -> None:
        """Trace out and retire ``keys``."""
        keys = list(keys)
        for e in {id(self.entry(k)): self.entry(k) for k in keys}.values():
            rest = [k for k in e.keys if k not in keys]
            for k in e.keys:
                if k in keys:
                    del self._entries[k]
            if rest:
                self._store(rest, fock.partial_trace(e.state, [e.keys.index(k) for k in rest]))

    def check(self, tol: float = 1e-9) -> None:
        """Verify the key map is a partition and every entry is a valid state."""
        for e in self.entries():
            if e.state.n_modes != len(e.keys):
                raise AssertionError(f"entry {e.keys} has {e.state.n_modes} modes")
            for k in e.keys:
                if self._entries.get(k) is not e:
                    raise AssertionError(f"key {k} does not point at its entry")
            e.state.check(tol)
