"""In-process bulk-synchronous message passing over a :class:`~pdconsensus.graph.Graph`.

Every round each node broadcasts one vector to all of its neighbors.  A slot
exists for every directed pair ``sender -> receiver``; it is written once per
round by :meth:`RoundMailbox.broadcast` and read once by
:meth:`RoundMailbox.receive`.  :meth:`RoundMailbox.advance_round` is the
barrier: it refuses to advance while a broadcast or a read is missing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ProtocolViolation
from .graph import Graph

__all__ = ["CommStats", "RoundMailbox"]

BYTES_PER_ENTRY = 8


@dataclass
class CommStats:
    rounds: int = 0
    vectors_sent: int = 0
    bytes_sent: int = 0


class RoundMailbox:
    """One slot per directed edge, stamped with the round it was written in.

    A read in round ``k`` only accepts a round-``k`` stamp, so stale or
    early data is an error rather than a silent bug.
    """

    def __init__(self, graph: Graph, dim: int):
        self.graph = graph
        self.dim = int(dim)
        self.round = 0
        self.stats = CommStats()
        self._slots: dict[tuple[int, int], tuple[int, np.ndarray]] = {}
        self._delivered: set[tuple[int, int]] = set()
        self._sent = np.zeros(graph.num_nodes, dtype=bool)

    def broadcast(self, node: int, u) -> None:
        if self._sent[node]:
            raise ProtocolViolation(f"node {node} broadcast twice in round {self.round}")
        u = np.array(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {u.shape}")
        u.setflags(write=False)
        nbrs = self.graph.neighbors[node]
        for j in nbrs:
            self._slots[(node, j)] = (self.round, u)
        self._sent[node] = True
        self.stats.vectors_sent += len(nbrs)
        self.stats.bytes_sent += len(nbrs) * self.dim * BYTES_PER_ENTRY

    def receive(self, receiver: int, sender: int) -> np.ndarray:
        key = (sender, receiver)
        try:
            stamp, u = self._slots[key]
        except KeyError:
            raise ProtocolViolation(
                f"no message {sender} -> {receiver} in round {self.round}"
            ) from None
        if stamp != self.round:
            raise ProtocolViolation(
                f"stale message {sender} -> {receiver}: written in round {stamp}, "
                f"read in round {self.round}"
            )
        self._delivered.add(key)
        return u

    def gather(self, receiver: int) -> list[tuple[int, np.ndarray]]:
        """All messages addressed to ``receiver``, in ascending sender order."""
        return [(j, self.receive(receiver, j)) for j in self.graph.neighbors[receiver]]

    def advance_round(self) -> None:
        lagging = np.flatnonzero(~self._sent).tolist()
        if lagging:
            raise ProtocolViolation(f"round {self.round}: nodes {lagging} have not broadcast")
        unread = sorted(set(self._slots) - self._delivered)
        if unread:
            raise ProtocolViolation(f"round {self.round}: unread messages {unread[:5]}")
        self.round += 1
        self.stats.rounds += 1
        self._delivered.clear()
        self._sent[:] = False
