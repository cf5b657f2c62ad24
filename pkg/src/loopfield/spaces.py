"""State-space models: a finite alphabet with a distance matrix, or Euclidean points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

State = object  # str for finite spaces, tuple[float, ...] for euclidean ones


@dataclass(frozen=True)
class StateSpace:
    """A metric space the loops live on.

    Two kinds are supported: ``finite`` (distinct labels with a distance
    matrix, defaulting to the discrete 0/1 metric) and ``euclidean``
    (points in R^dim with the Euclidean distance).
    """

    kind: str
    labels: tuple[str, ...] | None = None
    dist: tuple[tuple[float, ...], ...] | None = None
    dim: int | None = None
    _index: dict = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind == "finite":
            if not self.labels:
                raise DomainError("finite space needs at least one label")
            if len(set(self.labels)) != len(self.labels):
                raise DomainError("labels must be distinct")
            n = len(self.labels)
            if self.dist is None:
                discrete = tuple(
                    tuple(0.0 if i == j else 1.0 for j in range(n)) for i in range(n)
                )
                object.__setattr__(self, "dist", discrete)
            self._check_matrix()
            object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.labels)})
        elif self.kind == "euclidean":
            if self.dim is None or self.dim < 1:
                raise DomainError("euclidean space needs dim >= 1")
        else:
            raise DomainError(f"unknown space kind {self.kind!r}")

    def _check_matrix(self):
        d = self.dist
        n = len(self.labels)
        if len(d) != n or any(len(row) != n for row in d):
            raise DomainError("distance matrix must be square over the labels")
        for i in range(n):
            if d[i][i] != 0.0:
                raise DomainError(f"dist[{i}][{i}] must be 0")
            for j in range(n):
                if d[i][j] < 0:
                    raise DomainError(f"dist[{i}][{j}] must be nonnegative")
                if i != j and d[i][j] == 0.0:
                    raise DomainError(f"dist[{i}][{j}] must be positive off the diagonal")
                if d[i][j] != d[j][i]:
                    raise DomainError(f"dist[{i}][{j}] != dist[{j}][{i}]")
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if d[i][j] > d[i][k] + d[k][j] + 1e-12:
                        raise DomainError(
                            f"triangle inequality fails for labels {i},{k},{j}"
                        )

    @classmethod
    def finite(cls, labels, dist=None) -> "StateSpace":
        if dist is not None:
            dist = tuple(tuple(float(x) for x in row) for row in dist)
        return cls(kind="finite", labels=tuple(labels), dist=dist)

    @classmethod
    def euclidean(cls, dim: int) -> "StateSpace":
        return cls(kind="euclidean", dim=int(dim))

    def validate_state(self, state: State) -> None:
        if self.kind == "finite":
            if state not in self._index:
                raise DomainError(f"state {state!r} is not a label of this space")
        else:
            if not isinstance(state, tuple) or len(state) != self.dim:
                raise DomainError(
                    f"state {state!r} is not a point of R^{self.dim}"
                )

    def distance(self, a: State, b: State) -> float:
        if self.kind == "finite":
            return self.dist[self._index[a]][self._index[b]]
        return math.dist(a, b)

    def state_key(self, state: State):
        """A totally ordered key for canonical forms."""
        return state
