"""Immutable AST node base with structural equality and a cached hash."""

from __future__ import annotations

from dataclasses import dataclass, fields


class Node:
    _fields: tuple[str, ...] = ()

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        if hash(self) != hash(other):
            return False
        return all(getattr(self, f) == getattr(other, f) for f in self._fields)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((type(self).__name__,) + tuple(getattr(self, f) for f in self._fields))
            object.__setattr__(self, "_hash", h)
        return h

    def children(self) -> tuple:
        return tuple(getattr(self, f) for f in self._fields)


def node(cls):
    cls = dataclass(frozen=True, eq=False)(cls)
    cls._fields = tuple(f.name for f in fields(cls) if f.compare)
    return cls
