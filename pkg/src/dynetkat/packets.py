"""Finite packet spaces.

A packet is a total assignment of a value to every field of a schema. Packets
are numbered in lexicographic order over the declared fields (first field most
significant) so that tests and assignments reduce to integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union

Value = Union[int, str]


class SchemaError(ValueError):
    """Raised for references to unknown fields or out-of-domain values."""


def parse_value(token: str) -> Value:
    """Numeric tokens become ints, everything else stays a string."""
    try:
        return int(token)
    except ValueError:
        return token


class FieldSchema:
    """Ordered fields, each with a finite non-empty domain."""

    def __init__(self, fields: Sequence[tuple[str, Sequence[Value]]]):
        if not fields:
            raise SchemaError("a schema needs at least one field")
        names: list[str] = []
        domains: list[tuple[Value, ...]] = []
        for name, dom in fields:
            if name in names:
                raise SchemaError(f"duplicate field {name!r}")
            dom = tuple(dom)
            if not dom:
                raise SchemaError(f"field {name!r} has an empty domain")
            if len(set(dom)) != len(dom):
                raise SchemaError(f"field {name!r} has repeated values")
            names.append(name)
            domains.append(dom)
        self.fields: tuple[str, ...] = tuple(names)
        self.domains: tuple[tuple[Value, ...], ...] = tuple(domains)
        self.sizes = tuple(len(d) for d in domains)
        strides = []
        acc = 1
        for s in reversed(self.sizes):
            strides.append(acc)
            acc *= s
        self.strides = tuple(reversed(strides))
        self.size = acc
        self._fpos = {n: i for i, n in enumerate(names)}
        self._vpos = [{v: j for j, v in enumerate(d)} for d in domains]
        # normalisation memo, keyed by policy identity (see netkat.normalize)
        self._memo: dict[int, tuple[object, object]] = {}

    def __eq__(self, other):
        if not isinstance(other, FieldSchema):
            return NotImplemented
        return self.fields == other.fields and self.domains == other.domains

    def __hash__(self):
        return hash((self.fields, self.domains))

    def __repr__(self):
        body = ", ".join(f"{f}: {list(d)}" for f, d in zip(self.fields, self.domains))
        return f"FieldSchema({body})"

    def __len__(self):
        return self.size

    def field_pos(self, name: str) -> int:
        try:
            return self._fpos[name]
        except KeyError:
            raise SchemaError(f"unknown field {name!r}") from None

    def value_pos(self, fpos: int, value: Value) -> int:
        try:
            return self._vpos[fpos][value]
        except KeyError:
            raise SchemaError(
                f"value {value!r} outside the domain of field {self.fields[fpos]!r}"
            ) from None

    def digit(self, index: int, fpos: int) -> int:
        return (index // self.strides[fpos]) % self.sizes[fpos]

    def with_digit(self, index: int, fpos: int, vpos: int) -> int:
        return index + (vpos - self.digit(index, fpos)) * self.strides[fpos]

    def index_of(self, values: Mapping[str, Value]) -> int:
        missing = set(self.fields) - set(values)
        if missing:
            raise SchemaError(f"missing fields {sorted(missing)}")
        extra = set(values) - set(self.fields)
        if extra:
            raise SchemaError(f"fields outside schema: {sorted(extra)}")
        idx = 0
        for i, name in enumerate(self.fields):
            idx += self.value_pos(i, values[name]) * self.strides[i]
        return idx

    def packet(self, index: int) -> "Packet":
        if not 0 <= index < self.size:
            raise SchemaError(f"packet index {index} out of range")
        return Packet(self, index)

    def make(self, **values: Value) -> "Packet":
        return Packet(self, self.index_of(values))

    def packets(self) -> Iterator["Packet"]:
        for i in range(self.size):
            yield Packet(self, i)

    def indices_where(self, fpos: int, vpos: int) -> list[int]:
        return [i for i in range(self.size) if self.digit(i, fpos) == vpos]


@dataclass(frozen=True)
class Packet:
    """A packet of a schema, identified by its index in canonical order."""

    schema: FieldSchema = field(compare=False, repr=False)
    index: int

    def __getitem__(self, name: str) -> Value:
        fpos = self.schema.field_pos(name)
        return self.schema.domains[fpos][self.schema.digit(self.index, fpos)]

    @property
    def values(self) -> tuple[Value, ...]:
        s = self.schema
        return tuple(s.domains[i][s.digit(self.index, i)] for i in range(len(s.fields)))

    def as_dict(self) -> dict[str, Value]:
        return dict(zip(self.schema.fields, self.values))

    def __lt__(self, other: "Packet") -> bool:
        return self.index < other.index

    def __str__(self):
        return "<" + ", ".join(f"{f}={v}" for f, v in zip(self.schema.fields, self.values)) + ">"


PacketList = tuple  # sequences of packets are plain tuples of Packet


def cons(head: Packet, rest: tuple) -> tuple:
    return (head,) + tuple(rest)


@dataclass(frozen=True)
class CompletePoint:
    """A complete test (role 'test') or complete assignment (role 'assign').

    Both mention every field of the schema exactly once and are in bijection
    with packets.
    """

    schema: FieldSchema = field(compare=False, repr=False)
    index: int
    role: str = "test"

    def __post_init__(self):
        if self.role not in ("test", "assign"):
            raise ValueError(f"bad role {self.role!r}")

    @classmethod
    def from_mapping(cls, schema: FieldSchema, values: Mapping[str, Value], role: str = "test"):
        return cls(schema, schema.index_of(values), role)

    @property
    def packet(self) -> Packet:
        return Packet(self.schema, self.index)

    def __str__(self):
        op = "=" if self.role == "test" else "<-"
        vals = Packet(self.schema, self.index).values
        return " . ".join(f"({f} {op} {v})" for f, v in zip(self.schema.fields, vals))


def complete_test(p: Packet) -> CompletePoint:
    return CompletePoint(p.schema, p.index, "test")


def complete_assignment(p: Packet) -> CompletePoint:
    return CompletePoint(p.schema, p.index, "assign")


def packet_of(point: CompletePoint) -> Packet:
    return point.packet


def all_packets(schema: FieldSchema) -> list[Packet]:
    return list(schema.packets())


def schema_from(spec: Iterable[tuple[str, Sequence[Value]]]) -> FieldSchema:
    return FieldSchema(list(spec))
