"""Launch-option syntax catalog: parsing, validation, sampling, rendering.

A catalog file is line-oriented: ``name<TAB>category<TAB>syntax-expression``
with ``#`` comment lines.  The syntax-expression notation:

    <Bool>                     boolean flag
    <U18>, <I11>               unsigned / signed integer of that bit width
    (1000, 1000000)            integer range, inclusive low, exclusive high
    <Continuous_range>:(0, U16)  same, U16 denoting 2**16 as the high bound
    "tcp"                      literal text
    a | b | c                  alternation (all-literal alternation is an enum)
    [ x ]                      optional part
    x y z                      concatenation
    <List>:( x )               comma-rendered list of x, at most four elements
    <Signals>                  enum over the standard signal names
    <HVPath>, <CVPath>         enum over configured host / container path pools

Every expression denotes a finite value space.  Values are exchanged as
payloads: bool for flags, int for the integer shapes, str for enums,
(magnitude, unit-or-None) for byte sizes, tuples for compounds (one slot
per non-literal leaf, None for omitted optional leaves), lists for list
options, and (branch_index, branch_payload) for alternations that mix
literals with other shapes.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterator, Optional

__all__ = [
    "OptionError",
    "CatalogError",
    "DuplicateOptionError",
    "UnknownOptionError",
    "ValueParseError",
    "ValueRangeError",
    "UnitError",
    "BoolFlag",
    "UnsignedInt",
    "SignedInt",
    "ContinuousRange",
    "Enum",
    "BytesWithUnit",
    "ListOf",
    "Literal",
    "Compound",
    "CompoundPart",
    "OneOf",
    "OptionSpec",
    "OptionValue",
    "OptionCatalog",
    "parse_syntax",
    "parse_catalog",
    "load_catalog",
    "default_catalog",
    "validate_value",
    "sample_value",
    "render_flag",
    "render_fragment",
    "strip_flag",
    "integer_bounds",
]


class OptionError(ValueError):
    """Base class for catalog and value errors."""


class CatalogError(OptionError):
    pass


class DuplicateOptionError(CatalogError):
    pass


class UnknownOptionError(OptionError):
    pass


class ValueParseError(OptionError):
    pass


class ValueRangeError(ValueParseError):
    """Integer parsed but outside the legal bounds.

    lo is inclusive, hi is exclusive; both are carried for callers that
    want to surface the legal window.
    """

    def __init__(self, message: str, lo: int, hi: int):
        super().__init__(message)
        self.lo = lo
        self.hi = hi


class UnitError(ValueParseError):
    pass


# Standard signal names in kernel numbering order (1..31).
SIGNAL_NAMES: tuple[str, ...] = (
    "SIGHUP", "SIGINT", "SIGQUIT", "SIGILL", "SIGTRAP", "SIGABRT",
    "SIGBUS", "SIGFPE", "SIGKILL", "SIGUSR1", "SIGSEGV", "SIGUSR2",
    "SIGPIPE", "SIGALRM", "SIGTERM", "SIGSTKFLT", "SIGCHLD", "SIGCONT",
    "SIGSTOP", "SIGTSTP", "SIGTTIN", "SIGTTOU", "SIGURG", "SIGXCPU",
    "SIGXFSZ", "SIGVTALRM", "SIGPROF", "SIGWINCH", "SIGIO", "SIGPWR",
    "SIGSYS",
)

# Sampled mount paths.  Sampling never touches the real filesystem; the
# pools just have to be stable and prefix-free within themselves.
HOST_PATH_POOL: tuple[str, ...] = ("/srv/export", "/tmp/scratch", "/var/lib/shared")
CONTAINER_PATH_POOL: tuple[str, ...] = ("/data", "/mnt/ingest", "/var/cache/app")

DEFAULT_LIST_MAX = 4

CATEGORIES = frozenset({"bool", "int", "string", "bytes", "list"})

_LITERAL_NONE = object()


class ValueSyntax:
    """Base class for syntax nodes.

    match() is a backtracking generator yielding (payload, end_position)
    for every parse of ``text`` starting at ``pos``; validation succeeds
    when some parse consumes the whole candidate.
    """

    def space_size(self) -> int:
        raise NotImplementedError

    def sample(self, rng: random.Random):
        raise NotImplementedError

    def render(self, payload) -> str:
        raise NotImplementedError

    def match(self, text: str, pos: int) -> Iterator[tuple[object, int]]:
        raise NotImplementedError


_DIGITS = re.compile(r"\d+")
_SIGNED = re.compile(r"-?\d+")


@dataclass(frozen=True)
class BoolFlag(ValueSyntax):
    def space_size(self) -> int:
        return 2

    def sample(self, rng: random.Random) -> bool:
        return bool(rng.randrange(2))

    def render(self, payload) -> str:
        if not isinstance(payload, bool):
            raise OptionError(f"boolean flag payload must be bool, got {payload!r}")
        return "true" if payload else "false"

    def match(self, text: str, pos: int):
        for token, value in (("true", True), ("false", False)):
            if text.startswith(token, pos):
                yield value, pos + len(token)


@dataclass(frozen=True)
class UnsignedInt(ValueSyntax):
    bit_width: int

    def __post_init__(self):
        if not 1 <= self.bit_width <= 64:
            raise CatalogError(f"unsigned bit width out of range: {self.bit_width}")

    @property
    def bounds(self) -> tuple[int, int]:
        return 0, 1 << self.bit_width

    def space_size(self) -> int:
        return 1 << self.bit_width

    def sample(self, rng: random.Random) -> int:
        return rng.randrange(0, 1 << self.bit_width)

    def render(self, payload) -> str:
        _check_int(payload, *self.bounds)
        return str(payload)

    def match(self, text: str, pos: int):
        m = _DIGITS.match(text, pos)
        if m:
            value = int(m.group())
            if value < (1 << self.bit_width):
                yield value, m.end()


@dataclass(frozen=True)
class SignedInt(ValueSyntax):
    bit_width: int

    def __post_init__(self):
        if not 2 <= self.bit_width <= 64:
            raise CatalogError(f"signed bit width out of range: {self.bit_width}")

    @property
    def bounds(self) -> tuple[int, int]:
        half = 1 << (self.bit_width - 1)
        return -half, half

    def space_size(self) -> int:
        return 1 << self.bit_width

    def sample(self, rng: random.Random) -> int:
        lo, hi = self.bounds
        return rng.randrange(lo, hi)

    def render(self, payload) -> str:
        _check_int(payload, *self.bounds)
        return str(payload)

    def match(self, text: str, pos: int):
        m = _SIGNED.match(text, pos)
        if m:
            value = int(m.group())
            lo, hi = self.bounds
            if lo <= value < hi:
                yield value, m.end()


@dataclass(frozen=True)
class ContinuousRange(ValueSyntax):
    """Integer window: admits lo <= v < hi."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo >= self.hi:
            raise CatalogError(f"empty range ({self.lo}, {self.hi})")

    @property
    def bounds(self) -> tuple[int, int]:
        return self.lo, self.hi

    def space_size(self) -> int:
        return self.hi - self.lo

    def sample(self, rng: random.Random) -> int:
        return rng.randrange(self.lo, self.hi)

    def render(self, payload) -> str:
        _check_int(payload, self.lo, self.hi)
        return str(payload)

    def match(self, text: str, pos: int):
        m = _SIGNED.match(text, pos)
        if m:
            value = int(m.group())
            if self.lo <= value < self.hi:
                yield value, m.end()


@dataclass(frozen=True)
class Enum(ValueSyntax):
    choices: tuple[str, ...]

    def __post_init__(self):
        if not self.choices:
            raise CatalogError("enum with no choices")
        if len(set(self.choices)) != len(self.choices):
            raise CatalogError(f"enum choices not unique: {self.choices}")
        if any(not c for c in self.choices):
            raise CatalogError("enum with empty choice")

    def space_size(self) -> int:
        return len(self.choices)

    def sample(self, rng: random.Random) -> str:
        return self.choices[rng.randrange(len(self.choices))]

    def render(self, payload) -> str:
        if payload not in self.choices:
            raise OptionError(f"{payload!r} is not one of {self.choices}")
        return payload

    def match(self, text: str, pos: int):
        # Longest choices first so one choice cannot shadow an extension
        # of another ("SIGTT..." family, for instance).
        for choice in sorted(self.choices, key=len, reverse=True):
            if text.startswith(choice, pos):
                yield choice, pos + len(choice)


@dataclass(frozen=True)
class BytesWithUnit(ValueSyntax):
    bit_width: int
    unit_suffixes: tuple[str, ...]
    suffix_optional: bool

    def __post_init__(self):
        if not 1 <= self.bit_width <= 64:
            raise CatalogError(f"magnitude bit width out of range: {self.bit_width}")
        if not self.unit_suffixes:
            raise CatalogError("byte size without unit suffixes")

    def space_size(self) -> int:
        units = len(self.unit_suffixes) + (1 if self.suffix_optional else 0)
        return (1 << self.bit_width) * units

    def sample(self, rng: random.Random) -> tuple[int, Optional[str]]:
        magnitude = rng.randrange(0, 1 << self.bit_width)
        units: tuple[Optional[str], ...] = self.unit_suffixes
        if self.suffix_optional:
            units = (None,) + self.unit_suffixes
        return magnitude, units[rng.randrange(len(units))]

    def render(self, payload) -> str:
        if not (isinstance(payload, tuple) and len(payload) == 2):
            raise OptionError(f"byte size payload must be (magnitude, unit), got {payload!r}")
        magnitude, unit = payload
        _check_int(magnitude, 0, 1 << self.bit_width)
        if unit is None:
            if not self.suffix_optional:
                raise UnitError("unit suffix is required")
            return str(magnitude)
        if unit not in self.unit_suffixes:
            raise UnitError(f"unit {unit!r} is not one of {self.unit_suffixes}")
        return f"{magnitude}{unit}"

    def match(self, text: str, pos: int):
        m = _DIGITS.match(text, pos)
        if not m:
            return
        magnitude = int(m.group())
        if magnitude >= (1 << self.bit_width):
            return
        end = m.end()
        for suffix in self.unit_suffixes:
            if text.startswith(suffix, end):
                yield (magnitude, suffix), end + len(suffix)
        if self.suffix_optional:
            yield (magnitude, None), end


@dataclass(frozen=True)
class Literal(ValueSyntax):
    """Fixed text; only appears inside compounds and alternations."""

    text: str

    def __post_init__(self):
        if not self.text:
            raise CatalogError("empty literal")

    def space_size(self) -> int:
        return 1

    def sample(self, rng: random.Random) -> str:
        return self.text

    def render(self, payload) -> str:
        if payload not in (self.text, _LITERAL_NONE):
            raise OptionError(f"literal payload mismatch: {payload!r} != {self.text!r}")
        return self.text

    def match(self, text: str, pos: int):
        if text.startswith(self.text, pos):
            yield self.text, pos + len(self.text)


@dataclass(frozen=True)
class CompoundPart:
    node: ValueSyntax
    optional: bool


@dataclass(frozen=True)
class Compound(ValueSyntax):
    """Concatenation of literals and sub-syntaxes.

    The payload is a flat tuple with one slot per non-literal leaf in
    order of appearance; every leaf under an omitted optional part is
    None.
    """

    parts: tuple[CompoundPart, ...]

    def __post_init__(self):
        if not self.parts:
            raise CatalogError("empty compound")
        for part in self.parts:
            if isinstance(part.node, ListOf):
                raise CatalogError("lists cannot nest inside compounds")

    def leaves(self) -> tuple[ValueSyntax, ...]:
        out: list[ValueSyntax] = []
        for part in self.parts:
            out.extend(_leaves(part.node))
        return tuple(out)

    def space_size(self) -> int:
        total = 1
        for part in self.parts:
            size = part.node.space_size()
            total *= size + 1 if part.optional else size
        return total

    def sample(self, rng: random.Random) -> tuple:
        acc: list = []
        for part in self.parts:
            width = len(_leaves(part.node))
            if part.optional and rng.randrange(part.node.space_size() + 1) == 0:
                acc.extend([None] * width)
                continue
            acc.extend(_sample_leaves(part.node, rng))
        return tuple(acc)

    def render(self, payload) -> str:
        leaves = self.leaves()
        if not (isinstance(payload, tuple) and len(payload) == len(leaves)):
            raise OptionError(
                f"compound payload must be a {len(leaves)}-tuple, got {payload!r}"
            )
        out: list[str] = []
        cursor = 0
        for part in self.parts:
            width = len(_leaves(part.node))
            chunk = payload[cursor : cursor + width]
            cursor += width
            if part.optional:
                if all(v is None for v in chunk):
                    continue
                if any(v is None for v in chunk):
                    raise OptionError(f"partially omitted optional part: {chunk!r}")
            out.append(_render_leaves(part.node, chunk))
        return "".join(out)

    def match(self, text: str, pos: int):
        parts = self.parts

        def advance(index: int, at: int, acc: list):
            if index == len(parts):
                yield tuple(acc), at
                return
            part = parts[index]
            width = len(_leaves(part.node))
            for chunk, nxt in _match_leaves(part.node, text, at):
                yield from advance(index + 1, nxt, acc + chunk)
            if part.optional:
                yield from advance(index + 1, at, acc + [None] * width)

        yield from advance(0, pos, [])


@dataclass(frozen=True)
class ListOf(ValueSyntax):
    """Comma-rendered list of an element syntax; top level only."""

    element: ValueSyntax
    max_len: int = DEFAULT_LIST_MAX

    def __post_init__(self):
        if self.max_len < 1:
            raise CatalogError(f"list cap must be positive, got {self.max_len}")
        if isinstance(self.element, (ListOf, BoolFlag)):
            raise CatalogError("unsupported list element syntax")

    def space_size(self) -> int:
        n = self.element.space_size()
        return sum(n**length for length in range(1, self.max_len + 1))

    def sample(self, rng: random.Random) -> list:
        length = rng.randint(1, self.max_len)
        return [_sample_scalar(self.element, rng) for _ in range(length)]

    def render(self, payload) -> str:
        if not isinstance(payload, (list, tuple)) or not payload:
            raise OptionError(f"list payload must be a non-empty sequence, got {payload!r}")
        if len(payload) > self.max_len:
            raise OptionError(f"list holds {len(payload)} elements, cap is {self.max_len}")
        return ",".join(self.element.render(item) for item in payload)

    def match(self, text: str, pos: int):
        raise TypeError("lists do not participate in positional matching")


@dataclass(frozen=True)
class OneOf(ValueSyntax):
    """Alternation whose branches are not all literals.

    The payload remembers the branch: (branch_index, branch_payload).
    """

    branches: tuple[ValueSyntax, ...]

    def __post_init__(self):
        if len(self.branches) < 2:
            raise CatalogError("alternation needs at least two branches")

    def space_size(self) -> int:
        return sum(b.space_size() for b in self.branches)

    def sample(self, rng: random.Random) -> tuple[int, object]:
        sizes = [b.space_size() for b in self.branches]
        pick = rng.randrange(sum(sizes))
        for index, size in enumerate(sizes):
            if pick < size:
                return index, _sample_scalar(self.branches[index], rng)
            pick -= size
        raise AssertionError("unreachable")

    def render(self, payload) -> str:
        if not (isinstance(payload, tuple) and len(payload) == 2):
            raise OptionError(f"alternation payload must be (branch, value), got {payload!r}")
        index, inner = payload
        if not isinstance(index, int) or not 0 <= index < len(self.branches):
            raise OptionError(f"no alternation branch {index!r}")
        return self.branches[index].render(inner)

    def match(self, text: str, pos: int):
        for index, branch in enumerate(self.branches):
            for inner, end in branch.match(text, pos):
                yield (index, inner), end


def _check_int(value, lo: int, hi: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise OptionError(f"integer payload expected, got {value!r}")
    if not lo <= value < hi:
        raise ValueRangeError(f"{value} outside [{lo}, {hi})", lo, hi)


def _leaves(node: ValueSyntax) -> tuple[ValueSyntax, ...]:
    if isinstance(node, Literal):
        return ()
    if isinstance(node, Compound):
        return node.leaves()
    return (node,)


def _sample_leaves(node: ValueSyntax, rng: random.Random) -> list:
    if isinstance(node, Literal):
        return []
    if isinstance(node, Compound):
        return list(node.sample(rng))
    return [node.sample(rng)]


def _sample_scalar(node: ValueSyntax, rng: random.Random):
    return node.sample(rng)


def _render_leaves(node: ValueSyntax, chunk: tuple) -> str:
    if isinstance(node, Literal):
        return node.text
    if isinstance(node, Compound):
        return node.render(tuple(chunk))
    return node.render(chunk[0])


def _match_leaves(node: ValueSyntax, text: str, pos: int):
    """Yield (leaf-payload-list, end) parses for one compound part."""
    if isinstance(node, Literal):
        for _, end in node.match(text, pos):
            yield [], end
    elif isinstance(node, Compound):
        for payload, end in node.match(text, pos):
            yield list(payload), end
    else:
        for payload, end in node.match(text, pos):
            yield [payload], end


# --- syntax expression parsing -------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<angle><[A-Za-z_][A-Za-z_0-9]*>)
  | (?P<string>"[^"]*")
  | (?P<utoken>U\d+)
  | (?P<int>-?\d+)
  | (?P<punct>[()\[\]|,:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str


def _tokenize(expression: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(expression):
        m = _TOKEN_RE.match(expression, pos)
        if not m:
            raise CatalogError(f"cannot tokenize syntax at {expression[pos:]!r}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        text = m.group()
        if kind == "punct":
            kind = text
        tokens.append(_Token(kind, text))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], expression: str):
        self.tokens = tokens
        self.pos = 0
        self.expression = expression

    def peek(self, offset: int = 0) -> Optional[_Token]:
        index = self.pos + offset
        return self.tokens[index] if index < len(self.tokens) else None

    def take(self, kind: Optional[str] = None) -> _Token:
        token = self.peek()
        if token is None:
            raise CatalogError(f"unexpected end of syntax in {self.expression!r}")
        if kind is not None and token.kind != kind:
            raise CatalogError(
                f"expected {kind!r} but found {token.text!r} in {self.expression!r}"
            )
        self.pos += 1
        return token

    def parse(self) -> ValueSyntax:
        node = self.alternation()
        if self.peek() is not None:
            raise CatalogError(
                f"trailing tokens after syntax: {self.peek().text!r} in {self.expression!r}"
            )
        return node

    def alternation(self) -> ValueSyntax:
        branches = [self.sequence()]
        while self.peek() is not None and self.peek().kind == "|":
            self.take("|")
            branches.append(self.sequence())
        if len(branches) == 1:
            return branches[0]
        if all(isinstance(b, Literal) for b in branches):
            return Enum(tuple(b.text for b in branches))
        return OneOf(tuple(branches))

    def sequence(self) -> ValueSyntax:
        items: list[CompoundPart] = []
        while True:
            token = self.peek()
            if token is None or token.kind in (")", "]", "|", ","):
                break
            items.append(self.item())
        if not items:
            raise CatalogError(f"empty sequence in {self.expression!r}")
        if len(items) == 1 and not items[0].optional:
            return items[0].node
        return Compound(tuple(items))

    def item(self) -> CompoundPart:
        token = self.peek()
        if token.kind == "[":
            self.take("[")
            inner = self.alternation()
            self.take("]")
            return CompoundPart(inner, True)
        return CompoundPart(self.base(), False)

    def base(self) -> ValueSyntax:
        token = self.peek()
        if token.kind == "angle":
            return self.angle()
        if token.kind == "string":
            self.take("string")
            return Literal(token.text[1:-1])
        if token.kind == "(":
            if self._range_ahead():
                return self.range_parens()
            self.take("(")
            inner = self.alternation()
            self.take(")")
            return inner
        raise CatalogError(f"unexpected token {token.text!r} in {self.expression!r}")

    def angle(self) -> ValueSyntax:
        name = self.take("angle").text[1:-1]
        if name == "Bool":
            return BoolFlag()
        if name == "Signals":
            return Enum(SIGNAL_NAMES)
        if name == "HVPath":
            return Enum(HOST_PATH_POOL)
        if name == "CVPath":
            return Enum(CONTAINER_PATH_POOL)
        if name == "List":
            self.take(":")
            self.take("(")
            inner = self.alternation()
            self.take(")")
            return ListOf(inner)
        if name == "Continuous_range":
            self.take(":")
            return self.range_parens()
        m = re.fullmatch(r"U(\d+)", name)
        if m:
            return UnsignedInt(int(m.group(1)))
        m = re.fullmatch(r"I(\d+)", name)
        if m:
            return SignedInt(int(m.group(1)))
        raise CatalogError(f"unknown syntax token <{name}> in {self.expression!r}")

    def _range_ahead(self) -> bool:
        shape = [self.peek(i) for i in range(5)]
        if any(t is None for t in shape):
            return False
        return (
            shape[0].kind == "("
            and shape[1].kind == "int"
            and shape[2].kind == ","
            and shape[3].kind in ("int", "utoken")
            and shape[4].kind == ")"
        )

    def range_parens(self) -> ContinuousRange:
        self.take("(")
        lo = int(self.take("int").text)
        self.take(",")
        hi_token = self.take()
        if hi_token.kind == "utoken":
            hi = 1 << int(hi_token.text[1:])
        elif hi_token.kind == "int":
            hi = int(hi_token.text)
        else:
            raise CatalogError(f"bad range bound {hi_token.text!r} in {self.expression!r}")
        self.take(")")
        return ContinuousRange(lo, hi)


def parse_syntax(expression: str, category: str = "string") -> ValueSyntax:
    """Parse one syntax expression into its node tree."""
    node = _Parser(_tokenize(expression), expression).parse()
    if category == "bytes":
        node = _fold_byte_size(node)
    return node


def _fold_byte_size(node: ValueSyntax) -> ValueSyntax:
    """Collapse ``<Uw> [(unit enum)]`` into a byte-size node."""
    if not isinstance(node, Compound) or len(node.parts) != 2:
        return node
    first, second = node.parts
    if (
        isinstance(first.node, UnsignedInt)
        and not first.optional
        and isinstance(second.node, Enum)
    ):
        return BytesWithUnit(
            first.node.bit_width,
            second.node.choices,
            suffix_optional=second.optional,
        )
    return node


# --- catalog ---------------------------------------------------------------


@dataclass(frozen=True)
class OptionSpec:
    name: str
    category: str
    syntax: ValueSyntax
    expression: str


@dataclass(frozen=True)
class OptionValue:
    """An option paired with one concrete payload from its value space."""

    spec: OptionSpec
    payload: object

    @property
    def name(self) -> str:
        return self.spec.name


class OptionCatalog:
    def __init__(self, specs: list[OptionSpec]):
        self._specs: dict[str, OptionSpec] = {}
        for spec in specs:
            if spec.name in self._specs:
                raise DuplicateOptionError(f"option {spec.name!r} declared twice")
            self._specs[spec.name] = spec

    def __getitem__(self, name: str) -> OptionSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownOptionError(f"unknown option {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def __iter__(self):
        return iter(self._specs.values())

    def __len__(self) -> int:
        return len(self._specs)

    def names(self) -> tuple[str, ...]:
        return tuple(self._specs)


def parse_catalog(text: str, source: str = "<memory>") -> OptionCatalog:
    specs: list[OptionSpec] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        fields = raw_line.split("\t")
        if len(fields) != 3:
            raise CatalogError(
                f"{source}:{lineno}: expected name<TAB>category<TAB>syntax, got {raw_line!r}"
            )
        name, category, expression = (f.strip() for f in fields)
        if not name:
            raise CatalogError(f"{source}:{lineno}: empty option name")
        if category not in CATEGORIES:
            raise CatalogError(f"{source}:{lineno}: unknown category {category!r}")
        try:
            syntax = parse_syntax(expression, category)
        except CatalogError as exc:
            raise CatalogError(f"{source}:{lineno}: option {name!r}: {exc}") from None
        specs.append(OptionSpec(name, category, syntax, expression))
    return OptionCatalog(specs)


def load_catalog(path) -> OptionCatalog:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_catalog(handle.read(), source=str(path))


@lru_cache(maxsize=1)
def default_catalog() -> OptionCatalog:
    text = resources.files("leastpriv").joinpath("data/options.catalog").read_text("utf-8")
    return parse_catalog(text, source="options.catalog")


# --- value operations ------------------------------------------------------


def validate_value(spec: OptionSpec, raw: str) -> OptionValue:
    """Parse a raw candidate string against the option's syntax."""
    node = spec.syntax
    if isinstance(node, BoolFlag):
        if raw in ("", "true"):
            return OptionValue(spec, True)
        if raw == "false":
            return OptionValue(spec, False)
        raise ValueParseError(f"option {spec.name!r}: {raw!r} is not a boolean flag value")
    if isinstance(node, ListOf):
        items = raw.split(",")
        if len(items) > node.max_len:
            raise ValueParseError(
                f"option {spec.name!r}: {len(items)} elements exceed the cap of {node.max_len}"
            )
        payload = [_validate_scalar(spec, node.element, item) for item in items]
        return OptionValue(spec, payload)
    return OptionValue(spec, _validate_scalar(spec, node, raw))


def _validate_scalar(spec: OptionSpec, node: ValueSyntax, raw: str):
    for payload, end in node.match(raw, 0):
        if end == len(raw):
            return payload
    raise _diagnose(spec, node, raw)


def _diagnose(spec: OptionSpec, node: ValueSyntax, raw: str) -> OptionError:
    prefix = f"option {spec.name!r}:"
    if isinstance(node, (UnsignedInt, SignedInt, ContinuousRange)):
        if re.fullmatch(r"-?\d+", raw):
            value = int(raw)
            lo, hi = node.bounds
            if not lo <= value < hi:
                return ValueRangeError(f"{prefix} {value} outside [{lo}, {hi})", lo, hi)
    if isinstance(node, BytesWithUnit):
        m = re.fullmatch(r"(\d+)([A-Za-z]*)", raw)
        if m:
            magnitude, suffix = int(m.group(1)), m.group(2)
            if suffix and suffix not in node.unit_suffixes:
                return UnitError(
                    f"{prefix} unit {suffix!r} is not one of {node.unit_suffixes}"
                )
            if not suffix and not node.suffix_optional:
                return UnitError(f"{prefix} a unit suffix is required")
            lo, hi = 0, 1 << node.bit_width
            if not lo <= magnitude < hi:
                return ValueRangeError(
                    f"{prefix} magnitude {magnitude} outside [{lo}, {hi})", lo, hi
                )
    return ValueParseError(f"{prefix} {raw!r} does not match {spec.expression!r}")


def sample_value(spec: OptionSpec, seed: int) -> OptionValue:
    """Deterministically draw one value from the option's space."""
    return sample_value_with(spec, random.Random(seed))


def sample_value_with(spec: OptionSpec, rng: random.Random) -> OptionValue:
    return OptionValue(spec, spec.syntax.sample(rng))


def render_fragment(value: OptionValue) -> str:
    """The value text after the equals sign (booleans render true/false)."""
    return value.spec.syntax.render(value.payload)


def render_flag(value: OptionValue) -> str:
    """The canonical command-line fragment for one option value."""
    node = value.spec.syntax
    if isinstance(node, BoolFlag):
        if not isinstance(value.payload, bool):
            raise OptionError(f"boolean flag payload must be bool, got {value.payload!r}")
        if value.payload:
            return f"--{value.name}"
        return f"--{value.name}=false"
    return f"--{value.name}={node.render(value.payload)}"


def strip_flag(spec: OptionSpec, flag: str) -> str:
    """Undo render_flag's prefix, returning the raw candidate string."""
    bare = f"--{spec.name}"
    if flag == bare:
        return ""
    prefix = bare + "="
    if flag.startswith(prefix):
        return flag[len(prefix):]
    raise OptionError(f"{flag!r} does not carry option {spec.name!r}")


def integer_bounds(node: ValueSyntax) -> Optional[tuple[int, int]]:
    """Inclusive (low, high) integer window for mutation, if one exists."""
    if isinstance(node, (UnsignedInt, SignedInt)):
        lo, hi = node.bounds
        return lo, hi - 1
    if isinstance(node, ContinuousRange):
        return node.lo, node.hi - 1
    if isinstance(node, BytesWithUnit):
        return 0, (1 << node.bit_width) - 1
    if isinstance(node, OneOf):
        windows = [integer_bounds(b) for b in node.branches]
        windows = [w for w in windows if w is not None]
        if not windows:
            return None
        return max(windows, key=lambda w: w[1] - w[0])
    return None
