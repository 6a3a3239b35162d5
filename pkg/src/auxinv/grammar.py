"""Context-free grammars: parsing, sampling, Earley recognition, enumeration.

Grammar file format, one rule group per line:

    # comment
    @marker MAIN-AUX            declares a zero-width annotation symbol
    @include vocab.cfg          textual include (resolved by load_grammar)
    S -> NP VP | NP VP PP       alternatives separated by "|"

Symbols are whitespace-separated.  A symbol containing an uppercase letter
is a nonterminal or declared marker and must be defined; all-lowercase
symbols are terminals.  The first left-hand side in the file is the start
symbol.  Markers participate in derivations but yield no surface token.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path


class GrammarError(Exception):
    """Base class for grammar construction and use errors."""


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, source: str = "<string>", line: int | None = None):
        self.source = source
        self.line = line
        prefix = f"{source}:{line}: " if line is not None else ""
        super().__init__(prefix + message)


class UndefinedSymbolError(GrammarSyntaxError):
    pass


class DuplicateDefinitionError(GrammarSyntaxError):
    pass


class InvalidGrammarError(GrammarError):
    """Unreachable or unproductive nonterminals, bad start symbol, etc."""


class DepthExceededError(GrammarError):
    """No complete derivation fits within the requested depth bound."""


class LanguageSizeError(GrammarError):
    """Enumeration exceeded the configured string cap."""


@dataclass(frozen=True)
class Marker:
    """Zero-width annotation leaf in a derivation."""

    name: str


@dataclass(frozen=True)
class DNode:
    """Derivation node: a nonterminal expanded by one of its alternatives.

    ``children`` holds, in surface order, a mix of ``DNode`` (nonterminal),
    ``str`` (terminal token), and ``Marker`` entries matching the chosen
    alternative exactly.
    """

    symbol: str
    alt_index: int
    children: tuple


@dataclass(frozen=True)
class Derivation:
    root: DNode

    @cached_property
    def tokens(self) -> tuple[str, ...]:
        out: list[str] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, str):
                out.append(node)
            elif isinstance(node, DNode):
                stack.extend(reversed(node.children))
        return tuple(out)

    @cached_property
    def markers(self) -> tuple[tuple[str, int], ...]:
        """(marker name, surface index) pairs; index = tokens emitted so far."""
        out: list[tuple[str, int]] = []
        pos = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, str):
                pos += 1
            elif isinstance(node, Marker):
                out.append((node.name, pos))
            else:
                stack.extend(reversed(node.children))
        return tuple(out)

    def depth(self) -> int:
        def _depth(node: DNode) -> int:
            kids = [c for c in node.children if isinstance(c, DNode)]
            return 1 + (max(map(_depth, kids)) if kids else 0)

        return _depth(self.root)

    def spans(self):
        """Yield (node, start, end) surface spans for every DNode, preorder."""

        def walk(node: DNode, start: int):
            pos = start
            entries = []
            for child in node.children:
                if isinstance(child, str):
                    pos += 1
                elif isinstance(child, DNode):
                    entries.append((child, pos))
                    pos = walk_len(child, pos)
            yield (node, start, pos)
            for child, cstart in entries:
                yield from walk(child, cstart)

        def walk_len(node: DNode, start: int) -> int:
            pos = start
            for child in node.children:
                if isinstance(child, str):
                    pos += 1
                elif isinstance(child, DNode):
                    pos = walk_len(child, pos)
            return pos

        yield from walk(self.root, 0)


def _has_upper(symbol: str) -> bool:
    return any(ch.isupper() for ch in symbol)


@dataclass(frozen=True)
class Grammar:
    """An immutable CFG with optional zero-width marker symbols.

    ``productions`` maps each nonterminal to an ordered tuple of
    alternatives; each alternative is a tuple of symbols (nonterminals,
    terminals, or markers).  Build instances through ``parse_grammar`` /
    ``from_productions`` so the invariants are checked.
    """

    start: str
    productions: dict
    markers: frozenset
    nonterminals: frozenset
    terminals: frozenset

    @classmethod
    def from_productions(cls, productions, start, markers=()):
        prods = {lhs: tuple(tuple(alt) for alt in alts) for lhs, alts in productions.items()}
        markers = frozenset(markers)
        nonterminals = frozenset(prods)
        terminals = set()
        for lhs, alts in prods.items():
            for alt in alts:
                for sym in alt:
                    if sym in nonterminals or sym in markers:
                        continue
                    if _has_upper(sym):
                        raise UndefinedSymbolError(
                            f"symbol {sym!r} in rule for {lhs!r} is not defined"
                        )
                    terminals.add(sym)
        g = cls(
            start=start,
            productions=prods,
            markers=markers,
            nonterminals=nonterminals,
            terminals=frozenset(terminals),
        )
        g._validate()
        return g

    def _validate(self) -> None:
        if self.start not in self.nonterminals:
            raise InvalidGrammarError(f"start symbol {self.start!r} has no rules")
        if self.nonterminals & self.markers:
            bad = sorted(self.nonterminals & self.markers)
            raise InvalidGrammarError(f"markers also defined as nonterminals: {bad}")
        # productive: derives at least one finite terminal string
        productive: set[str] = set()
        changed = True
        while changed:
            changed = False
            for nt, alts in self.productions.items():
                if nt in productive:
                    continue
                for alt in alts:
                    if all(
                        sym in productive or sym not in self.nonterminals
                        for sym in alt
                    ):
                        productive.add(nt)
                        changed = True
                        break
        unproductive = self.nonterminals - productive
        if unproductive:
            raise InvalidGrammarError(
                f"unproductive nonterminals: {sorted(unproductive)}"
            )
        # reachable from start
        reachable = {self.start}
        frontier = [self.start]
        while frontier:
            nt = frontier.pop()
            for alt in self.productions[nt]:
                for sym in alt:
                    if sym in self.nonterminals and sym not in reachable:
                        reachable.add(sym)
                        frontier.append(sym)
        unreachable = self.nonterminals - reachable
        if unreachable:
            raise InvalidGrammarError(
                f"unreachable nonterminals: {sorted(unreachable)}"
            )

    # -- compiled views ----------------------------------------------------

    @cached_property
    def _stripped(self) -> dict:
        """nonterminal -> tuple of (alt_index, alternative minus markers)."""
        return {
            nt: tuple(
                (i, tuple(s for s in alt if s not in self.markers))
                for i, alt in enumerate(alts)
            )
            for nt, alts in self.productions.items()
        }

    @cached_property
    def _min_depth(self) -> dict:
        """Least derivation depth per nonterminal (1 = expands to terminals)."""
        INF = float("inf")
        md = {nt: INF for nt in self.nonterminals}
        changed = True
        while changed:
            changed = False
            for nt, alts in self.productions.items():
                for alt in alts:
                    sub = [md[s] for s in alt if s in self.nonterminals]
                    cand = 1 + (max(sub) if sub else 0)
                    if cand < md[nt]:
                        md[nt] = cand
                        changed = True
        return md

    @cached_property
    def _alt_min_depth(self) -> dict:
        """nonterminal -> tuple of per-alternative minimum completion depths."""
        md = self._min_depth
        out = {}
        for nt, alts in self.productions.items():
            depths = []
            for alt in alts:
                sub = [md[s] for s in alt if s in self.nonterminals]
                depths.append(1 + (max(sub) if sub else 0))
            out[nt] = tuple(depths)
        return out

    def terminal_classes(self) -> dict:
        """Nonterminals whose alternatives are all single terminals.

        Returns {class name: tuple of member tokens}; the lexical layer of
        the bundled grammars (Det/N/IV/TV/Aux/Prep/Rel classes).
        """
        out = {}
        for nt, alts in self.productions.items():
            if alts and all(len(a) == 1 and a[0] in self.terminals for a in alts):
                out[nt] = tuple(a[0] for a in alts)
        return out

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 of the canonical dump, for dataset manifests."""
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    def dumps(self) -> str:
        lines = [f"@marker {m}" for m in sorted(self.markers)]
        order = [self.start] + sorted(self.nonterminals - {self.start})
        for nt in order:
            alts = " | ".join(" ".join(alt) for alt in self.productions[nt])
            lines.append(f"{nt} -> {alts}")
        return "\n".join(lines) + "\n"


# -- parsing ----------------------------------------------------------------


def parse_grammar(text: str, source: str = "<string>") -> Grammar:
    """Parse grammar source text; raises GrammarSyntaxError subclasses."""
    markers: set[str] = set()
    productions: dict[str, list[tuple[str, ...]]] = {}
    start: str | None = None
    defined_at: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            parts = line.split()
            if parts[0] == "@marker" and len(parts) == 2:
                markers.add(parts[1])
                continue
            if parts[0] == "@include":
                raise GrammarSyntaxError(
                    "@include is only resolved by load_grammar(), not parse_grammar()",
                    source,
                    lineno,
                )
            raise GrammarSyntaxError(f"unknown directive {parts[0]!r}", source, lineno)
        if "->" not in line:
            raise GrammarSyntaxError("expected 'LHS -> alternatives'", source, lineno)
        lhs_txt, rhs_txt = line.split("->", 1)
        lhs = lhs_txt.strip()
        if not lhs or len(lhs.split()) != 1:
            raise GrammarSyntaxError(f"bad left-hand side {lhs_txt.strip()!r}", source, lineno)
        if lhs in productions:
            raise DuplicateDefinitionError(
                f"nonterminal {lhs!r} already defined on line {defined_at[lhs]}",
                source,
                lineno,
            )
        alts = []
        for alt_txt in rhs_txt.split("|"):
            symbols = tuple(alt_txt.split())
            if not symbols:
                raise GrammarSyntaxError("empty alternative", source, lineno)
            alts.append(symbols)
        productions[lhs] = alts
        defined_at[lhs] = lineno
        if start is None:
            start = lhs

    if start is None:
        raise GrammarSyntaxError("no rules found", source)
    try:
        return Grammar.from_productions(productions, start, markers)
    except UndefinedSymbolError as e:
        raise UndefinedSymbolError(str(e), source) from None


def load_grammar(path) -> Grammar:
    """Load a grammar file, resolving @include lines relative to the file."""
    path = Path(path)

    def expand(p: Path, seen: frozenset) -> str:
        if p in seen:
            raise GrammarSyntaxError(f"@include cycle through {p}", str(p))
        chunks = []
        for raw in p.read_text().splitlines():
            stripped = raw.split("#", 1)[0].strip()
            if stripped.startswith("@include"):
                parts = stripped.split()
                if len(parts) != 2:
                    raise GrammarSyntaxError("@include expects one path", str(p))
                chunks.append(expand(p.parent / parts[1], seen | {p}))
            else:
                chunks.append(raw)
        return "\n".join(chunks)

    return parse_grammar(expand(path.resolve(), frozenset()), source=str(path))


BUNDLED = ("prepose_delete", "first_eq_main", "first_neq_main")


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled grammar file (without .cfg suffix)."""
    base = resources.files("auxinv") / "grammars"
    p = Path(str(base / f"{name}.cfg"))
    if not p.exists():
        raise GrammarError(f"no bundled grammar {name!r}; have {BUNDLED}")
    return p


def bundled_grammar(name: str) -> Grammar:
    return load_grammar(bundled_path(name))


# -- sampling ---------------------------------------------------------------


def generate(grammar, seed, count, max_depth=30, dedupe=False, weights=None):
    """Sample ``count`` sentences; returns list of (tokens, Derivation).

    At each expansion an alternative is drawn uniformly among those whose
    minimal completion depth fits the remaining budget, so every sample
    respects ``max_depth`` and every depth-bounded string has positive
    probability.  ``weights`` optionally maps a nonterminal to one weight
    per alternative (unnormalized).  Identical seeds give identical output.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if grammar._min_depth[grammar.start] > max_depth:
        raise DepthExceededError(
            f"no derivation of {grammar.start!r} fits depth {max_depth}"
        )
    rng = random.Random(seed)
    weights = weights or {}
    out = []
    seen: set[tuple[str, ...]] = set()
    attempts = 0
    cap = max(1000, 200 * count)
    while len(out) < count:
        attempts += 1
        if attempts > cap:
            raise GrammarError(
                f"could not reach {count} unique sentences after {cap} samples"
            )
        node = _sample(grammar, grammar.start, max_depth, rng, weights)
        deriv = Derivation(node)
        toks = deriv.tokens
        if dedupe:
            if toks in seen:
                continue
            seen.add(toks)
        out.append((list(toks), deriv))
    return out


def _sample(grammar, nt, budget, rng, weights) -> DNode:
    alt_depths = grammar._alt_min_depth[nt]
    feasible = [i for i, d in enumerate(alt_depths) if d <= budget]
    if nt in weights:
        w = weights[nt]
        alt_index = rng.choices(feasible, weights=[w[i] for i in feasible])[0]
    else:
        alt_index = feasible[rng.randrange(len(feasible))]
    children = []
    for sym in grammar.productions[nt][alt_index]:
        if sym in grammar.nonterminals:
            children.append(_sample(grammar, sym, budget - 1, rng, weights))
        elif sym in grammar.markers:
            children.append(Marker(sym))
        else:
            children.append(sym)
    return DNode(nt, alt_index, tuple(children))


# -- recognition ------------------------------------------------------------


def _earley_spans(grammar, tokens):
    """Earley chart pass; returns {(nonterminal, start): set of ends}."""
    stripped = grammar._stripped
    nonterminals = grammar.nonterminals
    n = len(tokens)
    spans: dict = {}
    # item = (lhs, alt_rhs, dot, origin)
    item_sets = [set() for _ in range(n + 1)]
    wait: list[dict] = [dict() for _ in range(n + 1)]
    predicted: list[set] = [set() for _ in range(n + 1)]
    done_empty: list[set] = [set() for _ in range(n + 1)]

    def enqueue(pos, item, queue):
        if item not in item_sets[pos]:
            item_sets[pos].add(item)
            queue.append(item)

    for pos in range(n + 1):
        queue = list(item_sets[pos])
        if pos == 0:
            for _, rhs in stripped[grammar.start]:
                enqueue(0, (grammar.start, rhs, 0, 0), queue)
            predicted[0].add(grammar.start)
        while queue:
            item = queue.pop()
            lhs, rhs, dot, origin = item
            if dot == len(rhs):  # complete
                key = (lhs, origin)
                ends = spans.setdefault(key, set())
                if pos in ends:
                    continue
                ends.add(pos)
                if origin == pos:
                    done_empty[pos].add(lhs)
                for waiting in wait[origin].get(lhs, ()):
                    enqueue(pos, (waiting[0], waiting[1], waiting[2] + 1, waiting[3]), queue)
                continue
            sym = rhs[dot]
            if sym in nonterminals:
                wait[pos].setdefault(sym, []).append(item)
                if sym not in predicted[pos]:
                    predicted[pos].add(sym)
                    for _, sub_rhs in stripped[sym]:
                        enqueue(pos, (sym, sub_rhs, 0, pos), queue)
                if sym in done_empty[pos]:
                    enqueue(pos, (lhs, rhs, dot + 1, origin), queue)
            elif pos < n and tokens[pos] == sym:
                item_sets[pos + 1].add((lhs, rhs, dot + 1, origin))
    return spans


def _derivation_counts(grammar, tokens, spans):
    """Count derivations per completed span; returns the count function.

    The remainder of an alternative is counted before recursing into its
    leading nonterminal, so left recursion only loops when a span genuinely
    has infinitely many derivations (unary or empty cycles), which raises.
    """
    memo_nt: dict = {}
    memo_ways: dict = {}
    busy: set = set()
    nonterminals = grammar.nonterminals
    stripped = grammar._stripped

    def count_nt(nt, i, j):
        key = (nt, i, j)
        if key in memo_nt:
            return memo_nt[key]
        if key in busy:
            raise GrammarError(
                f"cyclic rules give {nt!r} infinitely many derivations"
            )
        busy.add(key)
        total = 0
        for _, rhs in stripped[nt]:
            total += ways(rhs, 0, i, j)
        busy.discard(key)
        memo_nt[key] = total
        return total

    def ways(rhs, k, i, j):
        if k == len(rhs):
            return 1 if i == j else 0
        key = (rhs, k, i, j)
        if key in memo_ways:
            return memo_ways[key]
        sym = rhs[k]
        if sym in nonterminals:
            total = 0
            for m in spans.get((sym, i), ()):
                if m <= j:
                    rest = ways(rhs, k + 1, m, j)
                    if rest:
                        total += count_nt(sym, i, m) * rest
        else:
            total = ways(rhs, k + 1, i + 1, j) if i < j and tokens[i] == sym else 0
        memo_ways[key] = total
        return total

    return count_nt


def recognize(grammar, tokens) -> int:
    """Exact number of distinct derivations of ``tokens``; 0 = rejected."""
    tokens = list(tokens)
    spans = _earley_spans(grammar, tokens)
    n = len(tokens)
    if n not in spans.get((grammar.start, 0), ()):
        return 0
    count_nt = _derivation_counts(grammar, tokens, spans)
    return count_nt(grammar.start, 0, n)


def derivations(grammar, tokens, limit=None):
    """All derivations of ``tokens`` (marker leaves included), up to limit."""
    tokens = list(tokens)
    spans = _earley_spans(grammar, tokens)
    n = len(tokens)
    if n not in spans.get((grammar.start, 0), ()):
        return []
    count_nt = _derivation_counts(grammar, tokens, spans)
    count_nt(grammar.start, 0, n)  # raises before we loop on cyclic grammars
    nonterminals = grammar.nonterminals
    markers = grammar.markers
    out = []

    def build_nt(nt, i, j):
        if count_nt(nt, i, j) == 0:
            return
        for alt_index, alt in enumerate(grammar.productions[nt]):
            for children in build_seq(alt, 0, i, j):
                yield DNode(nt, alt_index, tuple(children))

    def build_seq(alt, k, i, j):
        if k == len(alt):
            if i == j:
                yield []
            return
        sym = alt[k]
        if sym in markers:
            for rest in build_seq(alt, k + 1, i, j):
                yield [Marker(sym)] + rest
        elif sym in nonterminals:
            for m in sorted(spans.get((sym, i), ())):
                if m > j or count_nt(sym, i, m) == 0:
                    continue
                rests = list(build_seq(alt, k + 1, m, j))
                if not rests:
                    continue
                for child in build_nt(sym, i, m):
                    for rest in rests:
                        yield [child] + rest
        else:
            if i < j and tokens[i] == sym:
                for rest in build_seq(alt, k + 1, i + 1, j):
                    yield [sym] + rest

    for node in build_nt(grammar.start, 0, n):
        out.append(Derivation(node))
        if limit is not None and len(out) >= limit:
            break
    return out


# -- enumeration ------------------------------------------------------------


def enumerate_language(grammar, max_depth, max_strings=200_000):
    """Every token sequence derivable within ``max_depth``, as a set of tuples."""
    memo: dict = {}

    def lang(nt, budget):
        key = (nt, budget)
        if key in memo:
            return memo[key]
        result: set = set()
        for (alt_index, alt), alt_md in zip(
            enumerate(grammar.productions[nt]), grammar._alt_min_depth[nt]
        ):
            if alt_md > budget:
                continue
            combos: set = {()}
            for sym in alt:
                if sym in grammar.markers:
                    continue
                if sym in grammar.nonterminals:
                    part = lang(sym, budget - 1)
                else:
                    part = {(sym,)}
                combos = {a + b for a in combos for b in part}
                if len(combos) > max_strings:
                    raise LanguageSizeError(
                        f"more than {max_strings} strings at depth {max_depth}"
                    )
            result |= combos
            if len(result) > max_strings:
                raise LanguageSizeError(
                    f"more than {max_strings} strings at depth {max_depth}"
                )
        memo[key] = result
        return result

    return set(lang(grammar.start, max_depth))


def restrict_lexicon(grammar, keep=1) -> Grammar:
    """Shrink every lexical class to its first ``keep`` members.

    Structural rules are untouched; used to build small grammars whose
    languages are enumerable for exact support checks.
    """
    lex = grammar.terminal_classes()
    productions = {
        nt: (alts[:keep] if nt in lex else alts)
        for nt, alts in grammar.productions.items()
    }
    return Grammar.from_productions(productions, grammar.start, grammar.markers)
