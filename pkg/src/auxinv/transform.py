"""Question formation as string surgery on annotated declaratives.

A declarative like

    the dog who has seen a boy did try .

has two auxiliaries: the linearly FIRST one ("has", inside the subject's
relative clause) and the MAIN one ("did", heading the matrix verb phrase).
A question candidate is built by copying the first or main auxiliary to the
front and deleting the first, the main, or neither occurrence; the final
"." becomes "?".  Exactly one of the six combinations (prepose main,
delete main) is grammatical English.

The two generalization rules under study pick the fronted auxiliary
differently: the hierarchical rule fronts the main auxiliary, the linear
rule fronts the first one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grammar import Derivation, DNode, GrammarError, derivations

FIRST = "first"
MAIN = "main"
NONE = "none"

BARE = "BARE"
PROG = "PROG"
PAST_PART = "PAST-PART"

MAIN_AUX_MARKER = "MAIN-AUX"

# the auxiliary lexicon shared by the bundled grammars, keyed by the verb
# inflection each auxiliary selects for
DEFAULT_AUX_CLASSES = {
    "do": BARE, "does": BARE, "did": BARE, "can": BARE, "would": BARE, "shall": BARE,
    "is": PROG, "was": PROG, "are": PROG, "were": PROG,
    "has": PAST_PART, "have": PAST_PART,
}

PUNCT = {".", "?"}


class TransformError(Exception):
    pass


class StructureError(TransformError):
    """The derivation does not expose a matrix auxiliary."""


class DegenerateSentenceError(TransformError):
    """First and main auxiliary coincide where distinct ones are required."""


def auxiliary_classes(grammar) -> dict:
    """token -> inflection class, read off the grammar's Aux_* lexical classes.

    Aux_*_BE classes select progressive verbs, Aux_*_HAS past participles,
    and the remaining Aux_* classes bare verbs.
    """
    out: dict = {}
    for nt, members in grammar.terminal_classes().items():
        if not nt.startswith("Aux"):
            continue
        cls = PROG if nt.endswith("_BE") else PAST_PART if nt.endswith("_HAS") else BARE
        for tok in members:
            if out.setdefault(tok, cls) != cls:
                raise GrammarError(f"auxiliary {tok!r} appears in two inflection classes")
    return out


@dataclass(frozen=True)
class AnnotatedSentence:
    """Declarative tokens (ending '.') plus auxiliary-role annotations.

    ``first_aux_index`` is the linearly earliest auxiliary;
    ``main_aux_index`` is the auxiliary of the matrix verb phrase.  The
    indices are equal exactly when no auxiliary precedes the main one (in
    particular for sentences with a single auxiliary).
    """

    tokens: tuple
    first_aux_index: int
    main_aux_index: int
    first_aux_class: str
    main_aux_class: str
    derivation: Derivation | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        body = len(self.body)
        if not (0 <= self.first_aux_index <= self.main_aux_index < body):
            raise TransformError(
                f"bad auxiliary indices ({self.first_aux_index}, {self.main_aux_index}) "
                f"for {body} body tokens"
            )
        for cls in (self.first_aux_class, self.main_aux_class):
            if cls not in (BARE, PROG, PAST_PART):
                raise TransformError(f"unknown inflection class {cls!r}")

    @property
    def body(self) -> tuple:
        """Tokens without the final punctuation mark."""
        if self.tokens and self.tokens[-1] in PUNCT:
            return self.tokens[:-1]
        return self.tokens

    @property
    def first_aux(self) -> str:
        return self.tokens[self.first_aux_index]

    @property
    def main_aux(self) -> str:
        return self.tokens[self.main_aux_index]


@dataclass(frozen=True)
class QuestionCandidate:
    tokens: tuple
    prepose: str
    delete: str

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.prepose not in (FIRST, MAIN):
            raise TransformError(f"prepose must be first|main, got {self.prepose!r}")
        if self.delete not in (FIRST, MAIN, NONE):
            raise TransformError(f"delete must be first|main|none, got {self.delete!r}")
        if not self.tokens or self.tokens[-1] != "?":
            raise TransformError("question candidates must end in '?'")

    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class PairExample:
    """A declarative, its well-formed question, and their concatenation."""

    declarative: tuple
    question: tuple
    concatenated: tuple

    def __post_init__(self):
        object.__setattr__(self, "declarative", tuple(self.declarative))
        object.__setattr__(self, "question", tuple(self.question))
        object.__setattr__(self, "concatenated", tuple(self.concatenated))
        cut = self.concatenated.index(".") + 1
        if (
            self.concatenated[:cut] != self.declarative
            or self.concatenated[cut:] != self.question
        ):
            raise TransformError("concatenation must split back at the first '.'")

    def text(self) -> str:
        return " ".join(self.concatenated)


def find_auxiliaries(derivation: Derivation, grammar, punct=".") -> AnnotatedSentence:
    """Annotate a generated declarative with its first/main auxiliaries.

    The main auxiliary is located through the grammar's MAIN-AUX marker
    when present, otherwise as the first token of a VP_M_* subtree.  The
    first auxiliary is the linearly earliest member of the grammar's
    auxiliary lexicon.  Appends ``punct`` to the surface tokens.
    """
    classes = auxiliary_classes(grammar) or DEFAULT_AUX_CLASSES
    toks = derivation.tokens
    main_idx = None
    for name, pos in derivation.markers:
        if name == MAIN_AUX_MARKER:
            main_idx = pos
            break
    if main_idx is None:
        for node, start, _ in derivation.spans():
            if isinstance(node, DNode) and node.symbol.startswith("VP_M"):
                main_idx = start
                break
    if main_idx is None or main_idx >= len(toks) or toks[main_idx] not in classes:
        raise StructureError("derivation has no identifiable matrix auxiliary")
    first_idx = next((i for i, t in enumerate(toks) if t in classes), None)
    if first_idx is None:
        raise StructureError("derivation contains no auxiliary token")
    return AnnotatedSentence(
        tokens=toks + (punct,),
        first_aux_index=first_idx,
        main_aux_index=main_idx,
        first_aux_class=classes[toks[first_idx]],
        main_aux_class=classes[toks[main_idx]],
        derivation=derivation,
    )


def annotate_tokens(tokens, grammar) -> AnnotatedSentence:
    """Parse declarative tokens with ``grammar`` and annotate the result.

    Trailing punctuation is ignored for parsing and restored on the
    annotation.  Raises StructureError when the grammar rejects the tokens.
    """
    tokens = tuple(tokens)
    punct = tokens[-1] if tokens and tokens[-1] in PUNCT else "."
    body = tokens[:-1] if tokens and tokens[-1] in PUNCT else tokens
    found = derivations(grammar, body, limit=1)
    if not found:
        raise StructureError(f"grammar does not derive: {' '.join(body)}")
    return find_auxiliaries(found[0], grammar, punct=punct)


def prepose_delete(
    decl: AnnotatedSentence, prepose: str, delete: str, require_distinct: bool = False
) -> QuestionCandidate:
    """Copy one auxiliary to the front, delete one occurrence (or none).

    Indices are read off the original declarative; the preposed auxiliary
    is a copy, so delete=none keeps both originals.  With
    ``require_distinct`` the declarative must have two distinct auxiliary
    positions (the six-way candidate set is only meaningful then).
    """
    if prepose not in (FIRST, MAIN):
        raise TransformError(f"prepose must be first|main, got {prepose!r}")
    if delete not in (FIRST, MAIN, NONE):
        raise TransformError(f"delete must be first|main|none, got {delete!r}")
    if require_distinct and decl.first_aux_index == decl.main_aux_index:
        raise DegenerateSentenceError(
            "first and main auxiliary coincide; distinct positions required"
        )
    body = decl.body
    index = {FIRST: decl.first_aux_index, MAIN: decl.main_aux_index}
    front = body[index[prepose]]
    if delete == NONE:
        rest = body
    else:
        cut = index[delete]
        rest = body[:cut] + body[cut + 1 :]
    return QuestionCandidate(tokens=(front, *rest, "?"), prepose=prepose, delete=delete)


SIX_WAY_ORDER = (
    (FIRST, FIRST),
    (FIRST, MAIN),
    (FIRST, NONE),
    (MAIN, FIRST),
    (MAIN, MAIN),
    (MAIN, NONE),
)


def build_six_tuple(decl: AnnotatedSentence) -> list:
    """All six prepose/delete candidates, in the fixed report order."""
    return [
        prepose_delete(decl, p, d, require_distinct=True) for p, d in SIX_WAY_ORDER
    ]


def selectional_filter(decl: AnnotatedSentence) -> bool:
    """True iff the two auxiliaries select different verb inflections.

    Under this condition the deleted auxiliary's position stays visible in
    the surface string (the stranded verb's inflection gives it away), so
    all six candidates are distinct and only one is grammatical.
    """
    if decl.first_aux_index == decl.main_aux_index:
        return False
    return decl.first_aux_class != decl.main_aux_class


def hierarchical_question(decl: AnnotatedSentence) -> tuple:
    """Front the MAIN auxiliary (deleting its original): the correct rule."""
    return prepose_delete(decl, MAIN, MAIN).tokens


def linear_question(decl: AnnotatedSentence) -> tuple:
    """Front the FIRST auxiliary: the linear-order rule's prediction."""
    return prepose_delete(decl, FIRST, MAIN).tokens


def build_move_one_pair(decl: AnnotatedSentence) -> tuple:
    """(move-main question, move-first question) for twin-auxiliary inputs.

    Requires two auxiliary occurrences with identical surface form, so the
    two questions share their fronted word and differ only in which
    original occurrence is gone.
    """
    if decl.first_aux_index == decl.main_aux_index:
        raise DegenerateSentenceError("two auxiliary occurrences required")
    if decl.first_aux != decl.main_aux:
        raise DegenerateSentenceError(
            f"auxiliaries must match: {decl.first_aux!r} vs {decl.main_aux!r}"
        )
    moved_main = prepose_delete(decl, MAIN, MAIN).tokens
    moved_first = prepose_delete(decl, FIRST, FIRST).tokens
    return moved_main, moved_first


def make_pair(decl: AnnotatedSentence) -> PairExample:
    """Declarative plus its hierarchical question, concatenated."""
    question = hierarchical_question(decl)
    return PairExample(
        declarative=decl.tokens,
        question=question,
        concatenated=decl.tokens + question,
    )
