"""Question surgery: annotation, six-way candidates, rule outputs, pairs.

Golden strings come from hand-worked examples; the structural property at
the bottom checks candidates against a question grammar derived
mechanically from the declarative grammar (front the matrix auxiliary,
delete its original), with membership decided by exhaustive enumeration
over reduced-vocabulary grammars.
"""

import pytest

from auxinv.grammar import Grammar, bundled_grammar, enumerate_language, generate, parse_grammar, restrict_lexicon
from auxinv.transform import (
    BARE,
    FIRST,
    MAIN,
    NONE,
    PAST_PART,
    PROG,
    AnnotatedSentence,
    DegenerateSentenceError,
    PairExample,
    StructureError,
    TransformError,
    annotate_tokens,
    auxiliary_classes,
    build_move_one_pair,
    build_six_tuple,
    find_auxiliaries,
    hierarchical_question,
    linear_question,
    make_pair,
    prepose_delete,
    selectional_filter,
)

# same structure as the bundled two-auxiliary grammar, tiny vocabulary
# extended with "a"/"dog" so the worked example below is derivable
FIG_FIXTURE = """
@marker MAIN-AUX
S -> NP_S RC_S_PAST MAIN-AUX VP_S_BARE
NP_S -> Det_S N_S
NP_O -> Det_S N_S
VP_S_BARE -> Aux_S IV
RC_S_PAST -> Rel Aux_S_HAS TV_HAS NP_O
Det_S -> the | a
N_S -> dog | boy
IV -> try
TV_HAS -> seen
Aux_S -> did
Aux_S_HAS -> has
Rel -> who
"""

DOG_DECL = "the dog who has seen a boy did try .".split()


@pytest.fixture(scope="module")
def fixture_grammar():
    return parse_grammar(FIG_FIXTURE)


@pytest.fixture(scope="module")
def dog(fixture_grammar):
    return annotate_tokens(DOG_DECL, fixture_grammar)


def manual(sentence, first, main, fc, mc):
    toks = tuple(sentence.split())
    return AnnotatedSentence(toks, first, main, fc, mc)


# -- annotation -----------------------------------------------------------


def test_find_auxiliaries_on_worked_example(dog):
    assert list(dog.tokens) == DOG_DECL
    assert dog.first_aux_index == 3 and dog.first_aux == "has"
    assert dog.main_aux_index == 7 and dog.main_aux == "did"
    assert dog.first_aux_class == PAST_PART
    assert dog.main_aux_class == BARE


def test_find_auxiliaries_single_aux_sentence():
    g = parse_grammar(
        "@marker MAIN-AUX\nS -> NP MAIN-AUX VP\nNP -> you\nVP -> Aux_S IV\n"
        "Aux_S -> can\nIV -> spell"
    )
    ((toks, deriv),) = generate(g, seed=0, count=1, max_depth=10)
    ann = find_auxiliaries(deriv, g)
    assert ann.first_aux_index == ann.main_aux_index == 1
    assert ann.tokens[-1] == "."


def test_find_auxiliaries_via_vp_m_fallback():
    # no marker in this grammar: main auxiliary found as start of VP_M_S
    g = parse_grammar(
        "S -> NP VP_M_S\nNP -> Det N RC\nRC -> Rel Aux_S_BE IV_IS\n"
        "VP_M_S -> Aux_S IV\nDet -> a\nN -> boy\nRel -> who\n"
        "Aux_S_BE -> is\nIV_IS -> playing\nAux_S -> can\nIV -> try"
    )
    ((toks, deriv),) = generate(g, seed=0, count=1, max_depth=10)
    assert toks == "a boy who is playing can try".split()
    ann = find_auxiliaries(deriv, g)
    assert ann.first_aux == "is" and ann.first_aux_index == 3
    assert ann.main_aux == "can" and ann.main_aux_index == 5
    assert (ann.first_aux_class, ann.main_aux_class) == (PROG, BARE)


def test_find_auxiliaries_structure_error():
    g = parse_grammar("S -> a b")
    from auxinv.grammar import derivations

    (d,) = derivations(g, ["a", "b"])
    with pytest.raises(StructureError):
        find_auxiliaries(d, g)


def test_annotate_tokens_rejects_out_of_grammar(fixture_grammar):
    with pytest.raises(StructureError):
        annotate_tokens("the dog did try .".split(), fixture_grammar)


def test_auxiliary_classes_from_bundled():
    classes = auxiliary_classes(bundled_grammar("prepose_delete"))
    assert classes == {
        "do": BARE, "does": BARE, "did": BARE, "can": BARE,
        "would": BARE, "shall": BARE,
        "is": PROG, "was": PROG, "are": PROG, "were": PROG,
        "has": PAST_PART, "have": PAST_PART,
    }


def test_annotated_sentence_validates_indices():
    with pytest.raises(TransformError):
        AnnotatedSentence(("can", "you", "."), 1, 0, BARE, BARE)
    with pytest.raises(TransformError):
        AnnotatedSentence(("can", "you", "."), 0, 0, "WEIRD", BARE)


# -- six-way surgery ------------------------------------------------------

SIX_GOLDEN = [
    (FIRST, FIRST, "has the dog who seen a boy did try ?"),
    (FIRST, MAIN, "has the dog who has seen a boy try ?"),
    (FIRST, NONE, "has the dog who has seen a boy did try ?"),
    (MAIN, FIRST, "did the dog who seen a boy did try ?"),
    (MAIN, MAIN, "did the dog who has seen a boy try ?"),
    (MAIN, NONE, "did the dog who has seen a boy did try ?"),
]


def test_prepose_delete_golden_strings(dog):
    for prepose, delete, expected in SIX_GOLDEN:
        cand = prepose_delete(dog, prepose, delete)
        assert cand.text() == expected, (prepose, delete)
        assert cand.prepose == prepose and cand.delete == delete


def test_build_six_tuple_order_and_strings(dog):
    six = build_six_tuple(dog)
    assert [c.text() for c in six] == [s for _, _, s in SIX_GOLDEN]
    assert len({c.text() for c in six}) == 6


def test_six_tuple_length_invariant(dog):
    srclen = len(dog.tokens)
    for cand in build_six_tuple(dog):
        expected = srclen + 1 if cand.delete == NONE else srclen
        assert len(cand.tokens) == expected
        assert cand.tokens[-1] == "?"
        want = dog.first_aux if cand.prepose == FIRST else dog.main_aux
        assert cand.tokens[0] == want


def test_six_tuple_preserves_non_auxiliary_tokens(dog):
    from collections import Counter

    aux = {"has", "did"}
    base = Counter(t for t in dog.body if t not in aux)
    for cand in build_six_tuple(dog):
        got = Counter(t for t in cand.tokens[:-1] if t not in aux)
        assert got == base


def test_prepose_delete_validates_arguments(dog):
    with pytest.raises(TransformError):
        prepose_delete(dog, "either", FIRST)
    with pytest.raises(TransformError):
        prepose_delete(dog, FIRST, "both")


def test_degenerate_error_only_when_distinct_required():
    single = manual("you can spell your name .", 1, 1, BARE, BARE)
    with pytest.raises(DegenerateSentenceError):
        prepose_delete(single, FIRST, MAIN, require_distinct=True)
    with pytest.raises(DegenerateSentenceError):
        build_six_tuple(single)
    # without the flag the surgery is still well defined
    assert prepose_delete(single, FIRST, MAIN).text() == "can you spell your name ?"


# -- selectional filter ---------------------------------------------------


def test_selectional_filter_distinct_classes(dog):
    assert selectional_filter(dog) is True


def test_selectional_filter_same_class_twin_auxiliaries():
    decl = manual("the boy who did see the person did laugh .", 3, 7, BARE, BARE)
    assert selectional_filter(decl) is False


def test_selectional_filter_single_auxiliary():
    decl = manual("you can spell your name .", 1, 1, BARE, BARE)
    assert selectional_filter(decl) is False


# -- rule outputs ----------------------------------------------------------


def test_hierarchical_and_linear_on_two_aux_sentence():
    decl = manual("the boy who has talked can read .", 3, 5, PAST_PART, BARE)
    assert " ".join(hierarchical_question(decl)) == "can the boy who has talked read ?"
    assert linear_question(decl)[0] == "has"
    assert hierarchical_question(decl)[0] == "can"


def test_rules_coincide_when_first_is_main():
    decl = manual("you can spell your name .", 1, 1, BARE, BARE)
    assert hierarchical_question(decl) == linear_question(decl)


def test_move_one_pair_golden():
    decl = manual("the children who are talking are sleeping .", 3, 5, PROG, PROG)
    moved_main, moved_first = build_move_one_pair(decl)
    assert " ".join(moved_main) == "are the children who are talking sleeping ?"
    assert " ".join(moved_first) == "are the children who talking are sleeping ?"
    assert moved_main != moved_first
    # the two questions differ in exactly one position
    diffs = sum(a != b for a, b in zip(moved_main, moved_first))
    assert len(moved_main) == len(moved_first) and diffs == 2  # aux slot moved


def test_move_one_preconditions():
    distinct = manual("a boy who is playing can try .", 3, 5, PROG, BARE)
    with pytest.raises(DegenerateSentenceError):
        build_move_one_pair(distinct)
    single = manual("you can spell your name .", 1, 1, BARE, BARE)
    with pytest.raises(DegenerateSentenceError):
        build_move_one_pair(single)


def test_make_pair_golden_simple():
    decl = manual("you can spell your name .", 1, 1, BARE, BARE)
    pair = make_pair(decl)
    assert pair.text() == "you can spell your name . can you spell your name ?"


def test_make_pair_golden_two_aux():
    decl = manual("a boy who is playing can try .", 3, 5, PROG, BARE)
    pair = make_pair(decl)
    assert pair.text() == "a boy who is playing can try . can a boy who is playing try ?"
    cut = pair.concatenated.index(".") + 1
    assert pair.concatenated[:cut] == pair.declarative
    assert pair.concatenated[cut:] == pair.question


def test_pair_example_validates_concatenation():
    with pytest.raises(TransformError):
        PairExample(("you", "can", "."), ("can", "you", "?"), ("you", "can", ".", "oops", "?"))


# -- sampled properties ----------------------------------------------------


def test_disambiguation_over_neq_samples():
    g = bundled_grammar("first_neq_main")
    n_checked = 0
    for _, deriv in generate(g, seed=21, count=400, max_depth=30):
        ann = find_auxiliaries(deriv, g)
        assert ann.first_aux_index < ann.main_aux_index
        if ann.first_aux == ann.main_aux:
            continue  # same surface token: the two rules agree on token 0
        n_checked += 1
        assert hierarchical_question(ann)[0] != linear_question(ann)[0]
    assert n_checked > 200


def test_coincidence_over_eq_samples():
    g = bundled_grammar("first_eq_main")
    for _, deriv in generate(g, seed=22, count=400, max_depth=30):
        ann = find_auxiliaries(deriv, g)
        assert ann.first_aux_index == ann.main_aux_index
        assert hierarchical_question(ann) == linear_question(ann)


def test_six_tuple_distinct_on_filtered_samples():
    g = bundled_grammar("prepose_delete")
    for _, deriv in generate(g, seed=23, count=300, max_depth=30):
        ann = find_auxiliaries(deriv, g)
        assert selectional_filter(ann)  # grammar forces distinct classes
        six = build_six_tuple(ann)
        assert len({c.text() for c in six}) == 6


# -- grammaticality oracle -------------------------------------------------


def question_grammar(decl_grammar):
    """Mechanical question transform of a declarative grammar.

    For every S alternative [... MAIN-AUX VP], the question fronts the
    auxiliary that heads each VP alternative and deletes it from its
    original position.  Everything else is carried over unchanged.
    """
    prods = {nt: list(alts) for nt, alts in decl_grammar.productions.items()}
    q_alts = []
    fresh = {}
    for alt in prods["S"]:
        cut = alt.index("MAIN-AUX")
        before = alt[:cut]
        (vp,) = alt[cut + 1 :]
        for k, vp_alt in enumerate(prods[vp]):
            aux, rest = vp_alt[0], tuple(vp_alt[1:])
            name = f"VP_REST_{vp}_{k}"
            fresh[name] = [rest] if rest else None
            q_alts.append((aux,) + before + ((name,) if rest else ()))
    prods["QS"] = q_alts
    for name, alts in fresh.items():
        if alts:
            prods[name] = alts
    # prune to what QS reaches so the result validates
    keep = set()
    frontier = ["QS"]
    while frontier:
        nt = frontier.pop()
        if nt in keep:
            continue
        keep.add(nt)
        for alt in prods[nt]:
            for sym in alt:
                if sym in prods and sym not in keep:
                    frontier.append(sym)
    return Grammar.from_productions(
        {nt: tuple(map(tuple, prods[nt])) for nt in keep}, "QS", markers=()
    )


@pytest.mark.parametrize("name", ["prepose_delete", "first_neq_main"])
def test_only_main_main_candidate_is_grammatical(name):
    reduced = restrict_lexicon(bundled_grammar(name), keep=1)
    decl_lang = enumerate_language(reduced, 7)
    q_lang = enumerate_language(question_grammar(reduced), 7)
    checked = 0
    for toks in sorted(decl_lang):
        ann = annotate_tokens(list(toks) + ["."], reduced)
        if not selectional_filter(ann):
            continue
        checked += 1
        for cand in build_six_tuple(ann):
            body = cand.tokens[:-1]
            if (cand.prepose, cand.delete) == (MAIN, MAIN):
                assert body in q_lang, cand.text()
            else:
                assert body not in q_lang, cand.text()
    assert checked >= 100


def test_eq_grammar_hierarchical_question_is_grammatical():
    reduced = restrict_lexicon(bundled_grammar("first_eq_main"), keep=1)
    q_lang = enumerate_language(question_grammar(reduced), 7)
    for toks in sorted(enumerate_language(reduced, 4)):
        ann = annotate_tokens(list(toks) + ["."], reduced)
        assert hierarchical_question(ann)[:-1] in q_lang
