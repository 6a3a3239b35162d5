"""Walkthrough: grammars, auxiliary annotation, and question surgery.

Samples declaratives from the bundled grammars, shows where the first and
main auxiliaries sit, and prints the six-way Prepose/Delete candidate
lattice plus the two rule outputs for a disambiguating sentence.
"""

from auxinv.grammar import BUNDLED, bundled_grammar, generate, recognize
from auxinv.transform import (
    build_six_tuple,
    find_auxiliaries,
    hierarchical_question,
    linear_question,
    make_pair,
)


def main():
    print("bundled grammars:", ", ".join(BUNDLED))
    for name in BUNDLED:
        g = bundled_grammar(name)
        toks, deriv = generate(g, seed=4, count=1, max_depth=30)[0]
        assert recognize(g, toks) > 0
        print(f"\n[{name}] sample: {' '.join(toks)}")

    g = bundled_grammar("first_neq_main")
    for toks, deriv in generate(g, seed=12, count=200, max_depth=30):
        ann = find_auxiliaries(deriv, g)
        if ann.first_aux != ann.main_aux:
            break
    print("\ndisambiguating declarative:", " ".join(ann.tokens))
    print(f"  first auxiliary: {ann.first_aux!r} at index {ann.first_aux_index}")
    print(f"  main auxiliary:  {ann.main_aux!r} at index {ann.main_aux_index}")
    print("  hierarchical rule ->", " ".join(hierarchical_question(ann)))
    print("  linear rule       ->", " ".join(linear_question(ann)))

    print("\nsix-way candidate lattice (prepose x delete):")
    for cand in build_six_tuple(ann):
        print(f"  ({cand.prepose[0].upper()},{cand.delete[0].upper()})  {cand.text()}")

    pair = make_pair(ann)
    print("\ntraining pair line:", pair.text())


if __name__ == "__main__":
    main()
