"""Regenerates the bundled toy wordlist.

Eight languages in three clades, with the tree
((Aldan,Belka,Corin),(Duva,Elsk,Farn),(Gaum,Hesk)). Words descend from
random proto-forms; each concept can be replaced by a new cognate set on
the branch to a clade and on each branch to a language, and every clade
and language applies its own regular sound changes.

    python3 generate_toy.py > toy_wordlist.tsv
"""

import random

CLADES = [["Aldan", "Belka", "Corin"], ["Duva", "Elsk", "Farn"], ["Gaum", "Hesk"]]
CONCEPTS = (
    "all ashes bark belly big bird bite black blood bone breast burn claw cloud cold come "
    "die dog drink dry ear earth eat egg eye fat feather fire fish fly foot full give good "
    "green hair hand head hear heart horn know knee leaf lie liver long louse man meat moon "
    "mountain mouth name neck new night nose one person rain red road root round sand say "
    "see seed sit skin sleep small smoke stand star stone sun swim tail that this tongue "
    "tooth tree two walk warm water we what white who woman yellow you"
).split()

CONSONANTS = "p t k b d g m n s l r w j".split()
CLADE_SOUNDS = [["q", "x", "c", "ɣ", "ʔ", "ɸ", "β", "χ"], [], ["ç", "ŋ", "ʃ", "θ"]]
VOWELS = "a e i o u".split()

CLADE_LAWS = [
    {"p": "f", "k": "h"},
    {"t": "ts", "a": "o"},
    {"b": "p", "e": "i", "g": "k"},
]
LANGUAGE_LAWS = {
    "Aldan": {"d": "ð"},
    "Belka": {"r": "l"},
    "Corin": {"w": "v"},
    "Duva": {"g": "k"},
    "Elsk": {"m": "n"},
    "Farn": {"u": "y"},
    "Gaum": {"s": "h"},
    "Hesk": {"l": "r"},
}

CLADE_REPLACEMENT = 0.3
LANGUAGE_REPLACEMENT = 0.08
MISSING = 0.04


def random_form(rng, extra=()):
    consonants = CONSONANTS + list(extra) * 2
    syllables = rng.choice([2, 2, 3])
    form = []
    for _ in range(syllables):
        form += [rng.choice(consonants), rng.choice(VOWELS)]
    if rng.random() < 0.4:
        form.append(rng.choice(CONSONANTS))
    return form


def apply(law, form):
    return [law.get(t, t) for t in form]


def main():
    rng = random.Random(20240611)
    rows = []
    for concept in CONCEPTS:
        next_id = 1
        root = (next_id, random_form(rng))
        next_id += 1
        for clade_index, clade in enumerate(CLADES):
            ancestor = root
            if rng.random() < CLADE_REPLACEMENT:
                ancestor = (next_id, random_form(rng, CLADE_SOUNDS[clade_index]))
                next_id += 1
            for language in clade:
                word = ancestor
                if rng.random() < LANGUAGE_REPLACEMENT:
                    word = (next_id, random_form(rng))
                    next_id += 1
                if rng.random() < MISSING:
                    continue
                tokens = apply(LANGUAGE_LAWS[language], apply(CLADE_LAWS[clade_index], word[1]))
                rows.append((language, concept, tokens, word[0]))
    print("ID\tLANGUAGE\tCONCEPT\tTOKENS\tCOGID")
    for i, (language, concept, tokens, cogid) in enumerate(rows, start=1):
        print(f"{i}\t{language}\t{concept}\t{' '.join(tokens)}\t{cogid}")


if __name__ == "__main__":
    main()
