#!/usr/bin/env python3
"""Regenerates data/toy_corpus.jsonl and data/budget_fixture.jsonl.

Layout per instance: the gold answer token sits at the center of a window of
query tokens whose outermost members are exactly WINDOW positions away, so
the bundled window reader answers every clean document correctly (verified
below with a mirror of the reader). Query tokens recur sparsely across the
rest of the document and in one weaker decoy cluster: corrupting a single
in-window copy then costs little relevance, which keeps the holistic error
zone reachable, while the decoy keeps the reader's argmax margin small.
Long filler words carry the trigram mass that lets truncation make a noisy
document out-score the clean one.
"""

import json
import random
import string

WINDOW = 10

NAMES = [
    "Marlowe", "Petrova", "Okonkwo", "Baptiste", "Ferreira", "Lindqvist", "Moravec",
    "Castellan", "Oyelaran", "Virtanen", "Szabados", "Miyazaki", "Aldecott", "Brannigan",
    "Czerny", "Delacroix", "Eriksson", "Fontaine", "Galloway", "Hendricks", "Ibarra",
    "Jovanovic", "Kowalczyk", "Lambert", "Mendelson", "Norgaard", "Ostrowski", "Palmeiro",
    "Quintana", "Rasmussen", "Sorenson", "Takahashi", "Umarova", "Valentine", "Whitcombe",
    "Xiulan", "Yamagata", "Zielinski", "Arbuthnot", "Bellweather", "Carmichael", "Davenport",
    "Ellsworth", "Fairbanks", "Greenaway", "Hathaway", "Ingersoll", "Juneau", "Kensington",
    "Larkspur",
]

# Short query words keep the relevance cost of one in-cluster hit small.
QUERY_VOCAB = [
    "comet", "resin", "shawl", "organ", "chapel", "copper", "orchid", "ledger", "fresco",
    "cellar", "anvil", "sonata", "grove", "harbor", "lilac", "mural", "spire", "loom",
    "quarry", "barge", "cider", "forge", "lyric", "saber", "tonic", "vault", "wharf",
    "siren", "ember", "fjord", "glade", "hymn", "ivory", "jade", "krona", "lagoon",
    "mosaic", "nectar", "oboe", "plume", "reef", "sphinx", "trout", "violet",
    "willow", "zephyr", "basalt", "clove", "dune", "gable",
]

# Long fillers carry the trigram mass; truncating them is what lets a noisy
# document out-score the clean one.
FILLER_VOCAB = [
    "cobblestones", "generations", "thunderstorms", "candlelight", "watermills",
    "horsedrawn", "travellers", "marketplace", "lanternlight", "measureless",
    "wildflowers", "greenhouses", "clocktowers", "switchbacks", "riverbanks",
    "fenceposts", "hedgerows", "farmhouses", "meadowlands", "countryside",
    "stonemasons", "blacksmiths", "shopkeepers", "fishermen", "lighthouses",
    "promenades", "boulevards", "courtyards", "grandstand", "observatories",
    "aqueducts", "colonnades", "monasteries", "vineyards", "watchtowers",
    "crossroads", "footbridges", "staircases", "ballrooms", "libraries",
    "manuscripts", "chandeliers", "tapestries", "porcelains", "silverware",
    "harvesters", "threshing", "granaries", "windmills", "orchardists",
]


def norm(token):
    return token.strip(string.punctuation).lower()


def reader_counts(tokens, query_keys):
    """Mirror of the bundled window reader's per-position scoring."""
    keys = [norm(t) for t in tokens]
    scores = {}
    for i, key in enumerate(keys):
        if not key or key in query_keys:
            continue
        lo = max(0, i - WINDOW)
        hi = min(len(keys), i + WINDOW + 1)
        score = 0
        for q in query_keys:
            matched = sum(1 for j in range(lo, hi) if j != i and keys[j] == q)
            score += min(matched, WINDOW)
        scores[i] = score
    return scores


def build_instance(rng, index, name):
    content = rng.sample(QUERY_VOCAB, 8)
    query_words = content[:]
    rng.shuffle(query_words)
    question = "who " + " ".join(query_words) + "?"
    query_keys = {norm(t) for t in question.split()}

    fillers = [w for w in FILLER_VOCAB if w not in content]

    def filler():
        return rng.choice(fillers)

    # Answer window: outermost slots are query tokens, ten more query copies
    # inside, fillers elsewhere.
    window = [None] * (2 * WINDOW + 1)
    center = WINDOW
    window[0] = content[0]
    window[-1] = content[1]
    window[center] = name
    interior = [o for o in range(1, 2 * WINDOW) if o != center]
    for offset in rng.sample(interior, 10):
        window[offset] = rng.choice(content)
    for i, slot in enumerate(window):
        if slot is None:
            window[i] = filler()

    prefix = [filler() for _ in range(rng.randint(8, 12))]

    # Suffix with one decoy cluster (weaker than the answer window) plus
    # sparse extra query copies.
    suffix = [filler() for _ in range(rng.randint(28, 36))]
    decoy_center = rng.randint(9, len(suffix) - 10)
    decoy_slots = rng.sample(
        [o for o in range(decoy_center - 7, decoy_center + 8) if o != decoy_center], 8)
    for slot in decoy_slots:
        suffix[slot] = rng.choice(content)
    sparse = [o for o in range(len(suffix))
              if all(abs(o - s) > 11 for s in decoy_slots + [decoy_center])]
    for slot in rng.sample(sparse, min(4, len(sparse))):
        suffix[slot] = rng.choice(content)

    answers = [name]
    if index % 10 == 4:
        # Second occurrence far from the cluster; still protected.
        spot = rng.choice([o for o in range(len(prefix))])
        prefix[spot] = name
    if index % 10 == 9:
        # Supplied variant form, protected only because it is listed.
        variant = name.lower() + "s"
        suffix[rng.randrange(len(suffix))] = variant
        answers.append(variant)

    tokens = prefix + window + suffix
    document = " ".join(tokens)

    # The answer must be the unique reader argmax on the clean document.
    scores = reader_counts(tokens, query_keys)
    answer_at = len(prefix) + center
    best = max(scores, key=lambda i: (scores[i], -i))
    margin_ok = all(scores[i] < scores[answer_at] for i in scores if i != answer_at)
    return (best == answer_at and margin_ok), {
        "id": f"toy-{index:03d}",
        "question": question,
        "document": document,
        "answers": answers,
    }


def budget_fixture(rng):
    rows = []
    specs = [
        ("fix-0", "who repaired the copper lantern", "Marlowe", 2, False),
        ("fix-1", "who charted the southern passage", "Petrova", 3, False),
        ("fix-2", "who catalogued the highland orchid", "Okonkwo", 1, False),
        ("fix-3", "who restored the chapel fresco", "regulatory site", 1, True),
        ("fix-4", "who premiered the riverside symphony", "Baptiste", 0, False),
    ]
    for row_id, question, answer, occurrences, multi_token in specs:
        q_content = [w for w in question.split() if w not in ("who", "the")]
        fillers = [w for w in FILLER_VOCAB if w not in q_content]
        tokens = [rng.choice(fillers) for _ in range(30)]
        slots = rng.sample(range(2, 28), occurrences + len(q_content))
        for word, slot in zip(q_content, slots[occurrences:]):
            tokens[slot] = word
        for slot in slots[:occurrences]:
            tokens[slot] = answer if not multi_token else None
        if multi_token:
            at = slots[0]
            tokens[at] = "regulatory"
            tokens[min(at + 1, 29)] = "site"
        rows.append({
            "id": row_id,
            "question": question,
            "document": " ".join(t for t in tokens if t),
            "answers": [answer],
        })
    return rows


def main():
    rng = random.Random(20240917)
    rows = []
    for i, name in enumerate(NAMES):
        for _ in range(200):
            ok, row = build_instance(rng, i, name)
            if ok:
                rows.append(row)
                break
        else:
            raise RuntimeError(f"could not lay out instance {i}")
    with open("data/toy_corpus.jsonl", "w") as out:
        for row in rows:
            out.write(json.dumps(row) + "\n")
    with open("data/budget_fixture.jsonl", "w") as out:
        for row in budget_fixture(rng):
            out.write(json.dumps(row) + "\n")
    print(f"wrote {len(rows)} toy instances and 5 budget fixtures")


if __name__ == "__main__":
    main()
