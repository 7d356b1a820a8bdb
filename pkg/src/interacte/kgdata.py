"""Knowledge-graph triples: loading, vocabularies, filters, synthetic data."""

from dataclasses import dataclass, field

import numpy as np


class TripleParseError(ValueError):
    """A triple file line that is not tab-separated subject/relation/object."""


class VocabError(ValueError):
    """A symbol outside a frozen vocabulary, or a malformed vocab file."""


class Vocab:
    """Ordered symbol table; id of a symbol is its insertion position."""

    def __init__(self, names=()):
        self.names: list = []
        self.index: dict = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        if name in self.index:
            return self.index[name]
        self.index[name] = len(self.names)
        self.names.append(name)
        return self.index[name]

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self.index

    def __getitem__(self, name):
        return self.index[name]

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.names == other.names


def read_vocab(path) -> Vocab:
    """One symbol per line; line number (from 0) is the id."""
    with open(path, encoding="utf-8") as fh:
        names = [line.rstrip("\n") for line in fh]
    if len(set(names)) != len(names):
        raise VocabError(f"{path}: duplicate symbols")
    return Vocab(names)


def write_vocab(path, vocab: Vocab):
    with open(path, "w", encoding="utf-8") as fh:
        for name in vocab.names:
            fh.write(name + "\n")


@dataclass
class KnowledgeGraph:
    entities: Vocab
    relations: Vocab
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def split(self, name: str) -> np.ndarray:
        if name not in ("train", "valid", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def all_triples(self) -> np.ndarray:
        return np.concatenate([self.train, self.valid, self.test], axis=0)


def _empty_triples() -> np.ndarray:
    return np.empty((0, 3), dtype=np.int64)


def load_triples(path, entity_vocab: Vocab | None = None,
                 relation_vocab: Vocab | None = None):
    """Load tab-separated ``subject relation object`` lines.

    With vocabularies given, unseen symbols are an error (train builds the
    vocab; valid/test must not smuggle in untrained symbols).  Without
    them, fresh vocabularies are built in order of first appearance.
    Returns ``(triples, entity_vocab, relation_vocab)``.
    """
    build = entity_vocab is None
    if build:
        entity_vocab = Vocab()
        relation_vocab = Vocab()
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TripleParseError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            s, r, o = parts
            if build:
                rows.append((entity_vocab.add(s), relation_vocab.add(r), entity_vocab.add(o)))
            else:
                for sym, vocab, what in ((s, entity_vocab, "entity"),
                                         (r, relation_vocab, "relation"),
                                         (o, entity_vocab, "entity")):
                    if sym not in vocab:
                        raise VocabError(f"{path}:{lineno}: unknown {what} {sym!r}")
                rows.append((entity_vocab[s], relation_vocab[r], entity_vocab[o]))
    triples = np.array(rows, dtype=np.int64) if rows else _empty_triples()
    return triples, entity_vocab, relation_vocab


def write_triples(path, triples: np.ndarray, entity_vocab: Vocab, relation_vocab: Vocab):
    with open(path, "w", encoding="utf-8") as fh:
        for s, r, o in np.asarray(triples):
            fh.write(f"{entity_vocab.names[s]}\t{relation_vocab.names[r]}\t{entity_vocab.names[o]}\n")


def load_knowledge_graph(train_path, valid_path, test_path) -> KnowledgeGraph:
    """Load a 3-file dataset; vocab comes from the train split only."""
    train, ents, rels = load_triples(train_path)
    valid, _, _ = load_triples(valid_path, ents, rels)
    test, _, _ = load_triples(test_path, ents, rels)
    return KnowledgeGraph(entities=ents, relations=rels, train=train, valid=valid, test=test)


# published sizes of common benchmark files, used to sanity-check ingestion:
# (n_entities, n_relations, n_train, n_valid, n_test)
KNOWN_DATASET_STATS = {
    "fb15k-237": (14541, 237, 272115, 17535, 20466),
    "wn18rr": (40943, 11, 86835, 3034, 3134),
}


def validate_dataset_stats(kg: KnowledgeGraph, name: str):
    """Raise :class:`VocabError` when a named dataset loads with wrong sizes."""
    key = name.lower()
    if key not in KNOWN_DATASET_STATS:
        raise ValueError(f"no recorded statistics for dataset {name!r}")
    expect = KNOWN_DATASET_STATS[key]
    got = (kg.n_entities, kg.n_relations, len(kg.train), len(kg.valid), len(kg.test))
    if got != expect:
        raise VocabError(
            f"dataset {name!r} loaded with sizes {got}, expected {expect} "
            "(entities, relations, train, valid, test)")


@dataclass
class FilterIndex:
    """True-triple lookup for filtered ranking, over train+valid+test.

    ``objects[(s, r)]`` is the set of all o with (s, r, o) known;
    ``subjects[(r, o)]`` the set of all s with (s, r, o) known.
    """

    objects: dict = field(default_factory=dict)
    subjects: dict = field(default_factory=dict)


def build_filter_index(kg: KnowledgeGraph) -> FilterIndex:
    index = FilterIndex()
    for s, r, o in kg.all_triples():
        index.objects.setdefault((int(s), int(r)), set()).add(int(o))
        index.subjects.setdefault((int(r), int(o)), set()).add(int(s))
    return index


def generate_synthetic_kg(seed: int, n_entities: int, scheme: str = "modular",
                          compositions: bool = True) -> KnowledgeGraph:
    """Closed-world arithmetic graph for desk-scale experiments.

    The modular scheme links ``i --add_k--> (i + k) mod n`` for the
    base offsets k in {1, 2, 3} plus their pairwise sums {4, 5, 6}
    (drop the latter with ``compositions=False`` for a 3-relation
    graph).  Each relation's triples are shuffled with the seed and
    split 80/10/10, so every relation appears in train and the splits
    are disjoint by construction.
    """
    if scheme != "modular":
        raise ValueError(f"unknown synthetic scheme {scheme!r}")
    if n_entities < 8:
        raise ValueError("modular scheme needs n_entities >= 8")
    offsets = [1, 2, 3]
    if compositions:
        offsets += [4, 5, 6]
    entities = Vocab(f"e{i}" for i in range(n_entities))
    relations = Vocab(f"add_{k}" for k in offsets)
    rng = np.random.default_rng(seed)
    train_rows, valid_rows, test_rows = [], [], []
    n_eval = n_entities // 10
    for rid, k in enumerate(offsets):
        triples = [(i, rid, (i + k) % n_entities) for i in range(n_entities)]
        order = rng.permutation(n_entities)
        shuffled = [triples[i] for i in order]
        test_rows += shuffled[:n_eval]
        valid_rows += shuffled[n_eval:2 * n_eval]
        train_rows += shuffled[2 * n_eval:]
    return KnowledgeGraph(
        entities=entities, relations=relations,
        train=np.array(train_rows, dtype=np.int64),
        valid=np.array(valid_rows, dtype=np.int64) if valid_rows else _empty_triples(),
        test=np.array(test_rows, dtype=np.int64) if test_rows else _empty_triples())


CATEGORY_NAMES = ("1-1", "1-N", "N-1", "N-N")


@dataclass
class RelationStats:
    relation: int
    name: str
    tails_per_head: float
    heads_per_tail: float
    category: str


def categorize_relations(kg: KnowledgeGraph, threshold: float = 1.5) -> dict:
    """Bucket train relations by average tails-per-head and heads-per-tail.

    A ratio at or above ``threshold`` counts as "N".  Relations with no
    train triples are excluded.  Returns ``{relation_id: RelationStats}``.
    """
    heads: dict = {}
    tails: dict = {}
    counts: dict = {}
    for s, r, o in kg.train:
        r = int(r)
        counts[r] = counts.get(r, 0) + 1
        heads.setdefault(r, set()).add(int(s))
        tails.setdefault(r, set()).add(int(o))
    out = {}
    for r, n in sorted(counts.items()):
        tph = n / len(heads[r])
        hpt = n / len(tails[r])
        many_tails = tph >= threshold
        many_heads = hpt >= threshold
        if many_tails and many_heads:
            cat = "N-N"
        elif many_tails:
            cat = "1-N"
        elif many_heads:
            cat = "N-1"
        else:
            cat = "1-1"
        out[r] = RelationStats(relation=r, name=kg.relations.names[r],
                               tails_per_head=tph, heads_per_tail=hpt, category=cat)
    return out
