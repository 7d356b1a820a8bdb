"""Filtered ranking evaluation with head/tail and per-category breakdowns.

Every triple yields a tail query (score (s, r, ?) and rank the true
object) and, when inverse relations are on, a head query asked through
the inverse relation.  Candidates are all entities minus every *other*
known true answer for the query (train + valid + test); the gold entity
itself always stays in.  Tied scores get the mean rank of the tied block:

    rank = 1 + #{strictly higher} + #{ties, gold excluded} / 2

so ranks may be half-integers.  Both directions carry equal per-query
weight in the aggregate.
"""

from dataclasses import dataclass, field

import numpy as np

from .kgdata import FilterIndex, KnowledgeGraph
from .model import ModelConfig, ModelParams, score_1n

UNKNOWN_CATEGORY = "unknown"


def filtered_rank(scores: np.ndarray, gold: int, filter_ids) -> float:
    """Rank of ``gold`` among all non-filtered candidates (1 is best)."""
    scores = np.asarray(scores)
    gold_score = scores[gold]
    keep = np.ones(scores.shape[0], dtype=bool)
    if filter_ids:
        keep[np.fromiter(filter_ids, dtype=np.int64)] = False
    keep[gold] = True
    candidates = scores[keep]
    higher = int((candidates > gold_score).sum())
    ties = int((candidates == gold_score).sum()) - 1
    return 1.0 + higher + 0.5 * ties


def _aggregate(ranks: np.ndarray) -> dict:
    if len(ranks) == 0:
        return {"mrr": 0.0, "mr": 0.0, "hits1": 0.0, "hits10": 0.0, "n": 0}
    return {
        "mrr": float((1.0 / ranks).mean()),
        "mr": float(ranks.mean()),
        "hits1": float((ranks <= 1.0).mean()),
        "hits10": float((ranks <= 10.0).mean()),
        "n": int(len(ranks)),
    }


@dataclass
class RankingMetrics:
    mrr: float
    mr: float
    hits1: float
    hits10: float
    n: int
    by_direction: dict = field(default_factory=dict)
    by_category: dict = field(default_factory=dict)

    def to_dict(self):
        return {"mrr": self.mrr, "mr": self.mr, "hits1": self.hits1,
                "hits10": self.hits10, "n": self.n,
                "by_direction": self.by_direction, "by_category": self.by_category}


def evaluate(params: ModelParams, config: ModelConfig, kg: KnowledgeGraph,
             split: str, filter_index: FilterIndex, categories: dict | None = None,
             batch_size: int = 512) -> RankingMetrics:
    """Filtered ranking over one split.

    ``categories`` maps relation id -> category name (relations absent
    from it land in an explicit "unknown" bucket so the per-category
    tables always partition the queries).  Head queries are skipped when
    the model was built without inverse relations.
    """
    triples = kg.split(split)
    n_rel = kg.n_relations
    queries = []   # (subject-side id, relation row, gold, filter key, direction, relation)
    for s, r, o in triples:
        s, r, o = int(s), int(r), int(o)
        queries.append((s, r, o, ("objects", (s, r)), "tail", r))
        if config.inverse_relations:
            queries.append((o, r + n_rel, s, ("subjects", (r, o)), "head", r))

    ranks = np.empty(len(queries), dtype=np.float64)
    directions = []
    rel_ids = []
    for start in range(0, len(queries), batch_size):
        chunk = queries[start:start + batch_size]
        pairs = np.array([[q[0], q[1]] for q in chunk], dtype=np.int64)
        scores = score_1n(params, config, pairs, training=False)
        for row, (lhs, rel_row, gold, (table, key), direction, rel) in enumerate(chunk):
            known = getattr(filter_index, table).get(key, set())
            ranks[start + row] = filtered_rank(scores[row], gold, known)
            directions.append(direction)
            rel_ids.append(rel)

    directions = np.array(directions)
    rel_ids = np.array(rel_ids, dtype=np.int64)
    overall = _aggregate(ranks)
    metrics = RankingMetrics(**overall)

    for direction in ("tail", "head"):
        mask = directions == direction
        if mask.any():
            metrics.by_direction[direction] = _aggregate(ranks[mask])

    if categories is not None:
        cat_of = {r: stats.category for r, stats in categories.items()}
        names = sorted({*cat_of.values(), UNKNOWN_CATEGORY})
        for direction in ("tail", "head"):
            dir_mask = directions == direction
            if not dir_mask.any():
                continue
            table = {}
            for cat in names:
                cat_mask = np.array([cat_of.get(int(r), UNKNOWN_CATEGORY) == cat
                                     for r in rel_ids])
                mask = dir_mask & cat_mask
                if mask.any():
                    table[cat] = _aggregate(ranks[mask])
            metrics.by_category[direction] = table
    return metrics
