"""Train the default model on the bundled synthetic graph.

Run with:  python3 demos/05_train_synthetic.py

The graph links 50 entities by modular arithmetic: i --add_k--> (i+k)
mod 50 for offsets 1..6, with the last three being sums of the first
three.  A model that learns the offsets can complete held-out triples
it has never seen.  Takes about two minutes; filtered test MRR lands
above 0.9.

The command line equivalent is:

    interacte train --config demos/quickstart.json --out runs/quickstart
"""

import warnings

from interacte.evaluation import evaluate
from interacte.kgdata import (
    build_filter_index,
    categorize_relations,
    generate_synthetic_kg,
)
from interacte.model import ConfigWarning, ModelConfig
from interacte.train import TrainConfig, train_loop


def main():
    # two defaults sit off the sweep grid on purpose (see README); the
    # validator's soft warnings about them are expected here
    warnings.simplefilter("ignore", ConfigWarning)

    kg = generate_synthetic_kg(n_entities=50, seed=7)
    print(f"graph: {kg.n_entities} entities, {kg.n_relations} relations, "
          f"{len(kg.train)}/{len(kg.valid)}/{len(kg.test)} train/valid/test\n")

    def report(record):
        if record["split"] == "valid":
            print(f"  epoch {record['epoch']:>3}: valid mrr {record['mrr']:.3f} "
                  f"hits@1 {record['hits1']:.3f}")

    result = train_loop(kg, ModelConfig(), TrainConfig(), log=report)
    print(f"\nbest epoch: {result.best_epoch} of {result.epochs_run}")

    metrics = evaluate(result.best_params, ModelConfig(), kg, "test",
                       build_filter_index(kg), categorize_relations(kg))
    print(f"test: mrr {metrics.mrr:.3f}  mr {metrics.mr:.2f}  "
          f"hits@1 {metrics.hits1:.3f}  hits@10 {metrics.hits10:.3f}")

    print("\nby direction:")
    for direction, row in sorted(metrics.by_direction.items()):
        print(f"  {direction:>5}: mrr {row['mrr']:.3f} over {row['n']} queries")

    print("\nby relation category:")
    for direction, table in sorted(metrics.by_category.items()):
        for category, row in sorted(table.items()):
            print(f"  {direction:>5} {category:>4}: mrr {row['mrr']:.3f} "
                  f"over {row['n']} queries")


if __name__ == "__main__":
    main()
