#!/usr/bin/env python3
"""Convert a pickled citation-network release into a bundle directory.

Input: the widely mirrored `ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`
files (CiteSeer, Cora, PubMed, ...).  Output: the bundle layout this project
loads — `edges.csv`, `features.bin` (or `features.csv`), `labels.csv`, and
`splits.json` with a deterministic assignment of whole classes to the
train/dev/test pools.

The conversion is fully deterministic: node order follows the release's own
indexing, edges are deduplicated and sorted, and the class split assigns the
lowest class ids to the train pool, the next ones to dev, and the rest to
test. Example:

    python3 tools/convert_planetoid.py --input raw/citeseer --dataset citeseer \
        --out data/citeseer

Requires numpy and scipy (scipy only to unpickle the sparse feature blocks).
"""

import argparse
import json
import pickle
import struct
import sys
from pathlib import Path

import numpy as np

try:
    import scipy.sparse as sp
except ImportError:  # pragma: no cover - depends on the host environment
    sys.exit("scipy is required to unpickle the sparse feature matrices "
             "(pip install scipy)")

# name -> (nodes, undirected edges, feature dim, classes, train/dev class counts)
KNOWN_STATS = {
    "citeseer": (3327, 4552, 3703, 6, (2, 2)),
    "cora": (2708, 5278, 1433, 7, (3, 2)),
}


def load_part(input_dir: Path, dataset: str, part: str):
    path = input_dir / f"ind.{dataset}.{part}"
    if not path.exists():
        sys.exit(f"missing input file: {path}")
    if part == "test.index":
        return np.array([int(line) for line in path.read_text().split()],
                        dtype=np.int64)
    with path.open("rb") as fh:
        return pickle.load(fh, encoding="latin1")


def assemble(input_dir: Path, dataset: str):
    """Rebuild the full node ordering from the release's train/test blocks."""
    x, y = load_part(input_dir, dataset, "x"), load_part(input_dir, dataset, "y")
    tx, ty = load_part(input_dir, dataset, "tx"), load_part(input_dir, dataset, "ty")
    allx, ally = load_part(input_dir, dataset, "allx"), load_part(input_dir, dataset, "ally")
    graph = load_part(input_dir, dataset, "graph")
    test_index = load_part(input_dir, dataset, "test.index")

    del x, y  # subsumed by allx/ally

    # Test rows are stored shuffled; scatter them back to their node ids.
    # Some releases (CiteSeer) skip ids inside the test range — those nodes
    # are isolated, get all-zero features, and fall into class 0 via argmax.
    lo, hi = int(test_index.min()), int(test_index.max())
    span = hi - lo + 1
    tx_full = sp.lil_matrix((span, tx.shape[1]), dtype=np.float32)
    ty_full = np.zeros((span, ty.shape[1]), dtype=ty.dtype)
    tx_full[test_index - lo] = tx
    ty_full[test_index - lo] = ty

    features = sp.vstack([allx.tocsr().astype(np.float32), tx_full.tocsr()])
    onehot = np.vstack([ally, ty_full])
    n = features.shape[0]
    missing = span - len(set(test_index.tolist()))

    labels = onehot.argmax(axis=1).astype(np.int64)
    num_classes = onehot.shape[1]

    edges = set()
    for src, neighbors in graph.items():
        for dst in neighbors:
            if src == dst:
                continue
            if not (0 <= src < n and 0 <= dst < n):
                sys.exit(f"edge ({src},{dst}) points outside the {n} nodes")
            edges.add((min(src, dst), max(src, dst)))
    return features.toarray(), labels, sorted(edges), num_classes, missing


def write_fsnb(path: Path, dense: np.ndarray) -> None:
    n, d = dense.shape
    with path.open("wb") as fh:
        fh.write(b"FSNB")
        fh.write(struct.pack("<III", 1, n, d))
        fh.write(np.ascontiguousarray(dense, dtype="<f4").tobytes())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--input", required=True, type=Path,
                    help="directory holding the ind.<dataset>.* files")
    ap.add_argument("--dataset", required=True,
                    help="release name used in the file names (e.g. citeseer)")
    ap.add_argument("--out", required=True, type=Path,
                    help="bundle directory to create")
    ap.add_argument("--train-count", type=int, default=None,
                    help="classes assigned to the train pool "
                         "(default: the known per-dataset count)")
    ap.add_argument("--dev-count", type=int, default=None,
                    help="classes assigned to the dev pool")
    ap.add_argument("--csv-features", action="store_true",
                    help="write features.csv instead of the binary form")
    ap.add_argument("--allow-stat-mismatch", action="store_true",
                    help="keep going when the known node/edge counts differ")
    args = ap.parse_args()

    features, labels, edges, num_classes, missing = assemble(args.input,
                                                             args.dataset)
    n, d = features.shape
    if missing:
        print(f"note: {missing} isolated nodes had no stored label row; "
              "they were assigned class 0", file=sys.stderr)

    known = KNOWN_STATS.get(args.dataset)
    if known is not None:
        exp_n, exp_m, exp_d, exp_c, default_split = known
        got = (n, len(edges), d, num_classes)
        if got != (exp_n, exp_m, exp_d, exp_c):
            msg = (f"{args.dataset}: expected n={exp_n} m={exp_m} d={exp_d} "
                   f"classes={exp_c}, got n={got[0]} m={got[1]} d={got[2]} "
                   f"classes={got[3]}")
            if args.allow_stat_mismatch:
                print("warning: " + msg, file=sys.stderr)
            else:
                sys.exit(msg + "  (pass --allow-stat-mismatch to proceed)")
    else:
        default_split = (max(1, num_classes - 4), 2)

    train_count = args.train_count if args.train_count is not None else default_split[0]
    dev_count = args.dev_count if args.dev_count is not None else default_split[1]
    if train_count < 1 or dev_count < 1:
        sys.exit("train-count and dev-count must both be at least 1")
    if train_count + dev_count >= num_classes:
        sys.exit(f"train-count + dev-count must leave a test class "
                 f"(dataset has {num_classes} classes)")

    classes = list(range(num_classes))
    splits = {
        "train": classes[:train_count],
        "dev": classes[train_count:train_count + dev_count],
        "test": classes[train_count + dev_count:],
    }

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    with (out / "edges.csv").open("w") as fh:
        fh.write("src,dst\n")
        for lo, hi in edges:
            fh.write(f"{lo},{hi}\n")
    with (out / "labels.csv").open("w") as fh:
        for label in labels:
            fh.write(f"{label}\n")
    if args.csv_features:
        with (out / "features.csv").open("w") as fh:
            for row in features:
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")
    else:
        write_fsnb(out / "features.bin", features)
    (out / "splits.json").write_text(
        json.dumps(splits, indent=2, sort_keys=True) + "\n")

    print(f"wrote bundle {out}: {n} nodes, {len(edges)} edges, {d} features, "
          f"{num_classes} classes (train {splits['train']}, dev "
          f"{splits['dev']}, test {splits['test']})")


if __name__ == "__main__":
    main()
