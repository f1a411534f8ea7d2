#!/usr/bin/env python3
"""Convert the Pubmed-Diabetes NLM tab files to the .content/.cites layout.

    convert_pubmed.py Pubmed-Diabetes/data data/pubmed

reads Pubmed-Diabetes.NODE.paper.tab and Pubmed-Diabetes.DIRECTED.cites.tab
and writes pubmed.content and pubmed.cites. Features keep the order of the
header line; words a paper lacks are written as 0.
"""

import argparse
import pathlib
import sys


def read_nodes(path):
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if len(lines) < 3:
        sys.exit(f"{path}: too short")
    # Line 2 lists the features as "numeric:<word>:0.0", after the label field.
    words = []
    for field in lines[1].split("\t"):
        parts = field.split(":")
        if len(parts) >= 2 and parts[0] == "numeric":
            words.append(parts[1])
    index = {w: k for k, w in enumerate(words)}
    nodes = []
    for line_no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        fields = line.split("\t")
        paper, label, values = fields[0], None, [0.0] * len(words)
        for field in fields[1:]:
            key, _, value = field.partition("=")
            if key == "label":
                label = value
            elif key in index:
                values[index[key]] = float(value)
        if label is None:
            sys.exit(f"{path}:{line_no}: no label")
        nodes.append((paper, values, label))
    return words, nodes


def read_cites(path):
    edges = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) < 4 or fields[2] != "|":
                continue  # header lines
            a, b = fields[1], fields[3]
            if not (a.startswith("paper:") and b.startswith("paper:")):
                sys.exit(f"{path}:{line_no}: unexpected endpoint")
            edges.append((a[len("paper:"):], b[len("paper:"):]))
    return edges


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", type=pathlib.Path, help="directory holding the Pubmed-Diabetes .tab files")
    ap.add_argument("dest", type=pathlib.Path, help="output directory")
    args = ap.parse_args()

    words, nodes = read_nodes(args.source / "Pubmed-Diabetes.NODE.paper.tab")
    edges = read_cites(args.source / "Pubmed-Diabetes.DIRECTED.cites.tab")
    args.dest.mkdir(parents=True, exist_ok=True)
    with open(args.dest / "pubmed.content", "w", encoding="utf-8") as out:
        for paper, values, label in nodes:
            out.write("\t".join([paper, *(repr(v) for v in values), label]) + "\n")
    with open(args.dest / "pubmed.cites", "w", encoding="utf-8") as out:
        for a, b in edges:
            out.write(f"{b}\t{a}\n")  # cited, citing
    print(f"{len(nodes)} nodes, {len(words)} features, {len(edges)} edges", file=sys.stderr)


if __name__ == "__main__":
    main()
