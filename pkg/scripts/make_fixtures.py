#!/usr/bin/env python3
"""Generate a synthetic fixture corpus: images, annotations, detections,
scripted replies, and a ready-to-run config."""

import argparse

from sysdiag.fixtures import make_fixture_set


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--diagrams", type=int, default=5)
    args = parser.parse_args()
    annotations = make_fixture_set(args.out, seed=args.seed, n_diagrams=args.diagrams)
    print(f"fixture corpus written; annotations at {annotations}")


if __name__ == "__main__":
    main()
