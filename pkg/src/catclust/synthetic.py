"""Reproducible synthetic survey used by the tutorial and the CLI tests.

Six five-point agreement items driven by two correlated latent attitudes,
plus a four-level nominal item.  About 4% of the item answers are "don't
know" (code 9).  Regenerate the bundled files with::

    python -m catclust.synthetic src/catclust/data
"""
from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np
import yaml

SEED = 20020
N_ROWS = 500
MISSING_RATE = 0.04

# (name, loading on attitude 1, loading on attitude 2, reversed)
ITEMS = [
    ("A", 0.8, 0.0, True),
    ("B", 0.9, 0.1, False),
    ("C", 0.85, 0.1, False),
    ("D", 0.2, 0.8, False),
    ("E", 0.1, 0.7, False),
    ("F", 0.3, 0.2, True),
]
CUTS = np.array([-1.2, -0.3, 0.3, 1.1])


def generate(n: int = N_ROWS, seed: int = SEED):
    """Return ``(schema_dict, header, rows)`` for the synthetic survey."""
    rng = np.random.default_rng(seed)
    cov = np.array([[1.0, 0.4], [0.4, 1.0]])
    latent = rng.multivariate_normal(np.zeros(2), cov, size=n)
    columns = []
    variables = []
    for name, w1, w2, flip in ITEMS:
        score = latent @ np.array([w1, w2]) + rng.normal(scale=0.6, size=n)
        if flip:
            score = -score
        codes = np.searchsorted(CUTS, score) + 1
        codes[rng.random(n) < MISSING_RATE] = 9
        columns.append(codes)
        variables.append({"name": name, "scale": "ordinal_with_missing",
                          "categories": [1, 2, 3, 4, 5], "missing_code": 9})
    region_logits = np.outer(latent[:, 0], [0.8, 0.0, -0.4, -0.4])
    region_p = np.exp(region_logits)
    region_p /= region_p.sum(axis=1, keepdims=True)
    region = np.array([rng.choice(4, p=p) for p in region_p]) + 1
    columns.append(region)
    variables.append({"name": "R", "scale": "nominal", "categories": [1, 2, 3, 4]})
    header = [v["name"] for v in variables]
    rows = np.column_stack(columns).tolist()
    return {"variables": variables}, header, rows


def write(directory) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    schema, header, rows = generate()
    data_path = directory / "synthetic.csv"
    schema_path = directory / "synthetic_schema.yaml"
    with open(data_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    with open(schema_path, "w", encoding="utf-8") as fh:
        fh.write(f"# synthetic survey, catclust.synthetic seed {SEED}\n")
        yaml.safe_dump(schema, fh, sort_keys=False, default_flow_style=None)
    return data_path, schema_path


def bundled_paths() -> tuple[Path, Path]:
    here = Path(__file__).parent / "data"
    return here / "synthetic.csv", here / "synthetic_schema.yaml"


if __name__ == "__main__":
    for p in write(sys.argv[1] if len(sys.argv) > 1 else "."):
        print(p)
