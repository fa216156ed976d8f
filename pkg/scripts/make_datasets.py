#!/usr/bin/env python3
"""Regenerate the shipped data/ files.

The breast-recurrence table is a deterministic simulation; rerunning this
script reproduces data/breast_cancer.csv and its ingestion spec byte for
byte. A real export with the same columns and codes can be dropped in as a
replacement without touching any code.
"""

import json
from pathlib import Path

from cafa.bench import breast_ingestion_spec, write_breast_csv

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


def main():
    DATA.mkdir(exist_ok=True)
    write_breast_csv(DATA / "breast_cancer.csv")
    spec = breast_ingestion_spec()
    with open(DATA / "breast_cancer.spec.json", "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {DATA / 'breast_cancer.csv'}")
    print(f"wrote {DATA / 'breast_cancer.spec.json'}")


if __name__ == "__main__":
    main()
