#!/usr/bin/env python3
"""Download and canonicalize the three benchmark datasets.

Run on a machine with internet access; the resulting CSVs land in data/
and are what the acceptance tests and the CLI examples expect:

    python3 scripts/fetch_data.py            # all three
    python3 scripts/fetch_data.py heart      # just one

Outputs:
    data/heart.csv       303 rows, target "target" (1 = disease present)
    data/adult.csv       48842 rows, target "income", sensitive "sex"
    data/creditcard.csv  284807 rows, target "Class"
"""

from __future__ import annotations

import csv
import gzip
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"
HEART_URL = f"{UCI}/heart-disease/processed.cleveland.data"
ADULT_TRAIN_URL = f"{UCI}/adult/adult.data"
ADULT_TEST_URL = f"{UCI}/adult/adult.test"
# ULB credit card fraud; OpenML dataset 1597 mirrors the Kaggle original.
CREDIT_URL = "https://www.openml.org/data/get_csv/1673544/phpKo8OWT"

HEART_COLUMNS = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
    "thalach", "exang", "oldpeak", "slope", "ca", "thal", "num",
]

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]


def _download(url: str) -> bytes:
    print(f"  GET {url}")
    with urllib.request.urlopen(url, timeout=120) as resp:
        payload = resp.read()
    if url.endswith(".gz"):
        payload = gzip.decompress(payload)
    return payload


def fetch_heart() -> None:
    raw = _download(HEART_URL).decode("utf-8")
    out = DATA_DIR / "heart.csv"
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEART_COLUMNS[:-1] + ["target"])
        for line in raw.splitlines():
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            if len(fields) != len(HEART_COLUMNS):
                raise SystemExit(f"unexpected heart row: {line!r}")
            # Grades 1-4 all mean disease present; 0 means absent.
            fields[-1] = "1" if fields[-1] not in {"0", "0.0"} else "0"
            writer.writerow(fields)
    print(f"  wrote {out}")


def fetch_adult() -> None:
    out = DATA_DIR / "adult.csv"
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ADULT_COLUMNS)
        for url, skip_header in ((ADULT_TRAIN_URL, False), (ADULT_TEST_URL, True)):
            raw = _download(url).decode("utf-8")
            lines = raw.splitlines()
            if skip_header:
                lines = lines[1:]  # first line of adult.test is a comment
            for line in lines:
                line = line.strip()
                if not line:
                    continue
                fields = [f.strip() for f in line.split(",")]
                if len(fields) != len(ADULT_COLUMNS):
                    raise SystemExit(f"unexpected adult row: {line!r}")
                # adult.test labels carry a trailing period.
                fields[-1] = fields[-1].rstrip(".")
                writer.writerow(fields)
    print(f"  wrote {out}")


def fetch_creditcard() -> None:
    payload = _download(CREDIT_URL)
    if payload[:2] == b"PK":
        with zipfile.ZipFile(io.BytesIO(payload)) as zf:
            payload = zf.read(zf.namelist()[0])
    text = payload.decode("utf-8")
    out = DATA_DIR / "creditcard.csv"
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        for i, row in enumerate(csv.reader(io.StringIO(text))):
            if not row:
                continue
            row = [field.strip().strip("'\"") for field in row]
            if i == 0 and row[-1] not in {"Class", "class"}:
                raise SystemExit(f"unexpected creditcard header: {row[-4:]}")
            if i == 0:
                row[-1] = "Class"
            writer.writerow(row)
    print(f"  wrote {out}")


FETCHERS = {
    "heart": fetch_heart,
    "adult": fetch_adult,
    "creditcard": fetch_creditcard,
}


def main(argv: list[str]) -> int:
    names = argv or list(FETCHERS)
    unknown = [n for n in names if n not in FETCHERS]
    if unknown:
        print(f"unknown dataset(s): {', '.join(unknown)}", file=sys.stderr)
        print(f"choices: {', '.join(FETCHERS)}", file=sys.stderr)
        return 2
    DATA_DIR.mkdir(exist_ok=True)
    for name in names:
        print(f"{name}:")
        FETCHERS[name]()
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
