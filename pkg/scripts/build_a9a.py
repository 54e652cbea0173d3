"""Rebuild the a9a binary-classification file (LIBSVM format) from the UCI Adult data.

a9a is Adult (train + test, 48,842 rows) with its 14 attributes expanded to
123 binary indicators: continuous attributes are binned, categorical ones
one-hot encoded, and a missing value ("?") leaves its block all zero.
Label +1 means income >50K.

Continuous cut points are quintiles of the pooled data (capital gain/loss:
zero versus nonzero), so indicator boundaries may differ slightly from the
distributed copy; the dimension and encoding scheme match.

The Adult files are read from a wheel of the ``responsibly`` package, which
vendors them:

    pip download responsibly --no-deps -d /tmp/resp
    python scripts/build_a9a.py /tmp/resp/responsibly-*.whl data/a9a.gz
"""
import argparse
import gzip
import io
import sys
import zipfile

import numpy as np

CATEGORIES = {
    "workclass": ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
                  "State-gov", "Without-pay", "Never-worked"],
    "education": ["Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
                  "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th", "Doctorate",
                  "5th-6th", "Preschool"],
    "marital-status": ["Married-civ-spouse", "Divorced", "Never-married", "Separated", "Widowed",
                       "Married-spouse-absent", "Married-AF-spouse"],
    "occupation": ["Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
                   "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
                   "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
                   "Armed-Forces"],
    "relationship": ["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative", "Unmarried"],
    "race": ["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"],
    "sex": ["Female", "Male"],
    "native-country": ["United-States", "Cambodia", "England", "Puerto-Rico", "Canada", "Germany",
                       "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece", "South", "China",
                       "Cuba", "Iran", "Honduras", "Philippines", "Italy", "Poland", "Jamaica",
                       "Vietnam", "Mexico", "Portugal", "Ireland", "France", "Dominican-Republic",
                       "Laos", "Ecuador", "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
                       "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador",
                       "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands"],
}
COLUMNS = ["age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
           "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
           "hours-per-week", "native-country", "income"]
QUINTILE = {"age", "fnlwgt", "education-num", "hours-per-week"}
ZERO_SPLIT = {"capital-gain", "capital-loss"}


def read_adult(wheel):
    rows = []
    with zipfile.ZipFile(wheel) as z:
        for name in ("adult.data", "adult.test"):
            member = next(n for n in z.namelist() if n.endswith("dataset/adult/" + name))
            for line in io.TextIOWrapper(z.open(member), encoding="utf-8"):
                parts = [p.strip() for p in line.strip().split(",")]
                if len(parts) != len(COLUMNS):
                    continue  # blank lines and the "|1x3 Cross validator" header
                rows.append(dict(zip(COLUMNS, parts)))
    return rows


def encode(rows):
    """Yield (label, sorted 1-based indices) per row; 123 features in total."""
    blocks, offset = [], 0
    for col in COLUMNS[:-1]:
        if col in QUINTILE:
            vals = np.array([float(r[col]) for r in rows])
            cuts = np.quantile(vals, [0.2, 0.4, 0.6, 0.8])
            blocks.append((col, "bin", cuts, offset))
            offset += 5
        elif col in ZERO_SPLIT:
            blocks.append((col, "zero", None, offset))
            offset += 2
        else:
            blocks.append((col, "cat", {c: i for i, c in enumerate(CATEGORIES[col])}, offset))
            offset += len(CATEGORIES[col])
    assert offset == 123, offset
    for r in rows:
        idx = []
        for col, kind, info, off in blocks:
            v = r[col]
            if v == "?":
                continue
            if kind == "bin":
                idx.append(off + int(np.searchsorted(info, float(v), side="right")))
            elif kind == "zero":
                idx.append(off + (float(v) != 0.0))
            else:
                idx.append(off + info[v])
        label = 1 if r["income"].rstrip(".") == ">50K" else -1
        yield label, [i + 1 for i in sorted(idx)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wheel", help="path to a responsibly-*.whl")
    ap.add_argument("output", help="output path; .gz compresses")
    args = ap.parse_args(argv)
    rows = read_adult(args.wheel)
    # empty name and mtime=0 keep the gzip bytes reproducible
    with open(args.output, "wb") as fh, (
        gzip.GzipFile(filename="", fileobj=fh, mode="wb", mtime=0) if args.output.endswith(".gz") else fh
    ) as raw:
        out = io.TextIOWrapper(raw, encoding="utf-8", newline="\n")
        for label, idx in encode(rows):
            out.write(f"{label:+d} " + " ".join(f"{i}:1" for i in idx) + "\n")
        out.flush()
        out.detach()
    print(f"wrote {len(rows)} rows to {args.output}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
