#!/usr/bin/env python3
"""Fetch the UCI 'default of credit card clients' dataset and write the
feature CSV the desk-scale acceptance test consumes.

Needs internet access and xlrd (pip install xlrd) for the legacy .xls.
Writes data/credit_default.csv with the 23 feature columns (ID and the
label column are dropped; detectors here are unsupervised).

Usage: python scripts/fetch_credit_default.py [output.csv]
"""

import csv
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

URL = "https://archive.ics.uci.edu/static/public/350/default+of+credit+card+clients.zip"

FEATURES = [
    "LIMIT_BAL", "SEX", "EDUCATION", "MARRIAGE", "AGE",
    "PAY_0", "PAY_2", "PAY_3", "PAY_4", "PAY_5", "PAY_6",
    "BILL_AMT1", "BILL_AMT2", "BILL_AMT3", "BILL_AMT4", "BILL_AMT5", "BILL_AMT6",
    "PAY_AMT1", "PAY_AMT2", "PAY_AMT3", "PAY_AMT4", "PAY_AMT5", "PAY_AMT6",
]


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/credit_default.csv")
    try:
        import xlrd  # noqa: F401
    except ImportError:
        print("xlrd is required to read the .xls file: pip install xlrd", file=sys.stderr)
        return 1

    print(f"downloading {URL} ...")
    with urllib.request.urlopen(URL, timeout=120) as resp:
        payload = resp.read()
    with zipfile.ZipFile(io.BytesIO(payload)) as zf:
        xls_name = next(n for n in zf.namelist() if n.lower().endswith(".xls"))
        book = xlrd.open_workbook(file_contents=zf.read(xls_name))
    sheet = book.sheet_by_index(0)

    # row 0 is the X1..X23 banner, row 1 holds the real column names
    header = [str(c.value).strip() for c in sheet.row(1)]
    keep = [header.index(name) for name in FEATURES]

    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURES)
        for r in range(2, sheet.nrows):
            row = sheet.row(r)
            writer.writerow([_cell(row[i]) for i in keep])
    print(f"wrote {sheet.nrows - 2} rows -> {out}")
    return 0


def _cell(cell):
    v = cell.value
    if isinstance(v, float) and v == int(v):
        return int(v)
    return v


if __name__ == "__main__":
    sys.exit(main())
