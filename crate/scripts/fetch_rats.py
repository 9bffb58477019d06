#!/usr/bin/env python3
"""Fetch the rat tumorigenesis litter dataset and normalize it for `pofrail fit`.

Downloads the `rats` data (litter-matched tumor study: 100 litters of 3 rats,
one treated per litter) from the Rdatasets mirror of the R `survival`
package, keeps the documented columns, and writes `data/rats.csv` with the
schema expected by the fit command:

    litter  (cluster id)
    rx      (treatment indicator, 0/1)
    time    (follow-up time in days)
    status  (1 = tumor, 0 = censored)

A SHA-256 of the normalized file is printed and pinned in `data/rats.sha256`
on the first successful fetch; later runs verify against the pin. Published
variants of this dataset differ (the full 300-row version vs the 150-row
same-sex subset commonly used in textbooks); use `--subset female` to write
the female-litter subset instead of the full file.

Usage:
    python3 scripts/fetch_rats.py [--subset female] [--out data/rats.csv]
"""

import argparse
import csv
import hashlib
import io
import sys
import urllib.request
from pathlib import Path

URLS = [
    "https://vincentarelbundock.github.io/Rdatasets/csv/survival/rats.csv",
    "https://raw.githubusercontent.com/vincentarelbundock/Rdatasets/master/csv/survival/rats.csv",
]


def fetch_raw() -> str:
    last_err = None
    for url in URLS:
        try:
            with urllib.request.urlopen(url, timeout=30) as resp:
                return resp.read().decode("utf-8")
        except Exception as e:  # noqa: BLE001 - report the last failure
            last_err = e
            print(f"fetch failed from {url}: {e}", file=sys.stderr)
    raise SystemExit(
        f"could not download the dataset from any mirror (last error: {last_err}); "
        "download rats.csv manually and place it at data/rats.csv"
    )


def normalize(raw: str, subset: str | None) -> str:
    reader = csv.DictReader(io.StringIO(raw))
    fields = reader.fieldnames or []
    required = ["litter", "rx", "time", "status"]
    missing = [c for c in required if c not in fields]
    if missing:
        raise SystemExit(f"source file lacks expected columns: {missing} (has {fields})")
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(required)
    n = 0
    for row in reader:
        if subset == "female" and row.get("sex", "f").strip().lower() not in ("f", "female"):
            continue
        writer.writerow([row["litter"], row["rx"], row["time"], row["status"]])
        n += 1
    print(f"normalized {n} rows" + (f" (subset={subset})" if subset else ""))
    return out.getvalue()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--subset", choices=["female"], default=None)
    parser.add_argument("--out", type=Path, default=Path("data/rats.csv"))
    args = parser.parse_args()

    text = normalize(fetch_raw(), args.subset)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text)
    digest = hashlib.sha256(text.encode()).hexdigest()
    print(f"wrote {args.out} (sha256: {digest})")

    pin = args.out.with_suffix(".sha256")
    if pin.exists():
        expected = pin.read_text().split()[0]
        if expected != digest:
            raise SystemExit(
                f"checksum mismatch: pinned {expected}, downloaded {digest}; "
                "the upstream file changed — inspect before using"
            )
        print("checksum matches the pinned value")
    else:
        pin.write_text(f"{digest}  {args.out.name}\n")
        print(f"pinned checksum in {pin}")


if __name__ == "__main__":
    main()
