#!/usr/bin/env python3
"""Write a placeholder zip,income table covering every 5-digit US zip in a
MovieLens u.user file.

The values are SYNTHETIC (deterministic hash of the zip) and exist only so the
pipeline runs end to end. For real figures, export ACS table S1903
("median household income") by ZCTA from data.census.gov and save it as a
two-column CSV with header `zip,income`.

    python3 tools/synthetic_income.py data/ml-100k/u.user data/income_sample.csv
"""
import hashlib
import sys


def income(zip_code):
    h = int.from_bytes(hashlib.sha256(zip_code.encode()).digest()[:4], "little")
    region = int(zip_code[0])
    return 32000 + region * 3500 + h % 60000


def main(user_file, out):
    zips = set()
    with open(user_file, encoding="latin-1") as f:
        for line in f:
            z = line.rstrip("\n").split("|")[4]
            if len(z) == 5 and z.isdigit():
                zips.add(z)
    with open(out, "w") as f:
        f.write("zip,income\n")
        for z in sorted(zips):
            f.write(f"{z},{income(z)}\n")
    print(f"{len(zips)} zips -> {out}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
