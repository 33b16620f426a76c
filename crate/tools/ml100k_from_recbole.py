#!/usr/bin/env python3
"""Rebuild MovieLens-100K (u.data, u.user, u.item, u.genre, u.occupation)
from the atomic files bundled in the `recbole` wheel.

    pip download --no-deps -d /tmp/rb recbole
    python3 tools/ml100k_from_recbole.py /tmp/rb/recbole-*.whl data/ml-100k

Row order of the ratings file is preserved. Release dates are only known to
the year, so they are written as 01-Jan-YYYY.
"""
import os
import sys
import zipfile

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/ml-100k."


def rows(blob):
    lines = blob.decode("latin-1").splitlines()
    return [line.split("\t") for line in lines[1:] if line]


def main(wheel, out):
    os.makedirs(out, exist_ok=True)
    z = zipfile.ZipFile(wheel)
    inter = rows(z.read(PREFIX + "inter"))
    users = rows(z.read(PREFIX + "user"))
    items = rows(z.read(PREFIX + "item"))

    def write(name, lines):
        with open(os.path.join(out, name), "wb") as f:
            f.write("".join(line + "\n" for line in lines).encode("latin-1"))

    write("u.data", ["\t".join([u, i, r, t.split(".")[0]]) for u, i, r, t in inter])
    write("u.user", ["|".join(row) for row in users])
    occupations = sorted({row[3] for row in users})
    write("u.occupation", occupations)
    write("u.genre", [f"{g}|{k}" for k, g in enumerate(GENRES)])

    lines = []
    for item_id, title, year, classes in items:
        date = f"01-Jan-{year}" if year.isdigit() else ""
        flags = set(classes.split())
        bits = "|".join("1" if g in flags else "0" for g in GENRES)
        title = title if date == "" else f"{title} ({year})"
        lines.append(f"{item_id}|{title}|{date}||http://us.imdb.com/|{bits}")
    write("u.item", lines)
    print(f"{len(inter)} ratings, {len(users)} users, {len(items)} items -> {out}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2])
