#!/usr/bin/env python3
"""Writes the 1000-row MovieLens-format fixture used by the ingest tests.

The file is committed; rerunning this script reproduces it byte for byte.
"""
import argparse
import calendar
import csv
import datetime as dt
import random
from pathlib import Path

GENRES = [
    "Action", "Adventure", "Animation", "Children", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical",
    "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
ROWS = 1000


def epoch(year, month, day=1, seconds=0):
    return calendar.timegm(dt.datetime(year, month, day).timetuple()) + seconds


def interval_start(k):
    return epoch(2010 + (2 * k) // 12, (2 * k) % 12 + 1)


def movies(rng):
    ids = sorted(rng.sample(range(1, 400), 60))
    out = []
    for i, mid in enumerate(ids):
        if i % 17 == 5:
            genres = "(no genres listed)"
        else:
            picked = sorted(rng.sample(range(len(GENRES)), rng.randint(1, 4)))
            names = [GENRES[g] for g in picked]
            if i % 11 == 3:
                names.append("IMAX")
            genres = "|".join(names)
        title = f"Film {mid}, The ({1990 + mid % 25})" if i % 4 == 0 else f"Film {mid} ({1990 + mid % 25})"
        out.append((mid, title, genres))
    return out


def ratings(rng, movie_ids):
    weights = [1.0 / (r + 1) ** 0.8 for r in range(len(movie_ids))]
    order = movie_ids[:]
    rng.shuffle(order)
    rows = []

    def add(ts, mid=None):
        mid = mid if mid is not None else rng.choices(order, weights)[0]
        rows.append([str(rng.randint(1, 50)), str(mid), f"{rng.randint(1, 10) / 2:.1f}", str(ts)])

    # Boundary events in interval 0: last second of day 29 trains, day 30 at
    # midnight evaluates.
    start0 = interval_start(0)
    add(start0 + 30 * 86400 - 1, order[0])
    add(start0 + 30 * 86400, order[0])
    # Extra evaluation-half events in interval 11 (Nov-Dec 2011).
    start11 = interval_start(11)
    for _ in range(6):
        add(start11 + rng.randint(30, 59) * 86400 + rng.randint(0, 86399))
    # Dec 31 2011 is day 60 of interval 11, past the evaluation window.
    add(epoch(2011, 12, 31, 3600))
    # Outside the span.
    for _ in range(5):
        add(epoch(2009, rng.randint(1, 12), rng.randint(1, 28), rng.randint(0, 86399)))
    for _ in range(5):
        add(epoch(2012, rng.randint(1, 12), rng.randint(1, 28), rng.randint(0, 86399)))

    malformed = [
        ["7", str(order[1]), "4.0"],
        ["8", str(order[2]), "3.5", "not-a-time"],
        ["9", "9999", "2.0", str(start0 + 86400)],
        ["10", str(order[3]), "abc", str(start0 + 2 * 86400)],
        ["11", str(order[4]), "3.0", "-5"],
    ]
    target = ROWS - len(malformed)
    while len(rows) < target:
        k = rng.randint(0, 11)
        start = interval_start(k)
        span = (interval_start(k + 1) - start) // 86400
        day = rng.randint(0, span - 1)
        add(start + day * 86400 + rng.randint(0, 86399))
    rows.extend(malformed)
    rng.shuffle(rows)
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "tests/data/movielens"))
    parser.add_argument("--seed", type=int, default=20100101)
    args = parser.parse_args()
    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    table = movies(rng)
    with open(out / "movies.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["movieId", "title", "genres"])
        w.writerows(table)
    rows = ratings(rng, [m[0] for m in table])
    with open(out / "ratings.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["userId", "movieId", "rating", "timestamp"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
