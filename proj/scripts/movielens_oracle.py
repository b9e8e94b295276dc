#!/usr/bin/env python3
"""Reference windowing of a MovieLens-format log, written independently of
the C++ ingest code. Its JSON output is frozen as the golden file that the
ingest tests compare against.
"""
import argparse
import calendar
import csv
import datetime as dt
import json
from collections import defaultdict
from pathlib import Path

GENRES = [
    "Action", "Adventure", "Animation", "Children", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical",
    "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def as_int(text):
    try:
        return int(text)
    except ValueError:
        return None


def as_float(text):
    try:
        v = float(text)
    except ValueError:
        return None
    return v if v == v and abs(v) != float("inf") else None


def load(ratings_path, movies_path):
    movies = {}
    with open(movies_path, newline="") as f:
        for row in list(csv.reader(f))[1:]:
            mid = as_int(row[0]) if len(row) == 3 else None
            if mid is None or mid in movies:
                continue
            tokens = row[2].split("|")
            movies[mid] = [1 if g in tokens else 0 for g in GENRES]
    records, malformed, data_rows = [], 0, 0
    with open(ratings_path, newline="") as f:
        for row in list(csv.reader(f))[1:]:
            if not row:
                continue
            data_rows += 1
            ok = len(row) == 4
            if ok:
                user, mid, rating, ts = as_int(row[0]), as_int(row[1]), as_float(row[2]), as_int(row[3])
                ok = None not in (user, mid, rating, ts) and ts >= 0 and mid in movies
            if not ok:
                malformed += 1
                continue
            records.append((user, mid, rating, ts))
    return movies, records, data_rows, malformed


def windows(movies, records, start_year, end_year, train_days, eval_days, max_seen, unseen_fraction):
    bounds = []
    for k in range(6 * (end_year - start_year + 1) + 1):
        d = dt.datetime(start_year + (2 * k) // 12, (2 * k) % 12 + 1, 1)
        bounds.append(calendar.timegm(d.timetuple()))
    n = len(bounds) - 1
    eval_len = [min(max((bounds[k + 1] - bounds[k]) // 86400 - train_days, 0), eval_days) for k in range(n)]
    train = [defaultdict(lambda: [0] * train_days) for _ in range(n)]
    evals = [defaultdict(int) for _ in range(n)]
    events = [0] * n
    stats = dict(train=0, eval=0, dropped_by_cap=0, out_of_window=0, skipped_windows=0)
    for _, mid, _, ts in records:
        k = next((i for i in range(n) if bounds[i] <= ts < bounds[i + 1]), None)
        if k is None:
            stats["out_of_window"] += 1
            continue
        day = (ts - bounds[k]) // 86400
        if day < train_days:
            train[k][mid][day] += 1
        elif day < train_days + eval_len[k]:
            evals[k][mid] += 1
        else:
            stats["out_of_window"] += 1
            continue
        events[k] += 1

    out = []
    for k in range(n):
        if not train[k]:
            stats["skipped_windows"] += events[k]
            continue
        ranked = sorted(train[k].items(), key=lambda kv: (-sum(kv[1]), kv[0]))
        seen = sorted(mid for mid, _ in ranked[:max_seen])
        for _, row in ranked[max_seen:]:
            stats["dropped_by_cap"] += sum(row)
        cap = int(unseen_fraction * len(seen) + 0.5)
        unseen = []
        for mid in sorted(evals[k]):
            if mid in train[k]:
                if mid not in seen:
                    stats["dropped_by_cap"] += evals[k][mid]
            elif len(unseen) < cap:
                unseen.append(mid)
            else:
                stats["dropped_by_cap"] += evals[k][mid]
        ids = seen + unseen
        counts = [evals[k].get(mid, 0) for mid in ids]
        stats["train"] += sum(sum(train[k][mid]) for mid in seen)
        stats["eval"] += sum(counts)
        out.append(dict(
            window_index=k,
            start_epoch=bounds[k],
            eval_days=eval_len[k],
            movie_ids=ids,
            seen=len(seen),
            train=[train[k][mid] for mid in seen],
            eval_counts=counts,
            features=[movies[mid] for mid in ids],
        ))
    return out, stats


def main():
    here = Path(__file__).resolve().parent.parent / "tests/data/movielens"
    parser = argparse.ArgumentParser()
    parser.add_argument("--dir", default=str(here))
    args = parser.parse_args()
    d = Path(args.dir)
    movies, records, data_rows, malformed = load(d / "ratings.csv", d / "movies.csv")
    cases = []
    for opts in (
        dict(start_year=2010, end_year=2011, train_days=30, eval_days=30, max_seen=500, unseen_fraction=0.25),
        dict(start_year=2010, end_year=2011, train_days=30, eval_days=30, max_seen=6, unseen_fraction=0.5),
        dict(start_year=2010, end_year=2010, train_days=20, eval_days=15, max_seen=10, unseen_fraction=1.0),
    ):
        ws, stats = windows(movies, records, **opts)
        cases.append(dict(options=opts, stats=stats, windows=ws))
    golden = dict(
        data_rows=data_rows,
        malformed=malformed,
        records=len(records),
        movies=len(movies),
        first_records=[list(r) for r in records[:3]],
        cases=cases,
    )
    with open(d / "golden.json", "w") as f:
        json.dump(golden, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
