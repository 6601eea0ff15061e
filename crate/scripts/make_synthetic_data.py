"""Generate the bundled synthetic season used by the examples and smoke tests.

Writes data/roster.csv and data/boxscores.csv. The roster is the nine-player
Doneck Dolphins 2022-23 roster plus one reserve who plays too few minutes to
pass the default 40-minute filter.
"""
import csv
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent
MATCHES = 18
SEED = 20221001

ROSTER = [
    (1, "Annabel Breuer", 1.5, "F", 28, 0.9),
    (2, "Correy Rossi", 2.0, "M", 30, 0.9),
    (3, "Dejon Green", 3.5, "M", 14, 0.7),
    (4, "Dirk Passivan", 4.5, "M", 34, 1.5),
    (5, "Lucas Jung", 1.0, "M", 12, 0.5),
    (6, "Natalie Passivan", 4.5, "F", 12, 0.8),
    (7, "Patrick Dorner", 3.5, "M", 26, 1.0),
    (8, "Svenja Erni", 3.5, "F", 22, 0.9),
    (9, "Walter Vlaanderen", 4.5, "M", 32, 1.3),
    (10, "Jonas Reserve", 2.5, "M", 1, 0.6),
]

HEADER = [
    "player", "match", "minutes", "points", "rebounds", "assists", "steals", "blocks",
    "missed_fg", "missed_ft", "turnovers", "fouls_drawn", "shots_rejected",
    "personal_fouls", "fga", "fta", "home",
]


def main():
    rng = np.random.default_rng(SEED)
    data = ROOT / "data"
    data.mkdir(exist_ok=True)
    with open(data / "roster.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["index", "name", "classification", "sex"])
        for idx, name, cls, sex, _, _ in ROSTER:
            w.writerow([idx, name, cls, sex])

    rows = []
    for j in range(1, MATCHES + 1):
        home = int(j % 2 == 0)
        form = rng.normal(0.0, 0.15)
        for idx, _, _, _, mean_minutes, skill in ROSTER:
            if rng.random() < 0.08 and idx != 10:
                continue
            minutes = max(0.0, round(rng.normal(mean_minutes, 5.0), 1))
            if idx == 10:
                minutes = float(rng.integers(0, 4))
            rate = max(0.05, skill * np.exp(form) * minutes / 40.0)
            fga = rng.poisson(12 * rate)
            fg_made = rng.binomial(fga, 0.45)
            fta = rng.poisson(2 * rate)
            ft_made = rng.binomial(fta, 0.6)
            rows.append([
                idx, j, minutes,
                2 * fg_made + ft_made,
                rng.poisson(6 * rate),
                rng.poisson(3 * rate),
                rng.poisson(1 * rate),
                rng.poisson(0.5 * rate),
                fga - fg_made,
                fta - ft_made,
                rng.poisson(2 * rate),
                rng.poisson(1.5 * rate),
                rng.poisson(0.5 * rate),
                rng.poisson(1.5 * rate),
                fga, fta, home,
            ])
    with open(data / "boxscores.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(rows)


if __name__ == "__main__":
    main()
