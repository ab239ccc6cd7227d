#!/usr/bin/env python3
"""Generate the synthetic two-keyword-family tweet corpus.

Informative tweets draw most of their content words from a reporting family
(cases, deaths, confirmed, ...), uninformative ones from a sentiment family
(pray, stay, safe, ...). A few percent of tweets mix both families evenly and
carry a coin-flip label.

Drift hashtags never occur in the gold training split. In the unlabeled pool
they ride along with plainly uninformative chatter, so after one round of
pseudo-labelling they become negative evidence. In dev they tag the mixed
tweets, which then move to the negative side: precision rises, recall drops.
"""

import argparse
import random
from pathlib import Path

INFO = ["cases", "deaths", "confirmed", "tested", "positive", "hospitalized", "reported", "outbreak",
        "patients", "recovered", "quarantine", "county", "ministry", "total", "infections", "tally",
        "update", "icu", "announced", "traced"]
UNINFO = ["pray", "stay", "safe", "love", "hope", "bored", "lol", "miss", "blessed", "god",
          "feel", "wish", "happy", "sad", "crazy", "vibes", "thoughts", "honestly", "omg", "hug"]
FILLER = ["the", "a", "in", "of", "and", "to", "is", "for", "on", "at", "with", "today", "this",
          "week", "now", "all", "our", "new", "people", "everyone", "just", "so", "more", "after",
          "coronavirus", "covid19", "virus", "city", "state", "home", "time", "day", "still", "here"]
DRIFT = ["#stayhome", "#lockdownlife", "#wfh", "#isolationdiaries"]
PLACES = ["Ohio", "Lagos", "Delhi", "Texas", "Madrid", "Seoul", "Milan", "Kenya", "Peru", "Iowa"]
DECOR = ["URL", "@USER", "!!!", "...", "can't", "we're", "it's", "5M", "2K", "HTTPURL"]


def tweet(rng, n_info, n_uninfo, drift=False):
    words = rng.sample(INFO, n_info) + rng.sample(UNINFO, n_uninfo)
    words += rng.sample(FILLER, rng.randint(3, 7))
    if drift:
        words.append(rng.choice(DRIFT))
    if rng.random() < 0.6:
        words.append(rng.choice(PLACES))
    if rng.random() < 0.5:
        words.append(str(rng.randint(2, 9999)))
    rng.shuffle(words)
    for _ in range(rng.randint(0, 2)):
        d = rng.choice(DECOR)
        if d == "URL":
            d = "https://t.co/" + "".join(rng.choice("abcdefXYZ019") for _ in range(8))
        elif d == "@USER":
            d = "@" + rng.choice(["alice", "newsdesk", "dr_lee", "who"])
        words.insert(rng.randint(0, len(words)), d)
    return " ".join(words)


def split(rng, n, next_id, pos_ratio, mixed_rate, mixed_pos, drift_mixed=False, drift_chatter=0.0):
    """drift_chatter: share of plain negatives that carry a drift hashtag."""
    rows = []
    for _ in range(n):
        if rng.random() < mixed_rate:
            pos = rng.random() < mixed_pos
            text = tweet(rng, 2, 2, drift=drift_mixed)
        else:
            pos = rng.random() < pos_ratio
            strong, weak = rng.randint(2, 3), int(rng.random() < 0.3)
            if pos:
                text = tweet(rng, strong, weak)
            else:
                text = tweet(rng, weak, strong, drift=rng.random() < drift_chatter)
        rows.append((str(next_id), text, "INFORMATIVE" if pos else "UNINFORMATIVE"))
        next_id += rng.randint(1, 97)
    return rows, next_id


def write(path, rows, labeled):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("Id\tText\tLabel\n" if labeled else "Id\tText\n")
        for i, text, label in rows:
            f.write(f"{i}\t{text}\t{label}\n" if labeled else f"{i}\t{text}\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "fixtures" / "synthetic")
    ap.add_argument("--seed", type=int, default=2020)
    ap.add_argument("--train", type=int, default=1000)
    ap.add_argument("--dev", type=int, default=400)
    ap.add_argument("--test", type=int, default=600)
    ap.add_argument("--pool-pos", type=float, default=0.25)
    ap.add_argument("--mixed", type=float, default=0.06)
    ap.add_argument("--mixed-pos", type=float, default=0.5)
    ap.add_argument("--drift-chatter", type=float, default=0.5)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    next_id = 1241000000000000000
    train, next_id = split(rng, args.train, next_id, 0.47, args.mixed, args.mixed_pos)
    dev, next_id = split(rng, args.dev, next_id, 0.47, args.mixed, args.mixed_pos, drift_mixed=True)
    test, _ = split(rng, args.test, next_id, args.pool_pos, args.mixed, args.mixed_pos, drift_mixed=True,
                    drift_chatter=args.drift_chatter)
    write(args.out / "train.tsv", train, True)
    write(args.out / "dev.tsv", dev, True)
    write(args.out / "test.tsv", test, False)


if __name__ == "__main__":
    main()
