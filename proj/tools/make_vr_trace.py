#!/usr/bin/env python3
"""Writes a synthetic VR gaming trace (timestamp_ms,size_bytes) for pattern 4.

Frames at a nominal 60 fps with +-2 ms jitter; frame sizes are lognormal
around a scene-dependent median, where the scene flips between calm and
action phases as a two-state Markov chain.
"""
import argparse
import csv
import math
import random


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="scenarios/traces/vr_game4.csv")
    ap.add_argument("--seconds", type=float, default=60.0)
    ap.add_argument("--fps", type=float, default=60.0)
    ap.add_argument("--seed", type=int, default=4)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    medians = {"calm": 5200.0, "action": 9500.0}
    flip = {"calm": 1 / 240, "action": 1 / 120}  # per-frame switch probability
    scene = "calm"
    period = 1000.0 / args.fps
    last = 0
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["timestamp_ms", "size_bytes"])
        for k in range(int(args.seconds * args.fps)):
            if rng.random() < flip[scene]:
                scene = "action" if scene == "calm" else "calm"
            t = max(last, int(round(k * period + rng.uniform(-2, 2))))
            size = max(1, int(round(medians[scene] * math.exp(0.3 * rng.gauss(0, 1)))))
            w.writerow([t, size])
            last = t


if __name__ == "__main__":
    main()
