"""Regenerates the CLI fixtures and their golden scores.

The scores are computed here from the textbook definitions, independently of
the C++ code, and checked by test_cli.
"""
import math
import random
from datetime import datetime, timedelta
from pathlib import Path

HERE = Path(__file__).resolve().parent


def write(name, header, rows):
    with open(HERE / name, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(str(v) for v in r) + "\n")


def series():
    rng = random.Random(7)
    t0 = datetime(2012, 1, 1, 1, 0)
    level, rows = 0.4, []
    for i in range(600):
        level = min(1.0, max(0.0, 0.9 * level + 0.05 + rng.gauss(0.0, 0.08)))
        rows.append(((t0 + timedelta(hours=i)).strftime("%Y-%m-%d %H:%M"), round(level, 6)))
    write("series_small.csv", ["timestamp", "power"], rows)


def pinball(alpha, q, y):
    u = y - q
    return alpha * u if u >= 0 else (alpha - 1.0) * u


def crps_from_quantiles(levels, values, y):
    return 2.0 * sum(pinball(a, q, y) for a, q in zip(levels, values)) / len(levels)


def energy(draws, y):
    s = len(draws)
    dist = lambda a, b: math.sqrt(sum((p - q) ** 2 for p, q in zip(a, b)))
    to_obs = sum(dist(x, y) for x in draws) / s
    pair = sum(dist(a, b) for a in draws for b in draws) / (s * s)
    return to_obs - 0.5 * pair


def variogram(draws, y, p=0.5):
    d, total = len(y), 0.0
    for i in range(d):
        for j in range(d):
            expected = sum(abs(x[i] - x[j]) ** p for x in draws) / len(draws)
            total += (abs(y[i] - y[j]) ** p - expected) ** 2
    return total


def worked_examples():
    rng = random.Random(11)
    golden = []
    times = [1325379600 + 3600 * k for k in range(5)]

    levels = [0.1, 0.5, 0.9]
    truth = [round(rng.uniform(0.0, 1.0), 4) for _ in times]
    quant = []
    for _ in times:
        c = rng.uniform(0.2, 0.8)
        quant.append([round(c - 0.15, 4), round(c, 4), round(c + 0.15, 4)])
    write("eval_truth_1d.csv", ["time", "value"], zip(times, truth))
    write("eval_quantiles.csv", ["time", "alpha", "value"],
          [(t, a, q[i]) for t, q in zip(times, quant) for i, a in enumerate(levels)])
    crps = sum(crps_from_quantiles(levels, q, y) for q, y in zip(quant, truth)) / len(times)
    golden.append(("crps_quantiles", "crps", 100.0 * crps))
    for i, a in enumerate(levels):
        rel = sum(1.0 for q, y in zip(quant, truth) if y <= q[i]) / len(times)
        golden.append(("crps_quantiles", "reliability@" + repr(a), rel))

    lower = [q[0] for q in quant]
    upper = [q[2] for q in quant]
    write("eval_interval.csv", ["time", "lower", "upper"], zip(times, lower, upper))
    golden.append(("interval", "pi_width", 100.0 * sum(u - l for l, u in zip(lower, upper)) / len(times)))
    golden.append(("interval", "coverage",
                   sum(1.0 for l, u, y in zip(lower, upper, truth) if l <= y <= u) / len(times)))

    d, s = 3, 6
    obs = [[round(rng.uniform(0, 1), 4) for _ in range(d)] for _ in times]
    scen = [[[round(rng.uniform(0, 1), 4) for _ in range(d)] for _ in range(s)] for _ in times]
    write("eval_truth_3d.csv", ["time", "dim", "value"],
          [(t, k, o[k]) for t, o in zip(times, obs) for k in range(d)])
    write("eval_scenarios.csv", ["time", "scenario_id", "dim", "value"],
          [(t, j, k, sc[j][k]) for t, sc in zip(times, scen) for j in range(s) for k in range(d)])
    marg = 0.0
    for sc, o in zip(scen, obs):
        marg += sum(energy([[x[k]] for x in sc], [o[k]]) for k in range(d)) / d
    n = len(times)
    golden.append(("scenarios", "crps", 100.0 * marg / n))
    golden.append(("scenarios", "es", 100.0 * sum(energy(sc, o) for sc, o in zip(scen, obs)) / n))
    golden.append(("scenarios", "vs", sum(variogram(sc, o) for sc, o in zip(scen, obs)) / n))
    write("golden_scores.csv", ["example", "metric", "value"], [(e, m, repr(v)) for e, m, v in golden])


if __name__ == "__main__":
    series()
    worked_examples()
