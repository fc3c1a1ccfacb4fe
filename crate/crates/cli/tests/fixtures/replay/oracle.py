"""Recompute the per-group Pearson correlations of the replay fixture.

Reads testbed.jsonl (features and reference code), cache.jsonl (recorded
responses) and prompt_sizes.csv, scores each response with its own
Levenshtein implementation and writes expected_correlations.csv.
"""
import csv
import hashlib
import json
import statistics
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
VARIABLES = ["prompt_size", "n_whitespaces", "token_count", "nloc",
             "complexity", "n_ast_nodes", "n_ast_errors", "n_ast_levels"]


def point_id(p):
    h = hashlib.sha256()
    for part in (p["commit_id"], p["repo"], p["path"], p["fun_name"], p["code"]):
        h.update(part.encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


def extract(response):
    parts = response.split("```")
    if len(parts) < 2:
        return response
    best = None
    for block in parts[1::2]:
        first, sep, rest = block.partition("\n")
        if sep and (first == "" or (first.strip() and all(c.isascii() and (c.isalnum() or c in "+-_.") for c in first.strip()))):
            block = rest
        if best is None or len(block.encode()) > len(best.encode()):
            best = block
    return best


def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def treatment(prompts):
    if len(prompts) == 2:
        return "T2"
    if prompts[0].startswith("You are given"):
        return None
    if prompts[0].startswith("Complete the following a Python code"):
        return "T1"
    return "control"


def main():
    points = [json.loads(l) for l in open(HERE / "testbed.jsonl")]
    sizes = {(r["point_id"], r["treatment"]): float(r["prompt_size"])
             for r in csv.DictReader(open(HERE / "prompt_sizes.csv"))}
    entries = [json.loads(l) for l in open(HERE / "cache.jsonl")]
    rows = {}
    for p in points:
        pid = point_id(p)
        marker = "def %s(" % p["fun_name"]
        for e in entries:
            t = treatment(e["prompts"])
            if t is None or marker not in e["prompts"][0]:
                continue
            gen = extract(e["response"])
            d = levenshtein(gen, p["code"])
            longest = max(len(gen), len(p["code"]))
            sim = 1.0 if longest == 0 else 1.0 - d / longest
            values = {v: float(p[v]) for v in VARIABLES if v != "prompt_size"}
            values["prompt_size"] = sizes[(pid, t)]
            rows.setdefault(t, []).append((values, float(d), sim))
    out = csv.writer(open(HERE / "expected_correlations.csv", "w", newline=""), lineterminator="\n")
    out.writerow(["group", "variable", "r_distance", "r_similarity"])
    for g in ["control", "T1", "T2"]:
        data = rows[g]
        if len(data) != len(points):
            sys.exit("group %s matched %d of %d points" % (g, len(data), len(points)))
        dist = [r[1] for r in data]
        sim = [r[2] for r in data]
        for v in VARIABLES:
            x = [r[0][v] for r in data]
            out.writerow([g, v, repr(statistics.correlation(x, dist)), repr(statistics.correlation(x, sim))])


if __name__ == "__main__":
    main()
