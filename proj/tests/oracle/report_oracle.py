#!/usr/bin/env python3
"""Reference renderer for the evaluation report.

Reads one or more score manifests and writes report.txt, report.csv and the
two plot series exactly as the harness should. Written from the report
contract alone: a pair fails when s_adv >= s_corr; margins average
s_corr - s_adv over the correctly ranked pairs and s_adv - s_corr over the
rest; sums run in file order.

usage: report_oracle.py OUT_DIR SCORES.jsonl [SCORES.jsonl ...]
"""
import hashlib
import json
import os
import sys

DOMAIN_RANK = {"animals": 0, "demography": 1, "objects": 2, "overall": 4}


def stats(rows):
    n = len(rows)
    fails = 0
    sc = 0.0
    pa = 0.0
    good = 0.0
    bad = 0.0
    n_good = 0
    n_bad = 0
    for c, a in rows:
        sc += c
        pa += a
        if a >= c:
            fails += 1
            bad += a - c
            n_bad += 1
        else:
            good += c - a
            n_good += 1
    mean_sc = sc / n
    mean_pa = pa / n
    return {
        "n": n,
        "fail": fails / n,
        "sc": mean_sc,
        "pa": mean_pa,
        "delta": mean_sc - mean_pa,
        "good": good / n_good if n_good else None,
        "n_good": n_good,
        "bad": bad / n_bad if n_bad else None,
        "n_bad": n_bad,
    }


def main(out_dir, files):
    groups = {}
    overall = {}
    sources = []
    seeds = []
    for path in files:
        with open(path, "rb") as f:
            blob = f.read()
        sources.append((os.path.basename(path), hashlib.sha256(blob).hexdigest()))
        lines = blob.decode("utf-8").split("\n")
        header = json.loads(lines[0])
        seeds.append(header.get("seed"))
        for line in lines[1:]:
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("status") == "unscored":
                continue
            pair = (rec["s_corr"], rec["s_adv"])
            groups.setdefault(rec["metric"], {}).setdefault(rec["domain"], []).append(pair)
            overall.setdefault(rec["metric"], []).append(pair)

    table = []
    for metric in sorted(groups):
        doms = sorted(groups[metric], key=lambda d: (DOMAIN_RANK.get(d, 3), d))
        for d in doms:
            table.append((metric, d, stats(groups[metric][d])))
        table.append((metric, "overall", stats(overall[metric])))

    seed = seeds[0] if seeds and all(s == seeds[0] for s in seeds) else None
    head = "# schema_version: 1\n# seed: %s\n" % ("none" if seed is None else str(seed))
    for name, digest in sources:
        head += "# source: %s sha256=%s\n" % (name, digest)

    def f4(v):
        return "n/a" if v is None else "%.4f" % v

    def g12(v):
        return "" if v is None else "%.12g" % v

    mw = max([6] + [len(m) for m, _, _ in table])
    widths = [6, 9, 7, 7, 7, 11, 6, 10, 5]

    def line(cells):
        s = cells[0].ljust(mw) + "  " + cells[1].ljust(10)
        for w, c in zip(widths, cells[2:]):
            s += "  " + c.rjust(w)
        return s + "\n"

    txt = head + line(["metric", "domain", "n", "fail_rate", "mean_sc", "mean_pa", "delta",
                       "corr_margin", "n_corr", "inc_margin", "n_inc"])
    csv = head + ("metric,domain,n_pairs,failure_rate,mean_sc,mean_pa,delta,correct_margin,"
                  "n_correct,incorrect_margin,n_incorrect\n")
    fail_csv = head + "metric,domain,failure_rate\n"
    scpa_csv = head + "metric,domain,mean_sc,mean_pa,delta\n"
    for metric, d, s in table:
        txt += line([metric, d, str(s["n"]), "%.4f" % s["fail"], "%.4f" % s["sc"], "%.4f" % s["pa"],
                     "%.4f" % s["delta"], f4(s["good"]), str(s["n_good"]), f4(s["bad"]), str(s["n_bad"])])
        csv += ",".join([metric, d, str(s["n"]), g12(s["fail"]), g12(s["sc"]), g12(s["pa"]),
                         g12(s["delta"]), g12(s["good"]), str(s["n_good"]), g12(s["bad"]),
                         str(s["n_bad"])]) + "\n"
        fail_csv += "%s,%s,%s\n" % (metric, d, g12(s["fail"]))
        scpa_csv += "%s,%s,%s,%s,%s\n" % (metric, d, g12(s["sc"]), g12(s["pa"]), g12(s["delta"]))

    os.makedirs(out_dir, exist_ok=True)
    for name, body in [("report.txt", txt), ("report.csv", csv),
                       ("plot_failure_rates.csv", fail_csv), ("plot_sc_pa.csv", scpa_csv)]:
        with open(os.path.join(out_dir, name), "w", newline="\n") as f:
            f.write(body)


if __name__ == "__main__":
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    main(sys.argv[1], sys.argv[2:])
