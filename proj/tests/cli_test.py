#!/usr/bin/env python3
"""End-to-end checks of the l2x command-line tool at small scale."""

import hashlib
import json
import os
import subprocess
import sys
import tempfile

import jsonschema

BIN = os.path.abspath(sys.argv[1])
SCHEMA = os.path.abspath(sys.argv[2])
failures = []


def run(*args, env=None, expect=0):
    full_env = dict(os.environ)
    full_env.pop("L2X_THREADS", None)
    full_env.update(env or {})
    p = subprocess.run([BIN, *args], capture_output=True, text=True, env=full_env)
    if p.returncode != expect:
        failures.append(f"{' '.join(args)}: exit {p.returncode}, expected {expect}\n{p.stderr}")
    return p


def check(cond, message):
    if not cond:
        failures.append(message)


def digest(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def small_benchmark(out, *extra):
    return run("benchmark", "--dataset", "orange_skin", "--all", "--seed", "1", "--n-train", "1500",
               "--n-valid", "300", "--epochs", "2", "--batch-size", "100", "--l2x-epochs", "2",
               "--l2x-batch-size", "100", "--out-dir", out, *extra)


with tempfile.TemporaryDirectory() as tmp:
    os.chdir(tmp)

    # generate
    run("generate", "--dataset", "xor", "--n", "10000", "--seed", "7", "--out", "a.csv")
    run("generate", "--dataset", "xor", "--n", "10000", "--seed", "7", "--out", "b.csv")
    check(digest("a.csv") == digest("b.csv"), "generate is not byte-identical on rerun")
    with open("a.csv") as f:
        check(sum(1 for _ in f) == 10001, "generate row count")
    run("generate", "--dataset", "mnist", "--n", "5", "--out", "x.csv", expect=2)
    run("generate", "--dataset", "xor", "--n", "5", "--out", os.path.join(tmp, "missing", "x.csv"), expect=4)
    run("generate", "--dataset", "xor", "--n", "1500", "--seed", "1", "--out", "train.csv")
    run("generate", "--dataset", "xor", "--n", "300", "--seed", "2", "--out", "valid.csv")

    # train-model
    common = ["--epochs", "2", "--batch-size", "100", "--hidden-width", "24"]
    run("train-model", "--data", "train.csv", "--valid", "valid.csv", "--out", "m1.bin", "--curve", "c.csv", *common)
    run("train-model", "--data", "train.csv", "--out", "m2.bin", *common)
    check(digest("m1.bin") == digest("m2.bin"), "train-model checkpoints differ for the same seed")
    with open("c.csv") as f:
        check(f.readline().strip() == "epoch,objective,wall_ms", "curve header")
    p = run("train-model", "--data", "train.csv", "--out", "m0.bin", "--epochs", "0")
    check("warning" in p.stderr, "--epochs 0 does not warn")
    check(os.path.exists("m0.bin"), "--epochs 0 writes no checkpoint")
    run("train-model", "--data", "nope.csv", "--out", "m.bin", expect=4)

    # train-explainer
    ex_args = ["--data", "train.csv", "--model", "m1.bin", "--epochs", "2", "--batch-size", "100",
               "--hidden-width", "24"]
    run("train-explainer", *ex_args, "--out", "e1.bin", "--variational-out", "q1.bin")
    run("train-explainer", *ex_args, "--out", "e2.bin")
    check(digest("e1.bin") == digest("e2.bin"), "train-explainer checkpoints differ for the same seed")
    run("train-explainer", *ex_args[:2], "--model", "missing.bin", "--out", "e.bin", expect=4)

    # non-finite input aborts with the numeric exit code
    with open("train.csv") as f:
        lines = f.readlines()
    lines[1] = "nan" + lines[1][lines[1].index(","):]
    with open("nan.csv", "w") as f:
        f.writelines(lines)
    p = run("train-explainer", "--data", "nan.csv", "--model", "m1.bin", "--out", "n.bin", "--epochs", "1",
            "--batch-size", "100", "--hidden-width", "8", expect=3)
    check("step" in p.stderr, "numeric failure lacks a step index")

    # explain and evaluate
    run("explain", "--data", "valid.csv", "--method", "l2x", "--explainer", "e1.bin", "--out", "l2x.jsonl")
    run("explain", "--data", "valid.csv", "--method", "taylor", "--abs", "--model", "m1.bin", "--out", "t1.jsonl",
        "--threads", "3")
    run("explain", "--data", "valid.csv", "--method", "taylor", "--abs", "--model", "m1.bin", "--out", "t2.jsonl",
        env={"L2X_THREADS": "1"})
    with open("t1.jsonl") as a, open("t2.jsonl") as b:
        strip = lambda ls: [{k: v for k, v in json.loads(l).items() if k != "ns"} for l in ls]
        t1, t2 = strip(a), strip(b)
    check(t1 == t2, "threaded and serial explanations differ")
    check(all(e["method"] == "taylor_abs" for e in t1), "--abs not applied")
    run("explain", "--data", "valid.csv", "--method", "l2x", "--out", "x.jsonl", expect=2)
    run("explain", "--data", "valid.csv", "--method", "lime", "--out", "x.jsonl", expect=2)
    run("explain", "--data", "valid.csv", "--method", "l2x", "--explainer", "e1.bin", "--out", "x.jsonl",
        env={"L2X_THREADS": "0"}, expect=2)
    p = run("evaluate", "--data", "valid.csv", "--explanations", "l2x.jsonl", "--model", "m1.bin",
            "--dataset", "xor", "--out-csv", "mr.csv", "--out-json", "ev.json")
    with open("mr.csv") as f:
        rows = f.read().splitlines()
    check(rows[0] == "method,dataset,median_rank" and len(rows) == 301, "median rank CSV layout")
    with open("ev.json") as f:
        ev = json.load(f)
    check(ev["median_rank"]["optimal"] == 1.5, "optimal median for k=2")
    check(0.0 <= ev["post_hoc_accuracy"] <= 1.0, "post-hoc accuracy range")

    # benchmark from trained artifacts
    run("benchmark", "--dataset", "xor", "--data", "valid.csv", "--model", "m1.bin", "--explainer", "e1.bin",
        "--out-dir", "bm_art")
    run("benchmark", "--dataset", "xor", "--data", "valid.csv", "--out-dir", "bm_bad", expect=2)

    # full pipeline: schema, timing section, determinism of metric files
    schema = json.load(open(SCHEMA))
    small_benchmark("bm1")
    small_benchmark("bm2")
    for d in ("bm1", "bm_art"):
        with open(os.path.join(d, "report.json")) as f:
            report = json.load(f)
        try:
            jsonschema.validate(report, schema)
        except jsonschema.ValidationError as e:
            failures.append(f"{d}/report.json fails the schema: {e.message}")
    run_report = json.load(open("bm1/report.json"))["runs"][0]
    timing = run_report["timing"]
    l2x_timing = [t for t in timing["explain"] if t["method"] == "l2x"]
    check(timing["l2x_train_ms"] is not None and timing["l2x_train_ms"] > 0, "l2x train time missing")
    check(len(l2x_timing) == 1 and l2x_timing[0]["per_sample_ns"]["mean"] > 0, "l2x explain ns missing")
    check(l2x_timing[0]["classifier_evaluations"] == 0, "l2x explanation touched the classifier")
    for f in ("median_ranks.csv", "summary.json", "posthoc.json"):
        check(digest(os.path.join("bm1", f)) == digest(os.path.join("bm2", f)), f"{f} differs across reruns")

    # --config values apply unless a flag overrides them
    with open("cfg.txt", "w") as f:
        f.write("# small run\nn_valid = 200\nn-train=1000\nepochs=1\nl2x-epochs=1\nbatch-size=100\n"
                "l2x-batch-size=100\n")
    run("--config", "cfg.txt", "benchmark", "--dataset", "xor", "--all", "--out-dir", "bm_cfg", "--n-valid", "150")
    cfg_run = json.load(open("bm_cfg/summary.json"))["runs"][0]
    check(cfg_run["n_valid"] == 150 and cfg_run["n_train"] == 1000, "config precedence")
    run("--config", "absent.txt", "oracle", expect=4)

    # oracle
    p = run("oracle", "--joints", "30", "--seed", "5")
    check(json.loads(p.stdout)["passed"] is True, "oracle suite failed")

    run(expect=2)

for f in failures:
    print("FAIL:", f)
print("cli tests:", "passed" if not failures else f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
