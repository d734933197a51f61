"""Acceptance criteria 1-10, each printing one PASS/FAIL line."""
import filecmp
import math
import shutil
import time

import numpy as np
import pytest

from fixlab.classify import ExperimentConfig, Strategy, records_from_dataset, run_experiments
from fixlab.cli import main as cli_main
from fixlab.gaze import Condition, Dataset, Fixation, write_dataset
from fixlab.geometry import PET_GEOMETRY, degrees_to_pixels, density_map
from fixlab.multimatch import MultiMatchConfig, compare
from fixlab.pooling import PoolingStrategy, pool_mask
from fixlab.rqa import RqaConfig, analyze
from fixlab.sparse import Dictionary, SparseCodingConfig, encode, learn_dictionary, objective
from fixlab.stats import (
    in_box_proportion, saccadic_latency, summarize_condition, targets_fixated_proportion,
    welch_t_test,
)
from fixlab.synthetic import make_planted_benchmark

from conftest import make_ann, make_path
from oracles import lasso_oracle, rqa_oracle

WELCH_REF_P = 2.552167494419267e-4   # mpmath t-CDF oracle, a={1,2,3}, b={11,12,13}


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


def test_criterion_01_lasso_oracle(verdict):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        d, l = (int(v) for v in rng.integers(1, 4, size=2))
        atoms = rng.normal(size=(l, d))
        atoms /= np.maximum(1.0, np.linalg.norm(atoms, axis=1, keepdims=True))
        x = rng.normal(size=d)
        lam = float(rng.uniform(0.01, 2.0))
        cfg = SparseCodingConfig(lam, encode_tolerance=1e-13, max_sweeps=200_000)
        c = encode(x, Dictionary(atoms), cfg)
        got = objective(x[None], c[None], atoms, lam)
        worst = max(worst, abs(got - lasso_oracle(x, atoms, lam)))
    elapsed = time.perf_counter() - start
    verdict(1, worst <= 1e-6 and elapsed < 60,
            f"max |objective - oracle| = {worst:.2e} over 200 instances in {elapsed:.1f}s")


def test_criterion_02_dictionary_monotone(verdict):
    worst_rise, worst_norm, runs_short = -math.inf, 0.0, 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(200, 8))
        cfg = SparseCodingConfig(0.3, max_outer_iters=10, seed=seed, max_sweeps=200)
        D, _ = learn_dictionary(X, 16, cfg)
        obj = np.array(D.objectives)
        runs_short += len(obj) != 11
        worst_rise = max(worst_rise, float(np.diff(obj).max()))
        worst_norm = max(worst_norm, float((D.atoms ** 2).sum(axis=1).max()))
    ok = worst_rise <= 1e-9 and worst_norm <= 1 + 1e-9 and runs_short == 0
    verdict(2, ok, f"largest step change {worst_rise:.2e}, max row norm^2 {worst_norm:.9f}, "
                   f"{100 - runs_short}/100 runs did all 10 alternations")


def test_criterion_03_rqa_oracle(verdict):
    rng = np.random.default_rng(3)
    mismatches = 0
    for _ in range(50):
        n = int(rng.integers(2, 9))
        pts = [tuple(p) for p in rng.integers(0, 4, size=(n, 2)).astype(float) * 6]
        L = int(rng.integers(2, 4))
        m = analyze(make_path(pts), RqaConfig(8.0, L))
        mismatches += (m.recurrence, m.determinism, m.laminarity, m.crom) != rqa_oracle(pts, 8.0, L)
    same = analyze(make_path([(5, 5)] * 4), RqaConfig(8.0))
    none = analyze(make_path([(0, 0), (50, 0), (0, 50), (50, 50)]), RqaConfig(8.0))
    boundary = ((same.recurrence, same.determinism, same.laminarity) == (100, 100, 100)
                and (none.recurrence, none.determinism, none.laminarity, none.crom) == (0, 0, 0, 0))
    verdict(3, mismatches == 0 and boundary,
            f"{50 - mismatches}/50 random paths equal the oracle; boundary suite "
            f"{'ok' if boundary else 'broken'}")


def _random_path(rng, subject):
    n = int(rng.integers(2, 10))
    pts = np.column_stack([rng.uniform(0, 1280, n), rng.uniform(0, 1024, n)])
    durs = list(rng.uniform(0.08, 0.6, n))
    return pts, durs


def test_criterion_04_multimatch(verdict):
    rng = np.random.default_rng(4)
    cfg = MultiMatchConfig.for_screen(1280, 1024)
    out_of_range = asym = selfsim = transl = 0.0
    for _ in range(1000):
        pa, da = _random_path(rng, "a")
        pb, db = _random_path(rng, "b")
        a, b = make_path(pa, durations=da), make_path(pb, subject="b", durations=db)
        s_ab, s_ba = compare(a, b, cfg).as_tuple(), compare(b, a, cfg).as_tuple()
        out_of_range = max(out_of_range, max(max(-v, v - 1, 0) for v in s_ab))
        asym = max(asym, max(abs(x - y) for x, y in zip(s_ab, s_ba)))
        selfsim = max(selfsim, max(abs(1 - v) for v in compare(a, a, cfg).as_tuple()))
        shift = rng.uniform(-200, 200, size=2)
        moved = make_path(pb + shift, subject="b", durations=db)
        s_moved = compare(a, moved, cfg).as_tuple()
        transl = max(transl, max(abs(s_ab[k] - s_moved[k]) for k in (0, 1, 2, 4)))
    ok = out_of_range == 0 and asym <= 1e-9 and selfsim <= 1e-9 and transl <= 1e-9
    verdict(4, ok, f"range violation {out_of_range:.1e}, asymmetry {asym:.1e}, "
                   f"self-similarity gap {selfsim:.1e}, translation drift {transl:.1e}")


def test_criterion_05_planted_statistics(verdict):
    two = make_ann([("dog", (10, 10, 50, 50)), ("cat", (100, 10, 150, 50))], image_id="p")
    path = make_path([(20, 20), (190, 90), (120, 30), (5, 95), (50, 50), (30, 30)],
                     image_id="p", onsets=[0.1, 0.35, 0.72, 1.0, 1.3, 1.6])
    checks = {
        "in-box 3 of first 5": in_box_proportion(path, two, 5) == 0.6,
        "targets fixated": targets_fixated_proportion(path, two, 5) == 1.0,
        "latency = planted onset": saccadic_latency(path, two) == 0.1,
    }
    three = make_ann([("dog", (0, 0, 20, 20)), ("cat", (40, 0, 60, 20)),
                      ("cow", (80, 0, 100, 20))], image_id="q")
    late = make_path([(10, 50), (10, 10), (10, 12), (150, 90), (90, 10)], image_id="q",
                     onsets=[0.2, 0.45, 0.7, 0.9, 1.25])
    checks["latency with ceil(T/2)=2"] = saccadic_latency(late, three) == 1.25
    paths = []
    for cond in Condition:
        paths.append(make_path([(20, 20), (190, 90), (120, 30)], image_id="p", condition=cond))
        paths.append(make_path([(10, 50), (10, 10)], image_id="q", condition=cond, subject="s2"))
    ds = Dataset({"p": two, "q": three}, paths)
    fv = summarize_condition(ds, Condition.FREE_VIEWING)
    vs = summarize_condition(ds, Condition.VISUAL_SEARCH)
    checks["identical conditions"] = fv.metrics == vs.metrics and fv.n == vs.n
    failed = [k for k, v in checks.items() if not v]
    verdict(5, not failed, f"{len(checks) - len(failed)}/{len(checks)} planted checks exact"
            + (f"; failed: {failed}" if failed else ""))


def test_criterion_06_welch(verdict):
    same = welch_t_test([0.3, 0.5, 0.9, 1.4], [0.3, 0.5, 0.9, 1.4])
    ref = welch_t_test([1, 2, 3], [11, 12, 13])
    rng = np.random.default_rng(6)
    a = rng.normal(0.0, 1.0, 20)
    sep = welch_t_test(a, a + 10.0)
    ok = (same.t_statistic == 0 and same.p_value == 1.0
          and abs(ref.p_value - WELCH_REF_P) <= 1e-6 and sep.p_value < 1e-6)
    verdict(6, ok, f"identical t={same.t_statistic} p={same.p_value}; reference p="
                   f"{ref.p_value:.10f} (oracle {WELCH_REF_P:.10f}); 10-sigma p={sep.p_value:.2e}")


def test_criterion_07_density_mass(verdict):
    rng = np.random.default_rng(7)
    ann = make_ann([("dog", (0, 0, 10, 10))], width=640, height=480)
    sigma = degrees_to_pixels(PET_GEOMETRY, 2.0)
    margin = 3 * sigma
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 12))
        fixes = [Fixation(float(rng.uniform(margin, 640 - margin)),
                          float(rng.uniform(margin, 480 - margin)), 0.0, 0.2)
                 for _ in range(n)]
        m = density_map(fixes, ann, PET_GEOMETRY, 2.0)
        worst = max(worst, abs(m.values.sum() - n) / n)
    verdict(7, worst <= 0.05, f"max relative mass error {worst:.4f} over 100 sets (limit 0.05)")


def test_criterion_08_pooling(verdict):
    rng = np.random.default_rng(8)
    MAX, AVG = PoolingStrategy.MAX, PoolingStrategy.AVERAGE
    hand = np.array([[0.2, -0.7], [-0.5, 0.1]])
    ok_hand = (np.allclose(pool_mask(hand, [True, True], MAX), [0.5, 0.7])
               and np.allclose(pool_mask(hand, [True, True], AVG), [-0.15, -0.3]))
    perm = mono = ident = True
    for _ in range(200):
        codes = rng.normal(size=(int(rng.integers(1, 10)), 5))
        every = np.ones(len(codes), bool)
        base = pool_mask(codes, every, MAX)
        perm &= np.array_equal(base, pool_mask(codes[rng.permutation(len(codes))], every, MAX))
        more = np.vstack([codes, rng.normal(size=(3, 5))])
        mono &= bool(np.all(pool_mask(more, np.ones(len(more), bool), MAX) >= base))
        c = rng.normal(size=5)
        k = int(rng.integers(1, 8))
        ident &= np.allclose(pool_mask(np.tile(c, (k, 1)), np.ones(k, bool), AVG), c,
                             rtol=1e-12, atol=1e-15)
    verdict(8, ok_hand and perm and mono and ident,
            f"hand example {ok_hand}, max permutation-invariant {perm}, "
            f"max monotone {mono}, average identity {ident}")


def test_criterion_09_end_to_end(verdict):
    start = time.perf_counter()
    bench = make_planted_benchmark(per_class=60, seed=0)
    records = records_from_dataset(bench.dataset.preprocessed(), bench.descriptors)
    cfg = ExperimentConfig(dict_size=64, sparse=SparseCodingConfig(0.15, 10, 1e-4, 0),
                           max_dict_samples=5000)
    plans = [(Strategy.PYRAMID_MAX, None), (Strategy.PYRAMID_AVG, None),
             (Strategy.FIXATION_MAX, Condition.VISUAL_SEARCH),
             (Strategy.FIXATION_MAX, Condition.FREE_VIEWING),
             (Strategy.FIXATION_AVG, Condition.VISUAL_SEARCH)]
    reports = {r.row_name: r for r in run_experiments(records, plans, 5, 0, cfg)}
    elapsed = time.perf_counter() - start
    acc = {k: r.average_accuracy[0] for k, r in reports.items()}
    fix_max = min(acc["fix-max@vs"], acc["fix-max@fv"])
    ok = fix_max >= 0.90 and fix_max >= acc["pyramid-max"] and elapsed < 600
    table = ", ".join(f"{k} {v:.3f}±{reports[k].average_accuracy[1]:.3f}" for k, v in acc.items())
    verdict(9, ok, f"{table}; {len(records)} images, 5 repetitions, {elapsed:.0f}s")


def test_criterion_10_cli_determinism(verdict, tmp_path):
    bench = make_planted_benchmark(per_class=4, classes=("cat", "dog", "cow"), seed=10)
    write_dataset(bench.dataset, tmp_path / "fix.csv", tmp_path / "ann.jsonl")
    from fixlab.descriptors import save_descriptors
    save_descriptors(bench.descriptors, tmp_path / "desc.gdsc")
    data = ["--fixations", str(tmp_path / "fix.csv"), "--annotations", str(tmp_path / "ann.jsonl")]

    def pipeline(out):
        common = ["--seed", "7", "--out", str(out), "--jobs", "2"]
        steps = [["ingest", *data], ["stats", *data], ["density", *data],
                 ["multimatch", *data], ["rqa", *data], ["report", *data],
                 ["dict-learn", "--descriptors", str(tmp_path / "desc.gdsc"), "--dict-size", "40",
                  "--dict-iters", "3"],
                 ["encode", "--descriptors", str(tmp_path / "desc.gdsc"),
                  "--dictionary", str(out / "dictionary.gdic")],
                 ["train", *data, "--codes", str(out / "codes.gdsc")],
                 ["eval", *data, "--descriptors", str(tmp_path / "desc.gdsc"), "--reps", "2",
                  "--dict-size", "40", "--dict-iters", "3"]]
        return [cli_main(step + common) for step in steps]

    run, snap = tmp_path / "run", tmp_path / "snapshot"
    codes_a = pipeline(run)
    shutil.copytree(run, snap)
    shutil.rmtree(run)
    codes_b = pipeline(run)               # fresh directory, same argv
    files = sorted(p.relative_to(snap) for p in snap.rglob("*") if p.is_file())
    diff = [str(f) for f in files if not filecmp.cmp(snap / f, run / f, shallow=False)]
    pipeline(run)                         # rerun over existing outputs
    again = [str(f) for f in files if not filecmp.cmp(snap / f, run / f, shallow=False)]
    ok = set(codes_a) == {0} and codes_a == codes_b and not diff and not again
    verdict(10, ok, f"{len(files)} output files from 10 subcommands; "
                    f"{len(diff) + len(again)} differ across reruns with --seed 7"
            + (f": {diff + again}" if diff or again else ""))
