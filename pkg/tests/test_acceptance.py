"""End-to-end acceptance criteria, each at its stated tolerance.

Every criterion prints one ``[PASS]`` or ``[FAIL]`` line, whether or not
output capture is on. Seeds are fixed in advance. Run with::

    pytest tests/test_acceptance.py -v
"""

import collections
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from bellaudit import analysis, cli, hpdensity as hp, outcomes
from bellaudit.engine import ExperimentConfig, run_experiment
from bellaudit.models import Direction, SettingTable, build_model

from conftest import xy


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}")
        assert ok, detail
    return emit


def descriptor(name, **params):
    return build_model(name, **params).descriptor


def run(name, trials, seed, mode="parallel", **params):
    return run_experiment(ExperimentConfig(descriptor(name, **params), trials=trials, seed=seed, mode=mode))


def test_1_parity_oracle(report):
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "bellaudit", "oracle"], capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    quads = outcomes.enumerate_quadruples()
    dist = dict(sorted(collections.Counter(outcomes.equality_count(q) for q in quads).items()))
    deltas = {outcomes.delta(q) for q in quads}
    ok = (
        proc.returncode == 0
        and elapsed < 1.0
        and len(set(quads)) == 16
        and dist == {0: 2, 2: 12, 4: 2}
        and deltas == {0, -2}
        and all(outcomes.product_identity_holds(q) for q in quads)
        and "max delta = 0" in proc.stdout and "min delta = -2" in proc.stdout
    )
    report(1, "parity oracle", ok, f"exit {proc.returncode}, distribution {dist}, deltas {sorted(deltas)}, {elapsed:.2f}s")


@pytest.mark.parametrize("name, mode", [("uniform-lhv", "parallel"), ("rotating-lhv", "parallel"),
                                        ("memory-lhv", "sequential")])
def test_2_local_realism_bound(report, name, mode):
    n, seeds = 1_000_000, range(100)
    eps = analysis.concentration_bound(n, 0.99)
    assert eps == pytest.approx(0.012139, abs=1e-6)
    s_hats = np.array([analysis.estimate(run(name, n, seed, mode)).s_hat for seed in seeds])
    within = int((s_hats <= eps).sum())
    report(2, f"local bound, {name}", within >= 99,
           f"{within}/100 runs with s_hat <= {eps:.6f}; max s_hat {s_hats.max():+.5f}")


def test_3_quantum_violation(report):
    table = SettingTable.default()
    pred = analysis.chsh_quantum_prediction(table)
    s_hat = analysis.estimate(run("singlet", 1_000_000, seed=2024)).s_hat
    ok = abs(s_hat - 0.4142) <= 0.01 and abs(pred - (math.sqrt(2) - 1)) <= 1e-12
    report(3, "quantum violation", ok, f"s_hat {s_hat:.5f}, closed form {pred:.15f}")


def test_4_hp_marginal(report):
    angles = [0, 15, 30, 45, 60, 75, 90, 120, 150, 180]
    family = hp.reference_family(1)
    plus = hp.reference_outcomes()
    worst = 0.0
    for ta in angles:
        for tb in angles:
            a, b = xy(ta), xy(tb)
            worst = max(worst, abs(hp.marginal_i(family(a, b), plus, -2) - abs(a.x) * abs(b.x)))
    e1 = Direction(1.0, 0.0, 0.0)
    one = hp.marginal_i(family(e1, e1), plus, -2)
    zero = hp.marginal_i(family(Direction(0.0, 1.0, 0.0), e1), plus, -2)
    ok = worst < 1e-9 and abs(one - 1) < 1e-9 and abs(zero) < 1e-9
    report(4, "HP marginal", ok, f"max error {worst:.2e} over 100 pairs; e1xe1 -> {one:.12f}; a1=0 -> {zero:.1e}")


def test_5_hp_locality_audit(report, tmp_path):
    ref_cfg = tmp_path / "ref.json"
    ref_cfg.write_text(json.dumps({"hp": {"family": "reference"}}))
    uni_cfg = tmp_path / "uni.json"
    uni_cfg.write_text(json.dumps({"hp": {"family": "uniform"}}))
    out = tmp_path / "ref_report.json"
    ref_code = cli.main(["hp-audit", str(ref_cfg), "-o", str(out)])
    uni_code = cli.main(["hp-audit", str(uni_cfg), "-o", str(tmp_path / "uni_report.json")])
    rep = json.loads(out.read_text())
    a1 = [abs(d[0]) for d in rep["a_grid"]]
    b1 = [abs(d[0]) for d in rep["b_grid"]]
    expected = max(a1) * (max(b1) - min(b1))
    got = rep["per_slab_b_dependence"]["-2"]
    ok = ref_code == 20 and abs(got - expected) < 1e-9 and uni_code == 0
    report(5, "HP locality audit", ok,
           f"reference exit {ref_code}, b-dependence at -2 {got:.12f} vs {expected:.12f}; uniform exit {uni_code}")


def test_6_freedom_audit(report):
    pvals = np.array([analysis.freedom_test(run("uniform-lhv", 100_000, seed)).p_value for seed in range(1000)])
    ks = stats.kstest(pvals, "uniform")
    conspiracy = analysis.freedom_test(run("conspiracy", 1_000_000, seed=2024))
    ok = ks.pvalue > 0.001 and conspiracy.p_value < 1e-6
    report(6, "freedom audit", ok,
           f"KS p {ks.pvalue:.4f} over 1000 seeds; conspiracy chi2 {conspiracy.statistic:.0f}, p {conspiracy.p_value:.1e}")


def test_7_no_signaling_audit(report):
    singlet = [analysis.no_signaling_test(run("singlet", 1_000_000, seed), 0.001) for seed in range(100)]
    rejected = sum(r.rejected for r in singlet)
    signaling = analysis.no_signaling_test(run("signaling", 1_000_000, seed=2024, shift=0.1), 0.001)
    ok = rejected == 0 and signaling.rejected and signaling.min_p_value < 1e-6
    report(7, "no-signaling audit", ok,
           f"singlet rejected in {rejected}/100 (smallest p {min(r.min_p_value for r in singlet):.2e}); "
           f"shift 0.1 p {signaling.min_p_value:.1e}")


def test_8_determinism(report, tmp_path):
    cases = [("singlet", "parallel"), ("uniform-lhv", "parallel"), ("conspiracy", "parallel"),
             ("memory-lhv", "sequential")]
    identical = []
    for name, mode in cases:
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps({"model": {"name": name}, "run": {"trials": 300_001, "seed": 11, "mode": mode}}))
        blobs = set()
        for w in (1, 4, 8):
            out = tmp_path / f"{name}-{w}"
            assert cli.main(["simulate", str(cfg), "-o", str(out), "--workers", str(w)]) == 0
            blobs.add((out / cli.LOG_NAME).read_bytes())
        identical.append(len(blobs) == 1)
    report(8, "determinism", all(identical),
           f"byte-identical logs for workers 1/4/8: {dict(zip((c[0] for c in cases), identical))}")


def test_9_memory_loophole_defense(report):
    n = 10_000
    eps = analysis.concentration_bound(n, 0.99)
    means = np.array([analysis.martingale_score_mean(run("memory-lhv", n, seed, "sequential", strength=1.0))
                      for seed in range(1000)])
    frac = float((means > eps).mean())
    report(9, "memory-loophole defense", frac <= 0.01,
           f"{frac:.3%} of 1000 runs above eps {eps:.4f}; mean score {means.mean():+.5f}")
