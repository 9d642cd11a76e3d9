"""Acceptance criteria, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (also collected into the terminal
summary).  Criterion 3 is implemented exactly as stated and is expected to
fail at ``delta = 0.9 t_o``; see the decisions ledger for the analysis.  The
sharp form of that bound is checked separately as ``3b``.
"""

import math
import time

import pytest

from sigma_entropy import boundary as bd
from sigma_entropy.io import render
from sigma_entropy.verify import run_suite

from conftest import ACCEPTANCE

SEED = 7
MC_SEED = 12345

_first_run: dict = {}


def verdict(key: str, ok: bool, msg: str) -> None:
    ACCEPTANCE[key] = (ok, msg)
    print(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {msg}")


def timed(name: str, **kw):
    t0 = time.perf_counter()
    res = _run(name, **kw)
    return res, time.perf_counter() - t0


def _run(name, seed=SEED, count=None):
    res = run_suite(name, seed, count)
    _first_run.setdefault((name, seed, count), render(res.as_dict()))
    return res


def counts(res) -> str:
    return f"{res.passed}/{res.total}"


def test_criterion_01_abs_moment_identity():
    res, dt = timed("abs_moment", count=10_000)
    ok = res.ok and res.total == 10_000 and dt < 5
    verdict("1", ok, f"abs-moment identity {counts(res)} within 1e-10, {dt:.2f}s (< 5s)")
    assert ok, res.violations[:3]


def test_criterion_02_layer_cake():
    res, dt = timed("layer_cake", count=1000)
    ok = res.ok and dt < 5
    verdict("2", ok, f"ent vs layer-cake {counts(res)} within 1e-9 over 3 generators, {dt:.2f}s (< 5s)")
    assert ok, res.violations[:3]


@pytest.mark.xfail(strict=True, reason="stated bound is too small near t_o; analysis in the decisions ledger")
def test_criterion_03_sandwich_stated_bound():
    res, _ = timed("sandwich", count=1000)
    fails = res.details["failures_by_fraction"]
    verdict("3", res.ok, f"sandwich bound -2max(Phi(d), d Phi'(d)) {counts(res)}; "
                         f"failures by d/t_o: {fails}")
    assert res.ok


def test_criterion_03b_sandwich_sharp_bound():
    res, _ = timed("sandwich_sharp", count=1000)
    stated, _ = timed("sandwich", count=1000)
    low = stated.details["failures_by_fraction"]
    ok = res.ok and low["0.2"] == 0 and low["0.5"] == 0
    verdict("3b", ok, f"sharp bound d Phi'(d) - Phi(d) {counts(res)}; stated bound holds at "
                      f"d = 0.2 t_o and 0.5 t_o (failures {low['0.2']}, {low['0.5']})")
    assert ok


def test_criterion_04_pck():
    res, _ = timed("pck", count=10_000)
    w = next(v for k, v in res.details.items() if k.startswith("witness"))
    ok = res.ok and res.total == 10_001 and w["lhs"] == 1.0 and \
        abs(w["rhs"] - math.sqrt(2 * math.log(2))) <= 1e-12
    verdict("4", ok, f"PCK {counts(res)} (incl. witness (2,0): lhs {w['lhs']:g} <= rhs {w['rhs']:.6f})")
    assert ok


def test_criterion_05_kudo_lattice():
    res, dt = timed("kudo_lattice", count=200)
    ok = res.ok and res.total == 200 and dt < 60
    verdict("5", ok, f"A+/A- equal the brute-force lattice extremes on {counts(res)} sequences, {dt:.1f}s (< 60s)")
    assert ok, res.violations[:3]


def test_criterion_06_semicontinuity():
    res, _ = timed("semicontinuity", count=200)
    ok = res.ok
    verdict("6", ok, f"semicontinuity + dictionary (both directions) {counts(res)} checks, "
                     f"{res.details['dictionary_checks']} dictionary instances")
    assert ok, res.violations[:3]


def test_criterion_07_quantitative_bound():
    res, _ = timed("quant_bound", count=200)
    ok = res.ok and res.total == 200 * 20
    verdict("7", ok, f"quantitative bound on every criterion-6 instance, {counts(res)}")
    assert ok, res.violations[:3]


def test_criterion_08_furstenberg():
    res, dt = timed("furstenberg", seed=MC_SEED)
    mc = res.details["monte_carlo"]
    ok = res.ok and dt < 30
    verdict("8", ok, f"exact k=2,3 to 1e-12 and Monte Carlo {mc['estimate']:.6f} +- {mc['stderr']:.6f} "
                     f"(n = {mc['samples']}), {dt:.1f}s (< 30s)")
    assert ok, res.violations


def test_criterion_09_entropy_identity():
    rep = bd.entropy_identity_check(bd.WalkConfig(k=2, L=6, K=4))
    layers_ok = all(row[3] for row in rep.layers) and len(rep.layers) == 4
    ok = rep.ok and layers_ok and rep.gamma == 2.0
    worst = max(abs(v - e) for _, v, e, _ in rep.layers)
    verdict("9", ok, f"layers j <= 4 at L = 6 match j h (worst {worst:.1e}), gamma = {rep.gamma:g}")
    assert ok


def test_criterion_10_kernel_conditions():
    out = []
    ok = True
    for L in (1, 2):
        rep = bd.kernel_condition_check(bd.WalkConfig(k=2, L=L, K=2 * L))
        ok &= rep.dense and rep.bounded and rep.max_lambda_ratio <= 1 + 1e-12
        out.append(f"L={L}: rank {rep.rank}/{rep.atoms}, bounded {rep.bounded}")
    verdict("10", ok, "; ".join(out))
    assert ok


def test_criterion_11_chained_bound():
    res, _ = timed("chained")
    ok = res.ok
    verdict("11", ok, f"chained bound on 100 random psi per partition, {counts(res)} checks")
    assert ok, res.violations[:3]


RERUN = [("abs_moment", SEED, 10_000), ("layer_cake", SEED, 1000), ("sandwich", SEED, 1000),
         ("sandwich_sharp", SEED, 1000), ("pck", SEED, 10_000), ("kudo_lattice", SEED, 200),
         ("semicontinuity", SEED, 200), ("quant_bound", SEED, 200),
         ("furstenberg", MC_SEED, None), ("chained", SEED, None)]


def test_criterion_12_determinism():
    diffs = []
    for name, seed, count in RERUN:
        first = _first_run.get((name, seed, count))
        if first is None:
            first = render(run_suite(name, seed, count).as_dict())
        again = render(run_suite(name, seed, count).as_dict())
        if again != first:
            diffs.append(name)
    ok = not diffs
    verdict("12", ok, f"{len(RERUN)} randomized reports re-run byte-identical"
                      + (f"; differing: {diffs}" if diffs else ""))
    assert ok
