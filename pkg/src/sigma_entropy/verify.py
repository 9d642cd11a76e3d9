"""Randomized verification batteries.

Each suite draws its instances from ``numpy.random.default_rng(seed)`` and
returns a :class:`SuiteResult`; identical ``(seed, count)`` give identical
results.  A failing instance is kept as a violation record holding its
inputs, both sides of the checked relation and the gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import boundary as bd
from .entropy import (
    builtin_phi,
    ent,
    ent_layer_cake,
    h_phi,
    pck_gap,
    quant_bound_check,
    sandwich_check,
)
from .kudo import (
    PartitionSequence,
    image_sequence,
    is_lower_limit_density,
    is_lower_limit_moments,
    is_upper_limit_density,
    is_upper_limit_moments,
    kudo_limits,
    projection_defect,
    random_sequence,
    semicontinuity_experiment,
    separating_density,
    verify_sigma_membership,
)
from .measure_core import (
    Density,
    abs_moment,
    alpha,
    random_bounded_density,
    random_density,
    random_space,
    uniform_space,
)
from .partitions import (
    Partition,
    all_partition_labels,
    cond_exp,
    discrete_partition,
    from_blocks,
    random_partition,
    refines,
    sign_family,
    trivial_partition,
)


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    total: int = 0
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passed == self.total and not self.violations

    def record(self, ok: bool, **info) -> None:
        self.total += 1
        if ok:
            self.passed += 1
        else:
            self.violations.append(info)

    def as_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "total": self.total,
                "ok": self.ok, "violations": self.violations[:20],
                "details": self.details}


def _density_json(f: Density) -> dict:
    return {"masses": f.space.masses.tolist(), "values": f.values.tolist()}


def _seq_json(seq: PartitionSequence) -> dict:
    return {"masses": seq.space.masses.tolist(),
            "preperiod": [p.block_of.tolist() for p in seq.preperiod],
            "period": [p.block_of.tolist() for p in seq.period]}


# --------------------------------------------------------------------------
# measure-level identities


def suite_abs_moment(seed: int, count: int = 10_000, max_atoms: int = 64,
                  tol: float = 1e-10) -> SuiteResult:
    """``int |f - t| = 2 alpha_f(t) - int f + t`` on random instances."""
    rng = np.random.default_rng(seed)
    res = SuiteResult("abs_moment")
    for _ in range(count):
        sp = random_space(rng, int(rng.integers(1, max_atoms + 1)))
        f = random_density(rng, sp, zero_prob=0.2)
        t = float(rng.uniform(0, 1.2 * f.max))
        lhs = abs_moment(f, t)
        rhs = 2 * alpha(f, t) - sp.integral(f.values) + t
        res.record(abs(lhs - rhs) <= tol, f=_density_json(f), t=t, lhs=lhs, rhs=rhs,
                   gap=abs(lhs - rhs))
    return res


PHIS = ("standard", "power(2)", "power(3)")


def suite_layer_cake(seed: int, count: int = 1000, max_atoms: int = 32,
                     tol: float = 1e-9) -> SuiteResult:
    rng = np.random.default_rng(seed)
    phis = [builtin_phi(n) for n in PHIS]
    res = SuiteResult("layer_cake")
    for i in range(count):
        phi = phis[i % len(phis)]
        sp = random_space(rng, int(rng.integers(1, max_atoms + 1)))
        f = random_density(rng, sp, zero_prob=0.2)
        a, b = ent(phi, f), ent_layer_cake(phi, f)
        res.record(abs(a - b) <= tol, phi=phi.name, f=_density_json(f), lhs=a, rhs=b,
                   gap=abs(a - b))
    return res


SANDWICH_FRACTIONS = (0.2, 0.5, 0.9)


def suite_sandwich(seed: int, count: int = 1000, max_atoms: int = 32,
                   slack: float = 1e-9, sharp: bool = False,
                   fractions=SANDWICH_FRACTIONS) -> SuiteResult:
    """``sharp=False`` checks ``-2 max(Phi(d), d Phi'(d))``; ``sharp=True``
    checks ``d Phi'(d) - Phi(d)``.  ``details`` tallies failures per fraction
    of ``t_o``."""
    rng = np.random.default_rng(seed)
    phis = [builtin_phi(n) for n in PHIS]
    res = SuiteResult("sandwich_sharp" if sharp else "sandwich")
    fails = {f"{frac:g}": 0 for frac in fractions}
    for i in range(count):
        phi = phis[i % len(phis)]
        sp = random_space(rng, int(rng.integers(1, max_atoms + 1)))
        f = random_density(rng, sp, zero_prob=0.2)
        for frac in fractions:
            rep = sandwich_check(phi, f, frac * phi.t_o, slack=slack)
            ok, bound = (rep.sharp_ok, rep.sharp_bound) if sharp else (rep.ok, rep.bound)
            lhs = abs(rep.ent - rep.middle)
            fails[f"{frac:g}"] += not ok
            res.record(ok, phi=phi.name, f=_density_json(f), delta=rep.delta,
                       lhs=lhs, rhs=bound, gap=lhs - bound)
    res.details["failures_by_fraction"] = fails
    return res


def suite_sandwich_sharp(seed: int, count: int = 1000, **kw) -> SuiteResult:
    return suite_sandwich(seed, count, sharp=True, **kw)


def suite_pck(seed: int, count: int = 10_000, max_atoms: int = 32,
              tol: float = 1e-12) -> SuiteResult:
    rng = np.random.default_rng(seed)
    res = SuiteResult("pck")
    for _ in range(count):
        sp = random_space(rng, int(rng.integers(1, max_atoms + 1)))
        f = random_density(rng, sp, zero_prob=0.2)
        try:
            lhs, rhs = pck_gap(f, tol=tol)
            ok = True
        except AssertionError:
            lhs = sp.l1_norm(1 - f.values)
            rhs = math.sqrt(2 * max(ent(builtin_phi("standard"), f), 0))
            ok = False
        res.record(ok, f=_density_json(f), lhs=lhs, rhs=rhs, gap=lhs - rhs)
    lhs, rhs = pck_gap(from_values(uniform_space(2), [2.0, 0.0]))
    res.details["witness"] = {"f": [2.0, 0.0], "lhs": lhs, "rhs": rhs,
                              "expected_rhs": math.sqrt(2 * math.log(2))}
    res.record(lhs == 1.0 and abs(rhs - 1.1774100225154747) <= 1e-12,
               witness=True, lhs=lhs, rhs=rhs, gap=lhs - rhs)
    return res


def from_values(space, values) -> Density:
    return Density(space, np.asarray(values, dtype=float))


def suite_dominance(seed: int, count: int = 1000, max_atoms: int = 16,
                      tol: float = 1e-12) -> SuiteResult:
    """Conditioning never increases the survival integral."""
    rng = np.random.default_rng(seed)
    res = SuiteResult("dominance")
    for _ in range(count):
        sp = random_space(rng, int(rng.integers(1, max_atoms + 1)))
        f = random_density(rng, sp, zero_prob=0.2)
        A = random_partition(rng, sp)
        g = cond_exp(A, f)
        ts = np.concatenate(([0.0], f.values, g.values, rng.uniform(0, f.max, 4)))
        gaps = [alpha(g, t) - alpha(f, t) for t in ts]
        res.record(max(gaps) <= tol, f=_density_json(f), blocks=A.block_of.tolist(),
                   gap=max(gaps))
    return res


# --------------------------------------------------------------------------
# Kudo limits: brute-force lattice oracle


@lru_cache(maxsize=None)
def _lattice_tables(n: int):
    """All partitions of n atoms plus a stacked block-indicator matrix."""
    labels = all_partition_labels(n)
    rows, owner = [], []
    for pi, lab in enumerate(labels):
        for b in range(int(lab.max()) + 1):
            rows.append(lab == b)
            owner.append(pi)
    ind = np.array(rows, dtype=float)
    owner = np.array(owner)
    starts = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
    return labels, ind, starts


def lattice_norms(space) -> tuple[np.ndarray, np.ndarray]:
    """``||E_P s||_1`` for every partition P (rows) and signed event s (cols)."""
    labels, ind, starts = _lattice_tables(space.size)
    fam = sign_family(space.size)
    per_block = np.abs((ind * space.masses) @ fam.T)
    return labels, np.add.reduceat(per_block, starts, axis=0)


def lattice_oracle(seq: PartitionSequence, tol: float = 1e-12) -> dict:
    """Minimum of the upper-limit set and maximum of the lower-limit set,
    found by testing every partition of the space against the norm
    definitions.  Independent of the join/meet formulas."""
    labels, norms = lattice_norms(seq.space)
    rec_rows = [int(np.flatnonzero((labels == P.block_of).all(axis=1))[0]) for P in seq.recurrent]
    upper = norms[rec_rows].max(axis=0)
    lower = norms[rec_rows].min(axis=0)
    upper_members = np.flatnonzero((norms >= upper - tol).all(axis=1))
    lower_members = np.flatnonzero((norms <= lower + tol).all(axis=1))
    parts = [Partition(seq.space, labels[i]) for i in range(len(labels))]

    def extreme(members, smallest):
        cand = [parts[i] for i in members]
        for c in cand:
            # smallest: every member's sigma-algebra contains c's
            if all((refines(m, c) if smallest else refines(c, m)) for m in cand):
                return c
        return None

    return {"upper_min": extreme(upper_members, True),
            "lower_max": extreme(lower_members, False),
            "n_upper": len(upper_members), "n_lower": len(lower_members),
            "n_partitions": len(parts)}


def _random_sequences(seed: int, count: int, max_atoms: int = 8):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        sp = random_space(rng, int(rng.integers(1, max_atoms + 1)))
        out.append(random_sequence(rng, sp))
    return rng, out


def suite_kudo_lattice(seed: int, count: int = 200, max_atoms: int = 8) -> SuiteResult:
    _, seqs = _random_sequences(seed, count, max_atoms)
    res = SuiteResult("kudo_lattice")
    for seq in seqs:
        lim = kudo_limits(seq)
        orc = lattice_oracle(seq)
        ok = (orc["upper_min"] == lim.A_plus and orc["lower_max"] == lim.A_minus
              and verify_sigma_membership(seq, lim.A_plus, "upper")
              and verify_sigma_membership(seq, lim.A_minus, "lower")
              and refines(lim.A_plus, lim.A_minus)
              and lim.converges == (lim.A_plus == lim.A_minus))
        res.record(ok, seq=_seq_json(seq), A_plus=lim.A_plus.block_of.tolist(),
                   oracle_upper=None if orc["upper_min"] is None else orc["upper_min"].block_of.tolist(),
                   A_minus=lim.A_minus.block_of.tolist(),
                   oracle_lower=None if orc["lower_max"] is None else orc["lower_max"].block_of.tolist())
    return res


def _dictionary_ok(seq, C, rhos, side) -> tuple[bool, bool, bool]:
    """(norm verdict, alpha verdict, moment verdict agrees with alpha)."""
    norm = verify_sigma_membership(seq, C, side)
    test = is_upper_limit_density if side == "upper" else is_lower_limit_density
    mtest = is_upper_limit_moments if side == "upper" else is_lower_limit_moments
    pool = list(rhos)
    wit = separating_density(seq, C, side)
    if wit is not None:
        pool.append(wit)
    verdicts, moments_agree = [], True
    for rho in pool:
        _, images = image_sequence(seq, rho)
        target = cond_exp(C, rho)
        v = test(target, images)
        verdicts.append(v)
        moments_agree &= mtest(target, images) == v
    return norm, all(verdicts), moments_agree


def semicontinuity_instances(seed: int, count: int = 200, rhos_per: int = 20,
                             max_atoms: int = 8, lam: float = 4.0):
    """``(seq, rhos, extra_partitions)`` triples shared by the semicontinuity
    and quantitative-bound suites; the sequences are the lattice-suite ones."""
    rng, seqs = _random_sequences(seed, count, max_atoms)
    for seq in seqs:
        sp = seq.space
        rhos = [random_bounded_density(rng, sp, lam) for _ in range(rhos_per)]
        extra = [random_partition(rng, sp), random_partition(rng, sp)]
        yield seq, rhos, extra


def suite_semicontinuity(seed: int, count: int = 200, rhos_per: int = 20,
                         max_atoms: int = 8, slack: float = 1e-10,
                         lam: float = 4.0) -> SuiteResult:
    """Entropy semicontinuity, the Kudo/second-order dictionary (both
    directions) and the moment reformulation, on the lattice-suite sequences."""
    phis = [builtin_phi(n) for n in PHIS]
    res = SuiteResult("semicontinuity")
    dict_checks = 0
    for seq, rhos, extra in semicontinuity_instances(seed, count, rhos_per, max_atoms, lam):
        lim = kudo_limits(seq)
        sp = seq.space
        for rho in rhos:
            for phi in phis:
                rep = semicontinuity_experiment(phi, rho, seq, slack=slack)
                res.record(rep.ok, kind="semicontinuity", phi=phi.name, seq=_seq_json(seq),
                           rho=_density_json(rho), **rep.as_dict())
        candidates = [lim.A_plus, lim.A_minus, trivial_partition(sp), discrete_partition(sp),
                      *seq.recurrent, *extra]
        for C in candidates:
            for side in ("upper", "lower"):
                norm, alpha_v, moments_agree = _dictionary_ok(seq, C, rhos, side)
                dict_checks += 1
                res.record(norm == alpha_v and moments_agree, kind="dictionary", side=side,
                           seq=_seq_json(seq), C=C.block_of.tolist(), norm=norm,
                           alpha=alpha_v, moments_agree=moments_agree)
    res.details["dictionary_checks"] = dict_checks
    return res


def suite_quant_bound(seed: int, count: int = 200, rhos_per: int = 20,
                      max_atoms: int = 8, lam: float = 4.0,
                      slack: float = 1e-9) -> SuiteResult:
    """Quantitative bound with the standard entropy on every semicontinuity
    instance."""
    res = SuiteResult("quant_bound")
    for seq, rhos, _ in semicontinuity_instances(seed, count, rhos_per, max_atoms, lam):
        lim = kudo_limits(seq)
        for rho in rhos:
            rep = quant_bound_check(rho, lim.A_plus, seq.period, slack=slack)
            res.record(rep.ok and rep.lam <= lam, seq=_seq_json(seq), rho=_density_json(rho),
                       lhs=rep.max_gap, rhs=rep.bound, gap=rep.max_gap - rep.bound, lam=rep.lam)
    return res


def suite_projection(seed: int, count: int = 200, max_atoms: int = 8,
                 tol: float = 1e-10) -> SuiteResult:
    rng, seqs = _random_sequences(seed, count, max_atoms)
    res = SuiteResult("projection")
    for seq in seqs:
        phi = rng.normal(size=seq.space.size)
        d = projection_defect(seq, phi)
        res.record(d <= tol, seq=_seq_json(seq), defect=d)
    return res


# --------------------------------------------------------------------------
# boundary suites


def suite_furstenberg(seed: int, samples: int = 1_000_000, tol: float = 1e-12,
                      abs_tol: float = 2e-3, n_se: float = 3.0) -> SuiteResult:
    res = SuiteResult("furstenberg")
    for k, expected in ((2, 0.5 * math.log(3)), (3, 2.0 / 3.0 * math.log(5))):
        for L in (1, 3):
            h = bd.furstenberg_entropy(bd.WalkConfig(k=k, L=L, K=1), "exact_cylinder")
            res.record(abs(h - expected) <= tol, kind="exact", k=k, L=L, lhs=h, rhs=expected,
                       gap=abs(h - expected))
            res.details[f"exact_k{k}_L{L}"] = h
    mc = bd.furstenberg_entropy(bd.WalkConfig(k=2, L=1, K=1, seed=seed), "monte_carlo",
                                samples=samples)
    expected = 0.5 * math.log(3)
    err = abs(mc.estimate - expected)
    res.details["monte_carlo"] = mc.as_dict()
    res.record(err <= n_se * mc.stderr and err <= abs_tol, kind="monte_carlo",
               lhs=mc.estimate, rhs=expected, gap=err, stderr=mc.stderr)
    return res


def suite_entropy_identity(seed: int = 0, k: int = 2, L: int = 6, K: int = 4,
                  tol: float = 1e-9) -> SuiteResult:
    res = SuiteResult("entropy_identity")
    rep = bd.entropy_identity_check(bd.WalkConfig(k=k, L=L, K=K), tol=tol)
    for j, val, expected, ok in rep.layers:
        res.record(ok, layer=j, lhs=val, rhs=expected, gap=abs(val - expected))
    res.record(rep.gamma == 2.0, kind="gamma", lhs=rep.gamma, rhs=2.0)
    res.record(abs(rep.lhs - rep.rhs) <= tol, kind="total", lhs=rep.lhs, rhs=rep.rhs,
               gap=abs(rep.lhs - rep.rhs))
    res.details = rep.as_dict()
    return res


def suite_kernel(seed: int = 0, k: int = 2, depths=(1, 2)) -> SuiteResult:
    res = SuiteResult("kernel")
    for L in depths:
        rep = bd.kernel_condition_check(bd.WalkConfig(k=k, L=L, K=2 * L, max_depth=max(10, 2 * L)))
        res.record(rep.dense, kind="density", L=L, rank=rep.rank, atoms=rep.atoms)
        res.record(rep.bounded and rep.max_lambda_ratio <= 1 + 1e-12, kind="bounded", L=L,
                   ratio=rep.max_lambda_ratio)
        res.details[f"L{L}"] = rep.as_dict()
    return res


def boundary_test_sequences(cs: bd.CylinderSpace, rng: np.random.Generator,
                            n_random: int = 8) -> list:
    sp = cs.space
    first = cs.prefix_partition(1)
    out = [
        PartitionSequence(sp, (), (trivial_partition(sp),)),
        PartitionSequence(sp, (), (first, discrete_partition(sp))),
        PartitionSequence(sp, (), tuple(cs.prefix_partition(d) for d in range(cs.L + 1))),
    ]
    for _ in range(n_random):
        out.append(random_sequence(rng, sp, max_preperiod=1, max_period=3))
    return out


def suite_chained(seed: int, n_psi: int = 100, k: int = 2, L: int = 2, K: int = 2,
                  slack: float = 1e-9) -> SuiteResult:
    """Pinsker-chained bound ``||int f_psi - E_A f_psi|| <= sqrt2 |psi|_inf h_eta(A)^1/2``."""
    rng = np.random.default_rng(seed)
    cfg = bd.WalkConfig(k=k, L=L, K=K)
    cs = bd.harmonic_cylinder_space(cfg)
    eta = bd.eta_mu(cfg)
    res = SuiteResult("chained")
    for si, seq in enumerate(boundary_test_sequences(cs, rng)):
        for A in seq.period:
            for _ in range(n_psi):
                psi = rng.uniform(-1, 1, size=len(eta.support))
                lhs, rhs = bd.chained_bound(cs, A, psi, eta)
                res.record(lhs <= rhs + slack, sequence=si, blocks=A.block_of.tolist(),
                           lhs=lhs, rhs=rhs, gap=lhs - rhs)
        rep = bd.entropy_convergence_experiment(cs, seq)
        res.record(rep.ok, kind="convergence_report", sequence=si)
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "abs_moment": suite_abs_moment,
    "layer_cake": suite_layer_cake,
    "sandwich": suite_sandwich,
    "sandwich_sharp": suite_sandwich_sharp,
    "pck": suite_pck,
    "dominance": suite_dominance,
    "kudo_lattice": suite_kudo_lattice,
    "semicontinuity": suite_semicontinuity,
    "quant_bound": suite_quant_bound,
    "projection": suite_projection,
    "furstenberg": suite_furstenberg,
    "entropy_identity": suite_entropy_identity,
    "kernel": suite_kernel,
    "chained": suite_chained,
}

# suites whose size is set by ``count``
COUNTED = {"abs_moment", "layer_cake", "sandwich", "sandwich_sharp", "pck", "dominance", "kudo_lattice",
           "semicontinuity", "quant_bound", "projection"}


def run_suite(name: str, seed: int, count: int | None = None) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    fn = SUITES[name]
    if count is not None and name in COUNTED:
        return fn(seed, count)
    if count is not None and name == "furstenberg":
        return fn(seed, samples=count)
    return fn(seed)
