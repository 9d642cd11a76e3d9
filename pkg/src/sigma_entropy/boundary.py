"""Nearest-neighbour random walks on free groups and their boundary.

The boundary of ``F_k`` is the space of infinite reduced words; the walk's
harmonic measure ``nu`` is the law of the limiting ray.  Truncating rays at
depth ``L`` turns ``(boundary, nu)`` into a finite space whose atoms are the
reduced words of length ``L`` (cylinders), on which every quantity of interest
is exact as long as the group elements involved have length at most ``L``:

* the Radon-Nikodym cocycle ``rho_g = d(g nu)/d nu``;
* the Furstenberg entropy ``sum_g mu(g) int -log rho_{g^-1} d nu``;
* the geometric convolution average ``eta_mu = sum_j 2^-j mu^{*j}``;
* averaged entropies of partitions of the cylinder space.

Letters are nonzero integers: ``i`` is the i-th generator, ``-i`` its inverse.
They print as ``a, b, c, ...`` and ``A, B, C, ...``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .config import EQ_TOL, PIVOT_TOL
from .entropy import _standard, ent
from .errors import BadStepLaw, DepthExceeded, InsufficientSamples, SpaceMismatch
from .measure_core import Density, FiniteSpace, make_space
from .partitions import Partition, cond_exp, from_labels, trivial_partition

Word = tuple

# --------------------------------------------------------------------------
# words


def letter_name(x: int) -> str:
    c = chr(ord("a") + abs(x) - 1)
    return c if x > 0 else c.upper()


def parse_letter(c: str) -> int:
    if len(c) != 1 or not c.isalpha():
        raise ValueError(f"bad letter {c!r}")
    i = ord(c.lower()) - ord("a") + 1
    return i if c.islower() else -i


def word_name(w: Word) -> str:
    return "".join(letter_name(x) for x in w) or "e"


def parse_word(s) -> Word:
    """Accept a tuple of letters, or a string like ``"aB"`` (``"e"`` = identity)."""
    if isinstance(s, str):
        if s in ("", "e"):
            return ()
        return reduce_word(tuple(parse_letter(c) for c in s))
    return reduce_word(tuple(int(x) for x in s))


def reduce_word(w: Iterable[int]) -> Word:
    out: list = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def inverse(w: Word) -> Word:
    return tuple(-x for x in reversed(w))


def multiply(*words: Word) -> Word:
    return reduce_word(x for w in words for x in w)


def common_prefix(u: Word, v: Word) -> int:
    n = 0
    for a, b in zip(u, v):
        if a != b:
            break
        n += 1
    return n


def all_letters(k: int) -> list:
    return [i for i in range(1, k + 1)] + [-i for i in range(1, k + 1)]


def reduced_words(k: int, length: int) -> list:
    """All reduced words of the given length in lexicographic letter order."""
    letters = all_letters(k)
    words = [()]
    for _ in range(length):
        words = [w + (x,) for w in words for x in letters if not (w and w[-1] == -x)]
    return words


# --------------------------------------------------------------------------
# configuration and harmonic measure


@dataclass(frozen=True)
class WalkConfig:
    """Walk on ``F_k`` with nearest-neighbour step law ``mu``.

    ``mu`` maps letters (ints or names) to probabilities; ``None`` means the
    uniform law ``1/(2k)``.  ``L`` is the cylinder depth, ``K`` the number of
    convolution layers kept in ``eta_mu``.
    """

    k: int = 2
    mu: Mapping | None = None
    L: int = 6
    K: int = 4
    seed: int = 12345
    samples: int = 1_000_000
    max_depth: int = 10
    burn_in: int = 32
    stable_steps: int = 16
    streams: int = 8
    threads: int = 1

    def __post_init__(self):
        if self.k < 2:
            raise BadStepLaw(f"free group rank must be >= 2, got {self.k}")
        if self.L < 1:
            raise DepthExceeded(f"cylinder depth must be >= 1, got {self.L}")
        if self.K < 1:
            raise BadStepLaw(f"eta truncation must be >= 1, got {self.K}")
        law = step_law(self)
        object.__setattr__(self, "_law", law)

    @property
    def law(self) -> dict:
        return self._law

    @property
    def uniform(self) -> bool:
        return self.mu is None or all(abs(p - 1 / (2 * self.k)) <= EQ_TOL
                                      for p in self._law.values())

    def with_depth(self, L: int) -> "WalkConfig":
        return replace(self, L=L)


def step_law(cfg: WalkConfig) -> dict:
    letters = all_letters(cfg.k)
    if cfg.mu is None or cfg.mu == "uniform":
        return {x: 1.0 / (2 * cfg.k) for x in letters}
    law = {}
    for key, p in dict(cfg.mu).items():
        x = parse_letter(key) if isinstance(key, str) else int(key)
        if x not in letters:
            raise BadStepLaw(f"letter {key!r} is not a generator of F_{cfg.k}")
        law[x] = float(p)
    if set(law) != set(letters):
        missing = [letter_name(x) for x in letters if x not in law]
        raise BadStepLaw(f"step law misses letters {missing}")
    if any(p <= 0 for p in law.values()):
        raise BadStepLaw("step law must put positive mass on every letter")
    if abs(sum(law.values()) - 1.0) > EQ_TOL:
        raise BadStepLaw(f"step law sums to {sum(law.values())!r}")
    return {x: law[x] for x in letters}


def hitting_probabilities(law: Mapping[int, float], tol: float = 1e-12,
                          max_iter: int = 100_000) -> dict:
    """``F(x) = P_e(walk ever visits x)`` for each letter ``x``.

    Solves ``F(x) = mu(x) + sum_{y != x} mu(y) F(y^-1) F(x)`` by monotone
    fixed-point iteration from zero, which converges to the minimal (correct)
    solution.
    """
    letters = list(law)
    F = {x: 0.0 for x in letters}
    for _ in range(max_iter):
        new = {}
        for x in letters:
            back = sum(law[y] * F[-y] for y in letters if y != x)
            new[x] = law[x] / (1.0 - back)
        delta = max(abs(new[x] - F[x]) for x in letters)
        F = new
        if delta < tol:
            return F
    raise BadStepLaw("hitting probabilities did not converge")


def first_letter_law(F: Mapping[int, float]) -> dict:
    """``nu_1(x)``: probability that the limiting ray starts with ``x``.

    From ``nu_1(x) = F(x) (1 - nu_1(x^-1))`` for both ``x`` and ``x^-1``.
    """
    return {x: F[x] * (1 - F[-x]) / (1 - F[x] * F[-x]) for x in F}


@dataclass(frozen=True, eq=False)
class CylinderSpace:
    """Depth-``L`` cylinders of the boundary as a :class:`FiniteSpace`."""

    cfg: WalkConfig
    words: tuple
    space: FiniteSpace
    hit: dict
    nu1: dict

    @property
    def k(self) -> int:
        return self.cfg.k

    @property
    def L(self) -> int:
        return self.cfg.L

    @cached_property
    def index(self) -> dict:
        return {w: i for i, w in enumerate(self.words)}

    def cylinder_mass(self, w: Word) -> float:
        """``nu([w])`` for a nonempty reduced word of any length."""
        if not w:
            return 1.0
        return math.prod(self.hit[x] for x in w[:-1]) * self.nu1[w[-1]]

    def prefix_labels(self, depth: int) -> np.ndarray:
        """Index of each atom's length-``depth`` prefix among depth-level words."""
        if depth > self.L:
            raise DepthExceeded(f"depth {depth} > L = {self.L}")
        coarse = {w: i for i, w in enumerate(reduced_words(self.k, depth))}
        return np.array([coarse[w[:depth]] for w in self.words], dtype=np.intp)

    def prefix_partition(self, depth: int) -> Partition:
        """Partition by the first ``depth`` letters (depth 0 is trivial)."""
        if depth == 0:
            return trivial_partition(self.space)
        return from_labels(self.space, self.prefix_labels(depth))

    def lift(self, A: Partition, deeper: "CylinderSpace") -> Partition:
        """Pull a partition at this depth back to ``deeper`` via prefixes."""
        if deeper.L < self.L:
            raise DepthExceeded("can only lift to a deeper cylinder space")
        labels = [A.block_of[self.index[w[: self.L]]] for w in deeper.words]
        return from_labels(deeper.space, labels)

    def lift_values(self, values, deeper: "CylinderSpace") -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return np.array([values[self.index[w[: self.L]]] for w in deeper.words])


def harmonic_cylinder_space(cfg: WalkConfig) -> CylinderSpace:
    if cfg.L > cfg.max_depth:
        raise DepthExceeded(f"L = {cfg.L} exceeds max_depth = {cfg.max_depth}")
    law = cfg.law
    if cfg.uniform:
        q = 1.0 / (2 * cfg.k - 1)
        hit = {x: q for x in law}
        nu1 = {x: 1.0 / (2 * cfg.k) for x in law}
    else:
        hit = hitting_probabilities(law)
        nu1 = first_letter_law(hit)
    words = tuple(reduced_words(cfg.k, cfg.L))
    masses = [math.prod(hit[x] for x in w[:-1]) * nu1[w[-1]] for w in words]
    space = make_space([word_name(w) for w in words], masses)
    return CylinderSpace(cfg, words, space, hit, nu1)


# --------------------------------------------------------------------------
# Radon-Nikodym cocycle


def _rn_horofunction(k: int, g: Word, prefix: Word) -> float:
    """Uniform walk: ``(2k-1)^(2 |common prefix(g, b)| - |g|)``."""
    return float((2 * k - 1) ** (2 * common_prefix(g, prefix) - len(g)))


def _rn_ratio(cs: CylinderSpace, g: Word, w: Word) -> float:
    """``nu(g^-1 [w]) / nu([w])`` for a cylinder ``[w]`` with ``|w| >= |g|``.

    The harmonic measure of a nearest-neighbour walk is Markov along the ray,
    so this ratio is constant on ``[w]`` as long as the last letter of ``w``
    survives the cancellation, which ``|w| >= |g|`` guarantees except when
    ``g = w``; then ``g^-1 [w]`` is the set of rays not starting with
    ``w[-1]^-1``.
    """
    u = multiply(inverse(g), w)
    if not u:
        num = 1.0 - cs.nu1[-w[-1]]
    else:
        num = cs.cylinder_mass(u)
    return num / cs.cylinder_mass(w)


def rn_value(cs: CylinderSpace, g: Word, prefix: Word) -> float:
    """``rho_g`` on the cylinder of a ray prefix (needs ``len(prefix) >= |g|``)."""
    if len(prefix) < len(g):
        raise DepthExceeded(f"|g| = {len(g)} needs a prefix of length >= {len(g)}")
    if not g:
        return 1.0
    if cs.cfg.uniform:
        return _rn_horofunction(cs.k, g, prefix)
    return _rn_ratio(cs, g, prefix)


def rn_density(cs: CylinderSpace, g) -> Density:
    """``rho_g = d(g nu)/d nu`` evaluated on every depth-``L`` cylinder."""
    g = parse_word(g)
    if len(g) > cs.L:
        raise DepthExceeded(f"|g| = {len(g)} exceeds cylinder depth L = {cs.L}")
    return Density(cs.space, [rn_value(cs, g, w) for w in cs.words])


def rn_density_by_ratio(cs: CylinderSpace, g) -> Density:
    """Measure-ratio route for ``rho_g``, independent of the closed form."""
    g = parse_word(g)
    if len(g) > cs.L:
        raise DepthExceeded(f"|g| = {len(g)} exceeds cylinder depth L = {cs.L}")
    return Density(cs.space, [_rn_ratio(cs, g, w) if g else 1.0 for w in cs.words])


def rn_density_restricted(cs: CylinderSpace, g) -> Density:
    """Radon-Nikodym derivative of ``g nu`` w.r.t. ``nu`` on the depth-``L``
    sigma-algebra, for any ``|g|`` (up to ``max_depth``).

    Equals ``E_L(rho_g)``: computed exactly at depth ``max(L, |g|)`` and then
    averaged over depth-``L`` cylinders.
    """
    g = parse_word(g)
    if len(g) <= cs.L:
        return rn_density(cs, g)
    if len(g) > cs.cfg.max_depth:
        raise DepthExceeded(f"|g| = {len(g)} exceeds max_depth = {cs.cfg.max_depth}")
    deep = harmonic_cylinder_space(cs.cfg.with_depth(len(g)))
    rho = rn_density(deep, g).values
    labels = np.array([cs.index[w[: cs.L]] for w in deep.words])
    sums = np.bincount(labels, weights=deep.space.masses * rho, minlength=cs.space.size)
    return Density(cs.space, sums / cs.space.masses)


def translate_prefix(g: Word, prefix: Word) -> Word:
    """Known prefix of ``g . b`` for a ray ``b`` starting with ``prefix``.

    At most ``|g|`` letters of the prefix cancel, so the result is exact up to
    length ``len(prefix) - |g|``; callers must not read beyond that.
    """
    return multiply(g, prefix)


def cocycle_defect(cs: CylinderSpace, g1, g2) -> float:
    """``max_b |rho_{g1 g2}(b) - rho_{g1}(b) rho_{g2}(g1^-1 b)|`` over cylinders.

    Needs ``|g1| + |g2| <= L`` so that the translated prefix is long enough.
    """
    g1, g2 = parse_word(g1), parse_word(g2)
    if len(g1) + len(g2) > cs.L:
        raise DepthExceeded("cocycle check needs |g1| + |g2| <= L")
    g12 = multiply(g1, g2)
    worst = 0.0
    g1inv = inverse(g1)
    for w in cs.words:
        moved = translate_prefix(g1inv, w)[: cs.L - len(g1)]
        lhs = rn_value(cs, g12, w)
        rhs = rn_value(cs, g1, w) * rn_value(cs, g2, moved)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1.0))
    return worst


def stationarity_defect(cs: CylinderSpace) -> float:
    """``max |sum_x mu(x) rho_x - 1|``: zero iff ``nu`` is ``mu``-stationary."""
    total = sum(p * rn_density(cs, (x,)).values for x, p in cs.cfg.law.items())
    return float(np.max(np.abs(total - 1.0)))


# --------------------------------------------------------------------------
# convolution powers and eta_mu


def convolution_powers(law: Mapping[int, float], K: int) -> list:
    """``[mu^{*1}, ..., mu^{*K}]`` as dicts from reduced words to mass."""
    layers = []
    cur = {(): 1.0}
    for _ in range(K):
        nxt: dict = defaultdict(float)
        for w, p in cur.items():
            for x, q in law.items():
                nxt[multiply(w, (x,))] += p * q
        cur = dict(sorted(nxt.items(), key=lambda kv: (len(kv[0]), kv[0])))
        layers.append(cur)
    return layers


@dataclass(frozen=True)
class EtaMeasure:
    """Truncated ``eta_mu``: ``support[i]`` carries mass ``weights[i]``."""

    support: tuple
    weights: np.ndarray
    layers: tuple
    tail_mass: float
    K: int

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def max_length(self) -> int:
        return max(len(g) for g in self.support)

    def items(self):
        return zip(self.support, self.weights)


def eta_mu(cfg: WalkConfig, K: int | None = None) -> EtaMeasure:
    """``sum_{j <= K} 2^-j mu^{*j}`` as an exact finitely supported measure."""
    K = cfg.K if K is None else K
    layers = convolution_powers(cfg.law, K)
    acc: dict = defaultdict(float)
    for j, layer in enumerate(layers, start=1):
        for w, p in layer.items():
            acc[w] += 2.0 ** -j * p
    support = tuple(sorted(acc, key=lambda w: (len(w), w)))
    weights = np.array([acc[w] for w in support])
    return EtaMeasure(support, weights, tuple(layers), 2.0 ** -K, K)


GAMMA = 2.0  # sum_{j >= 1} j 2^-j


def gamma_truncated(K: int) -> float:
    return sum(j * 2.0 ** -j for j in range(1, K + 1))


# --------------------------------------------------------------------------
# Furstenberg entropy


def furstenberg_entropy_exact(cs: CylinderSpace) -> float:
    """``sum_x mu(x) sum_c nu(c) (-log rho_{x^-1}(c))`` over depth-L cylinders."""
    m = cs.space.masses
    total = 0.0
    for x, p in cs.cfg.law.items():
        rho = rn_density(cs, (-x,)).values
        total += p * float(np.dot(m, -np.log(rho)))
    return total


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    stderr: float
    samples: int
    exact: float | None = None
    method: str = "monte_carlo"

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr,
                "exact": self.exact, "method": self.method, "samples": self.samples}


def sample_ray_prefixes(cfg: WalkConfig, n: int, rng: np.random.Generator,
                        depth: int | None = None) -> np.ndarray:
    """Sample length-``depth`` prefixes of limiting rays, shape ``(n, depth)``.

    Each walk runs until its reduced word is longer than ``depth + burn_in``
    and its first ``depth`` letters have been unchanged for ``stable_steps``
    consecutive steps.
    """
    L = cfg.L if depth is None else depth
    letters = np.array(all_letters(cfg.k), dtype=np.int8)
    probs = np.array([cfg.law[int(x)] for x in letters])
    cap = L + cfg.burn_in + 2
    stack = np.zeros((n, cap), dtype=np.int8)
    length = np.zeros(n, dtype=np.int64)
    last_change = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    step = 0
    max_steps = 200 * cap
    while active.size:
        step += 1
        if step > max_steps:
            raise InsufficientSamples("walks failed to stabilize; raise max steps")
        x = letters[rng.choice(letters.size, size=active.size, p=probs)]
        ln = length[active]
        top = stack[active, np.maximum(ln - 1, 0)]
        pop = (ln > 0) & (top == -x)
        # pop: shorten; push: write at position ln
        push_idx = active[~pop]
        stack[push_idx, length[push_idx]] = x[~pop]
        length[active] = np.where(pop, ln - 1, ln + 1)
        touched = np.where(pop, ln - 1, ln) < L
        last_change[active[touched]] = step
        done = (length[active] > L + cfg.burn_in) & (step - last_change[active] >= cfg.stable_steps)
        # a walk at the cap must stop; the prefix is then >= burn_in letters deep
        done |= length[active] >= cap - 1
        active = active[~done]
    return stack[:, :L].astype(np.int64)


def _prefix_codes(cs: CylinderSpace) -> tuple[dict, np.ndarray]:
    # encode letter x as 0..2k-1 and a prefix as a base-2k number
    k = cs.k
    code = {x: i for i, x in enumerate(all_letters(k))}
    table = np.full((2 * k) ** cs.L, -1, dtype=np.int64)
    for idx, w in enumerate(cs.words):
        c = 0
        for x in w:
            c = c * 2 * k + code[x]
        table[c] = idx
    return code, table


def _stream_moments(cfg: WalkConfig, cs: CylinderSpace, table: np.ndarray,
                    logs: np.ndarray, probs: np.ndarray, seed_seq, n: int):
    rng = np.random.default_rng(seed_seq)
    prefixes = sample_ray_prefixes(cfg, n, rng)
    k = cfg.k
    letter_code = np.zeros(2 * k + 1, dtype=np.int64)
    for i, x in enumerate(all_letters(k)):
        letter_code[x + k] = i
    codes = np.zeros(n, dtype=np.int64)
    for j in range(cs.L):
        codes = codes * 2 * k + letter_code[prefixes[:, j] + k]
    atoms = table[codes]
    gi = rng.choice(probs.size, size=n, p=probs)
    y = logs[atoms, gi]
    return float(y.sum()), float(np.square(y).sum())


def furstenberg_entropy_mc(cfg: WalkConfig, samples: int | None = None,
                           seed: int | None = None, streams: int | None = None,
                           threads: int | None = None) -> MonteCarloEstimate:
    """Monte Carlo estimate of the Furstenberg entropy.

    Each sample draws a boundary ray ``b`` (by running the walk) and an
    independent step ``g ~ mu``, and records ``-log rho_{g^-1}(b)``.  Samples
    are split over ``streams`` independent generators spawned from ``seed``;
    the merge is in stream order, so the result depends only on
    ``(seed, streams, samples)`` and not on ``threads``.
    """
    samples = cfg.samples if samples is None else samples
    seed = cfg.seed if seed is None else seed
    streams = cfg.streams if streams is None else streams
    threads = cfg.threads if threads is None else threads
    if samples < 2:
        raise InsufficientSamples("need at least 2 samples for a standard error")
    cs = harmonic_cylinder_space(cfg)
    letters = np.array(all_letters(cfg.k))
    probs = np.array([cfg.law[int(x)] for x in letters])
    # logs[c, i] = -log rho_{x_i^-1}(c)
    logs = np.array([[-math.log(rn_value(cs, (-int(x),), w)) for x in letters]
                     for w in cs.words])
    _, table = _prefix_codes(cs)
    sizes = [samples // streams + (1 if i < samples % streams else 0) for i in range(streams)]
    seqs = np.random.SeedSequence(seed).spawn(streams)
    jobs = [(s, n) for s, n in zip(seqs, sizes) if n > 0]

    def run(job):
        return _stream_moments(cfg, cs, table, logs, probs, *job)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / (samples - 1)
    exact = furstenberg_entropy_exact(harmonic_cylinder_space(cfg.with_depth(1)))
    return MonteCarloEstimate(mean, math.sqrt(var / samples), samples, exact)


def furstenberg_entropy(cfg: WalkConfig, method: str = "exact_cylinder", **kw):
    """Exact cylinder sum (float) or a :class:`MonteCarloEstimate`."""
    if method == "exact_cylinder":
        return furstenberg_entropy_exact(harmonic_cylinder_space(cfg))
    if method == "monte_carlo":
        return furstenberg_entropy_mc(cfg, **kw)
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# averaged entropy and the Furstenberg identity


def _check_eta_depth(cs: CylinderSpace, eta: EtaMeasure) -> None:
    if eta.max_length > cs.L:
        raise DepthExceeded(f"eta support reaches length {eta.max_length} > L = {cs.L}")


@dataclass(frozen=True)
class IdentityReport:
    h: float
    gamma: float
    gamma_truncated: float
    layers: tuple  # (j, sum mu^{*j}(g) Ent(rho_g), j*h, ok)
    lhs: float
    rhs: float
    ok: bool

    def as_dict(self) -> dict:
        return {"h": self.h, "gamma": self.gamma, "gamma_truncated": self.gamma_truncated,
                "layers": [{"j": j, "layer": v, "expected": e, "ok": ok}
                           for j, v, e, ok in self.layers],
                "lhs": self.lhs, "rhs": self.rhs, "ok": self.ok}


def entropy_identity_check(cfg: WalkConfig, tol: float = 1e-9) -> IdentityReport:
    """Layer-by-layer check of ``h gamma = int Ent(rho_g) d eta_mu``.

    For each ``j <= K``: ``sum_g mu^{*j}(g) Ent(rho_g) = j h``; summing with
    weights ``2^-j`` gives ``h sum_{j<=K} j 2^-j`` on the left and the
    truncated eta integral on the right, so truncation adds no error.
    """
    cs = harmonic_cylinder_space(cfg)
    eta = eta_mu(cfg)
    _check_eta_depth(cs, eta)
    h = furstenberg_entropy_exact(cs)
    std = _standard()
    ents = {}
    rows = []
    for j, layer in enumerate(eta.layers, start=1):
        val = 0.0
        for g, p in layer.items():
            if g not in ents:
                ents[g] = ent(std, rn_density(cs, g))
            val += p * ents[g]
        rows.append((j, val, j * h, abs(val - j * h) <= tol))
    rhs = sum(w * ents[g] for g, w in eta.items())
    gk = gamma_truncated(eta.K)
    lhs = h * gk
    ok = all(r[3] for r in rows) and abs(lhs - rhs) <= tol
    return IdentityReport(h, GAMMA, gk, tuple(rows), lhs, rhs, ok)


def averaged_entropy(cs: CylinderSpace, A: Partition, eta: EtaMeasure | None = None) -> float:
    """``h_eta(A) = sum_g eta(g) Ent(E_A(rho_g))`` for the truncated eta."""
    eta = eta_mu(cs.cfg) if eta is None else eta
    _check_eta_depth(cs, eta)
    if A.space != cs.space:
        raise SpaceMismatch("partition is not on this cylinder space")
    std = _standard()
    return float(sum(w * ent(std, cond_exp(A, rn_density(cs, g))) for g, w in eta.items()))


def factor_entropy(cfg: WalkConfig, A: Partition, cs: CylinderSpace | None = None) -> float:
    """Entropy of the factor generated by ``A``: ``h_eta(A) / gamma_K``."""
    cs = harmonic_cylinder_space(cfg) if cs is None else cs
    eta = eta_mu(cfg)
    return averaged_entropy(cs, A, eta) / gamma_truncated(eta.K)


# --------------------------------------------------------------------------
# kernel conditions


@dataclass(frozen=True)
class KernelReport:
    n_kernels: int
    atoms: int
    rank: int
    dense: bool
    bounded: bool
    max_lambda_ratio: float
    entropy_integral: float

    @property
    def ok(self) -> bool:
        return self.dense and self.bounded

    def as_dict(self) -> dict:
        return {"n_kernels": self.n_kernels, "atoms": self.atoms, "rank": self.rank,
                "dense": self.dense, "bounded": self.bounded,
                "max_lambda_ratio": self.max_lambda_ratio,
                "entropy_integral": self.entropy_integral}


def matrix_rank(rows: np.ndarray, tol: float = PIVOT_TOL) -> int:
    """Rank by Gaussian elimination with partial pivoting."""
    a = np.array(rows, dtype=float)
    n_rows, n_cols = a.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        piv = rank + int(np.argmax(np.abs(a[rank:, col])))
        if abs(a[piv, col]) <= tol:
            continue
        a[[rank, piv]] = a[[piv, rank]]
        a[rank] /= a[rank, col]
        below = a[rank + 1:, col].copy()
        a[rank + 1:] -= np.outer(below, a[rank])
        rank += 1
    return rank


def kernel_condition_check(cfg: WalkConfig) -> KernelReport:
    """Boundedness and density of the kernel ``g -> rho_g`` on cylinders.

    Boundedness: each ``rho_g`` takes values in ``[lambda_g^-1, lambda_g]``
    with ``lambda_g = (2k-1)^|g|``.  Density: on a finite space the image of
    ``psi -> sum psi(g) eta(g) rho_g`` is everything iff the ``rho_g`` span a
    space of dimension equal to the number of atoms.  Elements longer than
    ``L`` enter through their depth-``L`` restriction
    (:func:`rn_density_restricted`).
    """
    cs = harmonic_cylinder_space(cfg)
    eta = eta_mu(cfg)
    std = _standard()
    rows, worst, ent_int = [], 0.0, 0.0
    bounded = True
    for g, w in eta.items():
        rho = rn_density_restricted(cs, g).values
        rows.append(rho)
        lam_g = float((2 * cfg.k - 1) ** len(g))
        observed = max(rho.max(), 1.0 / rho.min())
        worst = max(worst, observed / lam_g)
        if cfg.uniform and observed > lam_g * (1 + EQ_TOL):
            bounded = False
        if not np.isfinite(observed):
            bounded = False
        ent_int += w * ent(std, Density(cs.space, rho))
    rank = matrix_rank(np.array(rows))
    return KernelReport(len(rows), cs.space.size, rank, rank == cs.space.size,
                        bounded, worst, ent_int)


# --------------------------------------------------------------------------
# translating partitions


def translate_partition(cs: CylinderSpace, g, A: Partition) -> tuple[CylinderSpace, Partition]:
    """``gA`` as a partition of the depth ``L + |g|`` cylinder space.

    A cylinder ``c'`` lies in ``gS`` iff ``g^-1 c' ∈ S``; the first ``L``
    letters of ``g^-1 c'`` are determined by the first ``L + |g|`` letters of
    ``c'``, which is why the depth grows.
    """
    g = parse_word(g)
    depth = cs.L + len(g)
    if depth > cs.cfg.max_depth:
        raise DepthExceeded(f"translation needs depth {depth} > max_depth {cs.cfg.max_depth}")
    deep = harmonic_cylinder_space(cs.cfg.with_depth(depth))
    ginv = inverse(g)
    labels = [A.block_of[cs.index[translate_prefix(ginv, w)[: cs.L]]] for w in deep.words]
    return deep, from_labels(deep.space, labels)


def translate_values(cs: CylinderSpace, g, values, deep: CylinderSpace) -> np.ndarray:
    """``f o g`` on ``deep`` for ``f`` given on the cylinders of ``cs``."""
    g = parse_word(g)
    if deep.L < cs.L + len(g):
        raise DepthExceeded("target space too shallow for f o g")
    values = np.asarray(values, dtype=float)
    return np.array([values[cs.index[translate_prefix(g, w)[: cs.L]]] for w in deep.words])


def transform_norms(cs: CylinderSpace, g, A: Partition, f) -> tuple[float, float]:
    """Both sides of ``||E_{gA} f||_1 = ||E_A(rho_{g^-1} (f o g))||_1``.

    ``f`` is a function on the depth-``L`` cylinders.  Everything is computed
    on the depth ``L + |g|`` space, deep enough for ``gA`` and ``f o g``.
    """
    g = parse_word(g)
    deep, gA = translate_partition(cs, g, A)
    f_deep = cs.lift_values(f, deep)
    lhs = deep.space.l1_norm(cond_exp(gA, f_deep))
    A_deep = cs.lift(A, deep)
    rho = rn_density(deep, inverse(g)).values
    f_g = translate_values(cs, g, f, deep)
    rhs = deep.space.l1_norm(cond_exp(A_deep, rho * f_g))
    return lhs, rhs


# --------------------------------------------------------------------------
# entropy convergence experiments


@dataclass(frozen=True)
class ConvergenceReport:
    h_period: tuple
    h_plus: float
    gaps_to_plus: tuple
    gaps_to_trivial: tuple
    bounds_trivial: tuple
    bounds_plus: tuple
    entropy_to_zero: bool
    entropy_to_plus: bool
    ok: bool
    w_min: float

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in self.__dict__.items()}


def entropy_convergence_experiment(cs: CylinderSpace, seq, eps: float = 1e-12,
                                   slack: float = 1e-9) -> ConvergenceReport:
    """Averaged entropies along a periodic sequence versus strong convergence.

    For each partition ``A_n`` in the period and each ``g`` in the support of
    the truncated ``eta`` (smallest weight ``w_min``), the Pinsker bound gives

    * ``||1 - E_{A_n} rho_g||_1 <= sqrt(2 h_eta(A_n) / w_min)``;
    * ``||E_{A+} rho_g - E_{A_n} rho_g||_1 <= sqrt(2 (h_eta(A+) - h_eta(A_n)) / w_min)``.

    Both are checked.  ``entropy_to_zero`` / ``entropy_to_plus`` record
    whether the period's entropies sit at 0 / at ``h_eta(A+)`` within ``eps``;
    when they do the bounds force the corresponding gaps to vanish.
    """
    from .kudo import kudo_limits

    eta = eta_mu(cs.cfg)
    _check_eta_depth(cs, eta)
    lim = kudo_limits(seq)
    rhos = [rn_density(cs, g).values for g in eta.support]
    w_min = float(eta.weights.min())
    h_plus = averaged_entropy(cs, lim.A_plus, eta)
    plus_imgs = [cond_exp(lim.A_plus, r) for r in rhos]
    hs, g_plus, g_triv, b_triv, b_plus = [], [], [], [], []
    ok = True
    for A in seq.period:
        h = averaged_entropy(cs, A, eta)
        imgs = [cond_exp(A, r) for r in rhos]
        gp = max(cs.space.l1_norm(p - i) for p, i in zip(plus_imgs, imgs))
        gt = max(cs.space.l1_norm(1.0 - i) for i in imgs)
        bt = math.sqrt(2.0 * max(h, 0.0) / w_min)
        bp = math.sqrt(2.0 * max(h_plus - h, 0.0) / w_min)
        ok &= gt <= bt + slack and gp <= bp + slack
        hs.append(h)
        g_plus.append(gp)
        g_triv.append(gt)
        b_triv.append(bt)
        b_plus.append(bp)
    return ConvergenceReport(tuple(hs), h_plus, tuple(g_plus), tuple(g_triv),
                             tuple(b_triv), tuple(b_plus),
                             all(h <= eps for h in hs),
                             all(abs(h - h_plus) <= eps for h in hs),
                             bool(ok), w_min)


def kernel_mixture(cs: CylinderSpace, psi, eta: EtaMeasure | None = None) -> np.ndarray:
    """``f_psi = sum_g psi(g) eta(g) rho_g``."""
    eta = eta_mu(cs.cfg) if eta is None else eta
    psi = np.asarray(psi, dtype=float)
    out = np.zeros(cs.space.size)
    for (g, w), p in zip(eta.items(), psi):
        out += p * w * rn_density(cs, g).values
    return out


def chained_bound(cs: CylinderSpace, A: Partition, psi,
                  eta: EtaMeasure | None = None) -> tuple[float, float]:
    """``(||int f_psi - E_A f_psi||_1, sqrt(2) ||psi||_inf h_eta(A)^(1/2))``."""
    eta = eta_mu(cs.cfg) if eta is None else eta
    f = kernel_mixture(cs, psi, eta)
    lhs = cs.space.l1_norm(cs.space.integral(f) - cond_exp(A, f))
    h = averaged_entropy(cs, A, eta)
    rhs = math.sqrt(2.0) * float(np.max(np.abs(psi))) * math.sqrt(max(h, 0.0))
    return lhs, rhs
