"""Statistical-query machinery: oracles, the Boolean-to-real query simulator,
pairwise-independence and variance checks, and the adversarial
distinguishing game.

Bound checks throughout use eta_actual, the measured fraction of ordered
input pairs (diagonal included) whose key-averaged joint law is not the
uniform product. The closed-form bound 2/q^(n-1) for modulus-rounding
ensembles is reported alongside, never asserted, since composite moduli
admit inputs that break marginal uniformity before rounding.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import rng
from .families import DomainConvention, lwr_round
from .gadgets import GadgetParams
from .lift import DistributionSpec, label_map
from .relu_ir import as_rational

logger = logging.getLogger(__name__)


class SqError(ValueError):
    pass


# ---------------------------------------------------------------------------
# queries

@dataclass
class SqQuery:
    """A bounded query (input, label) -> [-1, 1] with a tolerance.

    Out-of-range evaluator values are clamped, with one logged warning per
    query object. `batch`, if given, must agree with `evaluator` and map
    (inputs (n, d) float64, labels (n,) float64) to values (n,).
    """

    evaluator: Callable
    tolerance: Fraction
    batch: Callable | None = None
    name: str = "query"
    _warned: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        self.tolerance = as_rational(self.tolerance)
        if not (0 < self.tolerance <= 1):
            raise SqError("tolerance must lie in (0, 1]")

    def value(self, x, y):
        v = self.evaluator(x, y)
        if v < -1 or v > 1:
            if not self._warned:
                logger.warning("query %s returned %s outside [-1, 1]; clamping",
                               self.name, v)
                self._warned = True
            v = min(max(v, -1), 1)
        return v

    def value_batch(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            vals = np.asarray(self.batch(X, Y), dtype=np.float64)
        else:
            vals = np.array(
                [float(self.evaluator(tuple(row), y)) for row, y in zip(X, Y)]
            )
        if (vals < -1).any() or (vals > 1).any():
            if not self._warned:
                logger.warning("query %s returned values outside [-1, 1]; clamping",
                               self.name)
                self._warned = True
            vals = np.clip(vals, -1.0, 1.0)
        return vals


def _corner_iter(d: int, convention: DomainConvention):
    vals = (-1, 1) if convention is DomainConvention.PM_ONE else (0, 1)
    return itertools.product(vals, repeat=d)


def _query_rational(v) -> Fraction:
    """Exact value of a query output; floats convert by their dyadic value."""
    if isinstance(v, float):
        return Fraction(v)
    return as_rational(v)


def exact_expectation(
    query: SqQuery,
    family_eval: Callable,
    d: int,
    convention: DomainConvention = DomainConvention.PM_ONE,
) -> Fraction:
    """Exact uniform-corner average of the query against labels
    family_eval(x); enumerates all 2^d corners, so d <= 20."""
    if d > 20:
        raise SqError(f"d = {d} too large for corner enumeration")
    total = Fraction(0)
    for corner in _corner_iter(d, convention):
        total += _query_rational(query.value(corner, family_eval(corner)))
    return total / 2**d


# ---------------------------------------------------------------------------
# honest oracles

class OracleMode(Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class CubeDomain:
    d: int
    convention: DomainConvention = DomainConvention.PM_ONE


@dataclass(frozen=True)
class RealDomain:
    dist: DistributionSpec
    d: int


@dataclass(frozen=True)
class OracleAnswer:
    value: float | Fraction
    half_width: float        # Hoeffding radius at the stated confidence; 0 if exact
    samples: int
    mode: OracleMode


def honest_oracle(
    query: SqQuery,
    target: Callable,
    domain: CubeDomain | RealDomain,
    mode: OracleMode = OracleMode.EXACT,
    samples: int = 4096,
    seed: int = 0,
    confidence: float = 1e-3,
    label: str = "oracle",
) -> OracleAnswer:
    """An oracle that actually honors its tolerance: EXACT enumerates the
    cube; MONTE_CARLO reports a seeded empirical mean with the two-sided
    Hoeffding half-width at the given confidence."""
    if mode is OracleMode.EXACT:
        if not isinstance(domain, CubeDomain):
            raise SqError("EXACT mode requires a cube domain")
        value = exact_expectation(query, target, domain.d, domain.convention)
        return OracleAnswer(value=value, half_width=0.0, samples=2**domain.d,
                            mode=mode)
    if samples < 1:
        raise SqError("MONTE_CARLO needs at least one sample")
    if isinstance(domain, CubeDomain):
        if domain.convention is DomainConvention.PM_ONE:
            X = rng.signs(seed, label + "-x", samples, domain.d)
        else:
            X = rng.bits(seed, label + "-x", samples, domain.d)
        X = X.astype(np.float64)
    else:
        mags = rng.chunked(
            seed, label + "-mag", samples,
            lambda gen, n: domain.dist.half_draw(gen, (n, domain.d)),
        )
        X = mags * rng.signs(seed, label + "-sign", samples, domain.d)
    vals = [float(query.value(tuple(row), target(tuple(row)))) for row in X]
    mean = float(np.mean(vals))
    half_width = math.sqrt(2.0 * math.log(2.0 / confidence) / samples)
    return OracleAnswer(value=mean, half_width=half_width, samples=samples,
                        mode=mode)


# ---------------------------------------------------------------------------
# the Boolean-to-real query simulator

@dataclass(frozen=True)
class SimulatorConfig:
    batch_m: int
    confidence: Fraction
    query_budget: int

    def __post_init__(self):
        if self.batch_m < 1:
            raise SqError("batch size m must be >= 1")


def batch_size(tau: Fraction, query_budget: int, confidence: Fraction) -> int:
    """m = ceil((8/tau^2) ln(2Q/confidence)): a Hoeffding batch size making
    each simulated answer tau-accurate with failure probability at most
    confidence/Q."""
    tau = as_rational(tau)
    confidence = as_rational(confidence)
    if not (0 < tau <= 1) or not (0 < confidence < 1) or query_budget < 1:
        raise SqError("need 0 < tau <= 1, 0 < confidence < 1, Q >= 1")
    arg = 2 * query_budget / confidence
    return math.ceil(8 / float(tau) ** 2 * math.log(float(arg)))


def simulator_config(tau, query_budget: int, confidence) -> SimulatorConfig:
    return SimulatorConfig(
        batch_m=batch_size(tau, query_budget, confidence),
        confidence=as_rational(confidence),
        query_budget=query_budget,
    )


def corner_query(psi: SqQuery, g: np.ndarray, params: GadgetParams) -> SqQuery:
    """The Boolean query phi(x, y) = psi(x*g, label_map(y, g)) induced by one
    half-sample g, at tolerance tau/2.

    label_map is evaluated exactly from the dyadic values of g and cached per
    distinct label, so the batch path stays vectorized.
    """
    g_exact = tuple(Fraction(float(v)) for v in g)
    g_arr = np.asarray(g, dtype=np.float64)
    cache: dict = {}

    def mapped(y) -> Fraction:
        key = y if not isinstance(y, float) else Fraction(y)
        if key not in cache:
            cache[key] = label_map(key, g_exact, params)
        return cache[key]

    def evaluator(x, y):
        z = tuple(float(gj) * float(xj) for gj, xj in zip(g_arr, x))
        return psi.evaluator(z, mapped(y))

    def batch(X, Y):
        Z = X * g_arr
        Y = np.asarray(Y, dtype=np.float64)
        ytil = np.empty_like(Y)
        for y_val in np.unique(Y):
            ytil[Y == y_val] = float(mapped(float(y_val)))
        return psi.value_batch(Z, ytil) if psi.batch is not None else np.array(
            [float(psi.evaluator(tuple(zrow), yt)) for zrow, yt in zip(Z, ytil)]
        )

    return SqQuery(evaluator=evaluator, tolerance=psi.tolerance / 2,
                   batch=batch, name=psi.name + "-corner")


def simulate_continuous_query(
    psi: SqQuery,
    boolean_sq_oracle: Callable[[SqQuery], float],
    params: GadgetParams,
    config: SimulatorConfig,
    seed: int,
    dist: DistributionSpec | None = None,
) -> float:
    """Answer a real-domain query about the transformed distribution using
    only Boolean corner queries: draw m half-samples g^i and average the
    tolerance-(tau/2) answers to phi(x, y; g^i) = psi(x g^i, label_map(y, g^i)).
    """
    from .lift import GAUSSIAN  # default kept here to avoid import cycles

    if dist is None:
        dist = GAUSSIAN
    d = params.d
    G = rng.chunked(
        seed, "sq-sim-g", config.batch_m,
        lambda gen, n: dist.half_draw(gen, (n, d)),
    )
    total = 0.0
    for i in range(config.batch_m):
        total += float(boolean_sq_oracle(corner_query(psi, G[i], params)))
    return total / config.batch_m


def exact_boolean_oracle(
    family_values: Sequence[Fraction],
    corners: np.ndarray,
) -> Callable[[SqQuery], float]:
    """Zero-tolerance Boolean oracle over an explicit corner table: answers
    with the exact uniform average (float64 of it) via the query batch path."""
    X = np.asarray(corners, dtype=np.float64)
    Y = np.array([float(v) for v in family_values])

    def oracle(query: SqQuery) -> float:
        return float(np.mean(query.value_batch(X, Y)))

    return oracle


def all_pm_corners(d: int) -> np.ndarray:
    """(2^d, d) int8 matrix of {-1,+1} corners in lexicographic order."""
    if d > 20:
        raise SqError(f"d = {d} too large for corner enumeration")
    bits = ((np.arange(2**d)[:, None] >> np.arange(d - 1, -1, -1)) & 1)
    return (1 - 2 * bits).astype(np.int8)


# ---------------------------------------------------------------------------
# ensembles

@dataclass(frozen=True)
class FamilyEnsemble:
    """Explicit function family over a common finite domain, uniform key and
    input laws. value_table[k, i] is the label index of key k on input i."""

    kind: str
    inputs: tuple[tuple[int, ...], ...]
    value_table: np.ndarray              # (num_keys, num_inputs) small ints
    label_values: tuple[Fraction, ...]
    meta: dict

    def __post_init__(self):
        if self.value_table.ndim != 2 or self.value_table.shape[0] < 1:
            raise SqError("ensemble needs a nonempty (keys x inputs) table")
        if self.value_table.shape[1] != len(self.inputs):
            raise SqError("value table width must match the input list")
        if self.value_table.min() < 0 or self.value_table.max() >= len(self.label_values):
            raise SqError("table entries must index label_values")

    @property
    def num_keys(self) -> int:
        return self.value_table.shape[0]

    @property
    def num_inputs(self) -> int:
        return self.value_table.shape[1]


def all_functions_ensemble(input_bits: int = 2) -> FamilyEnsemble:
    """Every function {0,1}^input_bits -> {0,1}."""
    num_inputs = 2**input_bits
    num_keys = 2**num_inputs
    if num_keys * num_inputs > 10**8:
        raise SqError("all-functions ensemble too large")
    inputs = tuple(_corner_iter(input_bits, DomainConvention.ZERO_ONE))
    table = ((np.arange(num_keys)[:, None] >> np.arange(num_inputs)) & 1).astype(np.int8)
    return FamilyEnsemble(
        kind="all_functions",
        inputs=inputs,
        value_table=table,
        label_values=(Fraction(0), Fraction(1)),
        meta={"input_bits": input_bits},
    )


def lwr_ensemble(n: int, q: int, p: int) -> FamilyEnsemble:
    """Modulus-rounding family f_w(x) = round_p((p/q)(w.x mod q)) with keys w
    and inputs x both ranging over all of Z_q^n.

    Unlike the lifted-instance constructor this accepts any 1 < p < q (prime,
    prime-power, or composite q), since the pairwise checker's whole point is
    to measure eta_actual where the closed-form bound is in doubt.
    """
    if not (1 < p < q):
        raise SqError("need 1 < p < q")
    if q ** (3 * n) > 10**8:
        raise SqError("ensemble exceeds the enumeration budget")
    vectors = tuple(itertools.product(range(q), repeat=n))
    W = np.array(vectors, dtype=np.int64)
    X = W  # same enumeration for keys and inputs
    prods = (W @ X.T) % q
    rounded = np.array([int(lwr_round(t, p, q) * p) for t in range(q)], dtype=np.int8)
    table = rounded[prods]
    return FamilyEnsemble(
        kind="lwr",
        inputs=vectors,
        value_table=table,
        label_values=tuple(Fraction(a, p) for a in range(p)),
        # the all-zero input maps every key to f(0) = 0, so it is excluded
        # from the marginal-uniformity verdict (it still counts in eta)
        meta={"n": n, "q": q, "p": p, "marginal_excludes_zero_input": True},
    )


# ---------------------------------------------------------------------------
# pairwise independence and the variance bound

@dataclass(frozen=True)
class PairwiseReport:
    eta_actual: Fraction
    eta_bound: Fraction | None
    marginal_uniform: bool
    bad_pairs: int
    total_pairs: int

    def __post_init__(self):
        if not (0 <= self.eta_actual <= 1):
            raise SqError("eta_actual must lie in [0, 1]")


def pairwise_check(ensemble: FamilyEnsemble) -> PairwiseReport:
    """Exhaustive: for every ordered input pair (diagonal included), compare
    the key-averaged joint law of (f(x), f(x')) to the uniform product."""
    table = ensemble.value_table
    num_keys, num_inputs = table.shape
    num_labels = len(ensemble.label_values)
    if num_inputs * num_inputs * num_keys > 10**8:
        raise SqError("pairwise check exceeds the enumeration budget")
    bad = 0
    cols = table.astype(np.int64)
    for i in range(num_inputs):
        joint_base = cols[:, i] * num_labels
        for j in range(num_inputs):
            counts = np.bincount(joint_base + cols[:, j],
                                 minlength=num_labels * num_labels)
            if not (counts * num_labels * num_labels == num_keys).all():
                bad += 1
    skip_zero = bool(ensemble.meta.get("marginal_excludes_zero_input"))
    marginal_uniform = all(
        (np.bincount(cols[:, i], minlength=num_labels) * num_labels == num_keys).all()
        for i in range(num_inputs)
        if not (skip_zero and not any(ensemble.inputs[i]))
    )
    total = num_inputs * num_inputs
    eta_bound = None
    if ensemble.kind == "lwr":
        n, q = ensemble.meta["n"], ensemble.meta["q"]
        eta_bound = Fraction(2, q ** (n - 1))
    return PairwiseReport(
        eta_actual=Fraction(bad, total),
        eta_bound=eta_bound,
        marginal_uniform=marginal_uniform,
        bad_pairs=bad,
        total_pairs=total,
    )


@dataclass(frozen=True)
class PhiTable:
    """An exact query table: values[input_index][label_index] in [-1, 1]."""

    values: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        if not self.values:
            raise SqError("empty query table")
        width = len(self.values[0])
        for row in self.values:
            if len(row) != width:
                raise SqError("ragged query table")
            for v in row:
                if not (-1 <= v <= 1):
                    raise SqError("query table values must lie in [-1, 1]")

    def integer_form(self) -> tuple[np.ndarray, int]:
        """(numerator table, common denominator) for vectorized exact sums."""
        den = 1
        for row in self.values:
            for v in row:
                den = den * v.denominator // math.gcd(den, v.denominator)
        nums = np.array(
            [[int(v * den) for v in row] for row in self.values], dtype=np.int64
        )
        return nums, den


def phi_table(values) -> PhiTable:
    return PhiTable(values=tuple(tuple(as_rational(v) for v in row) for row in values))


def random_phi_table(gen: np.random.Generator, num_inputs: int, num_labels: int,
                     grid: int = 8) -> PhiTable:
    """Uniform on the rational grid {-grid..grid}/grid, exactly representable."""
    raw = gen.integers(-grid, grid + 1, (num_inputs, num_labels))
    return PhiTable(values=tuple(
        tuple(Fraction(int(v), grid) for v in row) for row in raw
    ))


def per_key_expectations(ensemble: FamilyEnsemble, phi: PhiTable) -> list[Fraction]:
    """Exact E_x[phi(x, f_k(x))] for every key k."""
    nums, den = phi.integer_form()
    table = ensemble.value_table.astype(np.int64)
    gathered = nums[np.arange(ensemble.num_inputs)[None, :], table]
    sums = gathered.sum(axis=1)
    scale = den * ensemble.num_inputs
    return [Fraction(int(s), scale) for s in sums]


def variance_check(
    ensemble: FamilyEnsemble,
    phi: PhiTable,
    report: PairwiseReport | None = None,
) -> tuple[Fraction, Fraction]:
    """(exact Var over keys of E_x[phi(x, f(x))], bound 2*eta_actual)."""
    if report is None:
        report = pairwise_check(ensemble)
    e = per_key_expectations(ensemble, phi)
    k = len(e)
    mean = sum(e, Fraction(0)) / k
    var = sum((v - mean) ** 2 for v in e) / k
    return var, 2 * report.eta_actual


# ---------------------------------------------------------------------------
# the adversarial distinguishing game

@dataclass(frozen=True)
class GameState:
    total_keys: int
    surviving_keys: frozenset[int]
    queries_made: int
    tolerance: Fraction
    ruled_out_fraction: Fraction

    def __post_init__(self):
        expect = 1 - Fraction(len(self.surviving_keys), self.total_keys)
        if self.ruled_out_fraction != expect:
            raise SqError("ruled_out_fraction out of sync with the surviving set")
        if not (0 < self.tolerance <= 1):
            raise SqError("tolerance must lie in (0, 1]")


def new_game(ensemble: FamilyEnsemble, tau) -> GameState:
    tau = as_rational(tau)
    return GameState(
        total_keys=ensemble.num_keys,
        surviving_keys=frozenset(range(ensemble.num_keys)),
        queries_made=0,
        tolerance=tau,
        ruled_out_fraction=Fraction(0),
    )


def adversarial_respond(
    ensemble: FamilyEnsemble,
    game: GameState,
    phi: PhiTable,
    report: PairwiseReport | None = None,
) -> tuple[Fraction, GameState]:
    """Answer with the global key average phi_bar and retire exactly the
    keys whose exact expectation differs from it by more than tau. The
    per-query retired fraction is checked exactly against 2*eta_actual/tau^2."""
    if report is None:
        report = pairwise_check(ensemble)
    e = per_key_expectations(ensemble, phi)
    k = ensemble.num_keys
    phi_bar = sum(e, Fraction(0)) / k
    tau = game.tolerance
    retired = {i for i in game.surviving_keys if abs(e[i] - phi_bar) > tau}
    survivors = frozenset(game.surviving_keys - retired)
    newly_ruled = Fraction(len(retired), k)
    cap = 2 * report.eta_actual / tau**2
    if newly_ruled > cap:
        raise SqError(
            f"variance bound violated: retired {newly_ruled} > {cap}"
        )
    updated = GameState(
        total_keys=k,
        surviving_keys=survivors,
        queries_made=game.queries_made + 1,
        tolerance=tau,
        ruled_out_fraction=1 - Fraction(len(survivors), k),
    )
    return phi_bar, updated


def run_game(
    ensemble: FamilyEnsemble,
    strategy: Callable[[int, np.random.Generator], PhiTable] | Sequence[PhiTable],
    query_budget: int,
    tau,
    seed: int,
) -> dict:
    """Play query_budget rounds against the adversarial oracle and return a
    deterministic transcript (canonical JSON-ready dict)."""
    report = pairwise_check(ensemble)
    game = new_game(ensemble, tau)
    rounds = []
    for i in range(query_budget):
        if callable(strategy):
            phi = strategy(i, rng.substream(seed, "game-query", i))
        else:
            phi = strategy[i]
        answer, game = adversarial_respond(ensemble, game, phi, report)
        rounds.append({
            "index": i,
            "answer": _frac_str(answer),
            "answer_float": float(answer),
            "surviving": len(game.surviving_keys),
            "ruled_out_fraction": _frac_str(game.ruled_out_fraction),
        })
    total_cap = query_budget * 2 * report.eta_actual / as_rational(tau) ** 2
    return {
        "family": ensemble.kind,
        "meta": {k: v for k, v in sorted(ensemble.meta.items())},
        "num_keys": ensemble.num_keys,
        "tolerance": _frac_str(game.tolerance),
        "eta_actual": _frac_str(report.eta_actual),
        "eta_bound": _frac_str(report.eta_bound) if report.eta_bound is not None else None,
        "marginal_uniform": report.marginal_uniform,
        "queries": rounds,
        "final_surviving_fraction": _frac_str(
            Fraction(len(game.surviving_keys), ensemble.num_keys)
        ),
        "ruled_out_total_cap": _frac_str(min(Fraction(1), total_cap)),
    }


def random_strategy(num_inputs: int, num_labels: int, grid: int = 8):
    def strategy(i: int, gen: np.random.Generator) -> PhiTable:
        return random_phi_table(gen, num_inputs, num_labels, grid)
    return strategy


def _frac_str(v: Fraction) -> str:
    return f"{v.numerator}/{v.denominator}"


def transcript_json(transcript: dict) -> str:
    return json.dumps(transcript, sort_keys=True, separators=(",", ":"))
