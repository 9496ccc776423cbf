"""Scalar non-Markovianity measures and the step-divisibility verdict.

The verdict inspects the Choi matrix of every consecutive-step propagator
V_{t_{k+1}, t_k}; a negative eigenvalue below tolerance marks the step as a
divisibility violation, and steps whose map cannot be inverted reliably are
reported as excluded rather than judged.

Three measures are computed over a finite, user-configured horizon:

* the trace-norm witness measure, a lower bound on the supremum over unit
  trace-norm Hermitian witnesses of the integrated positive flow, obtained
  from a seeded derivative-free search (tensor-product basis candidates, the
  negative-Choi-direction candidate, random candidates, then random-
  perturbation hill climbing with an adaptive step);
* the RHP measure, the integral of the first-order trace-norm excess of the
  maximally entangled projector under id + eps L_t (Richardson-extrapolated
  in eps);
* the state-distinguishability (BLP) measure, the same search over pairs of
  pure states.

Search results are reproducible lower bounds: values never decrease during
refinement and depend only on the recorded seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .dynamics import (
    CONDITION_LIMIT,
    GeneratorModel,
    Trajectory,
    apply_extended,
    choi_matrix,
    generator_superoperator,
)
from .witnesses import (
    ExtendedTraceNormWitness,
    InformationFlowPair,
    WitnessSeries,
    series,
)

DIVISIBILITY_TOL = 1e-8
DETECTION_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SearchConfig:
    """Budget and reproducibility knobs for the measure optimizers."""

    seeds: int = 64
    iterations: int = 200
    rng_seed: int = 0
    initial_step: float = 0.5
    min_step: float = 1e-6


@dataclass
class Verdict:
    """Step-divisibility verdict with violating and excluded intervals."""

    markovian: bool
    violation_intervals: list  # [(t_start, t_end, min Choi eigenvalue)]
    excluded_intervals: list   # [(t_start, t_end)] propagator singular
    tolerance: float


@dataclass
class StepChoiData:
    """Minimum Choi eigenvalue of each consecutive-step propagator."""

    start_times: np.ndarray
    end_times: np.ndarray
    min_eigenvalues: np.ndarray     # nan where excluded
    excluded: np.ndarray            # bool mask
    worst_vector: np.ndarray | None  # eigenvector of the most negative eigenvalue
    worst_value: float


@dataclass
class WitnessMeasureResult:
    value: float
    witness: np.ndarray | None
    series: WitnessSeries | None


@dataclass
class BlpMeasureResult:
    value: float
    pair: tuple | None
    series: WitnessSeries | None


# ---------------------------------------------------------------------------
# Divisibility
# ---------------------------------------------------------------------------

def step_choi_data(traj: Trajectory) -> StepChoiData:
    """Choi spectra of V_{t_{k+1}, t_k} for every grid step."""
    maps = traj.maps
    n_steps = traj.nodes - 1
    min_eigs = np.full(n_steps, np.nan)
    excluded = np.zeros(n_steps, dtype=bool)
    worst_vec = None
    worst_val = np.inf
    for k in range(n_steps):
        cond = float(np.linalg.cond(maps[k]))
        if not np.isfinite(cond) or cond > CONDITION_LIMIT:
            excluded[k] = True
            continue
        prop = np.linalg.solve(maps[k].T, maps[k + 1].T).T
        w, v = np.linalg.eigh(0.5 * (choi_matrix(prop) + choi_matrix(prop).conj().T))
        min_eigs[k] = w[0]
        if w[0] < worst_val:
            worst_val = float(w[0])
            worst_vec = v[:, 0].copy()
    return StepChoiData(
        start_times=traj.times[:-1],
        end_times=traj.times[1:],
        min_eigenvalues=min_eigs,
        excluded=excluded,
        worst_vector=worst_vec,
        worst_value=float(worst_val) if np.isfinite(worst_val) else np.nan,
    )


def _merge_runs(mask: np.ndarray):
    runs = []
    start = None
    for k, flag in enumerate(mask):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            runs.append((start, k - 1))
            start = None
    if start is not None:
        runs.append((start, mask.size - 1))
    return runs


def divisibility_verdict(traj: Trajectory, tol: float = DIVISIBILITY_TOL,
                         steps: StepChoiData | None = None) -> Verdict:
    """Markovian iff every step propagator is CP (no violations, no exclusions)."""
    if traj.nodes < 2:
        raise ValueError("need at least two nodes for a divisibility verdict")
    data = steps if steps is not None else step_choi_data(traj)
    violating = ~data.excluded & (data.min_eigenvalues < -tol)
    violations = [
        (float(data.start_times[a]), float(data.end_times[b]),
         float(np.nanmin(data.min_eigenvalues[a:b + 1])))
        for a, b in _merge_runs(violating)
    ]
    excluded = [
        (float(data.start_times[a]), float(data.end_times[b]))
        for a, b in _merge_runs(data.excluded)
    ]
    return Verdict(
        markovian=not violations and not excluded,
        violation_intervals=violations,
        excluded_intervals=excluded,
        tolerance=tol,
    )


# ---------------------------------------------------------------------------
# RHP measure
# ---------------------------------------------------------------------------

def rhp_rate(model: GeneratorModel, t: float, eps: float = 1e-6) -> float:
    """First-order trace-norm excess of id + eps L_t on the maximally
    entangled projector, Richardson-extrapolated from eps and eps/2."""
    d = model.dim
    gen = generator_superoperator(model, t)
    projector = ops.max_entangled_projector(d)
    delta = apply_extended(gen, projector)

    def quotient(e: float) -> float:
        return (ops.trace_norm(projector + e * delta) - 1.0) / e

    value = 2.0 * quotient(eps / 2.0) - quotient(eps)
    return max(value, 0.0)


def rhp_measure(model: GeneratorModel, times: np.ndarray, eps: float = 1e-6) -> float:
    """Trapezoidal integral of the RHP rate over the grid."""
    times = np.asarray(times, dtype=float)
    values = np.asarray([rhp_rate(model, t, eps) for t in times])
    return float(np.trapezoid(values, times))


# ---------------------------------------------------------------------------
# Witness-measure search
# ---------------------------------------------------------------------------

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def gell_mann_basis(d: int) -> list:
    """Generalized Gell-Mann matrices (traceless Hermitian basis of su(d))."""
    mats = []
    for i in range(d):
        for j in range(i + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[i, j] = sym[j, i] = 1.0
            mats.append(sym)
            anti = np.zeros((d, d), dtype=complex)
            anti[i, j] = -1j
            anti[j, i] = 1j
            mats.append(anti)
    for l in range(1, d):
        diag = np.zeros((d, d), dtype=complex)
        for k in range(l):
            diag[k, k] = 1.0
        diag[l, l] = -l
        mats.append(diag * np.sqrt(2.0 / (l * (l + 1))))
    return mats


def _product_candidates(d: int, cap: int) -> list:
    """Tensor products of single-system basis elements (identity included),
    skipping the PSD identity x identity direction."""
    basis = list(_PAULIS) if d == 2 else [np.eye(d, dtype=complex)] + gell_mann_basis(d)
    out = []
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            if i == 0 and j == 0:
                continue
            out.append(0.5 * np.kron(a, b))
            if len(out) >= cap:
                return out
    return out


def _choi_candidates(data: StepChoiData, n: int) -> list:
    """Witness directions from the most negative Choi eigenvector."""
    if data.worst_vector is None or not np.isfinite(data.worst_value):
        return []
    proj = np.outer(data.worst_vector, data.worst_vector.conj())
    return [proj - np.eye(n) / n]


def _positive_area(ws: WitnessSeries) -> float:
    return ws.total_violation


def _hill_climb(traj, spec, best_series, best_value, make_candidate, rng, search):
    step = search.initial_step
    for _ in range(search.iterations):
        candidate = make_candidate(spec, step, rng)
        if candidate is None:
            step = max(step * 0.8, search.min_step)
            continue
        cand_series = series(traj, candidate)
        value = _positive_area(cand_series)
        if value > best_value:
            spec, best_series, best_value = candidate, cand_series, value
            step = min(step * 1.4, 2.0)
        else:
            step = max(step * 0.8, search.min_step)
    return spec, best_series, best_value


def witness_measure(traj: Trajectory, search: SearchConfig = SearchConfig(),
                    steps: StepChoiData | None = None) -> WitnessMeasureResult:
    """Lower bound on the optimal-witness measure with the witness that attains it."""
    d = traj.dim
    n = d * d
    rng = np.random.default_rng(search.rng_seed)
    data = steps if steps is not None else step_choi_data(traj)

    raw = _product_candidates(d, search.seeds) + _choi_candidates(data, n)
    while len(raw) < search.seeds:
        raw.append(ops.random_hermitian(n, rng))
    raw = raw[: max(search.seeds, 1)]

    seeded = []
    for x in raw:
        try:
            spec = ExtendedTraceNormWitness(x)
        except ValueError:
            continue  # PSD directions carry no witness information
        ws = series(traj, spec)
        seeded.append((spec, ws, _positive_area(ws)))

    cp_violated = bool(np.any(~data.excluded & (data.min_eigenvalues < -1e-12)))
    if not cp_violated and all(v == 0.0 for _, _, v in seeded):
        # every step is CP, so the contraction property forces all flows <= 0
        return WitnessMeasureResult(value=0.0, witness=None, series=None)

    def perturb(spec, step, crng):
        try:
            return ExtendedTraceNormWitness(
                spec.witness + step * ops.random_hermitian(n, crng)
            )
        except ValueError:
            return None

    best = (None, None, 0.0)
    for i, (spec, ws, value) in enumerate(seeded):
        crng = np.random.default_rng((search.rng_seed, 1, i))
        spec, ws, value = _hill_climb(traj, spec, ws, value, perturb, crng, search)
        if value > best[2]:
            best = (spec, ws, value)

    if best[0] is None or best[2] <= 0.0:
        return WitnessMeasureResult(value=0.0, witness=None, series=None)
    return WitnessMeasureResult(value=float(best[2]), witness=best[0].witness, series=best[1])


def _axis_pairs_qubit() -> list:
    vecs = {
        "x": (np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)),
        "y": (np.array([1, 1j]) / np.sqrt(2), np.array([1, -1j]) / np.sqrt(2)),
        "z": (np.array([1, 0]), np.array([0, 1])),
    }
    return [(np.asarray(a, complex), np.asarray(b, complex)) for a, b in vecs.values()]


def blp_measure(traj: Trajectory, search: SearchConfig = SearchConfig(),
                steps: StepChoiData | None = None) -> BlpMeasureResult:
    """Lower bound on the state-distinguishability measure with the best pair."""
    d = traj.dim
    rng = np.random.default_rng(search.rng_seed)
    data = steps if steps is not None else step_choi_data(traj)

    pairs = _axis_pairs_qubit() if d == 2 else [
        (np.eye(d, dtype=complex)[i], np.eye(d, dtype=complex)[j])
        for i in range(d) for j in range(i + 1, d)
    ]
    while len(pairs) < search.seeds:
        pairs.append((ops.random_pure_state(d, rng), ops.random_pure_state(d, rng)))
    pairs = pairs[: max(search.seeds, 1)]

    def to_spec(v1, v2):
        return InformationFlowPair(np.outer(v1, v1.conj()), np.outer(v2, v2.conj()))

    seeded = []
    for v1, v2 in pairs:
        spec = to_spec(v1, v2)
        ws = series(traj, spec)
        seeded.append(((v1, v2), ws, _positive_area(ws)))

    cp_violated = bool(np.any(~data.excluded & (data.min_eigenvalues < -1e-12)))
    if not cp_violated and all(v == 0.0 for _, _, v in seeded):
        return BlpMeasureResult(value=0.0, pair=None, series=None)

    best_pair, best_series, best_value = None, None, 0.0
    for i, ((v1, v2), ws, value) in enumerate(seeded):
        crng = np.random.default_rng((search.rng_seed, 2, i))
        step = search.initial_step
        cur = (v1, v2)
        for _ in range(search.iterations):
            w1 = cur[0] + step * (crng.normal(size=d) + 1j * crng.normal(size=d))
            w2 = cur[1] + step * (crng.normal(size=d) + 1j * crng.normal(size=d))
            w1 = w1 / np.linalg.norm(w1)
            w2 = w2 / np.linalg.norm(w2)
            cand_series = series(traj, to_spec(w1, w2))
            cand_value = _positive_area(cand_series)
            if cand_value > value:
                cur, ws, value = (w1, w2), cand_series, cand_value
                step = min(step * 1.4, 2.0)
            else:
                step = max(step * 0.8, search.min_step)
        if value > best_value:
            best_pair, best_series, best_value = cur, ws, value

    if best_pair is None or best_value <= 0.0:
        return BlpMeasureResult(value=0.0, pair=None, series=None)
    rho1 = np.outer(best_pair[0], best_pair[0].conj())
    rho2 = np.outer(best_pair[1], best_pair[1].conj())
    return BlpMeasureResult(value=float(best_value), pair=(rho1, rho2), series=best_series)
