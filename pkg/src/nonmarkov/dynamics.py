"""Superoperators, time-local generator models and dynamical-map trajectories.

Operators are vectorized by column stacking, so a map on d-dimensional states
is a d^2 x d^2 complex matrix and vec(A X B) = (B^T kron A) vec(X).  The Choi
matrix and the Heisenberg-picture dual are derived from that convention.

Trajectories hold the map at every node of a time grid.  They are built either
from closed-form solutions (pure dephasing, trace replacement, spin-boson from
the memory-kernel amplitude) or by adaptive RK45 integration of
dLambda/dt = L_t Lambda.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from math import isqrt
from typing import Callable, Union

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

from .volterra import (
    AmplitudeSolution,
    ExponentialKernel,
    MemoryKernel,
    TabulatedKernel,
    solve_memory_kernel,
)

IDENTITY_TOL = 1e-12
TRACE_PRESERVATION_TOL = 1e-8
HERMITICITY_PRESERVATION_TOL = 1e-9
CONDITION_LIMIT = 1e10
DEFAULT_ATOL = 1e-10
DEFAULT_RTOL = 1e-8

TRAJECTORY_MAGIC = b"NMTRAJ01"

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |ground><excited|
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)


class SingularPropagatorError(RuntimeError):
    """Raised when Lambda_s is too ill-conditioned to invert."""


# ---------------------------------------------------------------------------
# Vectorization and superoperator algebra
# ---------------------------------------------------------------------------

def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    vector = np.asarray(vector)
    d = dim if dim is not None else isqrt(vector.size)
    return vector.reshape((d, d), order="F")


def left_multiplication(a: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X."""
    return np.kron(np.eye(a.shape[0]), a)


def right_multiplication(b: np.ndarray) -> np.ndarray:
    """Superoperator of X -> X B."""
    return np.kron(b.T, np.eye(b.shape[0]))


def sandwich(a: np.ndarray) -> np.ndarray:
    """Superoperator of X -> A X A†."""
    return np.kron(a.conj(), a)


def identity_superop(dim: int) -> np.ndarray:
    return np.eye(dim * dim, dtype=complex)


def apply_superop(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply a superoperator matrix to an operator."""
    return unvec(m @ vec(x), isqrt(m.shape[0]))


def apply_superop_batch(ms: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply a stack of superoperators (N, d^2, d^2) to one operator."""
    d = isqrt(ms.shape[1])
    w = np.einsum("tnm,m->tn", ms, vec(x))
    return w.reshape(-1, d, d).transpose(0, 2, 1)


def apply_extended(m: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Apply (id ⊗ Λ) to an operator on the doubled space H ⊗ H."""
    n = m.shape[0]
    d = isqrt(n)
    blocks = y.reshape(d, d, d, d).transpose(0, 2, 3, 1).reshape(d * d, n)
    w = blocks @ m.T
    return w.reshape(d, d, d, d).transpose(0, 3, 1, 2).reshape(n, n)


def apply_extended_batch(ms: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Apply a stack of maps (N, d^2, d^2), extended by the identity, to one
    operator on the doubled space."""
    n = ms.shape[1]
    d = isqrt(n)
    blocks = y.reshape(d, d, d, d).transpose(0, 2, 3, 1).reshape(d * d, n)
    w = np.einsum("tnm,bm->tbn", ms, blocks)
    return w.reshape(-1, d, d, d, d).transpose(0, 1, 4, 2, 3).reshape(-1, n, n)


def extended_superop(m: np.ndarray) -> np.ndarray:
    """Materialize the (d^2)^2 x (d^2)^2 matrix of id ⊗ Λ (small d only)."""
    n = m.shape[0]
    d = isqrt(n)
    eye = np.eye(d)
    m4 = m.reshape(d, d, d, d)
    s8 = np.einsum("jq,ip,lkrs->jlikqrps", eye, eye, m4)
    return s8.reshape(n * n, n * n)


def choi_matrix(m: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij |i><j| ⊗ Λ(|i><j|); PSD iff Λ is completely positive."""
    n = m.shape[0]
    d = isqrt(n)
    return m.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(n, n)


def dual_superop(m: np.ndarray) -> np.ndarray:
    """Heisenberg-picture dual, the Hilbert-Schmidt adjoint Λ*."""
    return m.conj().T


def is_trace_preserving(m: np.ndarray, tol: float = TRACE_PRESERVATION_TOL) -> bool:
    d = isqrt(m.shape[0])
    ident = vec(np.eye(d, dtype=complex))
    return bool(np.abs(ident.conj() @ m - ident.conj()).max() <= tol)


def is_hermiticity_preserving(m: np.ndarray, tol: float = HERMITICITY_PRESERVATION_TOL) -> bool:
    c = choi_matrix(m)
    return bool(np.abs(c - c.conj().T).max() <= tol)


# ---------------------------------------------------------------------------
# Scalar and target presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t):
        return self.value * np.ones_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class Sine:
    amplitude: float
    angular_frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.sin(self.angular_frequency * t + self.phase)


@dataclass(frozen=True)
class OffsetSine:
    offset: float
    amplitude: float
    angular_frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.offset + self.amplitude * np.sin(self.angular_frequency * t + self.phase)


@dataclass(frozen=True)
class Table:
    """Piecewise-linear scalar function of time."""

    times: tuple
    values: tuple

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.times, self.values)


RateFunction = Union[Constant, Sine, OffsetSine, Table, Callable]


@dataclass(frozen=True)
class ConstantTarget:
    """Time-independent replacement state for the trace-replacement model."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    def __call__(self, t) -> np.ndarray:
        return self.matrix


@dataclass(frozen=True)
class BlochZSineTarget:
    """Qubit target (I + scale sin(w t) sigma_z) / 2; unit trace, possibly non-PSD."""

    scale: float
    angular_frequency: float = 1.0

    def __call__(self, t) -> np.ndarray:
        z = self.scale * np.sin(self.angular_frequency * float(t))
        return 0.5 * (np.eye(2, dtype=complex) + z * SIGMA_Z)


# ---------------------------------------------------------------------------
# Generator models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dephasing:
    """Pure qubit dephasing, L_t(rho) = rate(t) (sigma_z rho sigma_z - rho) / 2."""

    rate: RateFunction

    @property
    def dim(self) -> int:
        return 2


@dataclass(frozen=True)
class TraceReplacement:
    """L_t(rho) = rate(t) (target(t) Tr(rho) - rho), Tr target(t) = 1."""

    rate: RateFunction
    target: Callable[[float], np.ndarray]

    @property
    def dim(self) -> int:
        return int(np.asarray(self.target(0.0)).shape[0])


@dataclass
class SpinBoson:
    """Qubit amplitude damping driven by the memory-kernel amplitude G(t)."""

    kernel: MemoryKernel
    solution: AmplitudeSolution | None = None

    @property
    def dim(self) -> int:
        return 2


@dataclass(frozen=True)
class Lindblad:
    """Generic GKSL generator with time-dependent rates.

    ``noise`` is a sequence of (operator, rate) pairs; ``hamiltonian`` may be a
    constant matrix, a callable of time, or None.
    """

    hamiltonian: np.ndarray | Callable[[float], np.ndarray] | None
    noise: tuple
    dim: int

    def hamiltonian_at(self, t: float) -> np.ndarray | None:
        if self.hamiltonian is None:
            return None
        if callable(self.hamiltonian):
            return np.asarray(self.hamiltonian(t), dtype=complex)
        return np.asarray(self.hamiltonian, dtype=complex)


GeneratorModel = Union[Dephasing, TraceReplacement, SpinBoson, Lindblad]


def _check_unit_trace(omega: np.ndarray, t: float) -> np.ndarray:
    omega = np.asarray(omega, dtype=complex)
    tr = complex(np.trace(omega))
    if abs(tr - 1.0) > 1e-10:
        raise ValueError(f"replacement target at t={t} has trace {tr}, expected 1")
    return omega


def generator_superoperator(model: GeneratorModel, t: float) -> np.ndarray:
    """The d^2 x d^2 matrix of the time-local generator L_t."""
    if isinstance(model, Dephasing):
        g = float(model.rate(t))
        return 0.5 * g * (sandwich(SIGMA_Z) - identity_superop(2))
    if isinstance(model, TraceReplacement):
        g = float(model.rate(t))
        omega = _check_unit_trace(model.target(t), t)
        d = omega.shape[0]
        return g * (np.outer(vec(omega), vec(np.eye(d, dtype=complex)).conj()) - identity_superop(d))
    if isinstance(model, SpinBoson):
        if model.solution is None:
            raise ValueError("spin-boson kernel solution unavailable; solve the memory kernel first")
        shift, decay = model.solution.rates(t)
        number = SIGMA_PLUS @ SIGMA_MINUS  # excited-state projector
        lmul = left_multiplication(number)
        rmul = right_multiplication(number)
        return (-0.5j * shift) * (lmul - rmul) + decay * (sandwich(SIGMA_MINUS) - 0.5 * (lmul + rmul))
    if isinstance(model, Lindblad):
        d = model.dim
        out = np.zeros((d * d, d * d), dtype=complex)
        h = model.hamiltonian_at(t)
        if h is not None:
            out += -1j * (left_multiplication(h) - right_multiplication(h))
        for op, rate in model.noise:
            op = np.asarray(op, dtype=complex)
            g = float(rate(t)) if callable(rate) else float(rate)
            gram = op.conj().T @ op
            out += g * (sandwich(op) - 0.5 * (left_multiplication(gram) + right_multiplication(gram)))
        return out
    raise TypeError(f"unknown generator model {type(model).__name__}")


def has_analytic_backend(model: GeneratorModel) -> bool:
    return isinstance(model, (Dephasing, TraceReplacement, SpinBoson))


# ---------------------------------------------------------------------------
# Quadrature helpers for the closed-form backends
# ---------------------------------------------------------------------------

def _refined_grid(times: np.ndarray, refine: int) -> np.ndarray:
    pieces = [np.asarray([times[0]])]
    for k in range(times.size - 1):
        pieces.append(np.linspace(times[k], times[k + 1], refine + 1)[1:])
    return np.concatenate(pieces)


def _eval_scalar(fn, tt: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fn(tt), dtype=float)
        if out.shape == tt.shape:
            return out
    except Exception:
        pass
    return np.asarray([float(fn(t)) for t in tt], dtype=float)


def cumulative_rate_integral(rate: RateFunction, times: np.ndarray, refine: int = 16) -> np.ndarray:
    """Gamma(t_k) = int_0^{t_k} rate, by composite Simpson on a refined grid."""
    times = np.asarray(times, dtype=float)
    tt = _refined_grid(times, refine)
    vals = _eval_scalar(rate, tt)
    cum = cumulative_simpson(vals, x=tt, initial=0.0)
    return cum[:: refine][: times.size] if times.size > 1 else np.zeros(1)


def averaged_target_series(model: TraceReplacement, times: np.ndarray, refine: int = 16):
    """Gamma(t_k) and the weighted target average Omega(t_k) on a grid.

    Omega(t) = int_0^t rate e^{Gamma(tau)} target(tau) dtau / (e^{Gamma(t)} - 1),
    with the t -> 0 limit target(0).
    """
    times = np.asarray(times, dtype=float)
    d = model.dim
    tt = _refined_grid(times, refine)
    rates = _eval_scalar(model.rate, tt)
    gammas = cumulative_simpson(rates, x=tt, initial=0.0)
    targets = np.stack([_check_unit_trace(model.target(t), t) for t in tt])
    integrand = (rates * np.exp(gammas))[:, None, None] * targets
    # cumulative_simpson handles real input only; integrate the parts separately
    cum = (cumulative_simpson(integrand.real, x=tt, initial=0.0, axis=0)
           + 1j * cumulative_simpson(integrand.imag, x=tt, initial=0.0, axis=0))
    node_gamma = gammas[::refine][: times.size]
    node_cum = cum[::refine][: times.size]
    omegas = np.empty((times.size, d, d), dtype=complex)
    for k, g in enumerate(node_gamma):
        if g > 1e-12:
            omegas[k] = node_cum[k] / (np.exp(g) - 1.0)
        else:
            omegas[k] = np.asarray(model.target(0.0), dtype=complex)
    return node_gamma, omegas


def averaged_target(model: TraceReplacement, t: float, nodes: int = 513) -> np.ndarray:
    """Weighted target average Omega(t) for a single time."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return np.asarray(model.target(0.0), dtype=complex)
    grid = np.linspace(0.0, float(t), nodes)
    _, omegas = averaged_target_series(model, grid)
    return omegas[-1]


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Time grid plus the dynamical map at each node."""

    times: np.ndarray
    maps: np.ndarray  # (N, d^2, d^2)
    model: GeneratorModel | None = None
    backend: str | None = None
    meta: dict = field(default_factory=dict)
    validate: bool = True

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.maps = np.asarray(self.maps, dtype=complex)
        if self.times.ndim != 1 or self.maps.ndim != 3 or self.maps.shape[0] != self.times.size:
            raise ValueError("need matching 1-d times and (N, d^2, d^2) maps")
        if not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        if abs(self.times[0]) > 1e-15:
            raise ValueError("trajectory must start at t = 0")
        if self.validate:
            self._validate_invariants()

    def _validate_invariants(self) -> None:
        n = self.maps.shape[1]
        ident_err = np.abs(self.maps[0] - np.eye(n)).max()
        if ident_err > IDENTITY_TOL:
            raise ValueError(f"map at node 0 deviates from identity by {ident_err:.3e}")
        d = self.dim
        ident = vec(np.eye(d, dtype=complex)).conj()
        residual = np.abs(np.einsum("i,kij->kj", ident, self.maps) - ident.conj()).max(axis=1)
        worst = int(np.argmax(residual))
        if residual[worst] > TRACE_PRESERVATION_TOL:
            raise ValueError(
                f"map at node {worst} (t={self.times[worst]}) violates trace preservation "
                f"by {residual[worst]:.3e}"
            )

    @property
    def dim(self) -> int:
        return isqrt(self.maps.shape[1])

    @property
    def nodes(self) -> int:
        return self.times.size

    @property
    def spacing(self) -> float | None:
        steps = np.diff(self.times)
        h = float(steps[0])
        return h if np.allclose(steps, h, rtol=1e-8, atol=1e-14) else None

    def node_index(self, t: float) -> int | None:
        k = int(np.searchsorted(self.times, t))
        for j in (k - 1, k, k + 1):
            if 0 <= j < self.times.size and abs(self.times[j] - t) <= 1e-9 * max(1.0, self.times[-1]):
                return j
        return None

    def map_at(self, t: float) -> np.ndarray:
        """Map at a node, or linear interpolation between bracketing nodes."""
        k = self.node_index(t)
        if k is not None:
            return self.maps[k]
        if not self.times[0] <= t <= self.times[-1]:
            raise ValueError(f"t={t} outside trajectory range [0, {self.times[-1]}]")
        hi = int(np.searchsorted(self.times, t))
        lo = hi - 1
        w = (t - self.times[lo]) / (self.times[hi] - self.times[lo])
        return (1.0 - w) * self.maps[lo] + w * self.maps[hi]

    def dual_maps(self) -> np.ndarray:
        return np.conj(np.transpose(self.maps, (0, 2, 1)))


def _spin_boson_maps(amplitudes: np.ndarray) -> np.ndarray:
    """Map stack from the amplitude series: populations |G|^2, coherences G*."""
    g = np.asarray(amplitudes, dtype=complex)
    mods = np.abs(g) ** 2
    maps = np.zeros((g.size, 4, 4), dtype=complex)
    maps[:, 0, 0] = 1.0
    maps[:, 0, 3] = 1.0 - mods
    maps[:, 1, 1] = g
    maps[:, 2, 2] = np.conj(g)
    maps[:, 3, 3] = mods
    return maps


def _evolve_analytic(model: GeneratorModel, times: np.ndarray) -> np.ndarray:
    if isinstance(model, Dephasing):
        gammas = cumulative_rate_integral(model.rate, times)
        damping = np.exp(-gammas)
        maps = np.zeros((times.size, 4, 4), dtype=complex)
        maps[:, 0, 0] = maps[:, 3, 3] = 1.0
        maps[:, 1, 1] = maps[:, 2, 2] = damping
        return maps
    if isinstance(model, TraceReplacement):
        d = model.dim
        gammas, omegas = averaged_target_series(model, times)
        decay = np.exp(-gammas)
        ident = vec(np.eye(d, dtype=complex))
        maps = decay[:, None, None] * np.eye(d * d)[None, :, :]
        omission = (1.0 - decay)[:, None, None] * np.einsum(
            "kn,m->knm", omegas.transpose(0, 2, 1).reshape(times.size, d * d), ident.conj()
        )
        maps = maps.astype(complex) + omission
        maps[0] = np.eye(d * d)
        return maps
    if isinstance(model, SpinBoson):
        if isinstance(model.kernel, ExponentialKernel):
            g = model.kernel.closed_form_amplitude(times).astype(complex)
        else:
            solution = model.solution or solve_memory_kernel(model.kernel, times)
            model.solution = solution
            g = solution.amplitude(times)
        return _spin_boson_maps(g)
    raise ValueError(f"no analytic backend for {type(model).__name__}")


def _evolve_numeric(model: GeneratorModel, times: np.ndarray, atol: float, rtol: float) -> np.ndarray:
    if isinstance(model, SpinBoson) and model.solution is None:
        model.solution = solve_memory_kernel(model.kernel, times)
    d = model.dim
    n = d * d
    y0 = np.eye(n, dtype=complex).reshape(-1)
    y0_real = np.concatenate([y0.real, y0.imag])

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        lam = (y[: n * n] + 1j * y[n * n:]).reshape(n, n)
        gen = generator_superoperator(model, t)
        dy = (gen @ lam).reshape(-1)
        return np.concatenate([dy.real, dy.imag])

    sol = solve_ivp(rhs, (times[0], times[-1]), y0_real, method="RK45",
                    t_eval=times, atol=atol, rtol=rtol)
    if not sol.success:
        raise RuntimeError(f"trajectory integration failed: {sol.message}")
    y = sol.y[: n * n, :] + 1j * sol.y[n * n:, :]
    return y.T.reshape(times.size, n, n)


def evolve(
    model: GeneratorModel,
    times: np.ndarray,
    backend: str = "auto",
    atol: float = DEFAULT_ATOL,
    rtol: float = DEFAULT_RTOL,
) -> Trajectory:
    """Build the trajectory of dynamical maps on a grid starting at t = 0.

    ``backend='analytic'`` uses the closed-form solution (dephasing, trace
    replacement, spin-boson from the amplitude), ``backend='numeric'``
    integrates dLambda/dt = L_t Lambda with RK45 (for the spin-boson model the
    rates come from the numerically solved memory kernel).  ``'auto'`` picks
    the analytic form when one exists.
    """
    times = np.asarray(times, dtype=float)
    if backend == "auto":
        backend = "analytic" if has_analytic_backend(model) else "numeric"
    if backend == "analytic":
        maps = _evolve_analytic(model, times)
    elif backend == "numeric":
        maps = _evolve_numeric(model, times, atol, rtol)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return Trajectory(times=times, maps=maps, model=model, backend=backend,
                      meta=describe_model(model))


def intermediate_map(traj: Trajectory, t: float, s: float) -> np.ndarray:
    """Propagator V_{t,s} = Lambda_t Lambda_s^{-1} between two grid times."""
    if t < s:
        raise ValueError(f"need t >= s, got t={t}, s={s}")
    m_t = traj.map_at(t)
    m_s = traj.map_at(s)
    cond = float(np.linalg.cond(m_s))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularPropagatorError(
            f"map at s={s} has condition number {cond:.3e} beyond {CONDITION_LIMIT:.0e}"
        )
    return np.linalg.solve(m_s.T, m_t.T).T


# ---------------------------------------------------------------------------
# Model descriptors and trajectory files
# ---------------------------------------------------------------------------

def _describe_scalar(fn) -> dict:
    if isinstance(fn, Constant):
        return {"preset": "constant", "value": fn.value}
    if isinstance(fn, Sine):
        return {"preset": "sine", "amplitude": fn.amplitude,
                "angular_frequency": fn.angular_frequency, "phase": fn.phase}
    if isinstance(fn, OffsetSine):
        return {"preset": "offset_sine", "offset": fn.offset, "amplitude": fn.amplitude,
                "angular_frequency": fn.angular_frequency, "phase": fn.phase}
    if isinstance(fn, Table):
        return {"preset": "table", "times": list(fn.times), "values": list(fn.values)}
    return {"preset": "custom"}


def describe_model(model: GeneratorModel | None) -> dict:
    if model is None:
        return {}
    if isinstance(model, Dephasing):
        return {"variant": "dephasing", "rate": _describe_scalar(model.rate)}
    if isinstance(model, TraceReplacement):
        if isinstance(model.target, ConstantTarget):
            target = {"preset": "constant",
                      "matrix_real": model.target.matrix.real.tolist(),
                      "matrix_imag": model.target.matrix.imag.tolist()}
        elif isinstance(model.target, BlochZSineTarget):
            target = {"preset": "bloch_z_sine", "scale": model.target.scale,
                      "angular_frequency": model.target.angular_frequency}
        else:
            target = {"preset": "custom"}
        return {"variant": "trace_replacement", "rate": _describe_scalar(model.rate),
                "target": target}
    if isinstance(model, SpinBoson):
        if isinstance(model.kernel, ExponentialKernel):
            kernel = {"preset": "exponential", "coupling": model.kernel.coupling,
                      "rate": model.kernel.rate}
        elif isinstance(model.kernel, TabulatedKernel):
            kernel = {"preset": "table", "times": model.kernel.times.tolist(),
                      "values": model.kernel.values.tolist()}
        else:
            kernel = {"preset": "custom"}
        return {"variant": "spin_boson", "kernel": kernel}
    if isinstance(model, Lindblad):
        return {"variant": "gksl", "dim": model.dim, "noise_terms": len(model.noise)}
    return {"variant": "custom"}


def save_trajectory(traj: Trajectory, path) -> None:
    """Write a trajectory file: magic, JSON header, grid, interleaved re/im maps."""
    n = traj.maps.shape[1]
    header = {
        "format": "nonmarkov-trajectory",
        "version": 1,
        "dim": traj.dim,
        "nodes": int(traj.nodes),
        "model": traj.meta or describe_model(traj.model),
        "backend": traj.backend,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    interleaved = np.empty((traj.nodes, n, n, 2), dtype="<f8")
    interleaved[..., 0] = traj.maps.real
    interleaved[..., 1] = traj.maps.imag
    with open(path, "wb") as fh:
        fh.write(TRAJECTORY_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(traj.times.astype("<f8").tobytes())
        fh.write(interleaved.tobytes())


def load_trajectory(path) -> Trajectory:
    """Read and validate a trajectory file written by :func:`save_trajectory`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(TRAJECTORY_MAGIC))
        if magic != TRAJECTORY_MAGIC:
            raise ValueError(f"not a trajectory file (bad magic {magic!r})")
        (blob_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        dim = int(header["dim"])
        nodes = int(header["nodes"])
        n = dim * dim
        times = np.frombuffer(fh.read(nodes * 8), dtype="<f8").copy()
        raw = np.frombuffer(fh.read(nodes * n * n * 2 * 8), dtype="<f8")
        if raw.size != nodes * n * n * 2:
            raise ValueError("trajectory file truncated")
        interleaved = raw.reshape(nodes, n, n, 2)
    maps = interleaved[..., 0] + 1j * interleaved[..., 1]
    return Trajectory(times=times, maps=maps, model=None,
                      backend=header.get("backend"), meta=header.get("model") or {})
