"""Run configuration: a flat INI file with sections model/grid/witnesses/
measures/search/output/backend, presets only (no expression evaluation).

The documented schema lives in the README.  Witness descriptors are short
strings like ``trace_norm_extended(pauli:xx)`` or ``blp(plus,minus)`` built
from named qubit presets.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    BlochZSineTarget,
    Constant,
    ConstantTarget,
    Dephasing,
    GeneratorModel,
    Lindblad,
    OffsetSine,
    Sine,
    SpinBoson,
    Table,
    TraceReplacement,
    describe_model,
)
from .measures import SearchConfig
from .volterra import ExponentialKernel, TabulatedKernel
from .witnesses import (
    DualOperatorNormWitness,
    ExtendedTraceNormWitness,
    FidelityPair,
    HeisenbergSkew,
    InformationFlowPair,
    InvariantOverlap,
    PlainTraceNormWitness,
    RelativeEntropyPair,
    RenyiPair,
    SchrodingerSkew,
    TsallisPair,
)


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field name."""

    def __init__(self, fieldname: str, message: str):
        self.fieldname = fieldname
        super().__init__(f"{fieldname}: {message}")


_KET = {
    "ground": np.array([1, 0], dtype=complex),
    "excited": np.array([0, 1], dtype=complex),
    "zero": np.array([1, 0], dtype=complex),
    "one": np.array([0, 1], dtype=complex),
    "plus": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "minus": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "plus_i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "minus_i": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}

_OBSERVABLE = {
    "sigma_x": SIGMA_X,
    "sigma_y": SIGMA_Y,
    "sigma_z": SIGMA_Z,
    "identity": np.eye(2, dtype=complex),
    "sigma_minus": SIGMA_MINUS,
    "sigma_plus": SIGMA_PLUS,
}

_PAULI_LETTER = {
    "i": np.eye(2, dtype=complex),
    "x": SIGMA_X,
    "y": SIGMA_Y,
    "z": SIGMA_Z,
}


def state_preset(name: str, fieldname: str) -> np.ndarray:
    name = name.strip().lower()
    if name == "maxmixed":
        return 0.5 * np.eye(2, dtype=complex)
    if name in _KET:
        v = _KET[name]
        return np.outer(v, v.conj())
    raise ConfigError(fieldname, f"unknown state preset {name!r}")


def vector_preset(name: str, fieldname: str) -> np.ndarray:
    name = name.strip().lower()
    if name in _KET:
        return _KET[name]
    raise ConfigError(fieldname, f"unknown pure-state preset {name!r}")


def observable_preset(name: str, fieldname: str) -> np.ndarray:
    name = name.strip().lower()
    if name in _OBSERVABLE:
        return _OBSERVABLE[name]
    raise ConfigError(fieldname, f"unknown observable preset {name!r}")


def pauli_product(code: str, fieldname: str) -> np.ndarray:
    code = code.strip().lower()
    if len(code) != 2 or any(c not in _PAULI_LETTER for c in code):
        raise ConfigError(fieldname, f"pauli product must be two of i/x/y/z, got {code!r}")
    return 0.5 * np.kron(_PAULI_LETTER[code[0]], _PAULI_LETTER[code[1]])


# ---------------------------------------------------------------------------
# Witness descriptors
# ---------------------------------------------------------------------------

_DESCRIPTOR_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^()]*)\)\s*$")


def _split_args(body: str):
    args = []
    kwargs = {}
    for token in filter(None, (p.strip() for p in body.split(","))):
        if "=" in token:
            key, val = token.split("=", 1)
            kwargs[key.strip()] = val.strip()
        else:
            args.append(token)
    return args, kwargs


def parse_witness_descriptor(text: str, fieldname: str = "witnesses.specs"):
    """Build a witness spec from a descriptor such as ``blp(plus,minus)``."""
    match = _DESCRIPTOR_RE.match(text)
    if not match:
        raise ConfigError(fieldname, f"malformed witness descriptor {text!r}")
    kind, body = match.group(1), match.group(2)
    args, kwargs = _split_args(body)
    try:
        if kind == "trace_norm_extended":
            code = args[0].split(":", 1)[1] if args and args[0].startswith("pauli:") else None
            if code is None:
                raise ConfigError(fieldname, f"{kind} expects pauli:<xy>, got {text!r}")
            return ExtendedTraceNormWitness(pauli_product(code, fieldname))
        if kind == "dual_operator_norm":
            code = args[0].split(":", 1)[1] if args and args[0].startswith("pauli:") else None
            if code is None:
                raise ConfigError(fieldname, f"{kind} expects pauli:<xy>, got {text!r}")
            return DualOperatorNormWitness(pauli_product(code, fieldname))
        if kind == "trace_norm_plain":
            return PlainTraceNormWitness(observable_preset(args[0], fieldname))
        if kind == "blp":
            return InformationFlowPair(
                state_preset(args[0], fieldname), state_preset(args[1], fieldname)
            )
        if kind == "relative_entropy":
            return RelativeEntropyPair(
                state_preset(args[0], fieldname), state_preset(args[1], fieldname)
            )
        if kind == "renyi":
            return RenyiPair(
                state_preset(args[0], fieldname), state_preset(args[1], fieldname),
                alpha=float(kwargs.get("alpha", 0.5)),
            )
        if kind == "tsallis":
            return TsallisPair(
                state_preset(args[0], fieldname), state_preset(args[1], fieldname),
                q=float(kwargs.get("q", 0.5)),
            )
        if kind == "fidelity":
            return FidelityPair(
                state_preset(args[0], fieldname), state_preset(args[1], fieldname)
            )
        if kind == "overlap":
            return InvariantOverlap(
                state_preset(args[0], fieldname), vector_preset(args[1], fieldname)
            )
        if kind == "skew_schrodinger":
            return SchrodingerSkew(
                state_preset(args[0], fieldname), observable_preset(args[1], fieldname),
                exponent=float(kwargs.get("p", 0.5)),
            )
        if kind == "skew_heisenberg":
            return HeisenbergSkew(
                state_preset(args[0], fieldname), observable_preset(args[1], fieldname),
                exponent=float(kwargs.get("p", 0.5)),
            )
    except ConfigError:
        raise
    except (IndexError, KeyError) as exc:
        raise ConfigError(fieldname, f"missing argument in {text!r}") from exc
    except ValueError as exc:
        raise ConfigError(fieldname, f"invalid witness {text!r}: {exc}") from exc
    raise ConfigError(fieldname, f"unknown witness kind {kind!r}")


# ---------------------------------------------------------------------------
# Model parsing
# ---------------------------------------------------------------------------

def _floats(raw: str, fieldname: str):
    try:
        return tuple(float(x) for x in raw.split(","))
    except ValueError as exc:
        raise ConfigError(fieldname, f"expected comma-separated numbers, got {raw!r}") from exc


def _parse_scalar(section, prefix: str, fieldname: str):
    preset = section.get(prefix, "constant").strip().lower()
    get = lambda key, default: float(section.get(f"{prefix}.{key}", default))
    if preset == "constant":
        return Constant(get("value", 1.0))
    if preset == "sine":
        return Sine(get("amplitude", 1.0), get("angular_frequency", 1.0), get("phase", 0.0))
    if preset == "offset_sine":
        return OffsetSine(get("offset", 0.0), get("amplitude", 1.0),
                          get("angular_frequency", 1.0), get("phase", 0.0))
    if preset == "table":
        times = _floats(section.get(f"{prefix}.times", ""), f"{fieldname}.times")
        values = _floats(section.get(f"{prefix}.values", ""), f"{fieldname}.values")
        if len(times) != len(values) or len(times) < 2:
            raise ConfigError(fieldname, "table needs matching times/values lists")
        return Table(times, values)
    raise ConfigError(fieldname, f"unknown scalar preset {preset!r}")


def parse_model(section) -> GeneratorModel:
    variant = section.get("variant", "").strip().lower()
    if variant == "dephasing":
        return Dephasing(rate=_parse_scalar(section, "rate", "model.rate"))
    if variant == "trace_replacement":
        rate = _parse_scalar(section, "rate", "model.rate")
        target_name = section.get("omega", "maxmixed").strip().lower()
        if target_name == "maxmixed":
            target = ConstantTarget(0.5 * np.eye(2, dtype=complex))
        elif target_name in _KET:
            v = _KET[target_name]
            target = ConstantTarget(np.outer(v, v.conj()))
        elif target_name == "bloch_z_sine":
            target = BlochZSineTarget(
                scale=float(section.get("omega.scale", 1.0)),
                angular_frequency=float(section.get("omega.angular_frequency", 1.0)),
            )
        else:
            raise ConfigError("model.omega", f"unknown target preset {target_name!r}")
        return TraceReplacement(rate=rate, target=target)
    if variant == "spin_boson":
        kind = section.get("kernel", "exponential").strip().lower()
        if kind == "exponential":
            kernel = ExponentialKernel(
                coupling=float(section.get("kernel.coupling", 1.0)),
                rate=float(section.get("kernel.rate", 1.0)),
            )
        elif kind == "table":
            kernel = TabulatedKernel(
                times=np.asarray(_floats(section.get("kernel.times", ""), "model.kernel.times")),
                values=np.asarray(_floats(section.get("kernel.values", ""), "model.kernel.values")),
            )
        else:
            raise ConfigError("model.kernel", f"unknown kernel preset {kind!r}")
        return SpinBoson(kernel=kernel)
    if variant == "gksl":
        ham_spec = section.get("hamiltonian", "none").strip().lower()
        hamiltonian = None
        if ham_spec != "none":
            name, _, coef = ham_spec.partition(":")
            hamiltonian = float(coef or 1.0) * observable_preset(name, "model.hamiltonian")
        noise = []
        index = 1
        while f"noise.{index}.op" in section:
            op = observable_preset(section[f"noise.{index}.op"], f"model.noise.{index}.op")
            rate = _parse_scalar(section, f"noise.{index}.rate", f"model.noise.{index}.rate")
            noise.append((op, rate))
            index += 1
        if not noise and hamiltonian is None:
            raise ConfigError("model.noise", "gksl model needs a hamiltonian or noise terms")
        return Lindblad(hamiltonian=hamiltonian, noise=tuple(noise), dim=2)
    raise ConfigError("model.variant", f"unknown model variant {variant!r}")


# ---------------------------------------------------------------------------
# Full run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    model: GeneratorModel | None
    t_max: float
    nodes: int
    backend: str
    witness_descriptors: list
    witness_specs: list
    measures_enabled: bool
    measure_rhp: bool
    measure_witness: bool
    measure_blp: bool
    search: SearchConfig
    out_dir: Path
    prefix: str
    divisibility_tol: float = 1e-8
    model_descriptor: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.nodes)


def load_config(path, seed_override: int | None = None,
                backend_override: str | None = None,
                out_override: str | None = None,
                for_import: bool = False) -> RunConfig:
    """Parse and validate a run configuration.

    With ``for_import=True`` the [model] and [grid] sections become optional:
    the trajectory file supplies both, and generator-based outputs are skipped.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError("config", f"cannot read config file {path!r}")

    model = None
    if "model" in parser and parser["model"].get("variant", "").strip():
        model = parse_model(parser["model"])
    elif not for_import:
        raise ConfigError("model", "missing [model] section")

    grid = parser["grid"] if "grid" in parser else {}
    if not grid and for_import:
        grid = {"t_max": "1.0", "nodes": "16"}  # placeholders, file supplies the grid
    try:
        t_max = float(grid.get("t_max", "nan"))
    except ValueError as exc:
        raise ConfigError("grid.t_max", "must be a number") from exc
    if not np.isfinite(t_max) or t_max <= 0:
        raise ConfigError("grid.t_max", f"must be positive, got {grid.get('t_max')!r}")
    try:
        nodes = int(grid.get("nodes", "257"))
    except ValueError as exc:
        raise ConfigError("grid.nodes", "must be an integer") from exc
    if nodes < 16:
        raise ConfigError("grid.nodes", f"must be at least 16, got {nodes}")

    backend = (backend_override or
               (parser["backend"].get("kind", "auto") if "backend" in parser else "auto")).lower()
    if backend not in ("auto", "analytic", "numeric"):
        raise ConfigError("backend.kind", f"must be auto/analytic/numeric, got {backend!r}")

    descriptors = []
    specs = []
    if "witnesses" in parser and parser["witnesses"].get("specs", "").strip():
        for token in parser["witnesses"]["specs"].split(";"):
            token = token.strip()
            if not token:
                continue
            descriptors.append(token)
            specs.append(parse_witness_descriptor(token))

    meas = parser["measures"] if "measures" in parser else {}
    enabled = str(meas.get("enabled", "true")).lower() in ("1", "true", "yes", "on")
    flag = lambda key: str(meas.get(key, "true")).lower() in ("1", "true", "yes", "on")
    try:
        divisibility_tol = float(meas.get("divisibility_tol", "1e-8"))
    except ValueError as exc:
        raise ConfigError("measures.divisibility_tol", "must be a number") from exc
    if divisibility_tol <= 0:
        raise ConfigError("measures.divisibility_tol", "must be positive")

    opt = parser["search"] if "search" in parser else {}
    try:
        search = SearchConfig(
            seeds=int(opt.get("seeds", "64")),
            iterations=int(opt.get("iterations", "200")),
            rng_seed=seed_override if seed_override is not None else int(opt.get("rng_seed", "0")),
        )
    except ValueError as exc:
        raise ConfigError("search", f"invalid search setting: {exc}") from exc
    if search.seeds < 1 or search.iterations < 0:
        raise ConfigError("search", "seeds must be >= 1 and iterations >= 0")

    out = parser["output"] if "output" in parser else {}
    out_dir = Path(out_override or out.get("directory", "."))
    prefix = out.get("prefix", "run")

    return RunConfig(
        model=model,
        t_max=t_max,
        nodes=nodes,
        backend=backend,
        witness_descriptors=descriptors,
        witness_specs=specs,
        measures_enabled=enabled,
        measure_rhp=flag("rhp"),
        measure_witness=flag("witness"),
        measure_blp=flag("blp"),
        search=search,
        out_dir=out_dir,
        prefix=prefix,
        divisibility_tol=divisibility_tol,
        model_descriptor=describe_model(model),
    )
