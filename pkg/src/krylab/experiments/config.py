"""Declarative experiment configuration and operator/datum spec parsing."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import InvalidInput
from ..gallery import (Friedrichs1DSpec, PrototypeSpec, ShiftSpec, build_compact_normal,
                       build_friedrichs_1d, build_prototype, build_shift, fourier_mode, jordan_block,
                       shift_noncyclic_datum, shift_szego_datum)
from ..hilbert import DenseOperator, as_vector

EXPERIMENTS = {
    "E1_selfadjoint_cg": "self/skew-adjoint solvability: CG or Galerkin to the minimal-norm solution",
    "E2_shift_loss_gain": "loss and gain of Krylov solvability for the right shift",
    "E3_normal_equations": "normal-equation route and K(A*A, A*g) inside K(A, g) when A + A* = a I",
    "E4_prototype_friedrichs": "-f' + c f = g on a periodic grid with band-limited data",
    "E5_compact_normal": "compact normal operators: unique minimal-norm Krylov solution",
    "E6_perturbation_limits": "Krylov solvability along weak-gap limits of perturbed data",
}



def to_complex(x) -> complex:
    """Parse a JSON complex: a number, ``[re, im]`` or ``{"re": .., "im": ..}``."""
    if isinstance(x, bool):
        raise InvalidInput("booleans are not numbers")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(t, (int, float)) for t in x):
        return complex(x[0], x[1])
    if isinstance(x, dict) and set(x) <= {"re", "im"}:
        return complex(x.get("re", 0.0), x.get("im", 0.0))
    raise InvalidInput(f"cannot parse complex number from {x!r}")


def to_complex_matrix(rows) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InvalidInput("matrix must be a nonempty list of rows")
    return np.array([[to_complex(v) for v in row] for row in rows], dtype=complex)


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ShiftOp(_Spec):
    kind: Literal["shift"]
    N: int = Field(ge=1)
    fill: Literal["zero_fill", "cyclic"] = "zero_fill"


class CompactNormalOp(_Spec):
    kind: Literal["compact_normal"]
    eigenvalues: list[Any] = Field(min_length=1)


class MatrixOp(_Spec):
    kind: Literal["matrix"]
    rows: list[list[Any]]


class JordanOp(_Spec):
    kind: Literal["jordan"]
    size: int = Field(ge=1)


class PrototypeOp(_Spec):
    kind: Literal["prototype"]
    modes: int = Field(ge=2)
    L: float = Field(default=2 * np.pi, gt=0)
    c: Any = 1.0


class FriedrichsOp(_Spec):
    kind: Literal["friedrichs_1d"]
    r: int = Field(ge=1)
    M: int = Field(ge=2)
    L: float = Field(default=2 * np.pi, gt=0)
    B: list[list[Any]]
    C: list[list[Any]]
    mu: float = Field(gt=0)


class RandomOp(_Spec):
    kind: Literal["random"]
    family: Literal["hermitian", "spd", "psd", "skew", "general", "normal"]
    dim: int = Field(ge=1, le=512)
    kernel_dim: int = Field(default=0, ge=0)


OperatorSpec = Annotated[Union[ShiftOp, CompactNormalOp, MatrixOp, JordanOp, PrototypeOp,
                               FriedrichsOp, RandomOp], Field(discriminator="kind")]


class VectorDatum(_Spec):
    kind: Literal["vector"]
    values: list[Any] = Field(min_length=1)


class CanonicalDatum(_Spec):
    kind: Literal["canonical"]
    index: int


class SzegoDatum(_Spec):
    kind: Literal["szego"]
    scale: float = Field(default=1.0, gt=0)


class FourierDatum(_Spec):
    kind: Literal["fourier_modes"]
    modes: list[int] = Field(min_length=1)
    coefficients: list[Any] | None = None


class RangeDatum(_Spec):
    kind: Literal["range"]
    preimage: list[Any] | None = None


class RandomDatum(_Spec):
    kind: Literal["random"]


class OnesDatum(_Spec):
    kind: Literal["ones"]


DatumSpec = Annotated[Union[VectorDatum, CanonicalDatum, SzegoDatum, FourierDatum, RangeDatum,
                            RandomDatum, OnesDatum], Field(discriminator="kind")]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment_id: Literal[tuple(EXPERIMENTS)]  # type: ignore[valid-type]
    operator_spec: OperatorSpec
    datum_spec: DatumSpec
    params: dict[str, Any] = Field(default_factory=dict)
    tolerances: dict[str, float] = Field(default_factory=dict)
    seed: int
    output_dir: str = "out"

    @field_validator("tolerances")
    @classmethod
    def _positive(cls, v):
        for key, val in v.items():
            if not val > 0:
                raise ValueError(f"tolerance {key} must be positive")
        return v


def load_config(path: str | os.PathLike, env: dict | None = None) -> ExperimentConfig:
    """Read and validate a config file; ``LAB_SEED`` overrides the seed."""
    env = os.environ if env is None else env
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from exc
    if isinstance(raw, dict) and env.get("LAB_SEED") not in (None, ""):
        try:
            raw["seed"] = int(env["LAB_SEED"])
        except ValueError as exc:
            raise InvalidInput("LAB_SEED must be an integer") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise InvalidInput(str(exc)) from exc


@dataclass(frozen=True)
class BuiltOperator:
    """An operator plus the geometry needed by guards and weak norms."""

    op: DenseOperator
    shift: ShiftSpec | None = None
    grid: tuple[int, float] | None = None
    partner: DenseOperator | None = None


def _random_unitary(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_operator(family: str, dim: int, rng: np.random.Generator, kernel_dim: int = 0) -> DenseOperator:
    if kernel_dim >= dim and family in ("psd",):
        raise InvalidInput("kernel_dim must be smaller than dim")
    q = _random_unitary(rng, dim)
    if family == "hermitian":
        lam = rng.uniform(-5, 5, dim)
    elif family == "spd":
        lam = rng.uniform(0.5, 10, dim)
    elif family == "psd":
        lam = rng.uniform(0.5, 10, dim)
        lam[:kernel_dim] = 0.0
    elif family == "skew":
        lam = 1j * rng.uniform(-5, 5, dim)
    elif family == "normal":
        lam = rng.uniform(0.5, 5, dim) * np.exp(2j * np.pi * rng.uniform(size=dim))
    else:
        m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        return DenseOperator(m / np.sqrt(dim) + 3 * np.eye(dim), name="random_general")
    m = (q * lam) @ q.conj().T
    if family in ("hermitian", "spd", "psd"):
        m = (m + m.conj().T) / 2
    elif family == "skew":
        m = (m - m.conj().T) / 2
    return DenseOperator(m, name=f"random_{family}")


def prototype_c(spec: PrototypeOp) -> np.ndarray:
    M, L = spec.modes, spec.L
    c = spec.c
    if isinstance(c, dict) and "offset" in c:
        return PrototypeSpec.sinusoidal(M, float(c["offset"]), float(c.get("amplitude", 0.0)),
                                        int(c.get("frequency", 1)), L).c
    if isinstance(c, list) and len(c) == M:
        return np.array([to_complex(v) for v in c])
    return np.full(M, to_complex(c))


def build_operator(spec, rng: np.random.Generator) -> BuiltOperator:
    if isinstance(spec, ShiftOp):
        s = ShiftSpec(spec.N, spec.fill)
        return BuiltOperator(build_shift(s), shift=s)
    if isinstance(spec, CompactNormalOp):
        return BuiltOperator(build_compact_normal([to_complex(v) for v in spec.eigenvalues]))
    if isinstance(spec, MatrixOp):
        return BuiltOperator(DenseOperator(to_complex_matrix(spec.rows), name="matrix"))
    if isinstance(spec, JordanOp):
        return BuiltOperator(jordan_block(spec.size))
    if isinstance(spec, PrototypeOp):
        op = build_prototype(PrototypeSpec(prototype_c(spec), spec.L))
        return BuiltOperator(op, grid=(spec.modes, spec.L), partner=op.adjoint())
    if isinstance(spec, FriedrichsOp):
        fs = Friedrichs1DSpec(spec.r, spec.M, spec.L, to_complex_matrix(spec.B),
                              to_complex_matrix(spec.C), spec.mu)
        a0, a0t = build_friedrichs_1d(fs)
        return BuiltOperator(a0, grid=(spec.M, spec.L), partner=a0t)
    if isinstance(spec, RandomOp):
        return BuiltOperator(random_operator(spec.family, spec.dim, rng, spec.kernel_dim))
    raise InvalidInput(f"unsupported operator spec {spec!r}")


def build_datum(spec, built: BuiltOperator, rng: np.random.Generator) -> np.ndarray:
    op = built.op
    if isinstance(spec, VectorDatum):
        return as_vector([to_complex(v) for v in spec.values], op.dim)
    if isinstance(spec, CanonicalDatum):
        if built.shift is not None:
            return shift_noncyclic_datum(built.shift, spec.index)
        if not 0 <= spec.index < op.dim:
            raise InvalidInput(f"index {spec.index} outside 0..{op.dim - 1}")
        e = np.zeros(op.dim, dtype=complex)
        e[spec.index] = 1
        return as_vector(e)
    if isinstance(spec, SzegoDatum):
        if built.shift is None:
            raise InvalidInput("the szego datum needs a shift operator")
        return shift_szego_datum(built.shift, spec.scale)
    if isinstance(spec, FourierDatum):
        if built.grid is None:
            raise InvalidInput("fourier_modes data need a grid operator")
        M, L = built.grid
        r = op.dim // M
        coeffs = spec.coefficients or [1.0] * len(spec.modes)
        if len(coeffs) != len(spec.modes):
            raise InvalidInput("coefficients and modes differ in length")
        g = np.zeros(M, dtype=complex)
        for k, c in zip(spec.modes, coeffs):
            if abs(k) > M // 2:
                raise InvalidInput(f"mode {k} not resolved by {M} grid points")
            g += to_complex(c) * fourier_mode(M, L, k)
        return as_vector(np.repeat(g, r) / np.sqrt(r))
    if isinstance(spec, RangeDatum):
        if spec.preimage is None:
            u = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
        else:
            u = np.array([to_complex(v) for v in spec.preimage])
        return as_vector(op.apply(as_vector(u, op.dim)))
    if isinstance(spec, RandomDatum):
        return as_vector(rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim))
    if isinstance(spec, OnesDatum):
        return as_vector(np.ones(op.dim))
    raise InvalidInput(f"unsupported datum spec {spec!r}")


def operator_from_json(raw: dict, seed: int = 0) -> BuiltOperator:
    from pydantic import TypeAdapter
    try:
        spec = TypeAdapter(OperatorSpec).validate_python(raw)
    except ValidationError as exc:
        raise InvalidInput(str(exc)) from exc
    return build_operator(spec, np.random.default_rng(seed))


def datum_from_json(raw: dict, built: BuiltOperator, seed: int = 0) -> np.ndarray:
    from pydantic import TypeAdapter
    try:
        spec = TypeAdapter(DatumSpec).validate_python(raw)
    except ValidationError as exc:
        raise InvalidInput(str(exc)) from exc
    return build_datum(spec, built, np.random.default_rng(seed + 1))
