"""JSON problem and datum files.

Floats go through Python's shortest round-trip ``repr`` (which is what the
json module emits), so writing a problem and reading it back reproduces
every matrix bit for bit.

Problem file::

    {"schema": "kfp-problem/1", "name": "kolmogorov", "N": 2, "q": 1,
     "B": [[0.0, 0.0], [1.0, 0.0]], "blocks": [1, 1],
     "coefficients": {"breakpoints": [0.0], "pieces": [[[1.0]]]},
     "nu": 1.0}

Datum file (``variant`` is one of ``grid``, ``bounded``, ``gaussian_growth``)::

    {"schema": "kfp-datum/1", "variant": "gaussian_growth",
     "expression": "exp(x1^2)", "alpha": 1.01}
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .cauchy import BoundedCallable, CauchyDatum, GaussianGrowth, GridSampled
from .errors import ProblemFileError, ValidationError
from .expr import compile_expression
from .operator import CoefficientTrack, OperatorSpec, validate_structure

PROBLEM_SCHEMA = "kfp-problem/1"
DATUM_SCHEMA = "kfp-datum/1"
BUILTIN_PREFIX = "builtin:"


@dataclass(frozen=True)
class RawProblem:
    """Parsed but not yet validated problem data."""

    name: str
    B: np.ndarray
    blocks: tuple[int, ...]
    breakpoints: np.ndarray
    pieces: np.ndarray
    nu: float | None

    @property
    def N(self) -> int:
        return self.B.shape[0]

    @property
    def q(self) -> int:
        return self.pieces.shape[1]

    def build(self) -> OperatorSpec:
        track = CoefficientTrack(self.breakpoints, self.pieces)
        return OperatorSpec.build(self.B, self.blocks, track, nu=self.nu, name=self.name)


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ProblemFileError(f"{where}: missing key {key!r}")
    return doc[key]


def _matrix(value, n: int, what: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ProblemFileError(f"{what} must be numeric") from None
    if arr.ndim == 1 and arr.size == n * n:
        arr = arr.reshape(n, n)
    if arr.shape != (n, n):
        raise ProblemFileError(f"{what} must be {n}x{n} (nested or flat row-major), got shape {arr.shape}")
    return arr


def _read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def parse_problem(doc: dict, where: str = "problem") -> RawProblem:
    if not isinstance(doc, dict):
        raise ProblemFileError(f"{where}: top level must be an object")
    schema = doc.get("schema")
    if schema != PROBLEM_SCHEMA:
        raise ProblemFileError(f"{where}: expected schema {PROBLEM_SCHEMA!r}, got {schema!r}")
    try:
        N = int(_require(doc, "N", where))
        q = int(_require(doc, "q", where))
        blocks = tuple(int(v) for v in _require(doc, "blocks", where))
    except (TypeError, ValueError):
        raise ProblemFileError(f"{where}: N, q and blocks must be integers") from None
    if N < 1 or not 1 <= q <= N:
        raise ProblemFileError(f"{where}: need 1 <= q <= N, got q = {q}, N = {N}")
    B = _matrix(_require(doc, "B", where), N, "B")
    coeff = _require(doc, "coefficients", where)
    if not isinstance(coeff, dict):
        raise ProblemFileError(f"{where}: coefficients must be an object")
    try:
        bp = np.array(_require(coeff, "breakpoints", where), dtype=float).reshape(-1)
        pieces = np.array(_require(coeff, "pieces", where), dtype=float)
    except (TypeError, ValueError):
        raise ProblemFileError(f"{where}: coefficients must be numeric") from None
    if pieces.ndim == 2:
        pieces = pieces[None]
    if pieces.ndim != 3 or pieces.shape[1:] != (q, q):
        raise ProblemFileError(f"{where}: pieces must be a list of {q}x{q} matrices, got {pieces.shape}")
    nu = doc.get("nu")
    if nu is not None:
        try:
            nu = float(nu)
        except (TypeError, ValueError):
            raise ProblemFileError(f"{where}: nu must be a number") from None
    if blocks and blocks[0] != q:
        raise ValidationError(f"first block size m0 = {blocks[0]} must equal q = {q}")
    return RawProblem(name=str(doc.get("name", "")), B=B, blocks=blocks, breakpoints=bp,
                      pieces=pieces, nu=nu)


def builtin_problem_path(name: str):
    ref = resources.files("kfpkernel") / "data" / f"{name}.json"
    if not ref.is_file():
        available = sorted(p.name[:-5] for p in (resources.files("kfpkernel") / "data").iterdir()
                           if p.name.endswith(".json"))
        raise ProblemFileError(f"unknown builtin problem {name!r}; available: {available}")
    return ref


def read_raw_problem(path) -> RawProblem:
    """Read a problem file; ``builtin:<name>`` refers to the bundled fixtures."""
    path = str(path)
    if path.startswith(BUILTIN_PREFIX):
        name = path[len(BUILTIN_PREFIX):]
        doc = json.loads(builtin_problem_path(name).read_text(encoding="utf-8"))
    else:
        doc = _read_json(path)
    return parse_problem(doc, where=path)


def load_problem(path) -> OperatorSpec:
    return read_raw_problem(path).build()


def problem_to_dict(spec: OperatorSpec) -> dict:
    return {
        "schema": PROBLEM_SCHEMA,
        "name": spec.name,
        "N": spec.N,
        "q": spec.q,
        "B": spec.B.tolist(),
        "blocks": list(spec.structure.m),
        "coefficients": {
            "breakpoints": spec.track.breakpoints.tolist(),
            "pieces": spec.track.pieces.tolist(),
        },
        "nu": spec.nu,
    }


def _dumps_flat(doc: dict) -> str:
    """One top-level key per line, values compact."""
    body = ",\n".join(f"  {json.dumps(k)}: {json.dumps(v)}" for k, v in doc.items())
    return "{\n" + body + "\n}\n"


def dumps_problem(spec: OperatorSpec) -> str:
    return _dumps_flat(problem_to_dict(spec))


def save_problem(spec: OperatorSpec, path) -> None:
    Path(path).write_text(dumps_problem(spec), encoding="utf-8")


# -- data ------------------------------------------------------------------------

def parse_datum(doc: dict, N: int, where: str = "datum") -> CauchyDatum:
    if not isinstance(doc, dict):
        raise ProblemFileError(f"{where}: top level must be an object")
    if doc.get("schema") != DATUM_SCHEMA:
        raise ProblemFileError(f"{where}: expected schema {DATUM_SCHEMA!r}, got {doc.get('schema')!r}")
    variant = _require(doc, "variant", where)
    if variant == "grid":
        try:
            box = np.array(_require(doc, "box", where), dtype=float)
            shape = tuple(int(v) for v in _require(doc, "shape", where))
            values = np.array(_require(doc, "values", where), dtype=float)
        except (TypeError, ValueError):
            raise ProblemFileError(f"{where}: grid box, shape and values must be numeric") from None
        if box.shape != (N, 2) or len(shape) != N:
            raise ProblemFileError(f"{where}: grid needs an ({N}, 2) box and {N} axis sizes")
        if values.size != int(np.prod(shape)):
            raise ProblemFileError(f"{where}: {values.size} values do not fill shape {shape}")
        try:
            return GridSampled(box, values.reshape(shape))
        except ValueError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    if variant == "bounded":
        expr = compile_expression(str(_require(doc, "expression", where)), N)
        return BoundedCallable(expr, float(doc.get("sup_bound", np.inf)))
    if variant == "gaussian_growth":
        expr = compile_expression(str(_require(doc, "expression", where)), N)
        try:
            alpha = float(_require(doc, "alpha", where))
        except (TypeError, ValueError):
            raise ProblemFileError(f"{where}: alpha must be a number") from None
        if not alpha > 0:
            raise ValidationError(f"{where}: alpha must be positive, got {alpha}")
        return GaussianGrowth(expr, alpha)
    raise ProblemFileError(f"{where}: unknown datum variant {variant!r}")


def load_datum(path, N: int) -> CauchyDatum:
    return parse_datum(_read_json(path), N, where=str(path))


def datum_to_dict(datum: CauchyDatum) -> dict:
    if isinstance(datum, GridSampled):
        return {"schema": DATUM_SCHEMA, "variant": "grid", "box": datum.box.tolist(),
                "shape": list(datum.values.shape), "values": datum.values.reshape(-1).tolist()}
    source = getattr(datum.func, "source", None)
    if source is None:
        raise ValueError("only expression-backed data can be serialized")
    if isinstance(datum, GaussianGrowth):
        return {"schema": DATUM_SCHEMA, "variant": "gaussian_growth", "expression": source,
                "alpha": datum.alpha}
    out = {"schema": DATUM_SCHEMA, "variant": "bounded", "expression": source}
    if np.isfinite(datum.sup_bound):
        out["sup_bound"] = datum.sup_bound
    return out


def check_structure_only(raw: RawProblem):
    """Structure validation without building the spec (used by ``info``)."""
    return validate_structure(raw.B, raw.blocks)
