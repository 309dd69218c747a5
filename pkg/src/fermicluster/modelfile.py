"""Plain-text sectioned model files.

::

    [model]
    n_modes = 4
    beta = 1.0
    mu = 0.5

    [kinetic]
    # i j re im ; the conjugate entry (j, i) is filled in
    0 2 -1.0 0.0

    [interaction]
    order = 2
    0 1 1 0 0.3 0.0

    [run]
    N = 8, 16, 32, 64
    seed = 0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from fermicluster.model import InteractionTerm, ModelError, ModelSpec

SECTIONS = ("model", "kinetic", "interaction", "run")
MODEL_KEYS = ("n_modes", "beta", "mu")


@dataclass(frozen=True)
class RunConfig:
    """Command parameters read from the [run] section."""

    N: tuple = (8, 16, 32, 64)
    identity_N: tuple = (1, 2, 3, 4)
    source_degree: int = 2
    m_max: int = 2
    quad_tol: float = 1e-10
    detbound_trials: int = 10000
    detbound_max_size: int = 4
    lie_trials: int = 50
    symbol_trials: int = 20
    reexp_N: tuple = (2, 4, 8)
    oracle_models: int = 3
    seed: int = 0

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


_INT_LISTS = ("N", "identity_N", "reexp_N")
_INTS = ("source_degree", "m_max", "detbound_trials", "detbound_max_size", "lie_trials", "symbol_trials", "oracle_models", "seed")
_FLOATS = ("quad_tol",)


class ModelFileError(ValueError):
    """Malformed model file; carries the 1-based line and column."""

    def __init__(self, message: str, line: int = 0, col: int = 0, path: str = "<model>"):
        self.line, self.col, self.path = line, col, path
        super().__init__(f"{path}:{line}:{col}: {message}")


@dataclass
class ModelFile:
    spec: ModelSpec
    run: RunConfig = field(default_factory=RunConfig)
    path: str = "<model>"


def _tokens(text: str):
    """(token, column) pairs of a whitespace-separated line."""
    out, col = [], 0
    for tok in text.split():
        col = text.index(tok, col)
        out.append((tok, col + 1))
        col += len(tok)
    return out


def _number(tok, cast, line, col, path):
    try:
        val = cast(tok)
    except ValueError:
        raise ModelFileError(f"expected {cast.__name__}, got {tok!r}", line, col, path) from None
    if cast is float and not math.isfinite(val):
        raise ModelFileError(f"non-finite value {tok!r}", line, col, path)
    return val


def parse_model(text: str, path: str = "<model>") -> ModelFile:
    section = None
    header: dict[str, tuple] = {}
    kinetic: dict[tuple[int, int], tuple[complex, int]] = {}
    blocks: list[tuple[int, int, dict]] = []  # (order, line, coefficients)
    run: dict = {}
    seen: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        indent = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ModelFileError("unterminated section header", lineno, indent, path)
            name = stripped[1:-1].strip()
            if name not in SECTIONS:
                raise ModelFileError(f"unknown section [{name}]", lineno, indent, path)
            if name in seen and name != "interaction":
                raise ModelFileError(f"duplicate section [{name}]", lineno, indent, path)
            seen.add(name)
            section = name
            continue
        if section is None:
            raise ModelFileError("content before the first section", lineno, indent, path)

        if "=" in stripped and section in ("model", "run", "interaction"):
            key, _, value = stripped.partition("=")
            key, value = key.strip(), value.strip()
            eq = line.index("=")
            vcol = (line.index(value, eq) if value else eq) + 1
            if section == "interaction":
                if key != "order":
                    raise ModelFileError(f"unknown key {key!r} in [interaction]", lineno, indent, path)
                order = _number(value, int, lineno, vcol, path)
                if order < 1:
                    raise ModelFileError("order must be >= 1", lineno, vcol, path)
                blocks.append((order, lineno, {}))
            elif section == "model":
                if key not in MODEL_KEYS:
                    raise ModelFileError(f"unknown key {key!r} in [model]", lineno, indent, path)
                if key in header:
                    raise ModelFileError(f"duplicate key {key!r}", lineno, indent, path)
                cast = int if key == "n_modes" else float
                header[key] = (_number(value, cast, lineno, vcol, path), lineno)
            else:
                if key in run:
                    raise ModelFileError(f"duplicate key {key!r}", lineno, indent, path)
                if key in _INT_LISTS:
                    items = [v.strip() for v in value.split(",") if v.strip()]
                    if not items:
                        raise ModelFileError(f"{key} needs at least one value", lineno, vcol, path)
                    vals = tuple(_number(v, int, lineno, vcol, path) for v in items)
                    if any(v < 1 for v in vals):
                        raise ModelFileError(f"{key} entries must be >= 1", lineno, vcol, path)
                    run[key] = vals
                elif key in _INTS:
                    val = _number(value, int, lineno, vcol, path)
                    if val < 0 or (key == "seed" and val >= 1 << 64):
                        raise ModelFileError(f"{key} out of range", lineno, vcol, path)
                    run[key] = val
                elif key in _FLOATS:
                    val = _number(value, float, lineno, vcol, path)
                    if not val > 0:
                        raise ModelFileError(f"{key} must be positive", lineno, vcol, path)
                    run[key] = val
                else:
                    raise ModelFileError(f"unknown key {key!r} in [run]", lineno, indent, path)
            continue

        toks = _tokens(line)
        if section == "kinetic":
            if len(toks) != 4:
                raise ModelFileError("kinetic entry needs 'i j re im'", lineno, indent, path)
            i = _number(toks[0][0], int, lineno, toks[0][1], path)
            j = _number(toks[1][0], int, lineno, toks[1][1], path)
            z = complex(_number(toks[2][0], float, lineno, toks[2][1], path), _number(toks[3][0], float, lineno, toks[3][1], path))
            if i == j and z.imag != 0:
                raise ModelFileError("diagonal kinetic entry must be real", lineno, toks[3][1], path)
            for key, val in (((i, j), z), ((j, i), z.conjugate())):
                if key in kinetic and kinetic[key][0] != val:
                    raise ModelFileError(
                        f"entry ({key[0]}, {key[1]}) conflicts with line {kinetic[key][1]}", lineno, indent, path
                    )
            kinetic[(i, j)] = (z, lineno)
            kinetic[(j, i)] = (z.conjugate(), lineno)
        elif section == "interaction":
            if not blocks:
                raise ModelFileError("interaction entries need a preceding 'order = m'", lineno, indent, path)
            order, _, coeffs = blocks[-1]
            if len(toks) != 2 * order + 2:
                raise ModelFileError(f"order-{order} entry needs {2 * order} indices and 're im'", lineno, indent, path)
            idx = tuple(_number(t, int, lineno, c, path) for t, c in toks[: 2 * order])
            re = _number(toks[-2][0], float, lineno, toks[-2][1], path)
            im = _number(toks[-1][0], float, lineno, toks[-1][1], path)
            coeffs[idx] = coeffs.get(idx, 0) + complex(re, im)
        else:
            raise ModelFileError(f"expected 'key = value' in [{section}]", lineno, indent, path)

    for key in MODEL_KEYS:
        if key not in header:
            raise ModelFileError(f"[model] is missing {key!r}", 0, 0, path)
    n = header["n_modes"][0]
    if n < 1:
        raise ModelFileError("n_modes must be >= 1", header["n_modes"][1], 1, path)
    kin = np.zeros((n, n), dtype=complex)
    for (i, j), (z, lineno) in kinetic.items():
        if not (0 <= i < n and 0 <= j < n):
            raise ModelFileError(f"kinetic index ({i}, {j}) out of range", lineno, 1, path)
        kin[i, j] = z
    terms = []
    for order, lineno, coeffs in blocks:
        for idx in coeffs:
            if any(not 0 <= x < n for x in idx):
                raise ModelFileError(f"interaction index {idx} out of range", lineno, 1, path)
        if coeffs:
            terms.append(InteractionTerm(order, coeffs))
    try:
        spec = ModelSpec(n, kin, header["mu"][0], header["beta"][0], tuple(terms))
    except ModelError as exc:
        raise ModelFileError(str(exc), 0, 0, path) from None
    return ModelFile(spec, replace(RunConfig(), **run), path)


def load_model(path) -> ModelFile:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ModelFileError(f"cannot read file: {exc.strerror}", 0, 0, str(p)) from None
    return parse_model(text, str(p))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_model(spec: ModelSpec, run: RunConfig | None = None) -> str:
    """Inverse of :func:`parse_model` (upper triangle of the kinetic matrix)."""
    lines = ["[model]", f"n_modes = {spec.n_modes}", f"beta = {_fmt(spec.beta)}", f"mu = {_fmt(spec.mu)}", "", "[kinetic]"]
    k = spec.kinetic
    for i in range(spec.n_modes):
        for j in range(i, spec.n_modes):
            if k[i, j] != 0:
                lines.append(f"{i} {j} {_fmt(k[i, j].real)} {_fmt(k[i, j].imag)}")
    for term in spec.interactions:
        lines += ["", "[interaction]", f"order = {term.order}"]
        for idx, c in sorted(term.coefficients.items()):
            c = complex(c)
            lines.append(" ".join(str(x) for x in idx) + f" {_fmt(c.real)} {_fmt(c.imag)}")
    if run is not None:
        lines += ["", "[run]"]
        for key, val in run.as_dict().items():
            lines.append(f"{key} = " + (", ".join(str(v) for v in val) if isinstance(val, list) else str(val)))
    return "\n".join(lines) + "\n"
