"""Function specifications: the builtin corpus, small expressions in x, and CSV tables.

A spec string is parsed as a Python expression (never executed).  Builtin calls::

    pow_slowvar(kappa, ell)   x**kappa * ell(x), ell in one/log/log2/loglog/exp_sqrt_log
    const(c)
    sin_osc                   2 + sin(x)
    affine_phi(a, rho)        a + rho*x
    sqrt_phi                  sqrt(x)
    spiked(base, fraction, height)

Anything else must be an arithmetic expression in ``x`` (``n`` is an alias)
using + - * / **, numeric constants, ``pi``, ``e`` and the elementwise
functions in ``_FUNCS``; builtins may appear inside expressions.
"""
from __future__ import annotations

import ast
import csv
import io
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, DomainError

SLOWLY_VARYING = {
    "one": lambda x: np.ones_like(x),
    "log": np.log,
    "log2": lambda x: np.log(x) ** 2,
    "loglog": lambda x: np.log(np.log(x)),
    "exp_sqrt_log": lambda x: np.exp(np.sqrt(np.log(x))),
}

_FUNCS = {
    "log": np.log,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "tanh": np.tanh,
    "arctan": np.arctan,
    "log1p": np.log1p,
    "expm1": np.expm1,
    "abs": np.abs,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class FunctionSpec:
    """A real function of one real variable, evaluated elementwise on arrays."""

    def __init__(self, name, fn, *, kind="builtin", meta=None):
        self.name = name
        self._fn = fn
        self.kind = kind
        self.meta = dict(meta or {})

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = np.asarray(self._fn(arr), dtype=float)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).copy()
        return out.item() if out.ndim == 0 else out

    def __repr__(self):
        return f"FunctionSpec({self.name!r})"

    def describe(self) -> dict:
        return {"name": self.name, "kind": self.kind, **self.meta}

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "FunctionSpec":
        text = text.strip()
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse function spec {text!r}: {exc.msg}") from None
        meta = {}
        fn = _compile(tree.body, seed, meta)
        return cls(ast.unparse(tree.body), fn, kind="builtin", meta=meta)

    @classmethod
    def tabulated(cls, xs, values, name="tabulated") -> "FunctionSpec":
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != vs.shape or xs.size < 2:
            raise DataFormatError("tabulated function needs two equal-length 1-d arrays")
        if np.any(np.diff(xs) <= 0):
            raise DataFormatError("tabulated x values must be strictly increasing")
        lo, hi = xs[0], xs[-1]

        def fn(x):
            if np.any((x < lo) | (x > hi)):
                raise DomainError(f"tabulated function {name!r} is defined on [{lo}, {hi}] only")
            return np.interp(x, xs, vs)

        spec = cls(name, fn, kind="tabulated", meta={"points": int(xs.size)})
        spec.xs, spec.values = xs, vs
        return spec

    @classmethod
    def from_csv(cls, path) -> "FunctionSpec":
        xs, vs = read_csv(path)
        return cls.tabulated(xs, vs, name=f"csv:{Path(path).name}")


def slowly_varying(name: str) -> FunctionSpec:
    if name not in SLOWLY_VARYING:
        raise ConfigError(f"unknown slowly varying function {name!r}; choose from {sorted(SLOWLY_VARYING)}")
    return FunctionSpec(name, SLOWLY_VARYING[name], meta={"slowly_varying": name})


def _number(node) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _number(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Name) and node.id in ("pi", "e"):
        return math.pi if node.id == "pi" else math.e
    raise ConfigError(f"expected a number, got {ast.unparse(node)!r}")


def _builtin(name, args, seed, meta):
    def need(k):
        if len(args) != k:
            raise ConfigError(f"{name} takes {k} argument(s), got {len(args)}")

    if name == "pow_slowvar":
        need(2)
        kappa = _number(args[0])
        ell_node = args[1]
        ell = ell_node.id if isinstance(ell_node, ast.Name) else None
        if ell not in SLOWLY_VARYING:
            raise ConfigError(f"pow_slowvar: unknown slowly varying part {ast.unparse(ell_node)!r}")
        ell_fn = SLOWLY_VARYING[ell]
        meta.update(index=kappa, slowly_varying=ell)
        return lambda x: x**kappa * ell_fn(x)
    if name == "const":
        need(1)
        c = _number(args[0])
        return lambda x: np.full_like(x, c)
    if name == "sin_osc":
        need(0)
        return lambda x: 2.0 + np.sin(x)
    if name == "affine_phi":
        need(2)
        a, rho = _number(args[0]), _number(args[1])
        return lambda x: a + rho * x
    if name == "sqrt_phi":
        need(0)
        return np.sqrt
    if name == "spiked":
        need(3)
        base = _compile(args[0], seed, meta)
        fraction, height = _number(args[1]), _number(args[2])
        if not 0.0 <= fraction <= 1.0:
            raise ConfigError("spiked: fraction must lie in [0, 1]")
        meta["spikes"] = {"fraction": fraction, "height": height, "seed": int(seed)}

        def fn(x):
            out = np.array(base(x), dtype=float, copy=True)
            out = np.broadcast_to(out, np.shape(x)).copy()
            out[spike_mask(x, fraction, seed)] = height
            return out

        return fn
    return None


_NULLARY = ("sin_osc", "sqrt_phi")


def _compile(node, seed, meta):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        c = float(node.value)
        return lambda x: np.full_like(x, c)
    if isinstance(node, ast.Name):
        if node.id in ("x", "n"):
            return lambda x: x
        if node.id in ("pi", "e"):
            c = _number(node)
            return lambda x: np.full_like(x, c)
        if node.id in _NULLARY:
            return _builtin(node.id, [], seed, meta)
        if node.id in SLOWLY_VARYING:
            meta.setdefault("slowly_varying", node.id)
            return SLOWLY_VARYING[node.id]
        raise ConfigError(f"unknown name {node.id!r} in function spec")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        left, right = _compile(node.left, seed, meta), _compile(node.right, seed, meta)
        op = _BINOPS[type(node.op)]
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, seed, meta)
        if isinstance(node.op, ast.USub):
            return lambda x: -inner(x)
        return inner
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        fn = _builtin(name, node.args, seed, meta)
        if fn is not None:
            return fn
        if name in _FUNCS:
            if len(node.args) != 1:
                raise ConfigError(f"{name} takes one argument")
            inner = _compile(node.args[0], seed, meta)
            f = _FUNCS[name]
            return lambda x: f(inner(x))
        raise ConfigError(f"unknown function {name!r} in function spec")
    raise ConfigError(f"unsupported construct in function spec: {ast.unparse(node)!r}")


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(z):
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def spike_mask(x, fraction: float, seed: int):
    """Deterministic pseudo-random subset of points, about ``fraction`` of them.

    Membership depends only on the bit pattern of x and on the seed, so the
    same point is spiked in every evaluation and after a CSV round trip.
    """
    bits = np.ascontiguousarray(np.asarray(x, dtype=np.float64)).view(np.uint64)
    with np.errstate(over="ignore"):
        h = _splitmix64(bits ^ _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    u = (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    return u < fraction


def read_csv(path):
    """Read an ``x,value`` table; any malformed row is an error, never skipped."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise DataFormatError(f"{path}: not valid UTF-8") from None
    return parse_csv(text, source=str(path))


def parse_csv(text: str, source: str = "<csv>"):
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
        raise DataFormatError(f"{source}:1: header must be exactly 'x,value'")
    xs, vs = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DataFormatError(f"{source}:{lineno}: expected 2 fields, got {len(row)}")
        try:
            x, v = float(row[0]), float(row[1])
        except ValueError:
            raise DataFormatError(f"{source}:{lineno}: non-numeric field in {row!r}") from None
        if not (math.isfinite(x) and math.isfinite(v)):
            raise DataFormatError(f"{source}:{lineno}: non-finite value")
        if xs and x <= xs[-1]:
            raise DataFormatError(f"{source}:{lineno}: x must be strictly increasing")
        xs.append(x)
        vs.append(v)
    if len(xs) < 2:
        raise DataFormatError(f"{source}: need at least two data rows")
    return np.array(xs), np.array(vs)


def write_csv(path, xs, values):
    """Write an ``x,value`` table with round-trip exact float formatting."""
    lines = ["x,value"]
    lines += [f"{float(x)!r},{float(v)!r}" for x, v in zip(xs, values)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
