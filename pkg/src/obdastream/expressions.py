"""Scalar and aggregate expressions shared by STARQL HAVING clauses and plans."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

# canonical name -> printed spelling
FUNCTIONS = {
    "pearson": "PearsonCorrelation",
    "cosine": "cosineSimilarity",
    "avg": "avg",
    "min": "min",
    "max": "max",
    "sum": "sum",
    "count": "count",
    "abs": "abs",
}
AGGREGATE_FUNCTIONS = {"pearson", "cosine", "avg", "min", "max", "sum", "count"}
ARITY = {"pearson": 2, "cosine": 2, "avg": 1, "min": 1, "max": 1, "sum": 1, "count": 1, "abs": 1}
PAIRWISE = {"pearson", "cosine"}

_ALIASES = {
    "pearsoncorrelation": "pearson",
    "pearson": "pearson",
    "cosinesimilarity": "cosine",
    "cosine": "cosine",
}


def canonical_function(name: str) -> str | None:
    low = name.lower()
    if low in _ALIASES:
        return _ALIASES[low]
    if low in FUNCTIONS:
        return low
    return None


@dataclass(frozen=True)
class ValueVar:
    """``?name``: a value variable bound by graph patterns."""

    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class IndexVar:
    """Bare identifier: a state (time point) variable."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Number:
    value: float

    def __str__(self) -> str:
        v = self.value
        return repr(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(v)


@dataclass(frozen=True)
class Constant:
    """An IRI or individual used in a comparison (``ex:refSensor``)."""

    text: str

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class Call:
    name: str  # canonical, or the raw name when unknown (validation reports it)
    args: tuple

    def __str__(self) -> str:
        return f"{FUNCTIONS.get(self.name, self.name)}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: object
    right: object

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Neg:
    operand: object

    def __str__(self) -> str:
        return f"-{self.operand}"


@dataclass(frozen=True)
class Comparison:
    op: str  # = != < <= > >=
    left: object
    right: object

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class BoolOp:
    op: str  # AND / OR
    operands: tuple

    def __str__(self) -> str:
        return "(" + f" {self.op} ".join(str(o) for o in self.operands) + ")"


@dataclass(frozen=True)
class NotExpr:
    operand: object

    def __str__(self) -> str:
        return f"NOT {self.operand}"


Expr = Union[ValueVar, IndexVar, Number, Constant, Call, BinOp, Neg, Comparison, BoolOp, NotExpr]


def walk(e):
    yield e
    if isinstance(e, Call):
        for a in e.args:
            yield from walk(a)
    elif isinstance(e, (BinOp, Comparison)):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Neg):
        yield from walk(e.operand)
    elif isinstance(e, BoolOp):
        for o in e.operands:
            yield from walk(o)
    elif isinstance(e, NotExpr):
        yield from walk(e.operand)


def value_vars(e) -> set[str]:
    return {x.name for x in walk(e) if isinstance(x, ValueVar)}


def index_vars(e) -> set[str]:
    return {x.name for x in walk(e) if isinstance(x, IndexVar)}


def aggregate_calls(e) -> list[Call]:
    out = []
    for x in walk(e):
        if isinstance(x, Call) and x.name in AGGREGATE_FUNCTIONS and x not in out:
            out.append(x)
    return out


def has_aggregate(e) -> bool:
    return bool(aggregate_calls(e))


class ExpressionError(ArithmeticError):
    pass


def compare_values(op: str, left, right) -> bool:
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise ValueError(f"unknown comparison {op!r}")


def evaluate(e, row: dict, aggregates: dict | None = None):
    """Evaluate ``e`` against a row of variable bindings.

    ``aggregates`` maps aggregate :class:`Call` nodes to precomputed values;
    the plan evaluator fills it per group.
    """
    if isinstance(e, Number):
        return e.value
    if isinstance(e, Constant):
        return e.text
    if isinstance(e, ValueVar):
        return row[e.name]
    if isinstance(e, IndexVar):
        return row[e.name]
    if isinstance(e, Call):
        if aggregates is not None and e in aggregates:
            return aggregates[e]
        if e.name == "abs":
            return abs(evaluate(e.args[0], row, aggregates))
        raise ExpressionError(f"aggregate {e} evaluated outside a group")
    if isinstance(e, Neg):
        return -evaluate(e.operand, row, aggregates)
    if isinstance(e, BinOp):
        a = evaluate(e.left, row, aggregates)
        b = evaluate(e.right, row, aggregates)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0:
                raise ExpressionError("division by zero")
            return a / b
        raise ValueError(f"unknown operator {e.op!r}")
    if isinstance(e, Comparison):
        a = evaluate(e.left, row, aggregates)
        b = evaluate(e.right, row, aggregates)
        if isinstance(a, float) and math.isnan(a) or isinstance(b, float) and math.isnan(b):
            return False
        return compare_values(e.op, a, b)
    if isinstance(e, BoolOp):
        if e.op == "AND":
            return all(evaluate(o, row, aggregates) for o in e.operands)
        return any(evaluate(o, row, aggregates) for o in e.operands)
    if isinstance(e, NotExpr):
        return not evaluate(e.operand, row, aggregates)
    raise TypeError(f"cannot evaluate {e!r}")
