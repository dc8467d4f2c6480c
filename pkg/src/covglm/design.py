"""Design-matrix construction with term metadata.

Factors are dummy-coded with treatment contrasts: levels are ordered by
lexicographic sort of their string values, the first level is the reference
and gets no column. Interaction columns are elementwise products of the
constituent main-effect columns, first constituent varying slowest. The
term -> column-span map drives all downstream degrees-of-freedom logic.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateFactor, MissingColumnError
from .formula import Formula, term_label


@dataclass(frozen=True)
class DesignInfo:
    """A built design matrix plus the metadata needed to reuse its coding.

    ``term_spans`` maps each term (the intercept is the empty tuple) to a
    ``(start, stop)`` column range; spans partition the columns in term
    order. ``level_maps`` records the ordered levels of every factor so
    that single observations can be re-encoded consistently later.
    """

    X: np.ndarray
    formula: Formula
    terms: tuple
    term_spans: dict
    column_labels: tuple
    level_maps: dict
    var_kinds: dict

    def __post_init__(self):
        self.X.flags.writeable = False

    @property
    def n_columns(self):
        return self.X.shape[1]

    def span(self, term):
        return self.term_spans[frozenset(term)]

    def factors(self):
        return tuple(v for v, k in self.var_kinds.items() if k == "factor")


def _variable_order(formula):
    seen = []
    for term in formula.terms:
        for v in term:
            if v not in seen:
                seen.append(v)
    return seen


def _var_encoding(var, kind, levels, values):
    """Columns and labels contributed by one variable.

    Numeric variables contribute their single column; factors contribute
    one indicator column per non-reference level.
    """
    if kind == "numeric":
        return [np.asarray(values, dtype=float)], [var]
    cols = []
    labels = []
    for level in levels[1:]:
        cols.append(np.array([1.0 if v == level else 0.0 for v in values]))
        labels.append(f"{var}={level}")
    return cols, labels


def _term_columns(term, var_data):
    """All columns of one term: the cross product of its variables' columns."""
    encodings = [_var_encoding(v, *var_data[v]) for v in term]
    columns = []
    labels = []
    for parts in itertools.product(*[list(zip(c, l)) for c, l in encodings]):
        col = parts[0][0].copy()
        for other, _ in parts[1:]:
            col = col * other
        columns.append(col)
        labels.append(":".join(label for _, label in parts))
    return columns, labels


def _assemble(formula, var_data, n):
    columns = [np.ones(n)]
    labels = ["Intercept"]
    spans = {frozenset(()): (0, 1)}
    terms = ((),) + tuple(formula.terms)
    for term in formula.terms:
        start = len(columns)
        cols, labs = _term_columns(term, var_data)
        columns.extend(cols)
        labels.extend(labs)
        spans[frozenset(term)] = (start, len(columns))
    X = np.column_stack(columns) if columns else np.empty((n, 0))
    return X, terms, spans, tuple(labels)


def build_design(formula, data):
    """Build the design matrix for a formula over a dataset.

    The dataset must already be restricted to complete rows for the bound
    columns; factors need at least two observed levels.
    """
    var_data = {}
    level_maps = {}
    var_kinds = {}
    for var in _variable_order(formula):
        if not data.has(var):
            raise MissingColumnError(f"formula references unknown column {var!r}")
        kind = data.kind(var)
        var_kinds[var] = kind
        if kind == "factor":
            values = data.factor(var)
            levels = sorted({v for v in values if v is not None})
            if len(levels) < 2:
                shown = levels[0] if levels else "<none>"
                raise DegenerateFactor(
                    f"factor {var!r} has a single observed level {shown!r}"
                )
            level_maps[var] = tuple(levels)
            var_data[var] = (kind, levels, values)
        else:
            var_data[var] = (kind, None, data.numeric(var))
    X, terms, spans, labels = _assemble(formula, var_data, data.n_rows)
    if not np.isfinite(X).all():
        raise DataError("design matrix contains non-finite entries")
    return DesignInfo(
        X=X,
        formula=formula,
        terms=terms,
        term_spans=spans,
        column_labels=labels,
        level_maps=level_maps,
        var_kinds=var_kinds,
    )


def encode_combination(design, assignment, numeric_values=None):
    """Encode a single synthetic observation against an existing design.

    ``assignment`` maps factor names to levels; unassigned factors sit at
    their reference level and numeric variables take the value given in
    ``numeric_values`` (default 0.0). Returns a length-k row vector.
    """
    numeric_values = numeric_values or {}
    var_data = {}
    for var, kind in design.var_kinds.items():
        if kind == "factor":
            levels = list(design.level_maps[var])
            level = assignment.get(var, levels[0])
            if level not in levels:
                raise DataError(f"unknown level {level!r} for factor {var!r}")
            var_data[var] = (kind, levels, np.array([level], dtype=object))
        else:
            value = float(numeric_values.get(var, 0.0))
            var_data[var] = (kind, None, np.array([value]))
    row, _, _, _ = _assemble(design.formula, var_data, 1)
    return row[0]


def term_labels(design):
    """Printable term names in table order (intercept first)."""
    return tuple(term_label(t) for t in design.terms)
