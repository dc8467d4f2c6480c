"""General linear hypotheses and the Wald statistic.

A hypothesis is a constraint matrix L over the testable parameters
theta* = (beta, tau) together with a right-hand side c; the statistic is
the quadratic form of L theta* - c in the metric of (L J L^T)^-1 with J
the theta* block of the inverse Godambe matrix, referred to a chi-square
with as many degrees of freedom as constraints.
"""

import re
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .chisq import chisq_sf
from .errors import RankError, SingularHypothesisError, UnknownParameterError

_COMPACT = re.compile(r"^(beta|tau)(\d)(\d)$")
_UNDERSCORE = re.compile(r"^(beta|tau)(\d+)_(\d+)$")
_AMBIGUOUS = re.compile(r"^(beta|tau)\d{3,}$")
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class Hypothesis:
    """Constraint rows L theta* = c with printable row text."""

    L: np.ndarray
    c: np.ndarray
    row_labels: tuple

    def __post_init__(self):
        self.L.flags.writeable = False
        self.c.flags.writeable = False

    @property
    def n_constraints(self):
        return self.L.shape[0]


@dataclass(frozen=True)
class TestResult:
    """One table row: label, degrees of freedom, statistic, p-value."""

    __test__ = False  # domain type, not a pytest class

    label: str
    df: int
    statistic: float
    p_value: float


def _resolve_label(token, model):
    from .estimator import parameter_label

    match = _COMPACT.match(token) or _UNDERSCORE.match(token)
    if match is None:
        if _AMBIGUOUS.match(token):
            raise UnknownParameterError(
                f"ambiguous parameter name {token!r}: use the underscore "
                "form (e.g. beta1_12) for indices past one digit"
            )
        raise UnknownParameterError(
            f"cannot parse parameter name {token!r}; valid labels: "
            + ", ".join(model.theta_star_labels)
        )
    canonical = parameter_label(
        match.group(1), int(match.group(2)), int(match.group(3))
    )
    if canonical not in model.label_index:
        raise UnknownParameterError(
            f"no parameter {token!r} in this model; valid labels: "
            + ", ".join(model.theta_star_labels)
        )
    return model.label_index[canonical]


def parse_hypothesis(lines, model):
    """Parse constraint strings like 'beta11 = 0' or 'tau12 = tau22'.

    Each line contributes one row: +1 at the left-hand parameter and either
    a numeric right-hand side in c, or -1 at the right-hand parameter with
    a zero c entry.
    """
    if isinstance(lines, str):
        lines = [lines]
    h = len(model.theta_star_labels)
    rows = []
    rhs = []
    labels = []
    for line in lines:
        parts = line.split("=")
        if len(parts) != 2:
            raise UnknownParameterError(
                f"hypothesis {line!r} must have the form 'param = value' "
                "or 'param = param'"
            )
        left, right = parts[0].strip(), parts[1].strip()
        row = np.zeros(h)
        row[_resolve_label(left, model)] = 1.0
        if _NUMBER.match(right):
            rhs.append(float(right))
        else:
            row[_resolve_label(right, model)] -= 1.0
            rhs.append(0.0)
        rows.append(row)
        labels.append(f"{left} = {right}")
    return Hypothesis(
        L=np.array(rows), c=np.array(rhs), row_labels=tuple(labels)
    )


def kron_hypothesis(g, f):
    """Kronecker expansion of a per-response constraint matrix.

    With g the response-selection matrix (identity to test all responses)
    and f the single-response constraint matrix, returns the stacked-
    parameter constraint matrix g kron f.
    """
    return np.kron(np.asarray(g, dtype=float), np.asarray(f, dtype=float))


def wald_statistic(theta, inverse_information, constraint, rhs):
    """The Wald quadratic form for L theta = c.

    Returns ``(statistic, df)``; raises on a rank-deficient L or a singular
    middle matrix (no pseudo-inverse is attempted; a singular L J L^T
    signals a redundant hypothesis the caller should fix).
    """
    constraint = np.atleast_2d(np.asarray(constraint, dtype=float))
    rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
    s, h = constraint.shape
    if h != len(theta):
        raise ValueError(
            f"constraint matrix has {h} columns for {len(theta)} parameters"
        )
    if np.linalg.matrix_rank(constraint) < s:
        raise RankError(f"constraint matrix has rank below its {s} rows")
    gap = constraint @ theta - rhs
    if not np.any(gap):
        return 0.0, s
    middle = constraint @ inverse_information @ constraint.T
    middle = 0.5 * (middle + middle.T)
    try:
        chol = np.linalg.cholesky(middle)
    except np.linalg.LinAlgError:
        raise SingularHypothesisError(
            "L J L^T is singular; the hypothesis rows are redundant "
            "under this model's information matrix"
        ) from None
    stat = float(gap @ cho_solve((chol, True), gap))
    return max(stat, 0.0), s


def wald_test(model, hypothesis):
    """Run a Wald test of a :class:`Hypothesis` against a fitted model."""
    stat, df = wald_statistic(
        model.theta_star, model.godambe_inv, hypothesis.L, hypothesis.c
    )
    return TestResult(
        label="; ".join(hypothesis.row_labels),
        df=df,
        statistic=stat,
        p_value=chisq_sf(stat, df),
    )
