"""Multiple-comparison tests over factor-level combinations.

The adjusted-means matrix has one row per observed combination of the
requested factors, each row being the design encoding of that combination
(other factors at their reference level, numeric covariates at their
sample mean). Differencing every pair of rows yields the contrast matrix;
each contrast is Wald-tested with a Bonferroni-corrected p-value.
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .chisq import chisq_sf
from .design import encode_combination
from .errors import DataError
from .model import complete_rows
from .tables import TestTable, _predictor_caption, _require_shared_predictor
from .wald import TestResult, wald_statistic


@dataclass(frozen=True)
class ContrastSet:
    """Adjusted-means rows, their pairwise differences, and labels."""

    means: np.ndarray
    contrasts: np.ndarray
    combo_labels: tuple
    contrast_labels: tuple


def _observed_combos(design, factors, data):
    if not factors:
        raise DataError("at least one factor is required for comparisons")
    for name in factors:
        if name not in design.var_kinds:
            raise DataError(
                f"{name!r} is not a variable of formula {design.formula.text!r}"
            )
        if design.var_kinds[name] != "factor":
            raise DataError(f"{name!r} is numeric; comparisons need a factor")
    observed = set(
        zip(*[tuple(data.factor(name)) for name in factors])
    )
    combos = []
    for combo in itertools.product(*[design.level_maps[f] for f in factors]):
        if combo in observed:
            combos.append(combo)
        else:
            warnings.warn(
                f"dropping unobserved combination {':'.join(combo)}",
                stacklevel=2,
            )
    return combos


def adjusted_means(model, response, factors, data):
    """Rows of design encodings, one per observed factor-level combination.

    Combinations run in Cartesian order, first factor slowest, levels in
    design order. Returns ``(matrix, labels)``.
    """
    design = model.design[response]
    data, _ = complete_rows(model.spec, data)
    numeric_means = {
        v: float(np.mean(data.numeric(v)))
        for v, k in design.var_kinds.items()
        if k == "numeric"
    }
    combos = _observed_combos(design, factors, data)
    rows = []
    labels = []
    for combo in combos:
        assignment = dict(zip(factors, combo))
        rows.append(encode_combination(design, assignment, numeric_means))
        labels.append(":".join(combo))
    return np.array(rows), tuple(labels)


def pairwise_contrasts(means):
    """Differences of every unordered pair of rows (i < j), stacked."""
    g = means.shape[0]
    return np.array(
        [means[i] - means[j] for i, j in itertools.combinations(range(g), 2)]
    )


def contrast_set(model, response, factors, data):
    means, combo_labels = adjusted_means(model, response, factors, data)
    contrasts = pairwise_contrasts(means)
    labels = tuple(
        f"{combo_labels[i]}-{combo_labels[j]}"
        for i, j in itertools.combinations(range(len(combo_labels)), 2)
    )
    return ContrastSet(
        means=means,
        contrasts=contrasts,
        combo_labels=combo_labels,
        contrast_labels=labels,
    )


def _bonferroni(p, m):
    return min(1.0, p * m)


def multiple_comparisons(model, effects, data):
    """Per-response pairwise comparisons with Bonferroni correction.

    ``effects[r]`` names the factors whose level combinations are compared
    for response r. Every contrast is a single-constraint Wald test; the
    reported p-values are multiplied by the number of contrasts and capped
    at one.
    """
    if len(effects) != model.n_responses:
        raise ValueError("one factor list per response")
    h = len(model.theta_star_labels)
    tables = []
    for r in range(model.n_responses):
        cs = contrast_set(model, r, list(effects[r]), data)
        span = model.beta_spans[r]
        m = cs.contrasts.shape[0]
        rows = []
        for label, contrast in zip(cs.contrast_labels, cs.contrasts):
            constraint = np.zeros((1, h))
            constraint[0, span] = contrast
            stat, df = wald_statistic(
                model.theta_star, model.godambe_inv, constraint, np.zeros(1)
            )
            rows.append(
                TestResult(
                    label=label,
                    df=df,
                    statistic=stat,
                    p_value=_bonferroni(chisq_sf(stat, df), m),
                )
            )
        tables.append(
            TestTable(
                title="Multiple comparisons test for each outcome using Wald statistic",
                caption=model.design[r].formula.text,
                label_header="Contrast",
                rows=tuple(rows),
            )
        )
    return tables


def joint_multiple_comparisons(model, effects, data):
    """Multivariate comparisons: each contrast tested across all responses.

    Requires identical predictors; each contrast row expands over the
    stacked coefficients with an identity Kronecker factor, giving one
    R-constraint test per contrast.
    """
    _require_shared_predictor(model)
    cs = contrast_set(model, 0, list(effects), data)
    h = len(model.theta_star_labels)
    n_resp = model.n_responses
    m = cs.contrasts.shape[0]
    rows = []
    for label, contrast in zip(cs.contrast_labels, cs.contrasts):
        constraint = np.zeros((n_resp, h))
        for r in range(n_resp):
            constraint[r, model.beta_spans[r]] = contrast
        stat, df = wald_statistic(
            model.theta_star, model.godambe_inv, constraint, np.zeros(n_resp)
        )
        rows.append(
            TestResult(
                label=label,
                df=df,
                statistic=stat,
                p_value=_bonferroni(chisq_sf(stat, df), m),
            )
        )
    return TestTable(
        title="Multivariate multiple comparisons test using Wald statistic",
        caption=_predictor_caption(model),
        label_header="Contrast",
        rows=tuple(rows),
    )
