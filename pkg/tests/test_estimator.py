import numpy as np
import pytest

from conftest import (
    assert_valid_godambe,
    gaussian_spec,
    make_dataset,
    response_spec,
    simulate_gaussian,
)
from covglm.covariance import DispersionVector
from covglm.errors import RankError
from covglm.estimator import (
    FitOptions,
    beta_labels,
    cross_blocks,
    fit,
    parameter_label,
    pearson_fn,
    quasi_score,
    rho_labels,
    tau_labels,
)
from covglm.model import MatrixComponent, ModelSpec, bind


def ols(design, y):
    coefs = np.linalg.solve(design.T @ design, design.T @ y)
    rss = float(np.sum((y - design @ coefs) ** 2))
    return coefs, rss


def test_labels():
    assert parameter_label("beta", 1, 0) == "beta10"
    assert parameter_label("beta", 1, 12) == "beta1_12"
    assert parameter_label("tau", 2, 1) == "tau21"
    assert rho_labels(3) == ["rho12", "rho13", "rho23"]
    assert tau_labels([2, 1]) == ["tau10", "tau11", "tau20"]


def test_fit_options_validation():
    with pytest.raises(ValueError):
        FitOptions(max_iter=0)
    with pytest.raises(ValueError):
        FitOptions(tol=0.0)
    with pytest.raises(ValueError):
        FitOptions(alpha=1.5)


def test_quasi_score_is_least_squares_score():
    data, design, y = simulate_gaussian(0)
    bound = bind(gaussian_spec("y ~ x1 + x2 + x3"), data)
    beta = np.array([0.3, -0.2, 0.5, 0.1])
    disp = DispersionVector(rho=np.zeros(0), tau=(np.array([1.0]),))
    psi, sens, var = quasi_score(bound, beta, disp)
    assert np.allclose(psi, design.T @ (y - design @ beta))
    assert np.allclose(sens, -var)
    # At the least-squares solution the quasi-score vanishes.
    coefs, _ = ols(design, y)
    psi_hat, _, _ = quasi_score(bound, coefs, disp)
    assert np.max(np.abs(psi_hat)) < 1e-9


def test_pearson_root_is_mean_squared_residual():
    data, design, y = simulate_gaussian(1)
    bound = bind(gaussian_spec("y ~ x1 + x2 + x3"), data)
    coefs, rss = ols(design, y)
    n = len(y)
    disp_hat = DispersionVector(rho=np.zeros(0), tau=(np.array([rss / n]),))
    psi, sens, var = pearson_fn(bound, coefs, disp_hat)
    assert abs(psi[0]) < 1e-8
    # Off the root the function is nonzero with the right sign.
    psi_low, _, _ = pearson_fn(
        bound, coefs, DispersionVector(rho=np.zeros(0), tau=(np.array([rss / n / 2]),))
    )
    assert psi_low[0] > 0


def test_pearson_variability_is_twice_sensitivity_without_cumulants():
    data, _, _ = simulate_gaussian(2)
    bound = bind(gaussian_spec("y ~ x1 + x2 + x3"), data)
    disp = DispersionVector(rho=np.zeros(0), tau=(np.array([1.4]),))
    beta = np.zeros(4)
    _, sens, var = pearson_fn(bound, beta, disp, empirical_cumulants=False)
    assert np.allclose(np.abs(var), 2.0 * np.abs(sens))
    assert np.allclose(sens, sens.T)


def test_pearson_sensitivity_symmetric_multiparameter():
    rng = np.random.default_rng(9)
    n = 40
    groups = np.array([f"g{i % 5}" for i in range(n)], dtype=object)
    y = rng.normal(size=n)
    data = make_dataset({"y": y, "g": groups, "x": rng.normal(size=n)})
    spec = ModelSpec(
        responses=(
            response_spec(
                "y ~ x",
                matrix_pred=(
                    MatrixComponent("identity"),
                    MatrixComponent("grouping", "g"),
                ),
            ),
        )
    )
    bound = bind(spec, data)
    disp = DispersionVector(rho=np.zeros(0), tau=(np.array([1.0, 0.2]),))
    _, sens, var = pearson_fn(bound, np.zeros(2), disp)
    assert np.allclose(sens, sens.T, atol=1e-10)
    assert np.allclose(var, var.T, atol=1e-10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gaussian_fit_matches_ols(seed):
    data, design, y = simulate_gaussian(seed)
    model = fit(gaussian_spec("y ~ x1 + x2 + x3"), data)
    coefs, rss = ols(design, y)
    assert model.converged
    assert np.max(np.abs(model.beta_hat - coefs)) < 1e-8
    assert abs(model.lambda_hat.tau[0][0] - rss / len(y)) < 1e-8
    assert_valid_godambe(model)


def test_sandwich_collapses_to_ols_covariance():
    data, design, y = simulate_gaussian(4)
    model = fit(
        gaussian_spec("y ~ x1 + x2 + x3"), data, FitOptions(empirical_cumulants=False)
    )
    _, rss = ols(design, y)
    tau = rss / len(y)
    expected = tau * np.linalg.inv(design.T @ design)
    k = design.shape[1]
    assert np.max(np.abs(model.godambe_inv[:k, :k] - expected)) < 1e-6


def test_bivariate_independent_fit_matches_separate_ols():
    rng = np.random.default_rng(12)
    n = 150
    x = rng.normal(size=n)
    y1 = 0.5 + 1.2 * x + rng.normal(size=n)
    y2 = -0.2 + 0.4 * x + rng.normal(size=n)
    data = make_dataset({"y1": y1, "y2": y2, "x": x})
    model = fit(gaussian_spec("y1 ~ x", "y2 ~ x"), data)
    design = np.column_stack([np.ones(n), x])
    b1, _ = ols(design, y1)
    b2, _ = ols(design, y2)
    assert model.converged
    assert np.max(np.abs(model.beta_hat - np.concatenate([b1, b2]))) < 1e-6
    assert_valid_godambe(model)


def test_cross_blocks_shapes_and_symmetric_case():
    rng = np.random.default_rng(3)
    n = 200
    x1, x2 = rng.normal(size=n), rng.normal(size=n)
    y = 0.4 * x1 - 0.8 * x2 + rng.normal(size=n)
    data = make_dataset({"y": y, "x1": x1, "x2": x2})
    spec = gaussian_spec("y ~ x1 + x2")
    model = fit(spec, data)
    bound = bind(spec, data)
    sens_lb, sens_bl, var_lb = cross_blocks(
        bound, model.beta_hat, model.lambda_hat
    )
    assert sens_lb.shape == (1, 3)
    assert sens_bl.shape == (3, 1)
    assert var_lb.shape == (1, 3)
    # Identity link with identity dispersion: both cross sensitivities
    # vanish at the solution (the quasi-score root kills them).
    assert np.max(np.abs(sens_bl)) < 1e-3
    assert np.max(np.abs(sens_lb)) < 1e-3


def test_psi_norms_small_at_convergence():
    data, _, _ = simulate_gaussian(6)
    opts = FitOptions()
    model = fit(gaussian_spec("y ~ x1 + x2 + x3"), data, opts)
    assert model.converged
    assert model.psi_beta_norm < 10 * opts.tol
    assert model.psi_lambda_norm < 10 * opts.tol


def test_row_permutation_invariance():
    rng = np.random.default_rng(21)
    n = 90
    groups = np.array([f"g{i % 9}" for i in range(n)], dtype=object)
    x = rng.normal(size=n)
    y = 1.0 + 0.7 * x + rng.normal(size=n)
    columns = {"y": y, "x": x, "g": groups}
    data = make_dataset(columns)
    spec = ModelSpec(
        responses=(
            response_spec(
                "y ~ x",
                matrix_pred=(
                    MatrixComponent("identity"),
                    MatrixComponent("grouping", "g"),
                ),
            ),
        )
    )
    model_a = fit(spec, data)
    perm = rng.permutation(n)
    data_b = make_dataset({k: np.asarray(v)[perm] for k, v in columns.items()})
    model_b = fit(spec, data_b)
    assert np.max(np.abs(model_a.beta_hat - model_b.beta_hat)) < 1e-8
    assert (
        np.max(np.abs(model_a.lambda_hat.flatten() - model_b.lambda_hat.flatten()))
        < 1e-8
    )


def test_covariate_scaling_invariance_end_to_end():
    from covglm.tables import anova

    rng = np.random.default_rng(30)
    n = 80
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    y = 0.3 + 0.9 * x1 - 0.5 * x2 + rng.normal(size=n)
    base = fit(gaussian_spec("y ~ x1 + x2"), make_dataset({"y": y, "x1": x1, "x2": x2}))
    scaled = fit(
        gaussian_spec("y ~ x1 + x2"),
        make_dataset({"y": y, "x1": 10.0 * x1, "x2": x2}),
    )
    assert scaled.beta_hat[1] == pytest.approx(base.beta_hat[1] / 10.0, rel=1e-8)
    for kind in (1, 2, 3):
        for row_a, row_b in zip(anova(base, kind)[0].rows, anova(scaled, kind)[0].rows):
            assert row_b.statistic == pytest.approx(row_a.statistic, rel=1e-6, abs=1e-9)


def test_rank_deficient_design_names_columns():
    rng = np.random.default_rng(8)
    n = 30
    x1 = rng.normal(size=n)
    data = make_dataset({"y": rng.normal(size=n), "x1": x1, "x2": 2.0 * x1})
    with pytest.raises(RankError, match="x2|x1"):
        fit(gaussian_spec("y ~ x1 + x2"), data)


def test_non_convergence_is_flagged_not_raised():
    data, _, _ = simulate_gaussian(5)
    model = fit(gaussian_spec("y ~ x1 + x2 + x3"), data, FitOptions(max_iter=1))
    assert not model.converged
    assert model.iterations == 1


def test_alpha_damping_still_converges():
    data, design, y = simulate_gaussian(7)
    model = fit(
        gaussian_spec("y ~ x1 + x2 + x3"),
        data,
        FitOptions(alpha=0.5, max_iter=200, tol=1e-8),
    )
    coefs, rss = ols(design, y)
    assert model.converged
    assert abs(model.lambda_hat.tau[0][0] - rss / len(y)) < 1e-6


def test_offset_is_additive_on_link_scale():
    rng = np.random.default_rng(40)
    n = 120
    x = rng.normal(size=n)
    offset = rng.uniform(0.5, 1.5, size=n)
    y = 2.0 + 0.5 * x + offset + rng.normal(scale=0.4, size=n)
    data = make_dataset({"y": y, "x": x, "off": offset})
    spec = ModelSpec(responses=(response_spec("y ~ x", offset_column="off"),))
    model = fit(spec, data)
    design = np.column_stack([np.ones(n), x])
    coefs, _ = ols(design, y - offset)
    assert np.max(np.abs(model.beta_hat - coefs)) < 1e-8


def test_logit_binomial_with_trials():
    rng = np.random.default_rng(41)
    n = 200
    x = rng.normal(size=n)
    trials = rng.integers(5, 40, size=n).astype(float)
    prob = 1.0 / (1.0 + np.exp(-(-0.3 + 0.8 * x)))
    y = rng.binomial(trials.astype(int), prob) / trials
    data = make_dataset({"y": y, "x": x, "m": trials})
    spec = ModelSpec(
        responses=(
            response_spec(
                "y ~ x", link="logit", variance="binomialP", ntrial_column="m"
            ),
        )
    )
    model = fit(spec, data)
    assert model.converged
    assert abs(model.beta_hat[1] - 0.8) < 0.2
    assert_valid_godambe(model)


def test_count_log_link_fit():
    rng = np.random.default_rng(42)
    n = 250
    x = rng.normal(size=n)
    y = rng.poisson(np.exp(0.6 + 0.5 * x)).astype(float)
    data = make_dataset({"y": y, "x": x})
    spec = ModelSpec(
        responses=(response_spec("y ~ x", link="log", variance="poisson_tweedie"),),
    )
    model = fit(spec, data)
    assert model.converged
    assert abs(model.beta_hat[1] - 0.5) < 0.15
    assert_valid_godambe(model)


def test_trace_file_written(tmp_path):
    data, _, _ = simulate_gaussian(10)
    path = tmp_path / "trace.log"
    fit(gaussian_spec("y ~ x1 + x2 + x3"), data, FitOptions(trace_path=str(path)))
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("iter")
    assert len(lines) >= 2


def test_beta_label_layout(factorial_fit):
    labels = beta_labels(factorial_fit.design)
    assert labels[0] == "beta10"
    assert labels[18] == "beta1_18"
    assert labels[19] == "beta20"
    assert len(labels) == 57
