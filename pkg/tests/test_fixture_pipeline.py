"""Dry-runs of the dataset-gated analysis pipelines.

The published-value tests need CSV exports that cannot ship with the
package; these tests run the exact same code paths (the shipped model-spec
files included) on synthetic stand-ins with the documented column layout,
so the gated tests can only fail on data values, never on plumbing.
"""

import itertools
from pathlib import Path

import numpy as np
import pytest

from covglm.data import Dataset
from covglm.estimator import fit
from covglm.model import bind, load_model_spec
from covglm.multcomp import joint_multiple_comparisons, multiple_comparisons
from covglm.report import render_report
from covglm.tables import anova, anova_dispersion, manova, manova_dispersion

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def _write_soya_standin(path, seed=0):
    rng = np.random.default_rng(seed)
    rows = list(
        itertools.product(
            ["I", "II", "III", "IV", "V"],
            ["37.5", "50", "62.5"],
            ["0", "30", "60", "120", "180"],
        )
    )
    lines = ["block,water,pot,grain,seeds,viablepeas,totalpeas,viablepeasP"]
    for block, water, pot in rows:
        grain = 15.0 + rng.normal(scale=2.0)
        seeds = float(rng.poisson(80))
        total = int(rng.integers(120, 220))
        viable = int(rng.binomial(total, 0.75))
        lines.append(
            f"{block},{water},{pot},{grain},{seeds},{viable},{total},{viable / total}"
        )
    path.write_text("\n".join(lines) + "\n")


def _write_hunting_standin(path, seed=1, n=300):
    rng = np.random.default_rng(seed)
    method = np.array(["Escopeta", "Trampa"])[rng.integers(0, 2, size=n)]
    sex = np.array(["Female", "Male"])[rng.integers(0, 2, size=n)]
    hm = np.array(
        [f"H{rng.integers(0, 15):02d}.M{rng.integers(0, 8):02d}" for _ in range(n)]
    )
    offset = rng.integers(5, 25, size=n).astype(float)
    effect = 0.8 * (method == "Trampa") - 0.6 * (sex == "Male")
    bd = rng.poisson(np.exp(-1.0 + effect) * offset)
    ot = rng.poisson(np.exp(-1.8 + 0.5 * effect) * offset)
    lines = ["BD,OT,METHOD,SEX,HUNTER.MONTH,OFFSET,logOFFSET"]
    for row in zip(bd, ot, method, sex, hm, offset):
        lines.append(
            f"{row[0]},{row[1]},{row[2]},{row[3]},{row[4]},{row[5]},"
            f"{float(np.log(row[5]))}"
        )
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="module")
def soya_standin_fit(tmp_path_factory):
    csv_path = tmp_path_factory.mktemp("soya") / "soya.csv"
    _write_soya_standin(csv_path)
    spec = load_model_spec(FIXTURES / "soya_model.json")
    data = Dataset.from_csv(csv_path, spec.column_types)
    return fit(spec, data), spec, data


@pytest.fixture(scope="module")
def hunting_standin_fit(tmp_path_factory):
    csv_path = tmp_path_factory.mktemp("hunting") / "hunting.csv"
    _write_hunting_standin(csv_path)
    spec = load_model_spec(FIXTURES / "hunting_model.json")
    data = Dataset.from_csv(csv_path, spec.column_types)
    return fit(spec, data), spec, data


def test_soya_spec_matches_documented_layout(soya_standin_fit):
    model, spec, _ = soya_standin_fit
    assert model.converged
    assert model.n_responses == 3
    links = [resp.link.kind for resp in spec.responses]
    assert links == ["identity", "log", "logit"]
    # 19 coefficients per response, labels switch to the underscore form.
    for span in model.beta_spans:
        assert span.stop - span.start == 19
    assert "beta1_18" in model.theta_star_labels
    assert model.spec.responses[2].ntrial_column == "totalpeas"


def test_soya_standin_tables_have_published_shape(soya_standin_fit):
    model, _, _ = soya_standin_fit
    expected = {1: [19, 18, 14, 12, 8], 2: [1, 4, 10, 12, 8], 3: [1, 4, 2, 4, 8]}
    for kind, dfs in expected.items():
        tables = anova(model, kind)
        assert len(tables) == 3
        for table in tables:
            assert [row.df for row in table.rows] == dfs
        assert [row.df for row in manova(model, kind).rows] == [3 * v for v in dfs]
    text = render_report(anova(model, 2))
    assert "Call: grain ~ block + water * pot" in text


def test_hunting_spec_matches_documented_layout(hunting_standin_fit):
    model, spec, _ = hunting_standin_fit
    assert model.converged
    assert model.n_responses == 2
    assert [len(t) for t in model.lambda_hat.tau] == [2, 2]
    assert spec.responses[0].offset_column == "logOFFSET"
    assert model.theta_star_labels[-4:] == ("tau10", "tau11", "tau20", "tau21")


def test_hunting_standin_dispersion_and_comparisons(hunting_standin_fit):
    model, _, data = hunting_standin_fit
    disp = anova_dispersion(
        model, [[0, 1], [0, 1]], [["tau10", "tau11"], ["tau20", "tau21"]]
    )
    assert [row.label for row in disp[0].rows] == ["tau10", "tau11"]
    joint_disp = manova_dispersion(model, [0, 1], ["tau0", "tau1"])
    assert [row.df for row in joint_disp.rows] == [2, 2]
    per = multiple_comparisons(model, [["METHOD", "SEX"]] * 2, data)
    assert len(per[0].rows) == 6
    joint = joint_multiple_comparisons(model, ["METHOD", "SEX"], data)
    labels = [row.label for row in joint.rows]
    assert "Escopeta:Female-Escopeta:Male" in labels
    assert all(row.df == 2 for row in joint.rows)
