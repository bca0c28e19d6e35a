"""Conformal scores, p-values, and predictive sets.

Oracles: hand-counted p-values on tiny pools, the chi-square law of squared
norms under an identity encoder, the exact discrete-uniform law of smoothed
p-values on exchangeable draws, and a closed-form two-sided normal tail rule
that must rank-agree with conformal p-values in one dimension.
"""

import numpy as np
import pytest

from flowconformal.conformal import (
    ConformalConfig,
    PredictiveSet,
    PValueVector,
    ScorePool,
    build_score_pool,
    is_outlier,
    load_p_values,
    load_pools,
    load_sets,
    nonconformity_score,
    nonconformity_scores,
    p_value,
    p_value_matrix,
    p_values_all,
    predictive_set,
    save_p_values,
    save_pools,
    save_sets,
)
from flowconformal.errors import ConfigError, DataError
from flowconformal.evaluation import chi2_moment_check
from flowconformal.nn import Mlp, MlpSpec
from flowconformal.roundtrip import ClassFlowModel
from flowconformal.special import normal_cdf


def make_affine_model(weight, bias, label=1):
    """Model whose encoder is a fixed affine map; other nets are shape fillers."""
    w = np.asarray(weight, dtype=np.float64)
    b = np.asarray(bias, dtype=np.float64)
    p, d = w.shape
    inv = Mlp(MlpSpec((p, d), (), "identity"), layers=[(w, b)])
    gen = Mlp(MlpSpec((d, p), (), "identity"),
              layers=[(np.zeros((d, p)), np.zeros(p))])
    disc = Mlp(MlpSpec((p, 1), (), "sigmoid"),
               layers=[(np.zeros((p, 1)), np.zeros(1))])
    head = Mlp(MlpSpec((d, 1), (), "sigmoid"),
               layers=[(np.zeros((d, 1)), np.zeros(1))])
    return ClassFlowModel(label, gen, inv, disc, head)


def make_identity_model(d, label=1):
    return make_affine_model(np.eye(d), np.zeros(d), label)


# -- scores ----------------------------------------------------------------------

def test_score_is_squared_norm_of_encoding():
    model = make_identity_model(2)
    assert nonconformity_score(model, np.array([3.0, 4.0])) == 25.0


def test_scores_batch_matches_rows():
    model = make_identity_model(2)
    x = np.array([[0.0, 0.0], [1.0, 1.0], [3.0, 4.0]])
    assert np.array_equal(nonconformity_scores(model, x), [0.0, 2.0, 25.0])


def test_score_uses_the_encoder_not_raw_input():
    # halving encoder quarters the score
    model = make_affine_model(np.array([[0.5]]), np.zeros(1))
    assert nonconformity_score(model, np.array([4.0])) == 4.0


def test_build_pool_sorts_scores():
    model = make_identity_model(2)
    x = np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 1.0]])
    pool = build_score_pool(model, x)
    assert pool.class_label == 1
    assert np.array_equal(pool.scores, [0.0, 2.0, 25.0])
    assert pool.size == 3


def test_build_pool_rejects_empty_rows():
    model = make_identity_model(2)
    with pytest.raises(DataError, match="non-empty"):
        build_score_pool(model, np.empty((0, 2)))


def test_score_pool_validation():
    with pytest.raises(ConfigError, match="positive"):
        ScorePool(0, np.array([1.0]))
    with pytest.raises(DataError, match="non-empty"):
        ScorePool(1, np.array([]))
    with pytest.raises(DataError, match="negative"):
        ScorePool(1, np.array([1.0, -0.5]))
    with pytest.raises(DataError, match="non-finite"):
        ScorePool(1, np.array([1.0, np.nan]))


# -- p-values ----------------------------------------------------------------------

POOL_1234 = ScorePool(1, np.array([1.0, 2.0, 3.0, 4.0]))


def test_smoothed_p_value_hand_counts():
    # pool {1,2,3,4}: pi = (1 + #{pool >= t}) / 5
    assert p_value(POOL_1234, 2.5, "smoothed") == 0.6
    assert p_value(POOL_1234, 100.0, "smoothed") == 0.2
    assert p_value(POOL_1234, 0.5, "smoothed") == 1.0
    assert p_value(POOL_1234, 2.0, "smoothed") == 0.8


def test_paper_literal_p_value_hand_counts():
    # pool {1,2,3,4}: pi = #{t >= pool} / 4
    assert p_value(POOL_1234, 100.0, "paper-literal") == 1.0
    assert p_value(POOL_1234, 0.5, "paper-literal") == 0.0
    assert p_value(POOL_1234, 2.0, "paper-literal") == 0.5
    assert p_value(POOL_1234, 2.5, "paper-literal") == 0.5


def test_p_value_mode_validation():
    with pytest.raises(ConfigError, match="p_value_mode"):
        p_value(POOL_1234, 1.0, "bogus")
    with pytest.raises(DataError, match="finite"):
        p_value(POOL_1234, np.nan, "smoothed")


def test_conformal_config_validation():
    cfg = ConformalConfig()
    assert cfg.alpha == 0.05 and cfg.p_value_mode == "smoothed"
    with pytest.raises(ConfigError, match="alpha"):
        ConformalConfig(alpha=0.0)
    with pytest.raises(ConfigError, match="alpha"):
        ConformalConfig(alpha=1.0)
    with pytest.raises(ConfigError, match="p_value_mode"):
        ConformalConfig(p_value_mode="other")


def test_smoothed_p_monotone_nonincreasing_in_score():
    rng = np.random.default_rng(3)
    pool = ScorePool(1, rng.chisquare(3, size=200))
    grid = np.linspace(0.0, 20.0, 250)
    vals = [p_value(pool, t, "smoothed") for t in grid]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_paper_literal_p_monotone_nondecreasing_in_score():
    rng = np.random.default_rng(4)
    pool = ScorePool(1, rng.chisquare(3, size=200))
    grid = np.linspace(0.0, 20.0, 250)
    vals = [p_value(pool, t, "paper-literal") for t in grid]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_p_value_invariant_to_pool_order():
    rng = np.random.default_rng(5)
    scores = rng.chisquare(2, size=50)
    a = ScorePool(1, scores)
    b = ScorePool(1, scores[rng.permutation(50)])
    for t in np.linspace(0.0, 12.0, 40):
        assert p_value(a, t) == p_value(b, t)
        assert p_value(a, t, "paper-literal") == p_value(b, t, "paper-literal")


def test_smoothed_p_values_super_uniform_on_exchangeable_draws():
    # with a fresh pool of 19 per draw, the smoothed p-value is uniform on
    # {1/20, ..., 20/20}, so P(pi <= a) = floor(20 a) / 20 exactly
    rng = np.random.default_rng(11)
    reps, pool_n = 100_000, 19
    x = rng.standard_normal((reps, pool_n + 1)) ** 2
    t = x[:, 0]
    pools = x[:, 1:]
    ge = (pools >= t[:, None]).sum(axis=1)
    pi = (1.0 + ge) / (pool_n + 1.0)
    # the vectorized count must agree with the library on sampled rows
    for i in range(0, reps, 9973):
        lib = p_value(ScorePool(1, pools[i]), float(t[i]), "smoothed")
        assert pi[i] == lib
    for a in (0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99):
        target = np.floor(20.0 * a) / 20.0
        se = np.sqrt(target * (1.0 - target) / reps)
        rate = float(np.mean(pi <= a))
        assert abs(rate - target) <= max(3.0 * se, 1e-12), (a, rate, target)
        assert rate <= a + 3.0 * se


def test_scores_follow_chi_square_under_identity_encoder():
    d, n = 5, 10_000
    rng = np.random.default_rng(19)
    model = make_identity_model(d)
    scores = nonconformity_scores(model, rng.standard_normal((n, d)))
    rep = chi2_moment_check(scores, d, level=0.01)
    assert abs(rep.mean - 5.0) <= 0.15
    assert abs(rep.variance - 10.0) <= 1.0
    assert not rep.ks.reject


def test_conformal_p_ranks_match_two_sided_normal_tail():
    # one class N(mu, sigma^2) with the exact standardizing encoder; conformal
    # p-values must rank-agree with the analytic rule 2 min(Phi(u), 1 - Phi(u))
    scipy_stats = pytest.importorskip("scipy.stats")
    mu, sigma = 2.0, 1.5
    model = make_affine_model(np.array([[1.0 / sigma]]), np.array([-mu / sigma]))
    rng = np.random.default_rng(23)
    pool = build_score_pool(model, rng.normal(mu, sigma, size=(2000, 1)))
    xs = np.concatenate([
        rng.normal(mu, sigma, size=250),
        np.linspace(mu - 4.0 * sigma, mu + 4.0 * sigma, 250),
    ])
    conf = np.array([p_value(pool, nonconformity_score(model, np.array([v])))
                     for v in xs])
    u = (xs - mu) / sigma
    analytic = np.array([2.0 * min(normal_cdf(v), 1.0 - normal_cdf(v)) for v in u])
    rho = scipy_stats.spearmanr(conf, analytic).statistic
    assert rho > 0.99


# -- vectors and sets ---------------------------------------------------------------

def test_p_value_vector_validation():
    pv = PValueVector((1, 2, 3), np.array([0.9, 0.03, 0.2]))
    assert pv.value_for(2) == 0.03
    with pytest.raises(KeyError):
        pv.value_for(7)
    with pytest.raises(DataError, match="duplicate"):
        PValueVector((1, 1), np.array([0.5, 0.5]))
    with pytest.raises(DataError, match="align"):
        PValueVector((1, 2), np.array([0.5]))
    with pytest.raises(DataError, match=r"\[0, 1\]"):
        PValueVector((1,), np.array([1.5]))


def test_predictive_set_keeps_classes_clearing_alpha():
    pv = PValueVector((1, 2, 3), np.array([0.9, 0.03, 0.2]))
    ps = predictive_set(pv, 0.05)
    assert ps.labels == (1, 3)
    assert 1 in ps and 3 in ps and 2 not in ps
    assert ps.size == 2 and not ps.is_outlier


def test_predictive_set_boundary_p_equal_alpha_is_kept():
    pv = PValueVector((1, 2), np.array([0.05, 0.049]))
    assert predictive_set(pv, 0.05).labels == (1,)


def test_tiny_alpha_keeps_every_class():
    pv = PValueVector((1, 2, 3), np.array([0.9, 0.03, 0.2]))
    assert predictive_set(pv, 1e-9).labels == (1, 2, 3)


def test_empty_set_flags_outlier():
    pv = PValueVector((1, 2), np.array([0.01, 0.02]))
    ps = predictive_set(pv, 0.05)
    assert ps.is_outlier and is_outlier(ps) and ps.size == 0


def test_predictive_set_alpha_validation():
    pv = PValueVector((1,), np.array([0.5]))
    with pytest.raises(ConfigError, match="alpha"):
        predictive_set(pv, 0.0)
    with pytest.raises(ConfigError, match="alpha"):
        predictive_set(pv, 1.0)


def test_predictive_set_label_validation():
    with pytest.raises(DataError, match="duplicate"):
        PredictiveSet((1, 1))
    with pytest.raises(DataError, match="positive"):
        PredictiveSet((0,))


def test_p_values_all_orders_by_model_and_checks_alignment():
    models = [make_identity_model(1, label=1),
              make_affine_model(np.array([[1.0]]), np.array([-5.0]), label=2)]
    pools = [build_score_pool(models[0], np.linspace(-2, 2, 50).reshape(-1, 1)),
             build_score_pool(models[1], np.linspace(3, 7, 50).reshape(-1, 1))]
    pv = p_values_all(models, pools, np.array([0.0]))
    assert pv.labels == (1, 2)
    assert pv.values[0] > pv.values[1]
    with pytest.raises(ConfigError, match="pool per model"):
        p_values_all(models, pools[:1], np.array([0.0]))
    with pytest.raises(ConfigError, match="paired with pool"):
        p_values_all(models, list(reversed(pools)), np.array([0.0]))


def test_p_value_matrix_rows_match_single_sample_path():
    rng = np.random.default_rng(29)
    models = [make_identity_model(2, label=1),
              make_affine_model(np.eye(2) * 0.5, np.zeros(2), label=2)]
    pools = [build_score_pool(m, rng.standard_normal((100, 2))) for m in models]
    x = rng.standard_normal((7, 2))
    labels, mat = p_value_matrix(models, pools, x)
    assert labels == (1, 2) and mat.shape == (7, 2)
    for i in range(7):
        pv = p_values_all(models, pools, x[i])
        assert np.array_equal(mat[i], pv.values)


# -- CSV round-trips ---------------------------------------------------------------

def test_pool_csv_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(31)
    pools = [ScorePool(1, rng.chisquare(2, size=30)),
             ScorePool(2, rng.chisquare(5, size=20))]
    path = str(tmp_path / "pools.csv")
    save_pools(pools, path)
    loaded = load_pools(path)
    assert [p.class_label for p in loaded] == [1, 2]
    for orig, back in zip(pools, loaded):
        assert np.array_equal(orig.scores, back.scores)


def test_pool_csv_header_and_empty_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("score,class\n1,1\n")
    with pytest.raises(DataError, match="header"):
        load_pools(str(bad))
    empty = tmp_path / "empty.csv"
    empty.write_text("class,score\n")
    with pytest.raises(DataError, match="no score rows"):
        load_pools(str(empty))


def test_p_value_csv_roundtrip_exact(tmp_path):
    mat = np.array([[1.0 / 3.0, 0.2], [0.05, 1.0]])
    path = str(tmp_path / "pv.csv")
    save_p_values(path, (1, 2), mat, sample_ids=[10, 11])
    labels, ids, back = load_p_values(path)
    assert labels == (1, 2)
    assert np.array_equal(ids, [10, 11])
    assert np.array_equal(back, mat)


def test_set_csv_roundtrip_with_outlier_token(tmp_path):
    sets = [PredictiveSet((1, 3)), PredictiveSet(()), PredictiveSet((2,))]
    path = str(tmp_path / "sets.csv")
    save_sets(path, sets, sample_ids=[0, 1, 2])
    raw = (tmp_path / "sets.csv").read_text().splitlines()
    assert raw[0] == "sample_id,set"
    assert raw[2] == "1,OUTLIER"
    ids, back = load_sets(path)
    assert np.array_equal(ids, [0, 1, 2])
    assert [ps.labels for ps in back] == [(1, 3), (), (2,)]
