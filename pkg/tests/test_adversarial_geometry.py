import itertools
import math

import numpy as np
import pytest
from scipy import optimize

from heavytail_est.adversarial_geometry import (
    FiniteMetric,
    build_geomedian_lb_fixture,
    build_hilbert_simplex_fixture,
    build_meddist_space_tightness_fixture,
    build_meddist_tightness_fixture,
    build_setbased_lb_fixture,
    build_spacebased_lb_fixture,
    geomedian_set_boundary,
    geomedian_space_boundary,
    lb_group_count,
    normalized_factor,
    read_distance_table,
    read_finite_metric,
    simplex_center,
    simplex_inradius,
    table1,
    table2,
    verify_metric,
    write_distance_table,
    write_finite_metric,
)
from heavytail_est.metric_select import delta_radius, select_median_distance_set

ALPHAS = [0.05, 0.1, 0.2, 1 / 3, 0.4]


def absdiff(a, b):
    return abs(a - b)


def brute_force_violation(T):
    k = T.shape[0]
    return max((T[a, c] - T[a, b] - T[b, c] for a, b, c in itertools.product(range(k), repeat=3)),
               default=0.0)


def test_verify_metric_examples():
    T = np.array([[0.0, 1.0, 10.0], [1.0, 0.0, 1.0], [10.0, 1.0, 0.0]])
    rep = verify_metric(T)
    assert not rep.valid
    assert rep.worst_triple == (0, 1, 2)
    assert rep.worst_violation == 8.0
    assert verify_metric(np.zeros((1, 1))).valid


def test_verify_metric_flags():
    assert not verify_metric(np.array([[0.0, 1.0], [2.0, 0.0]])).symmetric
    assert not verify_metric(np.array([[1.0, 1.0], [1.0, 0.0]])).zero_diagonal
    assert not verify_metric(np.array([[0.0, -1.0], [-1.0, 0.0]])).nonnegative


@pytest.mark.parametrize("seed", range(5))
def test_verify_metric_agrees_with_brute_force(seed):
    rng = np.random.default_rng(seed)
    T = rng.uniform(0, 3, (6, 6))
    T = T + T.T
    np.fill_diagonal(T, 0.0)
    assert verify_metric(T).worst_violation == pytest.approx(brute_force_violation(T))


@pytest.mark.parametrize("alpha", [0.02, 0.1, 1 / 6, 0.25, 0.3])
def test_group_count_is_strict(alpha):
    n = lb_group_count(alpha)
    assert n > 1 / (0.5 - alpha)
    assert n - 1 <= 1 / (0.5 - alpha) + 1e-12 or n == 3


def test_setbased_distances_n3():
    fm = build_setbased_lb_fixture(0.1)
    assert fm.labels == ["a1", "a2", "a3", "b1", "b2", "b3"]
    assert (fm.d("a1", "b1"), fm.d("a1", "b2"), fm.d("b1", "b2")) == (3.0, 1.0, 2.0)
    assert fm.k == 6
    assert fm.verify().valid


@pytest.mark.parametrize("alpha", ALPHAS)
def test_setbased_obstruction(alpha):
    fm = build_setbased_lb_fixture(alpha)
    n = len(fm.labels) // 2
    assert fm.verify().valid
    assert fm.k == 2 * n
    for i in range(n):
        assert fm.delta_radius(f"a{i + 1}", alpha) == 1.0
    # whichever b is returned, some admissible target sits at distance 3
    for j in range(n):
        b = f"b{j + 1}"
        assert any(fm.d(f"a{i + 1}", b) == 3.0 and fm.delta_radius(f"a{i + 1}", alpha) <= 1.0
                   for i in range(n))
    rep = select_median_distance_set(fm.candidates(), fm.metric)
    chosen = fm.labels[fm.candidates()[rep.selected_index]]
    assert max(fm.d(a, chosen) for a in fm.w_opt_candidates) == 3.0


def test_setbased_radius_at_the_edge_level():
    # at alpha' = 1/2 - 1/n the strict count needs 2n - 1 candidates, so b_i joins the ball
    fm = build_setbased_lb_fixture(0.1)
    assert fm.delta_radius("a1", 0.5 - 1 / 3) == 3.0


def test_spacebased_fixture():
    fm = build_spacebased_lb_fixture(0.1)
    assert (fm.d("b1", "b2"), fm.d("a1", "b1"), fm.d("a1", "b2")) == (1.0, 2.0, 1.0)
    assert fm.verify().valid
    targets = [fm.index(a) for a in fm.w_opt_candidates]
    for y in range(len(fm.labels)):
        assert max(fm.dist[a, y] for a in targets) >= 2.0
    for a in fm.w_opt_candidates:
        assert fm.delta_radius(a, 0.1) == 1.0


@pytest.mark.parametrize("alpha, k", [(0.1, 10), (0.25, 8), (0.3, 20), (0.05, 20)])
def test_geomedian_set_boundary(alpha, k):
    beta = geomedian_set_boundary(alpha, k)
    fm = build_geomedian_lb_fixture(alpha, k, beta)
    assert fm.verify().valid
    n = round(k * (0.5 + alpha))
    sum_v = [fm.sumd(f"v{i + 1}") for i in range(n)]
    sum_y = [fm.sumd(f"y{t + 1}") for t in range(k - n)]
    assert max(sum_y) <= min(sum_v) + 1e-9
    # just past the boundary the v points win
    fm2 = build_geomedian_lb_fixture(alpha, k, beta + 1e-6)
    assert fm2.sumd("y1") > fm2.sumd("v1")


def test_boundary_with_half_correction_overshoots():
    # using 1/(2 k alpha) in place of 1/(k alpha) leaves sumd(y) - sumd(v) = eps
    alpha, k, eps = 0.25, 8, 1.0
    beta = (2 + 1 / (2 * alpha) - 1 / (2 * k * alpha)) * eps
    fm = build_geomedian_lb_fixture(alpha, k, beta, eps)
    assert fm.sumd("y1") - fm.sumd("v1") == pytest.approx(eps)


@pytest.mark.parametrize("alpha, k", [(0.1, 10), (0.25, 8), (0.3, 20)])
def test_geomedian_space_boundary(alpha, k):
    beta = geomedian_space_boundary(alpha)
    fm = build_geomedian_lb_fixture(alpha, k, beta)
    assert fm.sumd("w_opt") >= fm.sumd("y1") - 1e-9
    assert fm.delta_radius("w_opt", 0.0) <= 1.0


def test_geomedian_integrality():
    with pytest.raises(ValueError, match="try k = 10"):
        build_geomedian_lb_fixture(0.1, 7, 3.0)


def test_geomedian_triangle_needs_beta_at_least_two_eps():
    assert not build_geomedian_lb_fixture(0.25, 8, 1.5).verify().valid
    assert build_geomedian_lb_fixture(0.25, 8, 2.0).verify().valid


def test_meddist_tightness():
    W, w_opt = build_meddist_tightness_fixture(8)
    assert W.tolist() == [0, 0, 0, 2, 2, 4, 4, 4]
    assert delta_radius(list(W), w_opt, 0.0, absdiff) == 1.0
    rep = select_median_distance_set(list(W), absdiff)
    assert any(abs(W[i] - w_opt) == 3.0 for i in rep.tie_indices)


def test_meddist_space_tightness():
    W, w_opt = build_meddist_space_tightness_fixture(8)
    assert delta_radius(list(W), w_opt, 0.0, absdiff) == 1.0
    assert delta_radius(list(W), 3.0, 0.0, absdiff) == 1.0  # as good as w_opt, yet 2 away
    with pytest.raises(ValueError):
        build_meddist_space_tightness_fixture(5)


@pytest.mark.parametrize("n", range(2, 13))
def test_inradius_euclidean(n):
    assert simplex_inradius(n, 2) == pytest.approx(math.sqrt((n - 1) / n), abs=1e-10)


def test_inradius_ratio_three_halves():
    ratio = simplex_inradius(3, 1.5) / simplex_inradius(2, 1.5)
    assert ratio == pytest.approx(2 / 5 ** (1 / 3), abs=1e-10)
    assert ratio > 2 / math.sqrt(3)


@pytest.mark.parametrize("n, p", [(2, 1.5), (3, 1.5), (4, 2.0), (5, 3.0), (7, 1.2), (3, 6.0)])
def test_inradius_matches_golden_section(n, p):
    def radius(a):
        return np.linalg.norm(np.eye(n)[0] - a, ord=p)

    res = optimize.minimize_scalar(radius, bracket=(0.0, 1.0 / n), method="golden", tol=1e-12)
    assert simplex_inradius(n, p) == pytest.approx(res.fun, abs=1e-8)
    assert simplex_center(n, p) == pytest.approx(res.x, abs=1e-5)


def test_inradius_guards():
    with pytest.raises(ValueError):
        simplex_inradius(3, 1.0)
    with pytest.raises(ValueError):
        simplex_inradius(1, 2.0)


@pytest.mark.parametrize("n", [3, 4, 7])
def test_hilbert_fixture(n):
    E, B = build_hilbert_simplex_fixture(n)
    assert np.linalg.norm(B[0] - E[0]) == pytest.approx(math.sqrt(n / (n - 1)))
    for i, j in itertools.permutations(range(n), 2):
        assert np.linalg.norm(B[i] - E[j]) == pytest.approx(simplex_inradius(n - 1, 2))
    # picking b_i when the target is e_i, against the other face centers
    factor = np.linalg.norm(B[0] - E[0]) / np.linalg.norm(B[1] - E[0])
    assert factor >= math.sqrt(n / (n - 2)) - 1e-12


def test_hilbert_fixture_guard():
    with pytest.raises(ValueError):
        build_hilbert_simplex_fixture(2)


def test_table2_values():
    t2 = table2()
    assert t2["set.median_distance"] == pytest.approx(6.0, abs=0.01)
    assert t2["space.median_distance"] == pytest.approx(4.0, abs=0.01)
    assert t2["set.geometric_median.general"] == pytest.approx(14.92, abs=0.01)
    assert t2["space.geometric_median.general"] == pytest.approx(11.65, abs=0.01)
    assert t2["set.geometric_median.general"] == pytest.approx(8 + 4 * math.sqrt(3), abs=1e-6)
    assert t2["space.geometric_median.general"] == pytest.approx(6 + 4 * math.sqrt(2), abs=1e-6)


def test_table1_hilbert_geomedian_limit():
    f = table1()["space.geometric_median.hilbert"]
    values = [f(a) for a in (0.3, 0.4, 0.45, 0.49, 0.4999)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=1e-3)


def test_normalized_factor():
    assert normalized_factor(lambda a: 3.0, 0.25) == 12.0


def test_distance_table_round_trip(tmp_path):
    fm = build_setbased_lb_fixture(0.1)
    path = tmp_path / "t.txt"
    write_distance_table(fm.dist, path)
    assert path.read_text().splitlines()[0] == "6"
    np.testing.assert_array_equal(read_distance_table(path), fm.dist)


@pytest.mark.parametrize(
    "text, match",
    [("", "empty"), ("2\n0 1\n", "expected 2 rows"), ("2\n0 1\n2 0\n", "not symmetric"),
     ("3\n0 1 10\n1 0 1\n10 1 0\n", "triangle"), ("x\n", "malformed")],
)
def test_distance_table_errors(tmp_path, text, match):
    path = tmp_path / "t.txt"
    path.write_text(text)
    with pytest.raises(ValueError, match=match):
        read_distance_table(path)


def test_finite_metric_round_trip(tmp_path):
    fm = build_geomedian_lb_fixture(0.25, 8, 3.0)
    path = tmp_path / "g.txt"
    side = write_finite_metric(fm, path)
    assert side.name == "g.txt.sidecar"
    back = read_finite_metric(path)
    assert back.labels == fm.labels
    assert back.w_opt_candidates == fm.w_opt_candidates
    assert back.W_assignment == fm.W_assignment
    np.testing.assert_array_equal(back.dist, fm.dist)


def test_finite_metric_validation():
    with pytest.raises(ValueError, match="unknown labels"):
        FiniteMetric(["a"], np.zeros((1, 1)), ["b"])
    with pytest.raises(ValueError, match="distinct"):
        FiniteMetric(["a", "a"], np.zeros((2, 2)), [])
