import math

import numpy as np
import pytest

from avagrad_lab.core import RngStream
from avagrad_lab.problems import (
    COMMON,
    RARE,
    LabeledSet,
    fd_check,
    gaussian_blobs,
    load_csv_dataset,
    mlp_make,
    quadratic_make,
    synth_make,
)


class TestSynthProblem:
    def test_paper_scale_probability(self):
        prob = synth_make(999.0, 1.0)
        assert prob.p == 0.002

    def test_stationary_point_location(self):
        prob = synth_make(999.0, 1.0)
        assert prob.w_star == pytest.approx(0.998 / 1.998, rel=1e-15)
        assert prob.w_star == pytest.approx(0.4995, abs=1e-3)

    def test_gradient_norm_at_right_edge_equals_delta(self):
        prob = synth_make(999.0, 1.0)
        fg = prob.full_grad(np.array([1.0]))
        assert fg[0] == pytest.approx(1.0, rel=1e-12)
        assert fg[0] ** 2 == pytest.approx(prob.delta, rel=1e-12)

    def test_full_gradient_is_two_outcome_expectation(self):
        prob = synth_make(999.0, 1.0)
        rng = np.random.default_rng(1)
        for w0 in rng.random(100):
            w = np.array([w0])
            expectation = prob.p * (prob.big_c * w) + (1.0 - prob.p) * np.full(1, -1.0)
            fg = prob.full_grad(w)
            assert abs(fg[0] - expectation[0]) <= 1e-15 * max(1.0, abs(expectation[0]))

    def test_stationarity(self):
        prob = synth_make(999.0, 1.0)
        assert abs(prob.full_grad(np.array([prob.w_star]))[0]) <= 1e-12

    def test_objective_matches_outcome_expectation(self):
        prob = synth_make(999.0, 1.0)
        w = np.array([0.3])
        manual = sum(p * prob.loss(w, tok) for p, tok in prob.outcomes())
        assert prob.objective(w) == pytest.approx(manual, rel=1e-14)

    def test_sampler_frequency(self):
        prob = synth_make(999.0, 1.0)
        rng = RngStream(20240)
        draws = 10**6
        rare = sum(1 for _ in range(draws) if prob.sample(rng) == RARE)
        sigma = math.sqrt(draws * prob.p * (1 - prob.p))
        assert abs(rare - draws * prob.p) <= 4 * sigma

    def test_constants(self):
        prob = synth_make(999.0, 1.0)
        consts = prob.constants(np.array([1.0]))
        assert consts.m_smooth == pytest.approx(prob.p * 999.0, rel=1e-15)
        assert consts.g_inf == 999.0 and consts.g_2 == 999.0
        gap = prob.objective(np.array([1.0])) - prob.objective(np.array([prob.w_star]))
        assert consts.d_gap == pytest.approx(gap, rel=1e-15) and consts.d_gap > 0

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            synth_make(0.5, 1.0)  # C <= 1
        with pytest.raises(ValueError):
            synth_make(999.0, -0.1)  # negative delta
        with pytest.raises(ValueError):
            synth_make(999.0, 0.0)  # C > (1-p)/p fails at delta = 0
        with pytest.raises(ValueError):
            synth_make(2.0, 5.0)  # p = 2 outside (0, 1)

    def test_grad_deterministic_given_token(self):
        prob = synth_make(999.0, 1.0)
        w = np.array([0.25])
        assert np.array_equal(prob.grad(w, RARE), prob.grad(w, RARE))
        assert np.array_equal(prob.grad(w, COMMON), np.array([-1.0]))


class TestQuadraticProblem:
    def test_full_grad_example(self):
        prob = quadratic_make([2.0], 0.0, [0.0])
        assert np.array_equal(prob.full_grad(np.array([3.0])), [6.0])

    def test_smoothness_is_max_curvature(self):
        prob = quadratic_make([1.0, 4.0])
        assert prob.constants(np.ones(2)).m_smooth == 4.0

    def test_monte_carlo_mean_gradient(self):
        c = np.array([1.0, 3.0])
        prob = quadratic_make(c, 0.5, [0.2, -0.4])
        rng = RngStream(99)
        w = np.array([1.0, 1.0])
        n = 10**5
        acc = np.zeros(2)
        for _ in range(n):
            acc += prob.grad(w, prob.sample(rng))
        band = 3.0 * (0.5 * c / math.sqrt(n))  # CLT: grad noise std is noise_std * c
        assert np.all(np.abs(acc / n - prob.full_grad(w)) <= band)

    def test_zero_noise_sample_is_exact_minimiser(self):
        prob = quadratic_make([1.0, 2.0], 0.0, [0.5, -0.5])
        token = prob.sample(RngStream(0))
        assert np.array_equal(token, [0.5, -0.5])

    def test_nonpositive_curvature_rejected(self):
        with pytest.raises(ValueError):
            quadratic_make([1.0, 0.0])

    def test_objective_gap_positive(self):
        prob = quadratic_make([2.0, 1.0], 0.3, [0.0, 0.0])
        consts = prob.constants(np.array([1.0, 1.0]))
        assert consts.d_gap == pytest.approx(0.5 * (2.0 + 1.0), rel=1e-12)


class TestGaussianBlobs:
    def test_two_far_blobs(self):
        data = gaussian_blobs(50, 2, 2, 10.0, RngStream(4))
        mean0 = data.features[data.labels == 0].mean(axis=0)
        mean1 = data.features[data.labels == 1].mean(axis=0)
        dist = float(np.linalg.norm(mean0 - mean1))
        assert abs(dist - 20.0) < 1.0

    def test_zero_separation_centers_coincide(self):
        data = gaussian_blobs(200, 3, 2, 0.0, RngStream(5))
        for k in range(3):
            center = data.features[data.labels == k].mean(axis=0)
            assert np.all(np.abs(center) < 0.3)

    def test_deterministic_under_seed(self):
        a = gaussian_blobs(10, 3, 4, 2.0, RngStream(7))
        b = gaussian_blobs(10, 3, 4, 2.0, RngStream(7))
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_one_dimensional_pattern(self):
        data = gaussian_blobs(5, 2, 1, 8.0, RngStream(8))
        assert data.features.shape == (10, 1)

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            gaussian_blobs(0, 2, 2, 1.0, RngStream(0))


def small_mlp(batch_size=4, n_hidden=5, seed=12):
    data = gaussian_blobs(12, 3, 2, 2.0, RngStream(seed))
    return mlp_make(2, n_hidden, 3, data, batch_size=batch_size)


class TestMlpProblem:
    def test_zero_weights_two_classes_gives_log2(self):
        data = LabeledSet(np.array([[0.3, -0.2]]), np.array([1]))
        prob = mlp_make(2, 4, 2, data, batch_size=1)
        loss = prob.loss(np.zeros(prob.dim), np.array([0]))
        assert loss == pytest.approx(math.log(2.0), rel=1e-12)

    def test_dimension_formula(self):
        prob = small_mlp(n_hidden=7)
        assert prob.dim == (2 + 1) * 7 + (7 + 1) * 3

    def test_full_batch_grad_equals_full_grad(self):
        prob = small_mlp()
        rng = RngStream(3)
        w = 0.5 * rng.normal(prob.dim)
        token = np.arange(len(prob.dataset))
        assert np.array_equal(prob.grad(w, token), prob.full_grad(w))

    def test_grad_deterministic_given_token(self):
        prob = small_mlp()
        w = 0.1 * RngStream(1).normal(prob.dim)
        token = prob.sample(RngStream(2))
        assert np.array_equal(prob.grad(w, token), prob.grad(w, token))

    def test_gradient_passes_fd_check_20_points(self):
        prob = small_mlp()
        rng = RngStream(77)
        for _ in range(20):
            w = rng.normal(prob.dim)
            w /= max(1.0, float(np.linalg.norm(w)))
            token = prob.sample(rng)
            assert fd_check(prob, w, token, h=1e-5) <= 1e-5

    def test_dataset_error_perfect_vs_chance(self):
        # far-separated blobs: a trained-free linear-ish solution is not needed,
        # just check the error metric is sane on constant predictions
        prob = small_mlp()
        err = prob.dataset_error(np.zeros(prob.dim), prob.dataset)
        assert 0.0 <= err <= 1.0

    def test_dataset_dimension_mismatch(self):
        data = gaussian_blobs(5, 2, 3, 1.0, RngStream(0))
        with pytest.raises(ValueError):
            mlp_make(2, 4, 2, data)

    def test_label_out_of_range(self):
        data = LabeledSet(np.zeros((2, 2)), np.array([0, 5]))
        with pytest.raises(ValueError):
            mlp_make(2, 4, 2, data)

    def test_batch_size_bounds(self):
        data = gaussian_blobs(2, 2, 2, 1.0, RngStream(0))
        with pytest.raises(ValueError):
            mlp_make(2, 4, 2, data, batch_size=5)


class TestFdCheck:
    def test_quadratic_tight(self):
        prob = quadratic_make([1.0, 3.0, 0.5], 0.2, [0.1, 0.2, 0.3])
        rng = RngStream(21)
        for _ in range(20):
            w = rng.normal(3)
            token = prob.sample(rng)
            assert fd_check(prob, w, token, h=1e-5) <= 1e-7

    def test_synth_common_token_linear(self):
        prob = synth_make(999.0, 1.0)
        assert fd_check(prob, np.array([0.37]), COMMON, h=1e-5) <= 1e-10

    def test_synth_rare_token(self):
        prob = synth_make(999.0, 1.0)
        assert fd_check(prob, np.array([0.37]), RARE, h=1e-5) <= 1e-7

    def test_bad_h_rejected(self):
        prob = synth_make(999.0, 1.0)
        with pytest.raises(ValueError):
            fd_check(prob, np.array([0.5]), COMMON, h=0.0)


class TestLoadCsvDataset:
    def test_single_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0,0\n")
        data = load_csv_dataset(path, 2, 3)
        assert np.array_equal(data.features, [[1.0, 2.0]])
        assert np.array_equal(data.labels, [0])

    def test_crlf_and_order_preserved(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_bytes(b"1,2,0\r\n3,4,1\r\n")
        data = load_csv_dataset(path, 2, 2)
        assert np.array_equal(data.features, [[1, 2], [3, 4]])
        assert np.array_equal(data.labels, [0, 1])

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,x,0\n")
        with pytest.raises(ValueError, match="line 1"):
            load_csv_dataset(path, 2, 2)

    def test_wrong_arity_reports_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0,3.0,0\n")
        with pytest.raises(ValueError, match="line 1"):
            load_csv_dataset(path, 2, 2)

    def test_label_out_of_range(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1.0,2.0,7\n")
        with pytest.raises(ValueError, match="label"):
            load_csv_dataset(path, 2, 2)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_csv_dataset(path, 2, 2)
