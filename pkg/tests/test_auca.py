import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpa.auca import (
    AucaConfig,
    LambdaMode,
    SimilarityMatrix,
    compute_lambda,
    generate_uncertain,
    normalize_similarities,
    sample_gaussian,
    sample_interpolated,
    similarity_matrix,
)
from mpa.exceptions import EmptyClassError, TooFewClassesError, ZeroNormVectorError
from mpa.model import Prototype
from mpa.rng import stream


def matrix_from_pairs(pairs_by_index: dict[tuple[int, int], float], n: int):
    values = np.eye(n)
    for (j, k), s in pairs_by_index.items():
        values[j, k] = s
    return SimilarityMatrix(values=values)


class TestSimilarityMatrix:
    def test_identical_prototypes(self):
        protos = [Prototype(0, [1.0, 1.0]), Prototype(1, [2.0, 2.0])]
        sim = similarity_matrix(protos)
        assert sim.values[0, 1] == pytest.approx(1.0)
        assert sim.values[1, 0] == 0.0

    def test_orthogonal_pair(self):
        protos = [Prototype(0, [1.0, 0.0]), Prototype(1, [0.0, 1.0])]
        sim = similarity_matrix(protos)
        assert np.allclose(sim.values, [[1.0, 0.0], [0.0, 1.0]])

    def test_three_prototype_hand_values(self):
        r = np.sqrt(2) / 2
        protos = [
            Prototype(0, [1.0, 0.0]),
            Prototype(1, [r, r]),
            Prototype(2, [0.0, 1.0]),
        ]
        sim = similarity_matrix(protos)
        assert sim.values[0, 1] == pytest.approx(r)
        assert sim.values[1, 2] == pytest.approx(r)
        assert sim.values[0, 2] == pytest.approx(0.0)
        assert np.allclose(np.diag(sim.values), 1.0, atol=1e-6)
        assert np.all(sim.values[np.tril_indices(3, k=-1)] == 0.0)

    def test_too_few_classes(self):
        with pytest.raises(TooFewClassesError):
            similarity_matrix([Prototype(0, [1.0])])

    def test_zero_norm_prototype(self):
        with pytest.raises(ZeroNormVectorError):
            similarity_matrix([Prototype(0, [0.0, 0.0]), Prototype(1, [1.0, 0.0])])

    def test_unordered_ids_rejected(self):
        with pytest.raises(ValueError):
            similarity_matrix([Prototype(1, [1.0]), Prototype(0, [1.0])])

    def test_rescaling_invariance(self, rng):
        vecs = rng.standard_normal((4, 8))
        base = similarity_matrix([Prototype(i, v) for i, v in enumerate(vecs)])
        scaled = similarity_matrix(
            [Prototype(i, (3.7 if i == 2 else 1.0) * v) for i, v in enumerate(vecs)]
        )
        assert np.allclose(base.values, scaled.values, atol=1e-9)


class TestNormalizeSimilarities:
    def test_min_max_mapping(self):
        sim = matrix_from_pairs({(0, 1): 0.2, (0, 2): 0.5, (1, 2): 0.8}, 3)
        got = normalize_similarities(sim)
        assert np.allclose(sorted(got), [0.0, 0.5, 1.0], atol=1e-12)

    def test_all_equal_degenerate(self):
        sim = matrix_from_pairs({(0, 1): 0.4, (0, 2): 0.4, (1, 2): 0.4}, 3)
        assert np.allclose(normalize_similarities(sim), 0.5)

    def test_two_class_single_pair(self):
        sim = matrix_from_pairs({(0, 1): 0.9}, 2)
        assert np.allclose(normalize_similarities(sim), [0.5])

    def test_output_in_unit_interval(self, rng):
        for _ in range(20):
            protos = [Prototype(i, rng.standard_normal(6)) for i in range(5)]
            got = normalize_similarities(similarity_matrix(protos))
            assert got.min() >= 0.0 and got.max() <= 1.0


class TestComputeLambda:
    def test_as_written_hand_value(self):
        # C=3: 1 - (2/3) * (0 + 0.5 + 1) = 0
        lam = compute_lambda(np.array([0.0, 0.5, 1.0]), AucaConfig())
        assert lam == pytest.approx(0.0, abs=1e-12)

    def test_pair_mean_hand_value(self):
        cfg = AucaConfig(lambda_mode=LambdaMode.PAIR_MEAN)
        assert compute_lambda(np.array([0.0, 0.5, 1.0]), cfg) == pytest.approx(0.5)

    def test_all_zero_similarities_give_lambda_one(self):
        # zero sum: both modes reduce to 1 - 0
        s = np.zeros(6)
        assert compute_lambda(s, AucaConfig()) == 1.0
        assert compute_lambda(s, AucaConfig(lambda_mode=LambdaMode.PAIR_MEAN)) == 1.0

    def test_mostly_low_values(self):
        s = np.array([0.0, 0.0, 0.0, 1.0])
        assert compute_lambda(s, AucaConfig()) == pytest.approx(0.5)
        assert compute_lambda(
            s, AucaConfig(lambda_mode=LambdaMode.PAIR_MEAN)
        ) == pytest.approx(0.75)

    def test_clamp(self):
        s = np.array([1.0, 1.0, 0.0])  # mean 2/3 -> raw = -1/3
        assert compute_lambda(s, AucaConfig(lambda_clamp=True)) == 0.0
        assert compute_lambda(s, AucaConfig(lambda_clamp=False)) == pytest.approx(-1 / 3)

    def test_degenerate_returns_configured_value(self):
        cfg = AucaConfig(degenerate_lambda=0.25)
        assert compute_lambda(np.array([0.5, 0.5, 0.5]), cfg) == 0.25

    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=10),
           st.randoms())
    @settings(max_examples=60)
    def test_permutation_invariance(self, values, pyrandom):
        cfg = AucaConfig(lambda_mode=LambdaMode.PAIR_MEAN)
        shuffled = list(values)
        pyrandom.shuffle(shuffled)
        assert compute_lambda(np.array(values), cfg) == pytest.approx(
            compute_lambda(np.array(shuffled), cfg)
        )

    def test_monotonicity_in_pair_mean(self):
        # raising interior similarities toward the max (same anchors) lowers lambda
        low = np.array([0.0, 0.2, 0.3, 1.0])
        high = np.array([0.0, 0.7, 0.8, 1.0])
        cfg = AucaConfig(lambda_mode=LambdaMode.PAIR_MEAN)
        assert compute_lambda(high, cfg) < compute_lambda(low, cfg)

    def test_dispersion_toward_max_decreases_lambda(self):
        # deterministic constructed matrices: mass near the max anchor vs
        # mass near the min anchor
        toward_max = matrix_from_pairs(
            {(0, 1): 0.1, (0, 2): 0.85, (0, 3): 0.9, (1, 2): 0.92, (1, 3): 0.95,
             (2, 3): 0.9}, 4
        )
        toward_min = matrix_from_pairs(
            {(0, 1): 0.1, (0, 2): 0.12, (0, 3): 0.15, (1, 2): 0.18, (1, 3): 0.2,
             (2, 3): 0.95}, 4
        )
        cfg = AucaConfig(lambda_mode=LambdaMode.PAIR_MEAN)
        lam_max = compute_lambda(normalize_similarities(toward_max), cfg)
        lam_min = compute_lambda(normalize_similarities(toward_min), cfg)
        assert lam_max < lam_min


class TestSampling:
    def test_interpolation_hand_value(self):
        feats = {0: [np.array([1.0, 0.0])], 1: [np.array([0.0, 1.0])]}
        cfg_rng = stream(0, 5)
        sample, prov = sample_interpolated(feats, 0.5, 0.5, cfg_rng)
        assert np.allclose(sample, [0.5, 0.5])
        assert prov.kind == "interpolated"
        assert (prov.class_a, prov.class_b) == (0, 1)
        assert prov.alpha == pytest.approx(0.5)

    def test_alpha_endpoint_identity(self):
        feats = {0: [np.array([2.0, 3.0])], 1: [np.array([-1.0, 5.0])]}
        sample, prov = sample_interpolated(feats, 1.0, 1.0, stream(1, 1))
        source = feats[prov.class_a][0]
        assert np.allclose(sample, source)

    def test_equal_features_any_alpha(self):
        v = np.array([4.0, -2.0])
        feats = {0: [v.copy()], 1: [v.copy()]}
        sample, _ = sample_interpolated(feats, 0.2, 0.8, stream(2, 2))
        assert np.allclose(sample, v)

    def test_too_few_classes(self):
        with pytest.raises(TooFewClassesError):
            sample_interpolated({0: [np.zeros(2)]}, 0.2, 0.8, stream(0, 0))

    def test_empty_class(self):
        with pytest.raises(EmptyClassError):
            sample_interpolated({0: [np.zeros(2)], 1: []}, 0.2, 0.8, stream(0, 0))

    def test_alpha_within_range(self):
        feats = {0: [np.array([1.0])], 1: [np.array([0.0])]}
        rng = stream(3, 3)
        for _ in range(200):
            _, prov = sample_interpolated(feats, 0.2, 0.8, rng)
            assert 0.2 <= prov.alpha <= 0.8

    def test_gaussian_shape_and_determinism(self):
        a = sample_gaussian(768, stream(4, 4))
        b = sample_gaussian(768, stream(4, 4))
        assert a.shape == (768,)
        assert np.array_equal(a, b)

    def test_gaussian_moments(self):
        rng = stream(6, 6)
        draws = np.concatenate([sample_gaussian(768, rng) for _ in range(131)])
        assert draws.size >= 100_000
        assert abs(draws.mean()) < 0.02
        assert abs(draws.var() - 1.0) < 0.02


def two_class_features(dim=4):
    return (
        {0: [np.full(dim, 1.0)], 1: [np.full(dim, -1.0)]},
        [Prototype(0, np.full(dim, 1.0)), Prototype(1, np.full(dim, -1.0))],
    )


class TestGenerateUncertain:
    def test_forced_lambda_zero_all_gaussian(self):
        feats, protos = two_class_features()
        cfg = AucaConfig(sample_count=500, lambda_override=0.0)
        batch = generate_uncertain(feats, protos, cfg, stream(1, 9))
        assert batch.lam == 0.0
        assert batch.interpolated_count() == 0

    def test_forced_lambda_one_all_interpolated(self):
        feats, protos = two_class_features()
        cfg = AucaConfig(sample_count=500, lambda_override=1.0)
        batch = generate_uncertain(feats, protos, cfg, stream(2, 9))
        assert batch.interpolated_count() == 500

    def test_binomial_concentration(self):
        feats, protos = two_class_features()
        n = 10_000
        cfg = AucaConfig(sample_count=n, lambda_override=0.3)
        batch = generate_uncertain(feats, protos, cfg, stream(3, 9))
        fraction = batch.interpolated_count() / n
        assert abs(fraction - 0.3) <= 3.0 * np.sqrt(0.3 * 0.7 / n)

    def test_auto_sample_count(self):
        feats = {0: [np.ones(3)] * 4, 1: [np.ones(3)] * 5}
        protos = [Prototype(0, np.ones(3)), Prototype(1, 2 * np.ones(3))]
        cfg = AucaConfig(lambda_override=0.5)
        batch = generate_uncertain(feats, protos, cfg, stream(4, 9))
        assert len(batch.samples) == 5  # ceil(9 / 2)

    def test_sample_dim_matches_bank(self):
        feats, protos = two_class_features(dim=7)
        cfg = AucaConfig(sample_count=20, lambda_override=0.5)
        batch = generate_uncertain(feats, protos, cfg, stream(5, 9))
        assert all(s.shape == (7,) for s in batch.samples)
        assert len(batch.provenance) == len(batch.samples)

    def test_mixture_mean_matches_expectation(self):
        # fixed F_j, F_k: empirical mean converges to lam * (Fj + Fk) / 2
        dim = 6
        fj = np.linspace(-2.0, 2.0, dim)
        fk = np.linspace(3.0, -1.0, dim)
        feats = {0: [fj], 1: [fk]}
        protos = [Prototype(0, fj), Prototype(1, fk)]
        lam = 0.6
        n = 40_000
        cfg = AucaConfig(sample_count=n, lambda_override=lam)
        batch = generate_uncertain(feats, protos, cfg, stream(6, 9))
        X = np.stack(batch.samples)
        expected = lam * (fj + fk) / 2.0
        # per-coordinate variance of the mixture, exact:
        # gaussian part: 1 + 0 mean; interpolated: E[(a*fj + (1-a)*fk)^2]
        e_a2 = 0.25 + (0.8 - 0.2) ** 2 / 12.0  # E[alpha^2] for U(0.2, 0.8)
        e_a1ma = 0.5 - e_a2  # E[alpha (1 - alpha)]
        second = (1 - lam) * 1.0 + lam * (
            e_a2 * (fj**2 + fk**2) + 2 * e_a1ma * fj * fk
        )
        sigma = np.sqrt(second - expected**2)
        assert np.all(np.abs(X.mean(axis=0) - expected) <= 3.0 * sigma / np.sqrt(n))

    def test_lambda_chain_when_not_forced(self):
        rng_data = np.random.default_rng(11)
        feats = {i: [rng_data.standard_normal(8) for _ in range(3)] for i in range(4)}
        protos = [Prototype(i, np.mean(feats[i], axis=0)) for i in range(4)]
        cfg = AucaConfig(sample_count=10)
        batch = generate_uncertain(feats, protos, cfg, stream(7, 9))
        expected = compute_lambda(
            normalize_similarities(similarity_matrix(protos)), cfg
        )
        assert batch.lam == pytest.approx(expected)

    def test_determinism(self):
        feats, protos = two_class_features()
        cfg = AucaConfig(sample_count=50)
        a = generate_uncertain(feats, protos, cfg, stream(8, 9))
        b = generate_uncertain(feats, protos, cfg, stream(8, 9))
        assert a.lam == b.lam
        for sa, sb in zip(a.samples, b.samples):
            assert np.array_equal(sa, sb)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AucaConfig(alpha_low=0.9, alpha_high=0.2)
        with pytest.raises(ValueError):
            AucaConfig(sample_count=0)
        with pytest.raises(ValueError):
            AucaConfig(lambda_override=1.5)
