import dataclasses
import math

import numpy as np
import pytest

from reattn import (
    DomainError,
    LengthMismatchError,
    MissingWeightError,
    PipelineConfig,
    SchemaError,
    base_score,
    dispersion_weight,
    final_scores,
    idf_weight,
    idf_weights,
    normalized_entropy,
    reattn_pipeline,
    reweight_tokens,
    token_distribution,
    tokens_from_surfaces,
    weighted_mean_entropy,
)
from reattn.synth import SynthParams, generate_instance

from conftest import scale_attention


class TestIdfWeight:
    def test_absent_token_full_weight(self):
        for n in (1, 2, 9, 100):
            assert idf_weight(0, n) == 1.0

    def test_ubiquitous_token_zero_weight(self):
        for n in (1, 2, 9, 100):
            assert idf_weight(n, n) == 0.0

    def test_reference_value(self):
        # log(10/5)/log(10) = ln2/ln10
        assert idf_weight(4, 9) == pytest.approx(math.log(2) / math.log(10), abs=1e-15)

    def test_single_document_well_defined(self):
        assert idf_weight(0, 1) == 1.0
        assert idf_weight(1, 1) == 0.0

    def test_strictly_decreasing_in_df(self):
        values = [idf_weight(df, 12) for df in range(13)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert all(0.0 <= v <= 1.0 for v in values)

    def test_df_above_n_rejected(self):
        with pytest.raises(DomainError):
            idf_weight(3, 2)


class TestReweightTokens:
    def test_ubiquitous_token_annihilated(self):
        tokens = tokens_from_surfaces(["the"])
        out = reweight_tokens([0.5], tokens, [True], {"the": 0.0})
        assert out.tolist() == [0.0]

    def test_unmasked_token_passthrough(self):
        tokens = tokens_from_surfaces(["rare"])
        out = reweight_tokens([0.5], tokens, [False], {})
        assert out.tolist() == [0.5]

    def test_weighted_value(self):
        tokens = tokens_from_surfaces(["term"])
        w = math.log(2) / math.log(10)
        out = reweight_tokens([0.5], tokens, [True], {"term": w})
        assert out[0] == pytest.approx(0.1505149978319906, abs=1e-12)

    def test_missing_weight_is_an_error(self):
        tokens = tokens_from_surfaces(["term"])
        with pytest.raises(MissingWeightError):
            reweight_tokens([0.5], tokens, [True], {})

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            reweight_tokens([0.5, 0.2], tokens_from_surfaces(["a"]), [True], {"a": 1.0})


class TestBaseScore:
    def test_sums_kept(self):
        assert base_score([0.3, 0.2], [0, 1]) == pytest.approx(0.5)

    def test_excluded_index_ignored(self):
        assert base_score([0.3, -5.0], [0]) == pytest.approx(0.3)

    def test_zero(self):
        assert base_score([0.0, 0.0], [0, 1]) == 0.0


class TestTokenDistribution:
    def test_symmetric(self):
        p = token_distribution([0.3, 0.3], [0, 1])
        assert p.tolist() == [0.5, 0.5]

    def test_negative_clamped(self):
        p = token_distribution([0.3, -0.1, 0.3], [0, 1, 2])
        assert p.tolist() == [0.5, 0.0, 0.5]

    def test_all_nonpositive_degenerate(self):
        assert token_distribution([-0.3, 0.0], [0, 1]) is None


class TestNormalizedEntropy:
    def test_uniform_is_one(self):
        assert normalized_entropy([0.25] * 4, 4) == pytest.approx(1.0, abs=1e-12)

    def test_point_mass_is_zero(self):
        assert normalized_entropy([1.0, 0.0, 0.0], 3) == 0.0

    def test_reference_value(self):
        expected = 1.5 / math.log2(3)
        assert normalized_entropy([0.5, 0.25, 0.25], 3) == pytest.approx(expected, abs=1e-9)

    def test_singleton_set(self):
        assert normalized_entropy([1.0], 1) == 0.0

    def test_degenerate_distribution(self):
        assert normalized_entropy(None, 5) == 0.0

    def test_log_base_cancels(self):
        # computing in bits must give the same ratio as in nats
        p = [0.6, 0.3, 0.1]
        bits = -sum(x * math.log2(x) for x in p) / math.log2(3)
        assert normalized_entropy(p, 3) == pytest.approx(bits, rel=1e-12)


class TestWeightedMeanEntropy:
    def test_reference_value(self):
        assert weighted_mean_entropy([2.0, 1.0], [0.8, 0.2]) == pytest.approx(0.6, abs=1e-12)

    def test_equal_entropies_collapse(self):
        assert weighted_mean_entropy([5.0, 0.1, 2.0], [0.7, 0.7, 0.7]) == pytest.approx(0.7)

    def test_nonpositive_bases_fall_back_to_mean(self):
        assert weighted_mean_entropy([-1.0, 0.0], [0.2, 0.8]) == pytest.approx(0.5)


class TestDispersionWeight:
    def test_zero_deviation(self):
        assert dispersion_weight(0.6, 0.6) == 1.0

    def test_positive_deviation(self):
        assert dispersion_weight(0.8, 0.6) == pytest.approx(1.2)

    def test_lower_bound(self):
        assert dispersion_weight(0.0, 1.0) == 0.0


class TestFinalScores:
    def test_reference_value(self):
        assert final_scores([2.0, 1.0], [1.2, 0.8]) == pytest.approx([0.75, 0.25])

    def test_unit_weights_proportional_to_base(self):
        out = final_scores([2.0, 1.0, 1.0], [1.0, 1.0, 1.0])
        assert out == pytest.approx([0.5, 0.25, 0.25])

    def test_all_zero_skips_normalization(self):
        assert final_scores([0.0, 0.0], [1.3, 0.7]) == [0.0, 0.0]

    def test_nonpositive_base_keeps_unit_weight(self):
        out = final_scores([-1.0, 2.0], [0.4, 1.5])
        # -1 keeps weight 1, 2*1.5=3; sum 2 > 0 so normalized
        assert out == pytest.approx([-0.5, 1.5])


class TestPipeline:
    def test_golden_fixture_all_methods(self, golden_instance, golden_expected):
        for method, expected in golden_expected.items():
            run, breakdowns = reattn_pipeline(golden_instance, PipelineConfig(method=method))
            assert run.doc_ids() == expected["ranking"], method
            for bd in breakdowns:
                want = expected["documents"][bd.doc_id]
                assert bd.final_score == pytest.approx(want["final_score"], rel=1e-9)
                assert bd.base_score == pytest.approx(want["base_score"], rel=1e-9)
                assert list(bd.tokens.filtered_indices) == want["filtered_indices"]

    def test_golden_reattn_ranking(self, golden_instance):
        run, _ = reattn_pipeline(golden_instance, PipelineConfig(method="reattn"))
        assert run.doc_ids() == ["d2", "d1", "d3"]

    def test_no_query_overlap_makes_idf_a_noop(self):
        res = generate_instance(SynthParams(seed=5, overlap_rate=0.0))
        icr, _ = reattn_pipeline(res.instance, PipelineConfig(method="icr"))
        idf, bds = reattn_pipeline(res.instance, PipelineConfig(method="idf_only"))
        assert icr.doc_ids() == idf.doc_ids()
        for a, b in zip(icr.entries, idf.entries):
            assert a.score == pytest.approx(b.score, rel=1e-12)

    def test_identical_entropies_make_entropy_step_a_noop(self, tiny_instance):
        # force every document to a single-token spike: entropy 0 everywhere
        data = np.zeros_like(tiny_instance.attention_actual.data)
        data[0, 0, :, 0] = 0.9
        data[0, 0, :, 3] = 0.9
        inst = dataclasses.replace(
            tiny_instance,
            attention_actual=dataclasses.replace(
                tiny_instance.attention_actual, data=data
            ),
            attention_calibration=dataclasses.replace(
                tiny_instance.attention_calibration,
                data=np.zeros_like(tiny_instance.attention_calibration.data),
            ),
        )
        icr, _ = reattn_pipeline(inst, PipelineConfig(method="icr"))
        ent, bds = reattn_pipeline(inst, PipelineConfig(method="entropy_only"))
        assert icr.doc_ids() == ent.doc_ids()
        assert all(bd.dispersion_weight == pytest.approx(1.0) for bd in bds)

    def test_invalid_instance_rejected(self, tiny_instance):
        inst = dataclasses.replace(tiny_instance, documents=())
        with pytest.raises(SchemaError):
            reattn_pipeline(inst)

    def test_breakdowns_expose_aggregation_source(self, tiny_instance):
        _, bds = reattn_pipeline(tiny_instance)
        assert all(bd.aggregation == "per_head" for bd in bds)

    def test_scale_invariance_of_final_scores(self):
        res = generate_instance(SynthParams(seed=21, attention_mode="aggregated"))
        run, bds = reattn_pipeline(res.instance, PipelineConfig(method="reattn"))
        scaled = scale_attention(res.instance, 37.5)
        run_s, bds_s = reattn_pipeline(scaled, PipelineConfig(method="reattn"))
        assert run.doc_ids() == run_s.doc_ids()
        for a, b in zip(bds, bds_s):
            assert b.final_score == pytest.approx(a.final_score, rel=1e-9)
            assert b.entropy == pytest.approx(a.entropy, rel=1e-9)
            assert b.dispersion_weight == pytest.approx(a.dispersion_weight, rel=1e-9)

    def test_normalization_preserves_rank_order(self):
        for seed in range(5):
            res = generate_instance(SynthParams(seed=seed))
            _, bds = reattn_pipeline(res.instance, PipelineConfig(method="reattn"))
            adjusted = [bd.adjusted_score for bd in bds]
            finals = [bd.final_score for bd in bds]
            assert np.argsort(adjusted).tolist() == np.argsort(finals).tolist()

    def test_bounds_on_random_instances(self):
        for seed in range(10):
            res = generate_instance(
                SynthParams(seed=seed, overlap_rate=0.5, concentration=0.7)
            )
            _, bds = reattn_pipeline(res.instance, PipelineConfig(method="reattn"))
            for bd in bds:
                assert 0.0 <= bd.entropy <= 1.0
                assert 0.0 <= bd.dispersion_weight <= 2.0

    def test_idf_monotonicity(self):
        # raising df of a query token (all else fixed) never raises any
        # document's base score when that token's calibrated score is >= 0
        from reattn import Document, tokens_from_surfaces as toks

        def build(df_extra):
            docs = [
                Document("d1", toks(["term", "alpha"])),
                Document("d2", toks(["beta", "gamma"])),
                Document("d3", toks(["term" if df_extra else "delta", "eps"])),
            ]
            data = np.full((1, 1, 1, 6), 0.2)
            calib = np.zeros((1, 1, 1, 6))
            from reattn import AttentionBlock, RankingInstance, PER_HEAD

            return RankingInstance(
                query_text="term",
                query_tokens=toks(["term"]),
                calibration_tokens=toks(["N/A"]),
                documents=tuple(docs),
                attention_actual=AttentionBlock(PER_HEAD, 1, 1, data),
                attention_calibration=AttentionBlock(PER_HEAD, 1, 1, calib),
                metadata={"query_id": "q"},
            )

        _, low_df = reattn_pipeline(build(False), PipelineConfig(method="idf_only"))
        _, high_df = reattn_pipeline(build(True), PipelineConfig(method="idf_only"))
        assert high_df[0].base_score <= low_df[0].base_score

    def test_document_permutation_equivariance(self):
        res = generate_instance(SynthParams(seed=33, n_docs=6))
        inst = res.instance
        _, bds = reattn_pipeline(inst, PipelineConfig(method="reattn"))
        finals = {bd.doc_id: bd.final_score for bd in bds}

        perm = [3, 0, 5, 1, 4, 2]
        slices = inst.doc_slices()
        order = np.concatenate([np.arange(s.start, s.stop) for s in (slices[i] for i in perm)])
        permuted = dataclasses.replace(
            inst,
            documents=tuple(inst.documents[i] for i in perm),
            attention_actual=dataclasses.replace(
                inst.attention_actual, data=inst.attention_actual.data[..., order]
            ),
            attention_calibration=dataclasses.replace(
                inst.attention_calibration,
                data=inst.attention_calibration.data[..., order],
            ),
        )
        _, bds_p = reattn_pipeline(permuted, PipelineConfig(method="reattn"))
        for bd in bds_p:
            assert bd.final_score == pytest.approx(finals[bd.doc_id], rel=1e-9)


def test_idf_weights_table():
    table = idf_weights({"a": 0, "b": 2}, 2)
    assert table["a"] == 1.0
    assert table["b"] == 0.0
