"""Generation modes: sampling statistics, determinism, and mode identities."""

import numpy as np
import pytest
import torch

from _configs import TINY_CONFIG
from styleq import StyleControlledModel, make_dataset
from styleq.inference import (
    GenerationConfig,
    generate_from_prior,
    generate_interpolate,
    generate_primed,
    generate_replicate,
    _run_generation,
    sample_output_step,
)
from styleq.seqmodel import OutputDistParams
from styleq.styleeq import phi, transform_M
from styleq.synthglyph import BASE_POINTS_PER_GLYPH, ContentSequence


@pytest.fixture(scope="module")
def model():
    torch.manual_seed(7)
    return StyleControlledModel(TINY_CONFIG)


@pytest.fixture(scope="module")
def reference():
    ds = make_dataset(2, min_len=1, max_len=2, seed=3,
                      style_sampler={"speed": (0.7, 0.8), "jitter": (0.0, 0.01)})
    return ds


CONTENT = ContentSequence((1, 3), alphabet_size=TINY_CONFIG.alphabet)


def single_component_dist(mean=(1.0, -0.5), log_std=0.0, corr=0.0):
    return OutputDistParams(
        log_pi=torch.zeros(1, 1),
        means=torch.tensor([[list(mean)]]),
        log_stds=torch.full((1, 1, 2), float(log_std)),
        corr=torch.full((1, 1), float(corr)),
        pen_logit=torch.full((1,), 50.0),
        stop_logit=torch.full((1,), -50.0),
    )


class TestGenerationConfig:
    @pytest.mark.parametrize(
        "kwargs", [{"std_scale": 0.0}, {"std_scale": 2.0}, {"max_frames": 0}]
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            GenerationConfig(**kwargs)


class TestSampleOutputStep:
    def test_std_scale_shrinks_gaussian_only(self):
        # Monte Carlo against the exact moments: with std_scale = 0.9 the
        # empirical std of dx must be 0.9 * sigma, while the mean is untouched
        dist = single_component_dist()
        gen = torch.Generator().manual_seed(0)
        gcfg = GenerationConfig(std_scale=0.9)
        draws = torch.stack([sample_output_step(dist, gcfg, gen)[0] for _ in range(20000)])
        se = 1.0 / np.sqrt(20000)
        assert draws[:, 0].mean().item() == pytest.approx(1.0, abs=4 * 0.9 * se)
        assert draws[:, 0].std().item() == pytest.approx(0.9, rel=0.03)
        assert draws[:, 1].std().item() == pytest.approx(0.9, rel=0.03)
        assert (draws[:, 2] == 1.0).all()  # pen logit +50: always down

    def test_std_scale_unity_recovers_model_std(self):
        dist = single_component_dist(log_std=np.log(0.5))
        gen = torch.Generator().manual_seed(1)
        draws = torch.stack(
            [sample_output_step(dist, GenerationConfig(std_scale=1.0), gen)[0]
             for _ in range(20000)]
        )
        assert draws[:, 0].std().item() == pytest.approx(0.5, rel=0.03)

    def test_correlation_realized(self):
        dist = single_component_dist(corr=0.8)
        gen = torch.Generator().manual_seed(2)
        draws = torch.stack(
            [sample_output_step(dist, GenerationConfig(std_scale=1.0), gen)[0]
             for _ in range(20000)]
        )
        emp = np.corrcoef(draws[:, 0].numpy(), draws[:, 1].numpy())[0, 1]
        assert emp == pytest.approx(0.8, abs=0.02)

    def test_temperature_sharpens_mixture_choice(self):
        # two components with 2:1 log-odds; low temperature should make the
        # dominant one nearly certain, means placed far apart to identify it
        dist = OutputDistParams(
            log_pi=torch.log_softmax(torch.tensor([[np.log(2.0), 0.0]]), dim=-1),
            means=torch.tensor([[[10.0, 10.0], [-10.0, -10.0]]]),
            log_stds=torch.full((1, 2, 2), float(np.log(0.01))),
            corr=torch.zeros(1, 2),
            pen_logit=torch.full((1,), 50.0),
            stop_logit=torch.full((1,), -50.0),
        )
        gen = torch.Generator().manual_seed(3)
        cold = torch.stack(
            [sample_output_step(dist, GenerationConfig(temperature=0.1), gen)[0]
             for _ in range(500)]
        )
        assert (cold[:, 0] > 0).float().mean() > 0.99
        hot = torch.stack(
            [sample_output_step(dist, GenerationConfig(temperature=100.0), gen)[0]
             for _ in range(2000)]
        )
        assert (hot[:, 0] > 0).float().mean().item() == pytest.approx(0.5, abs=0.05)


class TestGenerationModes:
    def test_replicate_deterministic(self, model, reference):
        gcfg = GenerationConfig(seed=11, max_frames=60)
        a = generate_replicate(model, CONTENT, reference[0].strokes, gcfg)
        b = generate_replicate(model, CONTENT, reference[0].strokes, gcfg)
        assert np.array_equal(a.strokes.samples, b.strokes.samples)
        assert a.num_frames == b.num_frames and a.truncated == b.truncated

    def test_seed_changes_output(self, model, reference):
        a = generate_replicate(model, CONTENT, reference[0].strokes,
                               GenerationConfig(seed=11, max_frames=60))
        b = generate_replicate(model, CONTENT, reference[0].strokes,
                               GenerationConfig(seed=12, max_frames=60))
        assert not np.array_equal(a.strokes.samples, b.strokes.samples)

    def test_interpolate_alpha_zero_equals_replicate(self, model, reference):
        gcfg = GenerationConfig(seed=21, max_frames=60)
        rep = generate_replicate(model, CONTENT, reference[0].strokes, gcfg)
        interp = generate_interpolate(
            model, CONTENT, reference[0].strokes, reference[1].strokes, 0.0, gcfg
        )
        assert np.array_equal(rep.strokes.samples, interp.strokes.samples)

    def test_interpolate_alpha_one_applies_full_transform(self, model, reference):
        # at alpha = 1 the generator must consume exactly the fully shifted
        # source features; verify by feeding that manual transform through
        # the generation core and comparing bitwise
        gcfg = GenerationConfig(seed=21, max_frames=60)
        interp = generate_interpolate(
            model, CONTENT, reference[0].strokes, reference[1].strokes, 1.0, gcfg
        )
        with torch.no_grad():
            f_s = model.encode_style_strokes(reference[0].strokes)
            f_t = model.encode_style_strokes(reference[1].strokes)
            basis = model.style.basis
            moved = transform_M(f_s, phi(f_t, f_s, basis), basis)
        manual = _run_generation(model, CONTENT, moved, gcfg)
        assert np.array_equal(interp.strokes.samples, manual.strokes.samples)

    def test_prior_mode_runs(self, model):
        result = generate_from_prior(model, CONTENT, GenerationConfig(seed=5, max_frames=40))
        assert result.strokes.samples.shape[0] >= 2
        assert result.num_frames <= 40

    def test_primed_without_reference_is_prior(self, model):
        gcfg = GenerationConfig(seed=6, max_frames=40)
        primed = generate_primed(model, CONTENT, None, None, gcfg)
        prior = generate_from_prior(model, CONTENT, gcfg)
        assert np.array_equal(primed.strokes.samples, prior.strokes.samples)

    def test_primed_reference_changes_state(self, model, reference):
        gcfg = GenerationConfig(seed=6, max_frames=40)
        primed = generate_primed(
            model, CONTENT, reference[0].strokes, reference[0].content, gcfg
        )
        prior = generate_from_prior(model, CONTENT, gcfg)
        assert not np.array_equal(primed.strokes.samples, prior.strokes.samples)

    def test_primed_requires_reference_content(self, model, reference):
        with pytest.raises(ValueError):
            generate_primed(model, CONTENT, reference[0].strokes, None,
                            GenerationConfig(seed=6))

    def test_attention_weights_recorded(self, model, reference):
        result = generate_replicate(
            model, CONTENT, reference[0].strokes,
            GenerationConfig(seed=8, max_frames=30), record_attention=True,
        )
        w = result.attention_weights
        assert w is not None and w.shape[1] == TINY_CONFIG.heads
        sums = w.sum(dim=-1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-5)


class TestTermination:
    def test_never_stopping_hits_cap(self, model, reference):
        # forcing the stop logit hard negative must run to the frame cap
        poked = StyleControlledModel(TINY_CONFIG)
        poked.load_state_dict(model.state_dict())
        with torch.no_grad():
            poked.backbone.head.bias[-1] = -50.0
        result = generate_replicate(poked, CONTENT, reference[0].strokes,
                                    GenerationConfig(seed=9, max_frames=25))
        assert result.truncated and result.num_frames == 25

    def test_content_scaled_cap(self, model, reference):
        # with a huge max_frames the cap comes from the content length
        poked = StyleControlledModel(TINY_CONFIG)
        poked.load_state_dict(model.state_dict())
        with torch.no_grad():
            poked.backbone.head.bias[-1] = -50.0
        one = ContentSequence((4,), alphabet_size=TINY_CONFIG.alphabet)
        result = generate_replicate(poked, one, reference[0].strokes,
                                    GenerationConfig(seed=9, max_frames=10**6))
        assert result.num_frames == 8 * 1 * BASE_POINTS_PER_GLYPH

    def test_immediate_stop_not_truncated(self, model, reference):
        poked = StyleControlledModel(TINY_CONFIG)
        poked.load_state_dict(model.state_dict())
        with torch.no_grad():
            poked.backbone.head.bias[-1] = 50.0
        result = generate_replicate(poked, CONTENT, reference[0].strokes,
                                    GenerationConfig(seed=9, max_frames=25))
        assert not result.truncated
        assert result.strokes.samples.shape[0] >= 2  # padded to a renderable minimum
