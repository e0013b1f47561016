import numpy as np
import pytest
import torch

from amsrc.model import AmsrcNet, fgfm_fuse, load_checkpoint, save_checkpoint


def make_inputs(batch=2, t=4, size=32, seed=0):
    g = torch.Generator().manual_seed(seed)
    frames = torch.rand(batch, t, size, size, generator=g)
    flows = torch.rand(batch, t, 2, size, size, generator=g) - 0.5
    return frames, flows


class TestFgfmFuse:
    def test_zero_flow_is_identity(self, rng):
        f = torch.from_numpy(rng.random((8, 4, 4), dtype=np.float32))
        fused = fgfm_fuse(f, torch.zeros_like(f))
        assert torch.equal(fused, f)

    def test_zero_frame_halves_flow(self, rng):
        v = torch.from_numpy(rng.standard_normal((8, 4, 4)).astype(np.float32))
        fused = fgfm_fuse(torch.zeros_like(v), v)
        assert torch.allclose(fused, 0.5 * v, atol=1e-7)

    def test_scalar_value(self):
        expected = 1.0 + 2.0 / (1.0 + np.exp(-1.0))
        got = float(fgfm_fuse(torch.tensor(1.0), torch.tensor(2.0)))
        assert got == pytest.approx(expected, abs=1e-5)

    def test_monotone_in_flow(self, rng):
        f = torch.from_numpy(rng.random((4, 4)).astype(np.float32))
        v = torch.from_numpy(rng.random((4, 4)).astype(np.float32))
        delta = 0.25
        increase = fgfm_fuse(f, v + delta) - fgfm_fuse(f, v)
        gate = torch.sigmoid(f)
        assert torch.all(increase > 0)
        assert torch.allclose(increase, delta * gate, atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            fgfm_fuse(torch.zeros(2, 3), torch.zeros(3, 2))


class TestEncoders:
    def test_default_bottleneck_shape(self):
        net = AmsrcNet(seed=0)
        frames, flows = make_inputs()
        fea, skips = net.encode_frames(frames)
        assert tuple(fea.shape) == (2, 128, 4, 4)
        assert [tuple(s.shape[1:]) for s in skips] == [
            (32, 16, 16), (64, 8, 8), (128, 4, 4)]
        fea_flow = net.encode_flows(flows)
        assert tuple(fea_flow.shape) == (2, 128, 4, 4)

    def test_latents_nonnegative(self):
        net = AmsrcNet(seed=3)
        frames, flows = make_inputs(seed=5)
        with torch.no_grad():
            _, latents = net(frames, flows)
        assert float(latents.fea_frame.min()) >= 0.0
        assert float(latents.fea_flow.min()) >= 0.0

    def test_deterministic_forward(self):
        net = AmsrcNet(seed=11)
        frames, flows = make_inputs(seed=2)
        out1, lat1 = net(frames, flows)
        out2, lat2 = net(frames, flows)
        assert torch.equal(out1, out2)
        assert torch.equal(lat1.fea_frame, lat2.fea_frame)

    def test_zero_params_zero_output(self):
        net = AmsrcNet(seed=0)
        with torch.no_grad():
            for p in net.parameters():
                p.zero_()
        frames, flows = make_inputs()
        fea, _ = net.encode_frames(torch.zeros_like(frames))
        assert torch.equal(fea, torch.zeros_like(fea))
        assert torch.equal(net.encode_flows(torch.zeros_like(flows)),
                           torch.zeros_like(fea))

    def test_shape_error_names_expected_and_got(self):
        net = AmsrcNet(seed=0)
        with pytest.raises(ValueError, match=r"expected shape.*got"):
            net.encode_frames(torch.zeros(1, 3, 32, 32))
        with pytest.raises(ValueError, match=r"expected shape.*got"):
            net.encode_flows(torch.zeros(1, 4, 2, 16, 16))


class TestDecoder:
    def test_output_shape_mirrors_input(self):
        for widths in ((32, 64, 128), (4, 8, 16), (8,)):
            net = AmsrcNet(widths=widths, seed=1)
            frames, flows = make_inputs()
            pred, _ = net(frames, flows)
            assert tuple(pred.shape) == (2, 1, 32, 32)

    def test_zero_everything_gives_half(self):
        net = AmsrcNet(widths=(4, 8), seed=0)
        with torch.no_grad():
            for p in net.parameters():
                p.zero_()
        net.eval()
        fused = torch.zeros(1, 8, 8, 8)
        skips = [torch.zeros(1, 4, 16, 16), torch.zeros(1, 8, 8, 8)]
        out = net.decode(fused, skips)
        assert torch.allclose(out, torch.full_like(out, 0.5))

    def test_skip_count_mismatch(self):
        net = AmsrcNet(seed=0)
        fused = torch.zeros(1, 128, 4, 4)
        with pytest.raises(ValueError, match="skip/level count mismatch"):
            net.decode(fused, [torch.zeros(1, 32, 16, 16)])


class TestForwardAblations:
    def test_frame_only_drops_flow_latent(self):
        net = AmsrcNet(use_flow=False, seed=4)
        frames, _ = make_inputs()
        pred, latents = net(frames)
        assert latents.fea_flow is None
        assert tuple(pred.shape) == (2, 1, 32, 32)

    def test_additive_fusion_with_zero_flow_matches_frame_path(self):
        # Zero flow input through a zero-bias encoder in eval mode yields
        # exactly zero flow features, so both fusion rules reduce to the
        # frame-only path on the same weights.
        net = AmsrcNet(use_flow=True, use_fgfm=False, seed=9).eval()
        frames, flows = make_inputs(seed=7)
        with torch.no_grad():
            pred_full, latents = net(frames, torch.zeros_like(flows))
            assert float(latents.fea_flow.abs().max()) == 0.0
            fea, skips = net.encode_frames(frames)
            pred_frame_only = net.decode(fea, skips)
        assert torch.equal(pred_full, pred_frame_only)

    def test_fgfm_fusion_with_zero_flow_features_equals_frame_path(self):
        net = AmsrcNet(use_flow=True, use_fgfm=True, seed=9).eval()
        frames, _ = make_inputs(seed=7)
        fea, skips = net.encode_frames(frames)
        fused = fgfm_fuse(fea, torch.zeros_like(fea))
        assert torch.equal(fused, fea)
        assert torch.equal(net.decode(fused, skips), net.decode(fea, skips))

    def test_missing_flows_error(self):
        net = AmsrcNet(use_flow=True, seed=0)
        frames, _ = make_inputs()
        with pytest.raises(ValueError, match="flows required"):
            net(frames)


class TestInitAndCheckpoint:
    def test_seeded_init_reproducible(self):
        net1 = AmsrcNet(seed=21)
        net2 = AmsrcNet(seed=21)
        for p1, p2 in zip(net1.parameters(), net2.parameters()):
            assert torch.equal(p1, p2)
        net3 = AmsrcNet(seed=22)
        different = any(not torch.equal(p1, p3) for p1, p3
                        in zip(net1.parameters(), net3.parameters()))
        assert different

    def test_checkpoint_round_trip(self, tmp_path):
        net = AmsrcNet(widths=(4, 8, 16), use_fgfm=False, seed=13)
        path = tmp_path / "ckpt.pt"
        save_checkpoint(path, net, extra={"config_hash": "abc123"})
        restored, extra = load_checkpoint(path)
        assert extra["config_hash"] == "abc123"
        assert restored.widths == (4, 8, 16)
        assert restored.use_fgfm is False
        frames, flows = make_inputs(seed=3)
        net.eval(), restored.eval()
        pred_a, _ = net(frames, flows)
        pred_b, _ = restored(frames, flows)
        assert torch.equal(pred_a, pred_b)

    def test_finite_parameters(self):
        net = AmsrcNet(seed=5)
        for p in net.parameters():
            assert bool(torch.isfinite(p).all())


class TestGradients:
    def test_analytic_gradient_matches_finite_differences(self):
        """Spot check on a tiny model; the full 200-parameter sweep runs in
        the acceptance suite."""
        from amsrc.losses import (LossWeights, gradient_loss, intensity_loss,
                                  per_sample_cosine_distance,
                                  regularization_loss, total_loss)

        net = AmsrcNet(widths=(4, 8), seed=17).to(torch.float64).eval()
        g = torch.Generator().manual_seed(31)
        frames = torch.rand(2, 4, 32, 32, generator=g, dtype=torch.float64)
        flows = torch.rand(2, 4, 2, 32, 32, generator=g, dtype=torch.float64) - 0.5
        targets = torch.rand(2, 1, 32, 32, generator=g, dtype=torch.float64)
        weights = LossWeights(1, 1, 1, 1)

        def loss_value():
            preds, lat = net(frames, flows)
            return total_loss(
                intensity_loss(preds, targets), gradient_loss(preds, targets),
                per_sample_cosine_distance(lat.fea_frame, lat.fea_flow).mean(),
                regularization_loss(net), weights).total

        loss = loss_value()
        params = list(net.parameters())
        grads = torch.autograd.grad(loss, params)
        rng = np.random.default_rng(8)
        sizes = [p.numel() for p in params]
        h = 1e-5
        for _ in range(20):
            k = int(rng.integers(sum(sizes)))
            pi = 0
            while k >= sizes[pi]:
                k -= sizes[pi]
                pi += 1
            p = params[pi]
            orig = p.data.view(-1)[k].item()
            with torch.no_grad():
                p.data.view(-1)[k] = orig + h
                f_plus = float(loss_value())
                p.data.view(-1)[k] = orig - h
                f_minus = float(loss_value())
                p.data.view(-1)[k] = orig
            fd = (f_plus - f_minus) / (2 * h)
            an = float(grads[pi].view(-1)[k])
            assert abs(fd - an) <= 1e-3 * max(abs(fd), abs(an), 1e-4)
