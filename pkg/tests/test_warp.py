import numpy as np
import pytest

from evfi.errors import FormatError
from evfi.warp import (
    WarpResult,
    backward_warp,
    compose_refinement,
    read_flo,
    scale_flow,
    write_flo,
)


def constant_flow(h, w, dx, dy):
    flow = np.zeros((h, w, 2), dtype=np.float64)
    flow[:, :, 0] = dx
    flow[:, :, 1] = dy
    return flow


def random_image(rng, h=12, w=16):
    return rng.integers(0, 256, size=(h, w, 3)).astype(np.float64)


class TestBackwardWarp:
    def test_zero_flow_is_bit_exact_identity(self, rng):
        img = random_image(rng)
        out = backward_warp(img, constant_flow(12, 16, 0.0, 0.0))
        assert np.array_equal(out.image, img)
        assert out.validity.all()

    def test_integer_shift_matches_index_shift(self, rng):
        img = random_image(rng)
        out = backward_warp(img, constant_flow(12, 16, 1.0, 0.0))
        assert np.array_equal(out.image[:, :-1], img[:, 1:])
        assert out.validity[:, :-1].all()
        assert not out.validity[:, -1].any()

    def test_fractional_shift_on_ramp(self):
        # ramp image I(y, x) = 8x: sampling at x + 0.5 averages neighbors
        img = (8.0 * np.arange(16))[None, :].repeat(12, axis=0)
        out = backward_warp(img, constant_flow(12, 16, 0.5, 0.0))
        interior = out.image[:, :-1]
        expected = 8.0 * (np.arange(15) + 0.5)
        assert np.allclose(interior, expected[None, :], atol=1e-9)

    def test_fully_outside_sample_zero_invalid(self):
        img = np.full((4, 4), 200.0)
        out = backward_warp(img, constant_flow(4, 4, 100.0, 0.0))
        assert np.array_equal(out.image, np.zeros((4, 4)))
        assert not out.validity.any()

    def test_partially_outside_taps_zero_filled(self):
        img = np.full((4, 4), 100.0)
        out = backward_warp(img, constant_flow(4, 4, -0.5, 0.0))
        # first column samples x = -0.5: one tap inside with weight 0.5
        assert np.allclose(out.image[:, 0], 50.0)
        assert not out.validity[:, 0].any()
        assert out.validity[:, 1:].all()

    def test_linearity_in_source(self, rng):
        a = random_image(rng)
        b = random_image(rng)
        flow = rng.uniform(-2, 2, size=(12, 16, 2))
        wa = backward_warp(a, flow)
        wb = backward_warp(b, flow)
        wsum = backward_warp(2.0 * a + 3.0 * b, flow)
        ref = 2.0 * wa.image + 3.0 * wb.image
        mask = wa.validity
        assert np.allclose(wsum.image[mask], ref[mask], rtol=1e-6, atol=1e-6)

    def test_dimension_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            backward_warp(random_image(rng), constant_flow(5, 5, 0, 0))

    def test_nonfinite_flow_rejected(self, rng):
        flow = constant_flow(12, 16, 0, 0)
        flow[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            backward_warp(random_image(rng), flow)

    def test_validity_requires_footprint_inside(self):
        # sampling exactly at the last column is valid (zero-weight tap at W)
        img = np.full((4, 4), 70.0)
        out = backward_warp(img, constant_flow(4, 4, 3.0, 0.0))
        assert out.validity[:, 0].all()
        assert np.allclose(out.image[:, 0], 70.0)
        assert not out.validity[:, 1:].any()


class TestScaleFlow:
    def test_zero_factor(self):
        out = scale_flow(constant_flow(3, 3, 2.0, -4.0), 0.0)
        assert not out.any()

    def test_identity_factor(self):
        flow = constant_flow(3, 3, 2.0, -4.0)
        assert np.array_equal(scale_flow(flow, 1.0), flow)

    def test_half_factor(self):
        out = scale_flow(constant_flow(3, 3, 2.0, -4.0), 0.5)
        assert np.allclose(out[:, :, 0], 1.0)
        assert np.allclose(out[:, :, 1], -2.0)

    def test_nonfinite_factor_rejected(self):
        with pytest.raises(ValueError):
            scale_flow(constant_flow(2, 2, 1, 1), float("inf"))


class TestComposeRefinement:
    def test_zero_residual_keeps_base(self, rng):
        base = backward_warp(random_image(rng), constant_flow(12, 16, 1.0, 0.0))
        out = compose_refinement(base, constant_flow(12, 16, 0.0, 0.0))
        assert np.array_equal(out.image, base.image)
        assert np.array_equal(out.validity, base.validity)

    def test_inverse_residual_recovers_interior(self, rng):
        img = random_image(rng)
        base = backward_warp(img, constant_flow(12, 16, 2.0, 0.0))
        out = compose_refinement(base, constant_flow(12, 16, -2.0, 0.0))
        # columns 2..13 survive shift right by 2 then left by 2
        assert np.array_equal(out.image[:, 2:14], img[:, 2:14])
        assert out.validity[:, 2:14].all()

    def test_residual_pointing_outside_invalidates_all(self, rng):
        base = backward_warp(random_image(rng), constant_flow(12, 16, 0.0, 0.0))
        out = compose_refinement(base, constant_flow(12, 16, 100.0, 100.0))
        assert not out.validity.any()

    def test_invalid_base_taps_propagate(self, rng):
        img = random_image(rng)
        base = backward_warp(img, constant_flow(12, 16, 1.0, 0.0))  # last column invalid
        out = compose_refinement(base, constant_flow(12, 16, 0.5, 0.0))
        # sampling x + 0.5 touches the invalid last column from x = 14.5
        assert not out.validity[:, 14:].any()
        assert out.validity[:, :14].all()

    def test_dimension_mismatch_rejected(self, rng):
        base = backward_warp(random_image(rng), constant_flow(12, 16, 0, 0))
        with pytest.raises(ValueError):
            compose_refinement(base, constant_flow(3, 3, 0, 0))


class TestValidityMonotone:
    def test_shrinking_image_never_validates_pixel(self, rng):
        # crop of the source: any pixel invalid on the big image stays
        # invalid (or disappears) on the crop
        img = random_image(rng, 12, 16)
        flow = rng.uniform(-3, 3, size=(12, 16, 2))
        big = backward_warp(img, flow)
        small = backward_warp(img[:10, :14], flow[:10, :14])
        assert not np.any(small.validity & ~big.validity[:10, :14])


class TestFloIO:
    def test_roundtrip(self, tmp_path, rng):
        flow = rng.uniform(-5, 5, size=(7, 9, 2)).astype(np.float32).astype(np.float64)
        path = tmp_path / "field.flo"
        write_flo(flow, path)
        assert np.array_equal(read_flo(path), flow)

    def test_header_layout(self, tmp_path):
        flow = np.zeros((2, 3, 2))
        path = tmp_path / "field.flo"
        write_flo(flow, path)
        data = path.read_bytes()
        assert len(data) == 12 + 2 * 3 * 2 * 4
        import struct

        magic, w, h = struct.unpack_from("<fii", data, 0)
        assert magic == pytest.approx(202021.25)
        assert (w, h) == (3, 2)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.flo"
        path.write_bytes(b"\x00" * 12)
        with pytest.raises(FormatError):
            read_flo(path)
