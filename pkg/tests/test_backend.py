import io

import numpy as np
import pytest
from PIL import Image

from herdid.backend import (
    BackendConfig,
    StubBackend,
    flip_horizontal,
    get_backend,
    load_image,
    pad_box,
    preprocess_crop,
)
from herdid.errors import BackendError
from herdid.types import BoundingBox, ImageInput

FULL = BoundingBox(0.0, 0.0, 1.0, 1.0)


def config(layer="activation_40", resolution=512, **kw):
    return BackendConfig(layer_name=layer, input_resolution=resolution, **kw)


def png_bytes(size=(64, 48), seed=0):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 255, size=(size[1], size[0], 3), dtype=np.uint8)
    img = Image.fromarray(arr, "RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


class TestBackendConfig:
    def test_resolution_policy(self):
        config(resolution=512)
        config(resolution=256)
        with pytest.raises(ValueError):
            config(resolution=300)
        # Policy is configurable, not hard-coded.
        BackendConfig(input_resolution=300, allowed_resolutions=(300,))


class TestStubBackend:
    def test_deterministic(self):
        be = StubBackend(config())
        img = ImageInput(id="e001_1")
        a = be.extract(img, FULL, flipped=False)
        b = be.extract(img, FULL, flipped=False)
        assert np.array_equal(a.values, b.values)

    def test_flip_differs_and_is_mirror(self):
        be = StubBackend(config())
        img = ImageInput(id="e001_1")
        plain = be.extract(img, FULL, flipped=False)
        flipped = be.extract(img, FULL, flipped=True)
        assert not np.array_equal(plain.values, flipped.values)
        assert np.array_equal(flipped.values, plain.values[:, :, ::-1])

    def test_two_layer_listing_matches_extract_shapes(self):
        be = StubBackend(config(resolution=512))
        listing = be.list_layers()
        assert [name for name, *_ in listing] == ["activation_40", "activation_43"]
        shapes = {name: (c, h, w) for name, c, h, w in listing}
        assert shapes["activation_40"] == (8, 32, 32)
        assert shapes["activation_43"] == (16, 16, 16)
        out = be.extract(ImageInput(id="abc"), FULL, flipped=False)
        assert out.shape == shapes["activation_40"]

    def test_resolution_changes_spatial_size(self):
        be = StubBackend(config(layer="activation_43", resolution=256))
        out = be.extract(ImageInput(id="abc"), FULL, flipped=False)
        assert out.shape == (16, 8, 8)

    def test_unknown_layer_rejected(self):
        with pytest.raises(BackendError):
            StubBackend(BackendConfig(layer_name="activation_99",
                                      input_resolution=512))

    def test_same_group_closer_than_other_group(self):
        be = StubBackend(config(), noise_scale=0.1)
        a1 = be.extract(ImageInput(id="e001_1"), FULL, False).values
        a2 = be.extract(ImageInput(id="e001_2"), FULL, False).values
        b1 = be.extract(ImageInput(id="e002_1"), FULL, False).values
        assert np.linalg.norm(a1 - a2) < np.linalg.norm(a1 - b1)

    def test_factory(self):
        assert isinstance(get_backend("stub", config()), StubBackend)
        with pytest.raises(ValueError):
            get_backend("mystery", config())


class TestPreprocessing:
    def test_load_image_from_bytes_and_path(self, tmp_path):
        raw = png_bytes()
        img = load_image(raw)
        assert img.size == (64, 48)
        p = tmp_path / "x.png"
        p.write_bytes(raw)
        assert load_image(str(p)).size == (64, 48)

    def test_undecodable_rejected(self):
        with pytest.raises(BackendError):
            load_image(b"this is not an image")

    def test_crop_buffer_shape_and_dtype(self):
        buf = preprocess_crop(png_bytes(), BoundingBox(0.1, 0.1, 0.5, 0.5), 64)
        assert buf.shape == (3, 64, 64)
        assert buf.dtype == np.float32

    def test_flip_is_exact_involution(self):
        buf = preprocess_crop(png_bytes(), FULL, 32)
        assert np.array_equal(flip_horizontal(flip_horizontal(buf)), buf)

    def test_flipped_crop_is_mirror_of_unflipped(self):
        raw = png_bytes()
        plain = preprocess_crop(raw, FULL, 32, flipped=False)
        flipped = preprocess_crop(raw, FULL, 32, flipped=True)
        assert np.array_equal(flipped, flip_horizontal(plain))
        assert not np.array_equal(flipped, plain)

    def test_normalization_applied(self):
        white = Image.new("RGB", (16, 16), (255, 255, 255))
        buf = io.BytesIO()
        white.save(buf, format="PNG")
        out = preprocess_crop(buf.getvalue(), FULL, 8,
                              channel_order="rgb",
                              channel_means=(255.0, 255.0, 255.0),
                              channel_stds=(1.0, 1.0, 1.0))
        assert np.allclose(out, 0.0)

    def test_bgr_order(self):
        red = Image.new("RGB", (8, 8), (200, 0, 0))
        buf = io.BytesIO()
        red.save(buf, format="PNG")
        out = preprocess_crop(buf.getvalue(), FULL, 8,
                              channel_order="bgr",
                              channel_means=(0.0, 0.0, 0.0))
        assert np.allclose(out[2], 200.0)  # red lands in the last channel
        assert np.allclose(out[0], 0.0)

    def test_pad_box_clamps(self):
        padded = pad_box(BoundingBox(0.0, 0.4, 0.3, 0.3), 0.5)
        assert padded.x == 0.0
        assert padded.y == pytest.approx(0.25)
        assert padded.x + padded.w <= 1.0
        assert padded.y + padded.h <= 1.0


def test_onnx_backend_requires_runtime_or_asset():
    pytest.importorskip("onnxruntime")
