"""Activation extraction backends.

``StubBackend`` is fully deterministic and never touches pixels: activations
are seeded from the image id, which makes CI and fixtures reproducible.
Image ids that share a prefix before the first ``_`` share a base activation
pattern, so id conventions like ``e007_3`` give naturally clustered fake
features; per-id noise is controlled by ``noise_scale``.

``OnnxEmbeddingBackend`` loads an exported network in ONNX form whose
intermediate activation layers were tapped as named graph outputs. Exporting
the pretrained network that way is an offline step documented in the README;
training or fine-tuning the network is out of scope here.
"""

import hashlib
import io
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BackendError
from .types import ActivationTensor, BoundingBox, ImageInput

DEFAULT_ALLOWED_RESOLUTIONS = (256, 512)

# Caffe-style preprocessing: BGR order, per-channel mean subtraction.
CAFFE_BGR_MEANS = (103.939, 116.779, 123.68)


@dataclass(frozen=True)
class BackendConfig:
    model_uri: str = ""
    layer_name: str = "activation_40"
    input_resolution: int = 512
    allowed_resolutions: tuple = DEFAULT_ALLOWED_RESOLUTIONS
    box_padding: float = 0.0
    channel_order: str = "bgr"
    channel_means: tuple = CAFFE_BGR_MEANS
    channel_stds: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.input_resolution not in self.allowed_resolutions:
            raise ValueError(
                f"input_resolution {self.input_resolution} not in allowed set "
                f"{self.allowed_resolutions}"
            )
        if self.channel_order not in ("rgb", "bgr"):
            raise ValueError(f"channel_order must be rgb or bgr, got {self.channel_order!r}")
        if self.box_padding < 0:
            raise ValueError("box_padding must be non-negative")


# ---------------------------------------------------------------------------
# Image preprocessing
# ---------------------------------------------------------------------------

def load_image(data):
    """Decode a path or raw bytes into an RGB PIL image."""
    from PIL import Image, UnidentifiedImageError

    try:
        if isinstance(data, (bytes, bytearray)):
            img = Image.open(io.BytesIO(data))
        elif isinstance(data, (str, Path)):
            img = Image.open(data)
        else:
            raise BackendError(f"unsupported image source type {type(data).__name__}")
        return img.convert("RGB")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise BackendError(f"cannot decode image: {exc}") from exc


def pad_box(box: BoundingBox, padding: float) -> BoundingBox:
    """Grow a box by ``padding`` times its size on each side, clamped to [0,1]."""
    if padding == 0:
        return box
    x0 = max(0.0, box.x - padding * box.w)
    y0 = max(0.0, box.y - padding * box.h)
    x1 = min(1.0, box.x + box.w * (1 + padding))
    y1 = min(1.0, box.y + box.h * (1 + padding))
    return BoundingBox(x0, y0, x1 - x0, y1 - y0, box.confidence, box.source)


def flip_horizontal(buffer: np.ndarray) -> np.ndarray:
    """Mirror the last (width) axis; an exact involution."""
    return np.ascontiguousarray(buffer[..., ::-1])


def preprocess_crop(
    data,
    box: BoundingBox,
    resolution: int,
    flipped: bool = False,
    box_padding: float = 0.0,
    channel_order: str = "bgr",
    channel_means: tuple = CAFFE_BGR_MEANS,
    channel_stds: tuple = (1.0, 1.0, 1.0),
) -> np.ndarray:
    """Crop, stretch-resize to a square, mirror if asked, normalize.

    Returns a float32 CHW buffer ready for inference. The mirror is applied
    to the resized crop, before normalization, so flipping twice reproduces
    the unflipped buffer exactly.
    """
    from PIL import Image

    img = load_image(data)
    w, h = img.size
    box = pad_box(box, box_padding)
    left = int(round(box.x * w))
    top = int(round(box.y * h))
    right = max(left + 1, int(round((box.x + box.w) * w)))
    bottom = max(top + 1, int(round((box.y + box.h) * h)))
    crop = img.crop((left, top, right, bottom))
    crop = crop.resize((resolution, resolution), Image.BILINEAR)

    arr = np.asarray(crop, dtype=np.float32)  # HWC, RGB
    if flipped:
        arr = arr[:, ::-1, :]
    if channel_order == "bgr":
        arr = arr[:, :, ::-1]
    means = np.asarray(channel_means, dtype=np.float32)
    stds = np.asarray(channel_stds, dtype=np.float32)
    arr = (arr - means) / stds
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

def _seed_from(*parts) -> int:
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


class StubBackend:
    """Deterministic pixel-free backend for tests, CI and demos.

    Layer geometry mirrors the stride/width progression of the real network
    at reduced channel counts. The flipped variant of a tensor is its exact
    spatial mirror, so flip behaves as an involution at feature level.
    """

    LAYERS = {
        "activation_40": (8, 16),   # channels, stride
        "activation_43": (16, 32),
    }

    def __init__(self, config: BackendConfig, noise_scale: float = 0.25,
                 group_separator: str = "_"):
        if config.layer_name not in self.LAYERS:
            raise BackendError(
                f"unknown layer {config.layer_name!r}; stub offers {sorted(self.LAYERS)}"
            )
        self.config = config
        self.noise_scale = float(noise_scale)
        self.group_separator = group_separator

    def list_layers(self):
        res = self.config.input_resolution
        return [
            (name, c, res // stride, res // stride)
            for name, (c, stride) in sorted(self.LAYERS.items())
        ]

    def layer_shape(self, layer_name: str):
        c, stride = self.LAYERS[layer_name]
        hw = self.config.input_resolution // stride
        return c, hw, hw

    def extract(self, image: ImageInput, box: BoundingBox, flipped: bool) -> ActivationTensor:
        del box  # validated by its own constructor; content does not matter here
        c, h, w = self.layer_shape(self.config.layer_name)
        group = image.id.split(self.group_separator, 1)[0]
        base_rng = np.random.default_rng(
            _seed_from("base", group, self.config.layer_name, self.config.input_resolution)
        )
        base = base_rng.standard_normal((c, h, w), dtype=np.float32)
        if self.noise_scale > 0:
            noise_rng = np.random.default_rng(
                _seed_from("noise", image.id, self.config.layer_name,
                           self.config.input_resolution)
            )
            values = base + self.noise_scale * noise_rng.standard_normal(
                (c, h, w), dtype=np.float32
            )
        else:
            values = base
        if flipped:
            values = values[:, :, ::-1]
        return ActivationTensor(np.ascontiguousarray(values))


class OnnxEmbeddingBackend:
    """Runs an ONNX graph whose tapped activation layers are named outputs."""

    def __init__(self, config: BackendConfig):
        try:
            import onnxruntime
        except ImportError as exc:
            raise BackendError(
                "onnxruntime is not installed; install the 'onnx' extra or use "
                "--backend stub"
            ) from exc
        if not config.model_uri:
            raise BackendError("BackendConfig.model_uri is required for the ONNX backend")
        try:
            self._session = onnxruntime.InferenceSession(
                config.model_uri, providers=["CPUExecutionProvider"]
            )
        except Exception as exc:
            raise BackendError(f"failed to load model {config.model_uri}: {exc}") from exc
        outputs = [o.name for o in self._session.get_outputs()]
        if config.layer_name not in outputs:
            raise BackendError(
                f"layer {config.layer_name!r} not among model outputs {outputs}"
            )
        self.config = config
        self._input_name = self._session.get_inputs()[0].name
        self._lock = threading.Lock()
        self._shapes = None

    def list_layers(self):
        if self._shapes is None:
            res = self.config.input_resolution
            probe = np.zeros((1, 3, res, res), dtype=np.float32)
            with self._lock:
                results = self._session.run(None, {self._input_name: probe})
            shapes = []
            for meta, arr in zip(self._session.get_outputs(), results):
                c, h, w = arr.shape[1], arr.shape[2], arr.shape[3]
                shapes.append((meta.name, int(c), int(h), int(w)))
            self._shapes = shapes
        return list(self._shapes)

    def extract(self, image: ImageInput, box: BoundingBox, flipped: bool) -> ActivationTensor:
        if image.data is None:
            raise BackendError(f"image {image.id!r} has no pixel source")
        buf = preprocess_crop(
            image.data, box, self.config.input_resolution, flipped,
            self.config.box_padding, self.config.channel_order,
            self.config.channel_means, self.config.channel_stds,
        )
        batch = buf[np.newaxis, ...]
        try:
            with self._lock:
                (out,) = self._session.run(
                    [self.config.layer_name], {self._input_name: batch}
                )
        except Exception as exc:
            raise BackendError(f"inference failed for image {image.id!r}: {exc}") from exc
        return ActivationTensor(np.ascontiguousarray(out[0], dtype=np.float32))


def get_backend(kind: str, config: BackendConfig, **kwargs):
    if kind == "stub":
        return StubBackend(config, **kwargs)
    if kind == "onnx":
        return OnnxEmbeddingBackend(config)
    raise ValueError(f"unknown backend kind {kind!r}")
