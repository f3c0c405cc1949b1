"""Pluggable perceptual feature extractor and discriminator references.

``ConvPyramidExtractor`` is the deterministic stand-in for a pretrained
perceptual network: a fixed-weight 3-stage strided convolution pyramid.
Its construction is pinned bit-exactly:

* input is converted to 3 channels (grayscale replicated);
* each stage: 3x3 convolution, stride 2, replicate padding 1, followed by
  ReLU (max(0, .)); output sizes are ceil(H/2) x ceil(W/2);
* channel widths 8, 16, 32; no biases;
* weights drawn stage by stage from ``numpy.random.default_rng(0x5EED)``
  as ``standard_normal((out, 3, 3, in))`` in C order, then made zero-mean
  per filter and scaled by 1/sqrt(9*in);
* the final feature map is normalized by its mean absolute value + 1e-12.

Zero-mean kernels plus the output normalization make the features exactly
invariant to global affine intensity changes, which is what the perceptual
term is for.  External weights (e.g. exported VGG-16 activations) can be
loaded from the HZFX tensor container and are applied with the same
stage/stride/padding semantics.

HZFX container layout (little-endian): magic ``HZFX``, version u32, then
per tensor: name length u32, utf-8 name, rank u32, dims u32 each, float32
payload in C order, repeated until EOF.
"""

import struct

import numpy as np

from .errors import ExtractorShapeMismatch, IoError, MalformedHeader
from .kernels import box_mean
from .types import ImageBuffer

_MAGIC = b"HZFX"
_VERSION = 1


def write_tensor_file(path, tensors: dict):
    """Serialize named float32 tensors into the HZFX container."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def read_tensor_file(path) -> dict:
    """Read an HZFX container back into {name: float32 ndarray}."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from None
    if blob[:4] != _MAGIC:
        raise MalformedHeader(f"{path}: bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _VERSION:
        raise MalformedHeader(f"{path}: unsupported HZFX version {version}")
    pos = 8
    tensors = {}
    while pos < len(blob):
        if pos + 4 > len(blob):
            raise MalformedHeader(f"{path}: truncated tensor header")
        (name_len,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        end = pos + 4 * count
        if end > len(blob):
            raise MalformedHeader(f"{path}: truncated tensor payload '{name}'")
        tensors[name] = np.frombuffer(
            blob[pos:end], dtype="<f4").reshape(dims).copy()
        pos = end
    return tensors


def _conv3x3_stride2(x, weights):
    """x: (H, W, Cin); weights: (Cout, 3, 3, Cin). Replicate pad 1,
    stride 2, ReLU."""
    padded = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    h_out = (x.shape[0] + 1) // 2
    w_out = (x.shape[1] + 1) // 2
    # gather the 9 taps at strided positions: (h_out, w_out, 3, 3, Cin)
    taps = np.empty((h_out, w_out, 3, 3, x.shape[2]), dtype=np.float64)
    for di in range(3):
        for dj in range(3):
            taps[:, :, di, dj, :] = padded[di:di + 2 * h_out:2,
                                           dj:dj + 2 * w_out:2, :]
    out = np.einsum("hwijc,oijc->hwo", taps, weights, optimize=False)
    return np.maximum(out, 0.0)


class ConvPyramidExtractor:
    """Deterministic fixed-weight feature pyramid; see module docstring."""

    DEFAULT_SEED = 0x5EED
    WIDTHS = (8, 16, 32)

    def __init__(self, weights=None, stage="pyramid3", seed=DEFAULT_SEED):
        if weights is None:
            weights = self._default_weights(seed)
        self.weights = [np.ascontiguousarray(w, dtype=np.float64)
                        for w in weights]
        if len(self.weights) != 3:
            raise ExtractorShapeMismatch("extractor needs exactly 3 stages")
        in_c = 3
        for i, w in enumerate(self.weights):
            if w.shape[1:] != (3, 3, in_c):
                raise ExtractorShapeMismatch(
                    f"stage {i} weights must be (out, 3, 3, {in_c}), "
                    f"got {w.shape}")
            in_c = w.shape[0]
        self.stage = stage

    @classmethod
    def _default_weights(cls, seed):
        rng = np.random.default_rng(seed)
        weights = []
        in_c = 3
        for out_c in cls.WIDTHS:
            w = rng.standard_normal((out_c, 3, 3, in_c))
            w -= w.mean(axis=(1, 2, 3), keepdims=True)
            w /= np.sqrt(9.0 * in_c)
            weights.append(w)
            in_c = out_c
        return weights

    @classmethod
    def from_file(cls, path, stage="(5,1)"):
        """Load stage weights named conv0/conv1/conv2 from an HZFX file."""
        tensors = read_tensor_file(path)
        try:
            weights = [tensors[f"conv{i}"] for i in range(3)]
        except KeyError as e:
            raise MalformedHeader(f"{path}: missing tensor {e}") from None
        return cls(weights=[w.astype(np.float64) for w in weights],
                   stage=stage)

    def save(self, path):
        write_tensor_file(path, {f"conv{i}": w
                                 for i, w in enumerate(self.weights)})

    def __call__(self, image: ImageBuffer) -> np.ndarray:
        x = image.to_rgb().data
        for w in self.weights:
            x = _conv3x3_stride2(x, w)
        norm = np.mean(np.abs(x)) + 1e-12
        return x / norm


class SharpnessDiscriminator:
    """Deterministic stand-in discriminator for plumbing tests only (not a
    trained model): score = 1 - min(1, 2 * gradient distance to a 3x3
    box-blurred copy)."""

    def __call__(self, image: ImageBuffer) -> float:
        from .losses import gradient_loss

        blurred = np.stack([box_mean(image.plane(c), 1)
                            for c in range(image.channels)], axis=2)
        g = gradient_loss(image, ImageBuffer(blurred))
        return float(1.0 - min(1.0, 2.0 * g))
