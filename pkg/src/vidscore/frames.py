"""Frame sources and per-frame pixel statistics.

Two kinds of input are supported behind one iterator interface:

* a raw RGB24 stream (``<name>.rgb24``) with a text sidecar (``<name>.hdr``)
  declaring ``width= height= fps_num= fps_den=``, and
* a directory of zero-padded, numbered binary PPM (P6) images plus a frame
  rate.

Each frame yields two statistics downstream detectors consume:

* ``avg_intensity``: the mean over pixels of (R+G+B)/3, in [0, 255]. The fade
  threshold is applied on this normalized scale so it is independent of the
  frame size.
* ``hsv_delta``: the mean absolute per-pixel change in hue, saturation and
  value versus the previous frame, each channel scaled to [0, 255], averaged
  over the three channels. Hue lives on a circle of 256 units and differences
  are taken on the shorter arc, so a hue delta never exceeds 128.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .errors import IncompatibleFramesError, MalformedSourceError, SourceNotFoundError

HUE_SCALE = 256.0  # full hue circle after rescaling; max circular delta is 128


@dataclass(frozen=True)
class FrameSpec:
    width: int
    height: int
    fps_num: int
    fps_den: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise MalformedSourceError(f"bad frame size {self.width}x{self.height}")
        if self.fps_num < 1 or self.fps_den < 1:
            raise MalformedSourceError(f"bad frame rate {self.fps_num}/{self.fps_den}")

    @property
    def frame_bytes(self) -> int:
        return 3 * self.width * self.height

    @property
    def frame_period_s(self) -> float:
        return self.fps_den / self.fps_num

    def timestamp(self, index: int) -> float:
        return index * self.fps_den / self.fps_num


@dataclass(frozen=True)
class Frame:
    index: int
    pixels: bytes  # interleaved RGB, 8 bits per channel, row-major


@dataclass(frozen=True)
class FrameStats:
    index: int
    avg_intensity: float
    hsv_delta: Optional[float]  # None for frame 0


class FrameSource:
    """Ordered, single-pass iterator of frames with a known FrameSpec."""

    def __init__(self, spec: FrameSpec, total_frames: int, frames: Iterator[Frame]):
        self.spec = spec
        self.total_frames = total_frames
        self._frames = frames

    def __iter__(self) -> Iterator[Frame]:
        return self._frames


def open_frame_source(path: str, fps: Optional[tuple[int, int]] = None) -> FrameSource:
    """Open a raw RGB24 stream (with .hdr sidecar) or a PPM image directory.

    For directories ``fps`` must be supplied as (numerator, denominator).
    """
    if os.path.isdir(path):
        if fps is None:
            raise MalformedSourceError(f"image directory {path!r} needs a frame rate")
        return _open_image_dir(path, fps)
    if not os.path.exists(path):
        raise SourceNotFoundError(f"no such source: {path}")
    return _open_raw_stream(path)


def _parse_header(path: str) -> FrameSpec:
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for token in fh.read().split():
            if "=" in token:
                key, _, value = token.partition("=")
                fields[key.strip()] = value.strip()
    try:
        return FrameSpec(
            width=int(fields["width"]),
            height=int(fields["height"]),
            fps_num=int(fields["fps_num"]),
            fps_den=int(fields["fps_den"]),
        )
    except (KeyError, ValueError) as exc:
        raise MalformedSourceError(f"bad stream header {path}: {exc}") from exc


def _open_raw_stream(path: str) -> FrameSource:
    header = os.path.splitext(path)[0] + ".hdr"
    if not os.path.exists(header):
        raise SourceNotFoundError(f"missing sidecar header: {header}")
    spec = _parse_header(header)
    size = os.path.getsize(path)
    if size % spec.frame_bytes != 0:
        raise MalformedSourceError(
            f"{path}: {size} bytes is not a multiple of the "
            f"{spec.frame_bytes}-byte frame size"
        )
    total = size // spec.frame_bytes

    def gen() -> Iterator[Frame]:
        with open(path, "rb") as fh:
            for index in range(total):
                data = fh.read(spec.frame_bytes)
                if len(data) != spec.frame_bytes:
                    raise MalformedSourceError(f"{path}: truncated at frame {index}")
                yield Frame(index=index, pixels=data)

    return FrameSource(spec=spec, total_frames=total, frames=gen())


_NUMBERED = re.compile(r"(\d+)\.ppm$", re.IGNORECASE)


def _open_image_dir(path: str, fps: tuple[int, int]) -> FrameSource:
    entries = []
    for name in os.listdir(path):
        match = _NUMBERED.search(name)
        if match:
            entries.append((int(match.group(1)), name))
    if not entries:
        raise SourceNotFoundError(f"no numbered .ppm frames in {path}")
    entries.sort()

    width, height, first = _read_ppm(os.path.join(path, entries[0][1]))
    spec = FrameSpec(width=width, height=height, fps_num=fps[0], fps_den=fps[1])

    def gen() -> Iterator[Frame]:
        yield Frame(index=0, pixels=first)
        for index, (_, name) in enumerate(entries[1:], start=1):
            w, h, pixels = _read_ppm(os.path.join(path, name))
            if (w, h) != (width, height):
                raise MalformedSourceError(
                    f"{name}: size {w}x{h} differs from {width}x{height}"
                )
            yield Frame(index=index, pixels=pixels)

    return FrameSource(spec=spec, total_frames=len(entries), frames=gen())


def _read_ppm(path: str) -> tuple[int, int, bytes]:
    """Minimal binary PPM (P6, maxval 255) reader."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise MalformedSourceError(f"{path}: truncated PPM header")
        if data[pos : pos + 1] == b"#":  # comment runs to end of line
            pos = data.find(b"\n", pos) + 1
            continue
        if data[pos : pos + 1].isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P6":
        raise MalformedSourceError(f"{path}: not a binary PPM (P6) file")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise MalformedSourceError(f"{path}: unsupported maxval {maxval}")
    pixels = data[pos : pos + 3 * width * height]
    if len(pixels) != 3 * width * height:
        raise MalformedSourceError(f"{path}: truncated pixel data")
    return width, height, pixels


def write_ppm(path: str, width: int, height: int, pixels: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (width, height))
        fh.write(pixels)


# -- per-frame statistics ------------------------------------------------------

def compute_intensity(frame: Frame) -> float:
    """Mean over pixels of (R+G+B)/3, in [0, 255]."""
    return float(np.frombuffer(frame.pixels, dtype=np.uint8).mean(dtype=np.float64))


def rgb_to_hsv(pixel: tuple[int, int, int]) -> tuple[float, float, float]:
    """Convert one RGB pixel to HSV with every channel scaled to [0, 255].

    Hue comes from the standard hexagonal model rescaled so the full circle is
    256 units; achromatic pixels get hue 0.
    """
    r, g, b = pixel
    v = float(max(r, g, b))
    m = float(min(r, g, b))
    c = v - m
    s = 0.0 if v == 0 else c / v * 255.0
    if c == 0:
        h6 = 0.0
    elif v == r:
        h6 = ((g - b) / c) % 6.0
    elif v == g:
        h6 = (b - r) / c + 2.0
    else:
        h6 = (r - g) / c + 4.0
    return (h6 * (HUE_SCALE / 6.0), s, v)


def _frame_hsv(frame: Frame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized rgb_to_hsv over a whole frame (float32 per-pixel arrays).

    Branchless on purpose: boolean fancy indexing was 5x slower per frame.
    Chroma is an integer difference, so clamping the divisors to >= 1 only
    changes pixels where chroma is zero, which are forced to hue 0 anyway.
    """
    arr = np.frombuffer(frame.pixels, dtype=np.uint8).reshape(-1, 3)
    r = arr[:, 0].astype(np.float32)
    g = arr[:, 1].astype(np.float32)
    b = arr[:, 2].astype(np.float32)
    v = np.maximum(np.maximum(r, g), b)
    c = v - np.minimum(np.minimum(r, g), b)
    c_safe = np.maximum(c, np.float32(1.0))

    s = (c / np.maximum(v, np.float32(1.0))) * np.float32(255.0)

    hr = ((g - b) / c_safe) % np.float32(6.0)
    hg = (b - r) / c_safe + np.float32(2.0)
    hb = (r - g) / c_safe + np.float32(4.0)
    h6 = np.where(v == r, hr, np.where(v == g, hg, hb))
    h6 = np.where(c > 0, h6, np.float32(0.0))
    return h6 * np.float32(HUE_SCALE / 6.0), s, v


def _hsv_delta(prev, curr) -> float:
    dh = np.abs(curr[0] - prev[0])
    dh = np.minimum(dh, np.float32(HUE_SCALE) - dh)
    score = (
        dh.mean(dtype=np.float64)
        + np.abs(curr[1] - prev[1]).mean(dtype=np.float64)
        + np.abs(curr[2] - prev[2]).mean(dtype=np.float64)
    ) / 3.0
    return float(score)


def content_delta(prev: Frame, curr: Frame) -> float:
    """Mean absolute HSV change between two frames of the same size."""
    if len(prev.pixels) != len(curr.pixels):
        raise IncompatibleFramesError(
            f"frame sizes differ: {len(prev.pixels)} vs {len(curr.pixels)} bytes"
        )
    return _hsv_delta(_frame_hsv(prev), _frame_hsv(curr))


def stream_stats(frames) -> Iterator[FrameStats]:
    """Single pass over a frame iterable yielding FrameStats per frame."""
    prev_hsv = None
    for frame in frames:
        hsv = _frame_hsv(frame)
        delta = None if prev_hsv is None else _hsv_delta(prev_hsv, hsv)
        yield FrameStats(
            index=frame.index,
            avg_intensity=compute_intensity(frame),
            hsv_delta=delta,
        )
        prev_hsv = hsv


def fps_fraction(text: str) -> tuple[int, int]:
    """Parse '30', '30/1' or '30000/1001' into an (num, den) pair."""
    frac = Fraction(text)
    return frac.numerator, frac.denominator
