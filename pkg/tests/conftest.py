"""Shared fixture builders for synthetic videos, stats streams and plans."""

import random

import pytest

from vidscore.energy import EnergyLabel
from vidscore.frames import FrameSpec, FrameStats, rgb_to_hsv
from vidscore.moods import LayerDef, MoodConfig, Scale, load_mood
from vidscore.planner import (
    CompositionPlan,
    SectionSpec,
    phrase_seconds,
    roles_for_count,
)


def make_mood(
    tempo_range=(60, 120),
    signatures=((4, 4),),
    phrase_bars=4,
    layers_per_energy=None,
    name="testmood",
):
    return MoodConfig(
        name=name,
        tempo_range=tempo_range,
        time_signatures=tuple(signatures),
        phrase_length_bars=phrase_bars,
        layers_per_energy=layers_per_energy
        or {"low": (1, 3), "medium": (2, 4), "high": (3, 5)},
        scale=Scale("C", "major"),
        progressions={
            "simple": [[1, 4, 5, 1]],
            "semi-complex": [[1, 5, 6, 4]],
            "complex": [[1, 3, 6, 2, 5, 1, 4, 5]],
        },
        instrument_layers=(
            LayerDef("bass", 1, (36, 55), "sparse"),
            LayerDef("pad", 2, (48, 72), "sparse"),
            LayerDef("chords", 3, (52, 76), "medium"),
            LayerDef("melody", 4, (64, 88), "medium"),
            LayerDef("arpeggio", 5, (57, 81), "dense"),
        ),
    )


def solid_frame(width, height, rgb):
    return bytes(rgb) * (width * height)


def color_delta(a, b):
    """Single-color HSV delta straight from the per-pixel conversion."""
    ha, sa, va = rgb_to_hsv(a)
    hb, sb, vb = rgb_to_hsv(b)
    dh = abs(ha - hb)
    dh = min(dh, 256.0 - dh)
    return (dh + abs(sa - sb) + abs(va - vb)) / 3.0


def gray_ramp(level, steps):
    """Equal intensity steps from an achromatic level down toward black."""
    return [
        (round(level * k / steps),) * 3 for k in range(steps - 1, 0, -1)
    ]


class VideoBuilder:
    """Assembles a raw RGB24 fixture and tracks the frames appended."""

    def __init__(self, width=64, height=36, fps=(30, 1)):
        self.width = width
        self.height = height
        self.fps = fps
        self.colors = []

    def add_run(self, rgb, frames):
        self.colors.extend([rgb] * frames)
        return self

    def add_fade(self, level=180, ramp_steps=10, black_frames=6):
        """Gentle achromatic dip to black and back; no step trips the cut
        detector, and exactly the black frames sit under the fade threshold."""
        for rgb in gray_ramp(level, ramp_steps):
            self.colors.append(rgb)
        self.colors.extend([(0, 0, 0)] * black_frames)
        for rgb in reversed(gray_ramp(level, ramp_steps)):
            self.colors.append(rgb)
        return self

    @property
    def total_frames(self):
        return len(self.colors)

    @property
    def spec(self):
        return FrameSpec(self.width, self.height, self.fps[0], self.fps[1])

    def intensities(self):
        return [(r + g + b) / 3.0 for r, g, b in self.colors]

    def deltas(self):
        return [None] + [
            color_delta(a, b) for a, b in zip(self.colors, self.colors[1:])
        ]

    def expected_cuts(self, threshold=30.0, min_scene_frames=15):
        """Linear-scan oracle over the constructed per-frame deltas."""
        cuts = []
        for i, delta in enumerate(self.deltas()):
            if delta is not None and delta >= threshold:
                if cuts and i - cuts[-1] < min_scene_frames:
                    continue
                cuts.append(i)
        return cuts

    def expected_fades(self, threshold=12.0):
        """Linear-scan oracle over the constructed per-frame intensities."""
        fades = []
        start = None
        values = self.intensities()
        for i, value in enumerate(values):
            if start is None:
                if value < threshold:
                    start = i
            elif value >= threshold:
                fades.append((start, i))
                start = None
        if start is not None:
            fades.append((start, len(values) - 1))
        return fades

    def write(self, directory, name="vid"):
        path = directory / f"{name}.rgb24"
        with open(path, "wb") as fh:
            for rgb in self.colors:
                fh.write(solid_frame(self.width, self.height, rgb))
        (directory / f"{name}.hdr").write_text(
            f"width={self.width} height={self.height} "
            f"fps_num={self.fps[0]} fps_den={self.fps[1]}\n"
        )
        return str(path)


# scene colors alternating chroma and achroma so every cut lands well above
# the default threshold (pure hue flips alone stay under it)
CUT_SAFE_COLORS = [
    (220, 40, 40),
    (245, 245, 245),
    (40, 40, 220),
    (120, 120, 120),
    (40, 220, 40),
    (235, 235, 235),
]


def make_stats(intensities, deltas=None):
    if deltas is None:
        deltas = [None] + [0.0] * (len(intensities) - 1)
    return [
        FrameStats(index=i, avg_intensity=v, hsv_delta=d)
        for i, (v, d) in enumerate(zip(intensities, deltas))
    ]


def random_valid_plan(rng: random.Random, mood=None) -> CompositionPlan:
    """A plan whose section durations are exactly realizable by construction."""
    mood = mood or load_mood(rng.choice(
        ["inspire", "ember", "drive", "bloom", "noir", "tide", "summit", "clockwork"]
    ))
    count = rng.randint(1, 5)
    sections = []
    for sid in range(count):
        tempo = rng.randint(*mood.tempo_range)
        signature = rng.choice(sorted(mood.time_signatures))
        phrases = rng.randint(1, 4)
        duration = phrases * phrase_seconds(tempo, signature, mood.phrase_length_bars)
        sections.append(
            SectionSpec(
                section_id=sid,
                time_signature=signature,
                tempo=tempo,
                energy=rng.choice(list(EnergyLabel)),
                duration_s=duration,
                phrases=phrases,
                direction=rng.choice(["up", "down"]),
                slope=rng.choice(["stay", "gradual", "steep"]),
            )
        )
    return CompositionPlan(
        total_duration_s=sum(s.duration_s for s in sections),
        mood=mood.name,
        complexity=rng.choice(["simple", "semi-complex", "complex"]),
        rng_seed=rng.getrandbits(32),
        sections=tuple(sections),
        roles=tuple(roles_for_count(count)),
    )


@pytest.fixture
def inspire():
    return load_mood("inspire")
