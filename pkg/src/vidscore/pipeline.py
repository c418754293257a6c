"""Pipeline stages behind the CLI: analyze, plan, compose, render, mux, run.

Each stage reads the previous stage's interchange file, so stages can be run
separately or chained by ``run``, which also writes a manifest recording the
per-stage timings, tool versions and a hash of the effective configuration.
External synthesis and muxing are plain command templates; the core stays
dependency-free.
"""

from __future__ import annotations

import hashlib
import json
import os
import shlex
import subprocess
import sys
import time
from dataclasses import dataclass, asdict
from typing import List, Optional, Tuple

from . import __version__
from .composer import compose_plan, score_debug_dump
from .energy import (
    EnergyLabel,
    assign_tempo_band,
    choose_direction_slope,
    classify_energy,
    load_detections,
)
from .errors import ConfigError, ExternalToolError, UnplannableSectionError
from .frames import fps_fraction, open_frame_source, stream_stats
from .ini import iter_ini
from .loops import build_layer_schedule, load_stem_manifest, mix_stems, write_wav
from .midi import InstrumentMap, read_smf, write_smf
from .moods import load_mood
from .planner import (
    DEFAULT_SEED,
    PLANNER_MODES,
    enumerate_fits,
    finalize_plan,
    fit_tolerance,
    harmonize_tempo,
    parse_ini,
    plan_to_ini,
    resolve_plan,
    sections_from_scenes,
)
from .composer import load_seed_melody
from .scenes import DetectorConfig, detect_scenes, scenes_from_json, scenes_to_json


@dataclass
class PipelineConfig:
    source: Optional[str] = None
    fps: Optional[str] = None  # needed for image-directory sources, e.g. "30/1"
    fade_threshold: float = 12.0
    cut_threshold: float = 30.0
    min_scene_frames: int = 15
    merge_tolerance_s: float = 0.1
    mood: str = "inspire"
    complexity: str = "semi-complex"
    planner_mode: str = "global"
    rng_seed: int = DEFAULT_SEED
    detections: Optional[str] = None
    melody: Optional[str] = None
    instruments: Optional[str] = None
    render_template: Optional[str] = None
    mux_template: Optional[str] = None
    soundfont: Optional[str] = None
    stems: Optional[str] = None
    loop_mode: bool = False
    output_dir: str = "."

    def detector_config(self) -> DetectorConfig:
        try:
            return DetectorConfig(
                fade_threshold=self.fade_threshold,
                cut_threshold=self.cut_threshold,
                min_scene_frames=self.min_scene_frames,
                merge_tolerance_s=self.merge_tolerance_s,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def fps_pair(self) -> Optional[Tuple[int, int]]:
        if self.fps is None:
            return None
        try:
            return fps_fraction(self.fps)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad fps {self.fps!r}") from exc

    def out_path(self, name: str) -> str:
        os.makedirs(self.output_dir, exist_ok=True)
        return os.path.join(self.output_dir, name)

    def config_hash(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_CONFIG_KEYS = {f for f in PipelineConfig.__dataclass_fields__}

# short spellings accepted in config files, matching the CLI flags
_KEY_ALIASES = {
    "seed": "rng_seed",
    "mode": "planner_mode",
    "merge_tolerance": "merge_tolerance_s",
    "loop": "loop_mode",
    "render": "render_template",
    "mux": "mux_template",
}


def load_config_file(path: str) -> dict:
    """Read a [pipeline] block in the plan INI dialect into a settings dict."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    settings = {}
    for lineno, section, key, value in iter_ini(text):
        if key is None:
            if section != "pipeline":
                raise ConfigError(f"{path}:{lineno}: unknown block [{section}]")
            continue
        key = _KEY_ALIASES.get(key, key)
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
        settings[key] = value
    return settings


def apply_settings(config: PipelineConfig, settings: dict) -> PipelineConfig:
    for key, value in settings.items():
        if value is None:
            continue
        try:
            if key in ("fade_threshold", "cut_threshold", "merge_tolerance_s"):
                value = float(value)
            elif key in ("min_scene_frames", "rng_seed"):
                value = int(value)
            elif key == "loop_mode" and isinstance(value, str):
                value = value.lower() in ("1", "true", "yes", "on")
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
        setattr(config, key, value)
    if config.planner_mode not in PLANNER_MODES:
        raise ConfigError(f"unknown planner mode {config.planner_mode!r}")
    return config


# -- stages ----------------------------------------------------------------------

def stage_analyze(config: PipelineConfig, out_path: Optional[str] = None) -> Tuple[str, int]:
    """Detect scenes and write the scene-list JSON; returns (path, count)."""
    if not config.source:
        raise ConfigError("no source configured")
    source = open_frame_source(config.source, config.fps_pair())
    scenes = detect_scenes(
        stream_stats(source), source.total_frames, source.spec, config.detector_config()
    )
    path = out_path or config.out_path("scenes.json")
    fps = (source.spec.fps_num, source.spec.fps_den)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scenes_to_json(scenes, fps, source.total_frames))
    return path, len(scenes)


def stage_plan(
    config: PipelineConfig, scenes_path: str, out_path: Optional[str] = None
) -> str:
    """Energy analysis plus the duration solver; writes plan.ini."""
    with open(scenes_path, "r", encoding="utf-8") as fh:
        scenes, fps, _total = scenes_from_json(fh.read())
    mood = load_mood(config.mood)

    if config.detections:
        counts = load_detections(config.detections, scenes)
        by_scene = classify_energy(counts)
        labels = [by_scene[scene.id] for scene in scenes]
    else:
        labels = [EnergyLabel.MEDIUM] * len(scenes)  # neutral default
    slopes = choose_direction_slope(labels)

    drafts = sections_from_scenes(scenes)
    tolerance = fit_tolerance(fps[1] / fps[0])
    fits = [enumerate_fits(d.duration_s, mood, tolerance) for d in drafts]
    for draft, section_fits in zip(drafts, fits):
        if not section_fits:
            raise UnplannableSectionError(draft.section_id, draft.duration_s)

    if config.planner_mode == "per-scene-energy":
        bands = [assign_tempo_band(label, mood.tempo_range) for label in labels]
        fits = harmonize_tempo(fits, "per-scene-energy", bands)
    else:
        fits = harmonize_tempo(fits, "global")

    plan = finalize_plan(
        drafts,
        fits,
        labels,
        slopes,
        mood,
        config.complexity,
        config.rng_seed,
        shared_tempo=config.planner_mode == "global",
        tolerance_s=tolerance,
    )
    path = out_path or config.out_path("plan.ini")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(plan_to_ini(plan))
    return path


def stage_compose(
    config: PipelineConfig,
    plan_path: str,
    out_path: Optional[str] = None,
    dump_events: Optional[str] = None,
) -> str:
    """Realize the plan as a single SMF; deterministic for a given config."""
    with open(plan_path, "r", encoding="utf-8") as fh:
        doc = parse_ini(fh.read())
    mood = load_mood(doc.mood)
    plan = resolve_plan(doc, mood)

    motif = None
    if config.melody:
        try:
            with open(config.melody, "rb") as fh:
                melody_doc = read_smf(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read melody {config.melody}: {exc}") from exc
        motif = load_seed_melody(melody_doc)

    imap = (
        InstrumentMap.from_file(config.instruments)
        if config.instruments
        else InstrumentMap.default()
    )
    score = compose_plan(plan, mood, motif)
    data = write_smf(score, imap)
    path = out_path or config.out_path("soundtrack.mid")
    with open(path, "wb") as fh:
        fh.write(data)
    if dump_events:
        with open(dump_events, "w", encoding="utf-8") as fh:
            fh.write(score_debug_dump(score))
    return path


def _run_template(template: str, substitutions: dict, out_path: str, what: str) -> None:
    tokens = []
    for token in shlex.split(template):
        for placeholder, value in substitutions.items():
            token = token.replace("{%s}" % placeholder, value)
        tokens.append(token)
    try:
        proc = subprocess.run(tokens, capture_output=True, text=True)
    except OSError as exc:
        raise ExternalToolError(f"{what} command failed to start: {exc}") from exc
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout or "").strip().splitlines()[-5:]
        raise ExternalToolError(
            f"{what} command exited {proc.returncode}: {' | '.join(tail)}"
        )
    if not os.path.exists(out_path) or os.path.getsize(out_path) == 0:
        raise ExternalToolError(f"{what} command produced no output at {out_path}")


def stage_render(
    config: PipelineConfig, midi_path: str, out_path: Optional[str] = None
) -> str:
    if not config.render_template:
        raise ConfigError("no render command template configured")
    path = out_path or config.out_path("soundtrack.wav")
    _run_template(
        config.render_template,
        {"in": midi_path, "out": path, "soundfont": config.soundfont or ""},
        path,
        "render",
    )
    return path


def stage_mux(
    config: PipelineConfig, video_path: str, audio_path: str, out_path: Optional[str] = None
) -> str:
    if not config.mux_template:
        raise ConfigError("no mux command template configured")
    path = out_path or config.out_path("final" + os.path.splitext(video_path)[1])
    _run_template(
        config.mux_template,
        {"in": video_path, "audio": audio_path, "out": path,
         "soundfont": config.soundfont or ""},
        path,
        "mux",
    )
    return path


def stage_mix_loops(
    config: PipelineConfig, scenes_path: str, out_path: Optional[str] = None
) -> str:
    if not config.stems:
        raise ConfigError("no stem manifest configured for loop mode")
    with open(scenes_path, "r", encoding="utf-8") as fh:
        scenes, _fps, _total = scenes_from_json(fh.read())
    stems = load_stem_manifest(config.stems)
    schedule = build_layer_schedule(scenes, stems)
    track = mix_stems(schedule, scenes, stems)
    path = out_path or config.out_path("soundtrack.wav")
    write_wav(path, track, stems[0].sample_rate)
    return path


def cmd_run(config: PipelineConfig) -> dict:
    """Chain the stages and write the run manifest; returns the manifest."""
    stages: List[dict] = []

    def timed(name, inputs, fn):
        started = time.perf_counter()
        result = fn()
        stages.append(
            {
                "name": name,
                "inputs": inputs,
                "outputs": [result] if isinstance(result, str) else list(result),
                "ms": round((time.perf_counter() - started) * 1000.0, 3),
            }
        )
        return result

    scenes_path = timed("analyze", [config.source], lambda: stage_analyze(config)[0])

    if config.loop_mode:
        audio_path = timed(
            "mix-loops", [scenes_path, config.stems],
            lambda: stage_mix_loops(config, scenes_path),
        )
        final_path = audio_path
    else:
        plan_path = timed(
            "plan",
            [scenes_path] + ([config.detections] if config.detections else []),
            lambda: stage_plan(config, scenes_path),
        )
        midi_path = timed(
            "compose",
            [plan_path] + ([config.melody] if config.melody else []),
            lambda: stage_compose(config, plan_path),
        )
        final_path = midi_path
        if config.render_template:
            audio_path = timed(
                "render", [midi_path], lambda: stage_render(config, midi_path)
            )
            final_path = audio_path
            if config.mux_template:
                final_path = timed(
                    "mux",
                    [config.source, audio_path],
                    lambda: stage_mux(config, config.source, audio_path),
                )

    manifest = {
        "config_hash": config.config_hash(),
        "tool_versions": {
            "python": sys.version.split()[0],
            "vidscore": __version__,
        },
        "stages": stages,
        "final_output": final_path,
    }
    path = config.out_path("run_manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)  # atomic publish
    return manifest
