"""Command-line interface.

Subcommands:
    mix        optimize and render a session manifest to a wav
    analyze    score a session with the masking metric, no rendering
    normalize  loudness-normalize each track and write the results

Exit codes: 0 success, 1 usage or manifest error, 2 processing or
file-format error.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

from .audio_io import (
    INSTRUMENT_CLASSES,
    AudioIOError,
    Session,
    SubgroupSpec,
    Track,
    read_wav,
    write_wav,
)
from .loudness import SILENCE_LUFS, integrated_loudness
from .masking import MetricConfig, objective
from .pipeline import (
    TRACK_TARGET_LUFS,
    VOCAL_TARGET_LUFS,
    EngineConfig,
    MixResult,
    _analysis_slice,
    _normalize,
    mix_session,
)
from .pso import PsoConfig, write_trace_csv
from .psycho import analyze_track, dump_frames_csv

REPORT_SCHEMA = 1


class ManifestError(Exception):
    """Structural problem in a session manifest, with its location."""


def _require_keys(obj: dict, where: str, required: set, optional: set) -> None:
    for key in obj:
        if key not in required and key not in optional:
            raise ManifestError(f"{where}: unknown key {key!r}")
    for key in required:
        if key not in obj:
            raise ManifestError(f"{where}: missing required key {key!r}")


def _parse_track_entry(entry, index: int, base_dir: Path, expected_rate: int) -> Track:
    where = f"tracks[{index}]"
    if not isinstance(entry, dict):
        raise ManifestError(f"{where}: expected an object")
    _require_keys(entry, where, {"path", "class"}, {"name", "vocal"})
    cls = entry["class"]
    if cls not in INSTRUMENT_CLASSES:
        raise ManifestError(
            f"{where}.class: {cls!r} is not one of {', '.join(INSTRUMENT_CLASSES)}"
        )
    vocal_derived = cls == "vox"
    if "vocal" in entry and bool(entry["vocal"]) != vocal_derived:
        raise ManifestError(
            f"{where}.vocal: must be {vocal_derived} for class {cls!r}"
        )
    path = base_dir / entry["path"]
    name = entry.get("name", Path(entry["path"]).stem)
    clip = read_wav(path)
    if clip.sample_rate != expected_rate:
        raise AudioIOError(
            f"{path}: sample rate {clip.sample_rate} does not match "
            f"sample_rate_expected {expected_rate}"
        )
    return Track(id=name, name=name, clip=clip, instrument_class=cls, is_vocal=vocal_derived)


def _parse_subgroup_entry(entry, index: int) -> SubgroupSpec:
    where = f"subgroups[{index}]"
    if not isinstance(entry, dict):
        raise ManifestError(f"{where}: expected an object")
    _require_keys(entry, where, {"name", "members"}, {"vocal"})
    members = entry["members"]
    if not isinstance(members, list) or not members:
        raise ManifestError(f"{where}.members: expected a non-empty list")
    return SubgroupSpec(
        name=str(entry["name"]),
        member_ids=tuple(str(m) for m in members),
        is_vocal_group=bool(entry.get("vocal", False)),
    )


def _parse_engine_config(manifest: dict) -> EngineConfig:
    metric = MetricConfig()
    if "metric" in manifest:
        block = manifest["metric"]
        _require_keys(block, "metric", set(), {"t_max", "gate_db"})
        metric = MetricConfig(
            t_max_db=float(block.get("t_max", metric.t_max_db)),
            gate_db=float(block.get("gate_db", metric.gate_db)),
        )
    pso = PsoConfig()
    if "pso" in manifest:
        block = manifest["pso"]
        _require_keys(block, "pso", set(), {"swarm", "max_iters", "tolerance", "seed"})
        pso = PsoConfig(
            swarm_size=int(block.get("swarm", pso.swarm_size)),
            max_iterations=int(block.get("max_iters", pso.max_iterations)),
            stall_tolerance=float(block.get("tolerance", pso.stall_tolerance)),
            rng_seed=int(block.get("seed", pso.rng_seed)),
        )
    start_s, length_s = 0.0, None
    if "analysis_window" in manifest:
        block = manifest["analysis_window"]
        _require_keys(block, "analysis_window", set(), {"start_s", "length_s"})
        start_s = float(block.get("start_s", 0.0))
        length_s = float(block["length_s"]) if "length_s" in block else None
    workers = int(os.environ.get("AUTOMIX_THREADS", "1"))
    if workers < 1:
        raise ManifestError("AUTOMIX_THREADS must be a positive integer")
    return EngineConfig(
        metric=metric,
        pso=replace(pso, workers=workers),
        analysis_start_s=start_s,
        analysis_length_s=length_s,
    )


def load_session(manifest_path) -> tuple[Session, EngineConfig]:
    """Parse and validate a session manifest, loading its audio."""
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {manifest_path}")
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}")
    if not isinstance(manifest, dict):
        raise ManifestError("manifest root must be an object")

    _require_keys(
        manifest,
        "manifest",
        {"sample_rate_expected", "tracks"},
        {"subgroups", "metric", "pso", "analysis_window"},
    )
    expected_rate = manifest["sample_rate_expected"]
    if not isinstance(expected_rate, int):
        raise ManifestError("sample_rate_expected: expected an integer")
    entries = manifest["tracks"]
    if not isinstance(entries, list) or not entries:
        raise ManifestError("tracks: expected a non-empty list")

    base_dir = manifest_path.parent
    tracks = [
        _parse_track_entry(e, i, base_dir, expected_rate) for i, e in enumerate(entries)
    ]
    subgroups = tuple(
        _parse_subgroup_entry(e, i) for i, e in enumerate(manifest.get("subgroups", []))
    )
    try:
        session = Session(tracks=tuple(tracks), subgroups=subgroups)
    except ValueError as exc:
        raise ManifestError(str(exc))
    return session, _parse_engine_config(manifest)


def _stage_slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_") or "stage"


def write_summary(result: MixResult, stream) -> None:
    """Human-readable per-stage table.

    delta_f is the objective improvement over the stage; mean_m the
    average per-track masking before optimization.
    """
    stream.write(f"{'stage':<24} {'iter':>4} {'delta_f':>8} {'mean_m':>7}\n")
    for rep in result.stage_reports:
        delta = rep.initial_f - rep.final_f
        mean_m = sum(rep.m_before) / len(rep.m_before)
        stream.write(
            f"{rep.stage:<24} {rep.iterations:>4d} {delta:>8.2f} {mean_m:>7.2f} ({rep.track_count})\n"
        )


def _params_json(params) -> dict:
    return {
        "eq_gains_db": list(params.eq.gains_db),
        "threshold_db": params.drc.threshold_db,
        "ratio": params.drc.ratio,
        "attack_s": params.drc.attack_s,
        "release_s": params.drc.release_s,
    }


def write_report_json(result: MixResult, path) -> None:
    doc = {
        "schema": REPORT_SCHEMA,
        "stages": [
            {
                "stage": rep.stage,
                "track_count": rep.track_count,
                "iterations": rep.iterations,
                "initial_f": rep.initial_f,
                "final_f": rep.final_f,
                "stop_reason": rep.trace.stop_reason,
                "m_before": list(rep.m_before),
                "m_after": list(rep.m_after),
                "params": {name: _params_json(p) for name, p in rep.params.items()},
                "note": rep.note,
            }
            for rep in result.stage_reports
        ],
        "final_params": {name: _params_json(p) for name, p in result.final_params.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_session(session: Session, config: EngineConfig, out_dir) -> Path:
    """Write a session back to disk as wavs plus a manifest.

    Inverse of load_session up to audio encoding: reloading the written
    manifest reproduces the same tracks, subgroups, and engine config.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, track in enumerate(session.tracks):
        fname = f"{i:02d}_{_stage_slug(track.id)}.wav"
        write_wav(track.clip, out_dir / fname, bit_depth="float32")
        entries.append({"path": fname, "name": track.id, "class": track.instrument_class})
    manifest = {
        "sample_rate_expected": session.tracks[0].clip.sample_rate,
        "tracks": entries,
        "metric": {"t_max": config.metric.t_max_db, "gate_db": config.metric.gate_db},
        "pso": {
            "swarm": config.pso.swarm_size,
            "max_iters": config.pso.max_iterations,
            "tolerance": config.pso.stall_tolerance,
            "seed": config.pso.rng_seed,
        },
    }
    if session.subgroups:
        manifest["subgroups"] = [
            {"name": g.name, "members": list(g.member_ids), "vocal": g.is_vocal_group}
            for g in session.subgroups
        ]
    if config.analysis_start_s or config.analysis_length_s is not None:
        window = {"start_s": config.analysis_start_s}
        if config.analysis_length_s is not None:
            window["length_s"] = config.analysis_length_s
        manifest["analysis_window"] = window
    path = out_dir / "session.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def _cmd_mix(args) -> int:
    session, config = load_session(args.session)
    if args.seed is not None:
        config = replace(config, pso=replace(config.pso, rng_seed=args.seed))
    result = mix_session(session, config, use_subgroups=not args.no_subgroups)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    clipped = write_wav(result.mix, out, bit_depth=16)
    if clipped:
        print(f"warning: {clipped} samples clipped writing {out}", file=sys.stderr)

    write_summary(result, sys.stdout)
    write_report_json(result, out.with_suffix(".report.json"))

    if args.trace_dir:
        trace_dir = Path(args.trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)
        for rep in result.stage_reports:
            write_trace_csv(rep.trace, trace_dir / f"{_stage_slug(rep.stage)}.csv")
    if args.stems_dir:
        stems_dir = Path(args.stems_dir)
        stems_dir.mkdir(parents=True, exist_ok=True)
        for name, stem in result.stems.items():
            write_wav(stem, stems_dir / f"{_stage_slug(name)}.wav", bit_depth="float32")
    return 0


def _cmd_analyze(args) -> int:
    session, config = load_session(args.session)
    names = [t.id for t in session.tracks]
    normalized = [_normalize(t.clip, t.id, t.is_vocal) for t in session.tracks]
    sliced = [_analysis_slice(c, config) for c in normalized]
    result = objective(sliced, config.metric)

    print(
        f"f={result.objective:.4f} m_total={result.m_total:.4f} m_diff={result.m_diff:.4f}"
    )
    for name, m, n_active in zip(names, result.per_track_m, result.active_frames):
        print(f"  {name:<20} M={m:.4f} ({n_active} active frames)")

    if args.report:
        doc = {
            "schema": REPORT_SCHEMA,
            "f": result.objective,
            "m_total": result.m_total,
            "m_diff": result.m_diff,
            "per_track": {
                name: {"m": m, "active_frames": n}
                for name, m, n in zip(names, result.per_track_m, result.active_frames)
            },
        }
        with open(args.report, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.psycho_dump:
        dump_dir = Path(args.psycho_dump)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for name, clip in zip(names, sliced):
            dump_frames_csv(analyze_track(clip), dump_dir / f"{_stage_slug(name)}.csv")
    return 0


def _cmd_normalize(args) -> int:
    session, _ = load_session(args.session)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for track in session.tracks:
        target = VOCAL_TARGET_LUFS if track.is_vocal else TRACK_TARGET_LUFS
        before = integrated_loudness(track.clip).integrated_lufs
        clip = _normalize(track.clip, track.id, track.is_vocal)
        write_wav(clip, out_dir / f"{_stage_slug(track.id)}.wav", bit_depth="float32")
        if before == SILENCE_LUFS:
            print(f"{track.id}: silent, written unchanged")
        else:
            print(f"{track.id}: {before:.2f} LUFS -> {target:.2f} LUFS")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="automix",
        description="Masking-minimizing automatic multitrack mixer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_mix = sub.add_parser("mix", help="optimize and render a session")
    p_mix.add_argument("--session", required=True, help="session manifest (JSON)")
    p_mix.add_argument("--out", required=True, help="output wav path (16-bit)")
    p_mix.add_argument("--no-subgroups", action="store_true", help="ignore declared subgroups")
    p_mix.add_argument("--seed", type=int, default=None, help="override optimizer RNG seed")
    p_mix.add_argument("--trace-dir", default=None, help="write per-stage optimizer traces here")
    p_mix.add_argument("--stems-dir", default=None, help="write subgroup stems here (float32)")
    p_mix.set_defaults(func=_cmd_mix)

    p_an = sub.add_parser("analyze", help="evaluate the masking metric without mixing")
    p_an.add_argument("--session", required=True, help="session manifest (JSON)")
    p_an.add_argument("--report", default=None, help="write a JSON report here")
    p_an.add_argument("--psycho-dump", default=None, help="write per-track band CSV dumps here")
    p_an.set_defaults(func=_cmd_analyze)

    p_norm = sub.add_parser("normalize", help="loudness-normalize tracks")
    p_norm.add_argument("--session", required=True, help="session manifest (JSON)")
    p_norm.add_argument("--out-dir", required=True, help="directory for normalized wavs")
    p_norm.set_defaults(func=_cmd_normalize)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help
        return 0 if not exc.code else 1
    try:
        return args.func(args)
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 1
    except (AudioIOError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
