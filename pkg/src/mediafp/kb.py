"""Fingerprint knowledge base: file format, loading, validation, queries.

The KB is plain text, line oriented.  A block starts with ``[record <id>]``
(one messenger fingerprint), ``[original <id>]`` (an untouched-camera
profile), ``[options]`` or ``[manifest]``, followed by ``key = value`` lines.
List values are comma separated, resolution pairs are ``WxH``, strings that
must match exactly (codec ids, format-profile strings, encoders) are quoted.
Whole lines starting with ``#`` are comments.  Encoding UTF-8, LF endings.

Record ids carry a group prefix (``t7-...``); the ``[manifest]`` block pins
the expected record count per group (``table7 = 20``) so any row lost or
gained while editing the data files fails the load instead of silently
shifting verdicts.
"""

from __future__ import annotations

import enum
import os as _os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .attributes import (
    FormatProfile,
    ImageAttributes,
    Marker,
    MediaKind,
    OS,
    VideoAttributes,
    parse_marker,
    parse_os,
)

DEFAULT_RESOLUTION_TOLERANCE = 10
KB_ENV_VAR = "MEDIAFP_KB"

ALL_MARKERS = frozenset(Marker)


class KbError(Exception):
    """Base class for knowledge-base failures."""


class SchemaError(KbError):
    """Unknown field, bad enum value, or structurally invalid block."""


class ManifestMismatch(KbError):
    """Loaded record counts differ from the manifest declaration."""


class Hop(str, enum.Enum):
    SINGLE = "single"
    CHAIN = "chain"


@dataclass(frozen=True)
class ImageConstraints:
    """Evidence an image fingerprint matches on."""

    resolutions: tuple[tuple[int, int], ...]
    resolution_tolerance: int = DEFAULT_RESOLUTION_TOLERANCE
    size_band: tuple[int, int] | None = None  # (center, tolerance) in bytes


@dataclass(frozen=True)
class VideoConstraints:
    """Evidence a video fingerprint matches on.

    ``markers`` is the characteristic marker set of the transformed file:
    matching allows exactly those markers and forbids the rest, unless
    ``markers_any`` lifts the constraint entirely.  ``required_markers`` adds
    a must-be-present condition on top (unused by the shipped KB).
    """

    extensions: tuple[str, ...] = ()
    format_profiles: tuple[FormatProfile, ...] = ()
    codec_ids: tuple[str, ...] = ()
    video_format_profiles: tuple[str, ...] = ()
    resolutions: tuple[tuple[int, int], ...] = ()
    resolution_wildcard: bool = False
    encoders: tuple[str, ...] = ()
    markers: tuple[Marker, ...] = ()
    markers_any: bool = False
    required_markers: tuple[Marker, ...] = ()

    @property
    def forbidden_markers(self) -> frozenset[Marker]:
        if self.markers_any:
            return frozenset()
        return ALL_MARKERS - frozenset(self.markers)

    def is_empty(self) -> bool:
        return not (
            self.extensions
            or self.format_profiles
            or self.codec_ids
            or self.video_format_profiles
            or self.resolutions
            or self.resolution_wildcard
            or self.encoders
        )


Constraints = ImageConstraints | VideoConstraints


@dataclass(frozen=True)
class FingerprintRecord:
    """One knowledge-base entry: (app, OS, quality) → attribute constraints."""

    record_id: str
    media_kind: MediaKind
    app: str
    os: OS
    quality: str
    hop: Hop = Hop.SINGLE
    nth_app: str | None = None
    distinguishable: bool = True
    constraints: Constraints | None = None
    index: int = field(default=0, compare=False)

    @property
    def group(self) -> str:
        return group_key(self.record_id)


@dataclass(frozen=True)
class OriginalProfile:
    """A Table-of-originals row: what untouched camera output looks like."""

    profile_id: str
    media_kind: MediaKind
    os_source: OS
    resolution: tuple[int, int]
    nominal_size: int
    extension: str | None = None
    format_profile: FormatProfile | None = None
    codec_id: str | None = None
    video_format_profile: str | None = None

    @property
    def attributes(self) -> VideoAttributes | ImageAttributes:
        if self.media_kind is MediaKind.IMAGE:
            return ImageAttributes(
                width=self.resolution[0],
                length=self.resolution[1],
                byte_size=self.nominal_size,
            )
        return VideoAttributes(
            extension=self.extension or "mp4",
            format_profile=self.format_profile or FormatProfile.BASE_MEDIA,
            codec_id=self.codec_id or "",
            video_format_profile=self.video_format_profile or "",
            width=self.resolution[0],
            length=self.resolution[1],
            byte_size=self.nominal_size,
        )


@dataclass(frozen=True)
class KnowledgeBase:
    records: tuple[FingerprintRecord, ...]
    originals: tuple[OriginalProfile, ...] = ()
    manifest: tuple[tuple[str, int], ...] | None = None
    encoder_prefix_match: bool = False

    def record(self, record_id: str) -> FingerprintRecord:
        for rec in self.records:
            if rec.record_id == record_id:
                return rec
        raise KeyError(record_id)


_GROUP_RE = re.compile(r"^t(\d+)$")


def group_key(record_id: str) -> str:
    """Manifest group of a record id: ``t7-discord-default`` → ``table7``."""
    prefix = record_id.split("-", 1)[0]
    m = _GROUP_RE.match(prefix)
    return f"table{m.group(1)}" if m else prefix


# ---------------------------------------------------------------------------
# parsing

_SECTION_RE = re.compile(r"^\[(record|original|options|manifest)(?:\s+(\S+))?\]$")
_RESOLUTION_RE = re.compile(r"^(\d+)x(\d+)$")
_SIZE_BAND_RE = re.compile(r"^(\d+)\s*\+-\s*(\d+)$")

_RECORD_KEYS = frozenset({
    "media", "app", "os", "quality", "hop", "nth_app", "indistinguishable",
    "extension", "format_profile", "codec_id", "video_format_profile",
    "resolution", "resolution_tolerance", "size_band", "encoder",
    "markers", "markers_required",
})
_VIDEO_ONLY_KEYS = frozenset({
    "extension", "format_profile", "codec_id", "video_format_profile",
    "encoder", "markers", "markers_required",
})
_IMAGE_ONLY_KEYS = frozenset({"resolution_tolerance", "size_band"})
_ORIGINAL_KEYS = frozenset({
    "media", "os", "extension", "format_profile", "codec_id",
    "video_format_profile", "resolution", "nominal_size",
})


def _unquote(item: str) -> str:
    item = item.strip()
    if len(item) >= 2 and item[0] == '"' and item[-1] == '"':
        return item[1:-1]
    return item


def _parse_list(value: str) -> list[str]:
    return [_unquote(part) for part in value.split(",") if part.strip()]


def _parse_resolutions(value: str, where: str) -> tuple[tuple[int, int], ...]:
    pairs = []
    for part in _parse_list(value):
        m = _RESOLUTION_RE.match(part)
        if m is None:
            raise SchemaError(f"{where}: bad resolution {part!r}")
        width, height = int(m.group(1)), int(m.group(2))
        if width < 1 or height < 1:
            raise SchemaError(f"{where}: resolution sides must be positive")
        pairs.append((width, height))
    return tuple(pairs)


def _parse_bool(value: str, where: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    raise SchemaError(f"{where}: expected a boolean, got {value!r}")


def _parse_format_profiles(value: str, where: str) -> tuple[FormatProfile, ...]:
    profiles = []
    for item in _parse_list(value):
        try:
            profiles.append(FormatProfile(item))
        except ValueError:
            raise SchemaError(f"{where}: unknown format profile {item!r}") from None
    return tuple(profiles)


def _parse_markers(value: str, where: str) -> tuple[Marker, ...]:
    markers = []
    for item in _parse_list(value):
        try:
            markers.append(parse_marker(item))
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from None
    return tuple(markers)


class _Block:
    def __init__(self, kind: str, name: str | None, line_no: int):
        self.kind = kind
        self.name = name
        self.line_no = line_no
        self.fields: dict[str, str] = {}
        self.order: list[str] = []

    def where(self) -> str:
        label = self.name or self.kind
        return f"[{self.kind} {label}] (line {self.line_no})"


def _split_blocks(text: str) -> list[_Block]:
    blocks: list[_Block] = []
    current: _Block | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _SECTION_RE.match(line)
        if m:
            kind, name = m.group(1), m.group(2)
            if kind in ("record", "original") and not name:
                raise SchemaError(f"line {line_no}: [{kind}] block needs an id")
            current = _Block(kind, name, line_no)
            blocks.append(current)
            continue
        if "=" not in line:
            raise SchemaError(f"line {line_no}: expected 'key = value', got {raw!r}")
        if current is None:
            raise SchemaError(f"line {line_no}: field outside any block")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in current.fields:
            raise SchemaError(f"{current.where()}: duplicate key {key!r}")
        current.fields[key] = value.strip()
        current.order.append(key)
    return blocks


def _build_record(block: _Block, index: int) -> FingerprintRecord:
    where = block.where()
    unknown = set(block.fields) - _RECORD_KEYS
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")
    f = block.fields

    def require(key: str) -> str:
        if key not in f:
            raise SchemaError(f"{where}: missing key {key!r}")
        return f[key]

    try:
        media = MediaKind(require("media"))
    except ValueError:
        raise SchemaError(f"{where}: unknown media kind {f['media']!r}") from None
    try:
        rec_os = parse_os(require("os"))
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    hop = Hop(f.get("hop", "single")) if f.get("hop", "single") in ("single", "chain") else None
    if hop is None:
        raise SchemaError(f"{where}: hop must be 'single' or 'chain'")
    nth_app = f.get("nth_app")
    if hop is Hop.CHAIN and not nth_app:
        raise SchemaError(f"{where}: chain records need nth_app")
    if hop is Hop.SINGLE and nth_app:
        raise SchemaError(f"{where}: single records must not set nth_app")
    indistinguishable = _parse_bool(f["indistinguishable"], where) if "indistinguishable" in f else False

    wrong_kind = _VIDEO_ONLY_KEYS if media is MediaKind.IMAGE else _IMAGE_ONLY_KEYS
    used_wrong = wrong_kind & set(f)
    if used_wrong:
        raise SchemaError(f"{where}: keys {sorted(used_wrong)} not valid for {media.value} records")

    constraint_keys = set(f) & (_VIDEO_ONLY_KEYS | _IMAGE_ONLY_KEYS | {"resolution"})
    if indistinguishable:
        if constraint_keys:
            raise SchemaError(f"{where}: indistinguishable records carry no constraints")
        constraints: Constraints | None = None
    elif media is MediaKind.IMAGE:
        resolutions = _parse_resolutions(require("resolution"), where)
        if not resolutions:
            raise SchemaError(f"{where}: image records need at least one resolution")
        tolerance = DEFAULT_RESOLUTION_TOLERANCE
        if "resolution_tolerance" in f:
            tolerance = int(f["resolution_tolerance"])
            if tolerance < 0:
                raise SchemaError(f"{where}: resolution_tolerance must be >= 0")
        size_band = None
        if "size_band" in f:
            m = _SIZE_BAND_RE.match(f["size_band"])
            if m is None:
                raise SchemaError(f"{where}: size_band must look like '100000 +- 10000'")
            size_band = (int(m.group(1)), int(m.group(2)))
        constraints = ImageConstraints(resolutions, tolerance, size_band)
    else:
        wildcard = False
        resolutions: tuple[tuple[int, int], ...] = ()
        if "resolution" in f:
            if f["resolution"].strip().lower() == "irregular":
                wildcard = True
            else:
                resolutions = _parse_resolutions(f["resolution"], where)
        markers_value = f.get("markers", "").strip()
        markers_any = markers_value.lower() == "any"
        constraints = VideoConstraints(
            extensions=tuple(_parse_list(f["extension"])) if "extension" in f else (),
            format_profiles=_parse_format_profiles(f["format_profile"], where) if "format_profile" in f else (),
            codec_ids=tuple(_parse_list(f["codec_id"])) if "codec_id" in f else (),
            video_format_profiles=tuple(_parse_list(f["video_format_profile"])) if "video_format_profile" in f else (),
            resolutions=resolutions,
            resolution_wildcard=wildcard,
            encoders=tuple(_parse_list(f["encoder"])) if "encoder" in f else (),
            markers=() if markers_any else _parse_markers(markers_value, where) if markers_value else (),
            markers_any=markers_any,
            required_markers=_parse_markers(f["markers_required"], where) if "markers_required" in f else (),
        )
        if constraints.is_empty():
            raise SchemaError(f"{where}: distinguishable video record carries no constraints")

    return FingerprintRecord(
        record_id=block.name or "",
        media_kind=media,
        app=require("app"),
        os=rec_os,
        quality=require("quality"),
        hop=hop,
        nth_app=nth_app,
        distinguishable=not indistinguishable,
        constraints=constraints,
        index=index,
    )


def _build_original(block: _Block) -> OriginalProfile:
    where = block.where()
    unknown = set(block.fields) - _ORIGINAL_KEYS
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")
    f = block.fields
    for key in ("media", "os", "resolution", "nominal_size"):
        if key not in f:
            raise SchemaError(f"{where}: missing key {key!r}")
    try:
        media = MediaKind(f["media"])
        os_source = parse_os(f["os"])
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    pairs = _parse_resolutions(f["resolution"], where)
    if len(pairs) != 1:
        raise SchemaError(f"{where}: originals carry exactly one resolution")
    fp = None
    if "format_profile" in f:
        fp = _parse_format_profiles(f["format_profile"], where)
        if len(fp) != 1:
            raise SchemaError(f"{where}: originals carry exactly one format profile")
        fp = fp[0]
    return OriginalProfile(
        profile_id=block.name or "",
        media_kind=media,
        os_source=os_source,
        resolution=pairs[0],
        nominal_size=int(f["nominal_size"]),
        extension=_unquote(f["extension"]) if "extension" in f else None,
        format_profile=fp,
        codec_id=_unquote(f["codec_id"]) if "codec_id" in f else None,
        video_format_profile=_unquote(f["video_format_profile"]) if "video_format_profile" in f else None,
    )


def load_kb(text: str) -> KnowledgeBase:
    """Parse KB text; verifies the manifest when one is declared.

    Raises SchemaError on malformed blocks and ManifestMismatch when the
    per-group record counts drift from the manifest.
    """
    records: list[FingerprintRecord] = []
    originals: list[OriginalProfile] = []
    manifest: list[tuple[str, int]] | None = None
    options: dict[str, str] | None = None

    for block in _split_blocks(text):
        if block.kind == "record":
            records.append(_build_record(block, index=len(records)))
        elif block.kind == "original":
            originals.append(_build_original(block))
        elif block.kind == "manifest":
            if manifest is not None:
                raise SchemaError(f"{block.where()}: duplicate manifest block")
            manifest = []
            for key in block.order:
                try:
                    manifest.append((key, int(block.fields[key])))
                except ValueError:
                    raise SchemaError(f"{block.where()}: count for {key!r} is not an integer") from None
        else:  # options
            if options is not None:
                raise SchemaError(f"{block.where()}: duplicate options block")
            options = dict(block.fields)

    seen: set[str] = set()
    for rec in records:
        if rec.record_id in seen:
            raise SchemaError(f"duplicate record id {rec.record_id!r}")
        seen.add(rec.record_id)

    prefix_match = False
    if options:
        unknown = set(options) - {"encoder_prefix_match"}
        if unknown:
            raise SchemaError(f"[options]: unknown keys {sorted(unknown)}")
        prefix_match = _parse_bool(options["encoder_prefix_match"], "[options]")

    kb = KnowledgeBase(
        records=tuple(records),
        originals=tuple(originals),
        manifest=tuple(manifest) if manifest is not None else None,
        encoder_prefix_match=prefix_match,
    )
    if manifest is not None:
        _verify_manifest(kb)
    return kb


def _verify_manifest(kb: KnowledgeBase) -> None:
    counts: dict[str, int] = {}
    for rec in kb.records:
        counts[rec.group] = counts.get(rec.group, 0) + 1
    if kb.originals:
        counts["originals"] = len(kb.originals)
    declared = dict(kb.manifest or ())
    if declared != counts:
        drift = []
        for key in sorted(set(declared) | set(counts)):
            if declared.get(key) != counts.get(key):
                drift.append(f"{key}: declared {declared.get(key, 0)}, loaded {counts.get(key, 0)}")
        raise ManifestMismatch("; ".join(drift))


def default_kb_path() -> Path:
    env = _os.environ.get(KB_ENV_VAR)
    if env:
        return Path(env)
    return Path(__file__).parent / "data"


def load_kb_path(path: str | Path | None = None) -> KnowledgeBase:
    """Load a KB from a file, or from every ``*.kb`` file in a directory.

    Directory files concatenate in sorted name order, which fixes the record
    order (and therefore rank tie-breaking) independently of the filesystem.
    """
    target = Path(path) if path is not None else default_kb_path()
    if target.is_dir():
        parts = [p.read_text(encoding="utf-8") for p in sorted(target.glob("*.kb"))]
        if not parts:
            raise KbError(f"no .kb files under {target}")
        return load_kb("\n".join(parts))
    return load_kb(target.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# rendering (canonical form; load_kb(render_kb(kb)) reproduces kb)

def _quote(value: str) -> str:
    return f'"{value}"'


def _render_resolutions(pairs: tuple[tuple[int, int], ...]) -> str:
    return ", ".join(f"{w}x{h}" for w, h in pairs)


def render_kb(kb: KnowledgeBase) -> str:
    lines: list[str] = []
    if kb.encoder_prefix_match:
        lines += ["[options]", "encoder_prefix_match = true", ""]
    for rec in kb.records:
        lines.append(f"[record {rec.record_id}]")
        lines.append(f"media = {rec.media_kind.value}")
        if rec.hop is Hop.CHAIN:
            lines.append("hop = chain")
            lines.append(f"nth_app = {rec.nth_app}")
        lines.append(f"app = {rec.app}")
        lines.append(f"os = {rec.os.value}")
        lines.append(f"quality = {rec.quality}")
        if not rec.distinguishable:
            lines.append("indistinguishable = true")
        elif isinstance(rec.constraints, ImageConstraints):
            c = rec.constraints
            lines.append(f"resolution = {_render_resolutions(c.resolutions)}")
            if c.resolution_tolerance != DEFAULT_RESOLUTION_TOLERANCE:
                lines.append(f"resolution_tolerance = {c.resolution_tolerance}")
            if c.size_band is not None:
                lines.append(f"size_band = {c.size_band[0]} +- {c.size_band[1]}")
        elif isinstance(rec.constraints, VideoConstraints):
            c = rec.constraints
            if c.extensions:
                lines.append(f"extension = {', '.join(c.extensions)}")
            if c.format_profiles:
                lines.append(f"format_profile = {', '.join(p.value for p in c.format_profiles)}")
            if c.codec_ids:
                lines.append(f"codec_id = {', '.join(_quote(s) for s in c.codec_ids)}")
            if c.video_format_profiles:
                lines.append(f"video_format_profile = {', '.join(_quote(s) for s in c.video_format_profiles)}")
            if c.resolution_wildcard:
                lines.append("resolution = irregular")
            elif c.resolutions:
                lines.append(f"resolution = {_render_resolutions(c.resolutions)}")
            if c.encoders:
                lines.append(f"encoder = {', '.join(_quote(s) for s in c.encoders)}")
            if c.markers_any:
                lines.append("markers = any")
            elif c.markers:
                lines.append(f"markers = {', '.join(m.value for m in c.markers)}")
            if c.required_markers:
                lines.append(f"markers_required = {', '.join(m.value for m in c.required_markers)}")
        lines.append("")
    for orig in kb.originals:
        lines.append(f"[original {orig.profile_id}]")
        lines.append(f"media = {orig.media_kind.value}")
        lines.append(f"os = {orig.os_source.value}")
        if orig.extension is not None:
            lines.append(f"extension = {orig.extension}")
        if orig.format_profile is not None:
            lines.append(f"format_profile = {orig.format_profile.value}")
        if orig.codec_id is not None:
            lines.append(f"codec_id = {_quote(orig.codec_id)}")
        if orig.video_format_profile is not None:
            lines.append(f"video_format_profile = {_quote(orig.video_format_profile)}")
        lines.append(f"resolution = {_render_resolutions((orig.resolution,))}")
        lines.append(f"nominal_size = {orig.nominal_size}")
        lines.append("")
    if kb.manifest is not None:
        lines.append("[manifest]")
        for key, count in kb.manifest:
            lines.append(f"{key} = {count}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# validation and queries

@dataclass(frozen=True)
class Finding:
    kind: str  # collision | empty-constraints | orphan-chain
    message: str
    record_ids: tuple[str, ...]


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    def by_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]


def validate_kb(kb: KnowledgeBase) -> ValidationReport:
    """Report collision groups, empty constraint sets and orphan chains.

    Collision groups (several records matching byte-identical evidence) are
    expected for deliberately ambiguous rows and are informational.
    """
    findings: list[Finding] = []

    groups: dict[tuple, list[FingerprintRecord]] = {}
    for rec in kb.records:
        if not rec.distinguishable:
            continue
        groups.setdefault((rec.media_kind, rec.hop, rec.constraints), []).append(rec)
    for (media, hop, _), members in groups.items():
        if len(members) > 1:
            ids = tuple(r.record_id for r in members)
            findings.append(Finding(
                "collision",
                f"{len(members)} {media.value} {hop.value} records match identical evidence",
                ids,
            ))

    for rec in kb.records:
        if not rec.distinguishable or rec.constraints is None:
            continue
        empty = (
            rec.constraints.is_empty()
            if isinstance(rec.constraints, VideoConstraints)
            else not rec.constraints.resolutions
        )
        if empty:
            findings.append(Finding("empty-constraints", "record matches nothing", (rec.record_id,)))

    single_apps = {r.app for r in kb.records if r.hop is Hop.SINGLE and r.media_kind is MediaKind.VIDEO}
    for rec in kb.records:
        if rec.hop is Hop.CHAIN and rec.nth_app not in single_apps:
            findings.append(Finding(
                "orphan-chain",
                f"nth_app {rec.nth_app!r} has no single-hop record",
                (rec.record_id,),
            ))

    return ValidationReport(tuple(findings))


def list_records(
    kb: KnowledgeBase,
    app: str | None = None,
    os: OS | str | None = None,
    media_kind: MediaKind | str | None = None,
) -> list[FingerprintRecord]:
    """Filter records conjunctively; stable file order; app match is case-insensitive."""
    wanted_os = parse_os(os) if isinstance(os, str) else os
    wanted_kind = MediaKind(media_kind) if isinstance(media_kind, str) else media_kind
    out = []
    for rec in kb.records:
        if app is not None and rec.app.lower() != app.lower():
            continue
        if wanted_os is not None and rec.os is not wanted_os:
            continue
        if wanted_kind is not None and rec.media_kind is not wanted_kind:
            continue
        out.append(rec)
    return out


def records_equal_constraints(a: FingerprintRecord, b: FingerprintRecord) -> bool:
    return (
        a.media_kind is b.media_kind
        and a.distinguishable
        and b.distinguishable
        and a.constraints == b.constraints
    )


__all__ = [
    "DEFAULT_RESOLUTION_TOLERANCE", "KB_ENV_VAR", "ALL_MARKERS",
    "KbError", "SchemaError", "ManifestMismatch",
    "Hop", "ImageConstraints", "VideoConstraints", "FingerprintRecord",
    "OriginalProfile", "KnowledgeBase", "Finding", "ValidationReport",
    "group_key", "load_kb", "load_kb_path", "default_kb_path", "render_kb",
    "validate_kb", "list_records", "records_equal_constraints",
]
