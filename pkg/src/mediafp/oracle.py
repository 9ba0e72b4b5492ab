"""Forward simulator over the knowledge base.

Three jobs: predict the attribute vector a given (app, OS, quality) choice
imposes on an original, emit a labeled test corpus covering every trackable
fingerprint, and synthesize minimal valid container bytes whose extraction
reproduces a requested attribute vector exactly.  Synthesized files carry
empty sample tables and no media data: fingerprints never depend on frame
payloads, so fixtures stay tiny and deterministic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .attributes import (
    AVC_PROFILES,
    FormatProfile,
    ImageAttributes,
    Marker,
    MediaKind,
    OS,
    VideoAttributes,
    parse_os,
    parse_video_format_profile,
)
from .container import codec_id_brands, classify_format_profile, FtypInfo, UnknownBrand
from .engine import is_overwritten_chain
from .kb import (
    FingerprintRecord,
    Hop,
    ImageConstraints,
    KnowledgeBase,
    OriginalProfile,
    VideoConstraints,
)

# Fixed synthesis target: every oracle-emitted video vector carries this
# byte_size and synthesize_container pads to it, so extraction round-trips
# byte-for-byte including the size field.
SYNTH_CONTAINER_SIZE = 4096
# Nominal size for image vectors without a size band; collides with no band.
DEFAULT_IMAGE_BYTES = 150_000
# Stand-in resolution for wildcard ("irregular") records; matches no
# concrete resolution set in the knowledge base.
WILDCARD_RESOLUTION = (1234, 694)

_MARKER_ORDER = tuple(Marker)


class OracleError(Exception):
    pass


class UnknownTransform(OracleError):
    """No record for the requested (app, OS, quality)."""


class InconsistentAttrs(OracleError):
    """Attribute vector contradicts itself; nothing could extract to it."""


@dataclass(frozen=True)
class TransformResult:
    """apply_transform output: expected vectors, or an untouched pass-through."""

    indistinguishable: bool
    variants: tuple[VideoAttributes | ImageAttributes, ...]


def expected_attributes(rec: FingerprintRecord) -> VideoAttributes | ImageAttributes:
    """The representative attribute vector a record's transform produces.

    Multi-valued constraints contribute their first value in KB order;
    wildcard resolutions yield the synthetic stand-in.
    """
    if not rec.distinguishable or rec.constraints is None:
        raise ValueError(f"{rec.record_id} is a placeholder record")
    if rec.media_kind is MediaKind.IMAGE:
        c = rec.constraints
        assert isinstance(c, ImageConstraints)
        width, length = c.resolutions[0]
        size = c.size_band[0] if c.size_band else DEFAULT_IMAGE_BYTES
        return ImageAttributes(width=width, length=length, byte_size=size)
    c = rec.constraints
    assert isinstance(c, VideoConstraints)
    if c.resolution_wildcard or not c.resolutions:
        width, length = WILDCARD_RESOLUTION
    else:
        width, length = c.resolutions[0]
    return VideoAttributes(
        extension=c.extensions[0] if c.extensions else "mp4",
        format_profile=c.format_profiles[0] if c.format_profiles else FormatProfile.BASE_MEDIA,
        codec_id=c.codec_ids[0] if c.codec_ids else "",
        video_format_profile=c.video_format_profiles[0] if c.video_format_profiles else "",
        width=width,
        length=length,
        encoder=c.encoders[0] if c.encoders else None,
        markers=frozenset(c.markers) | frozenset(c.required_markers),
        byte_size=SYNTH_CONTAINER_SIZE,
    )


def apply_transform(
    original: OriginalProfile,
    app: str,
    os: OS | str,
    quality: str,
    kb: KnowledgeBase,
) -> TransformResult:
    """Expected post-transmission attributes for one (app, OS, quality) choice.

    Two-variant rows return both vectors; placeholder rows return an
    indistinguishable result whose attributes equal the original's.  Raises
    UnknownTransform when the KB has no such record.
    """
    wanted_os = parse_os(os) if isinstance(os, str) else os
    if wanted_os is not original.os_source:
        raise UnknownTransform(
            f"original is {original.os_source.value}, no {wanted_os.value} transform applies"
        )
    matches = [
        rec for rec in kb.records
        if rec.media_kind is original.media_kind
        and rec.hop is Hop.SINGLE
        and rec.app.lower() == app.lower()
        and rec.os is wanted_os
        and rec.quality.lower() == quality.lower()
    ]
    if not matches:
        raise UnknownTransform(f"no record for ({app}, {wanted_os.value}, {quality})")
    trackable = [rec for rec in matches if rec.distinguishable]
    if not trackable:
        return TransformResult(indistinguishable=True, variants=(original.attributes,))
    return TransformResult(
        indistinguishable=False,
        variants=tuple(expected_attributes(rec) for rec in trackable),
    )


# ---------------------------------------------------------------------------
# labeled corpus

@dataclass(frozen=True)
class SingleLabel:
    app: str
    os: OS
    quality: str

    def render(self) -> str:
        return f"single:{self.app}|{self.os.value}|{self.quality}"


@dataclass(frozen=True)
class ChainLabel:
    nth_app: str
    nplus1_app: str
    os: OS

    def render(self) -> str:
        return f"chain:{self.nth_app}>{self.nplus1_app}|{self.os.value}"


@dataclass(frozen=True)
class CorpusEntry:
    record_id: str
    media_kind: MediaKind
    attributes: VideoAttributes | ImageAttributes
    label: SingleLabel | ChainLabel


def generate_corpus(kb: KnowledgeBase) -> tuple[CorpusEntry, ...]:
    """One labeled entry per trackable record, in KB order.

    Placeholder records have nothing to emit; chain records whose trace was
    overwritten by the N+1st hop are skipped because no verdict can (or
    should) name them.
    """
    entries: list[CorpusEntry] = []
    for rec in kb.records:
        if not rec.distinguishable:
            continue
        if rec.hop is Hop.CHAIN and is_overwritten_chain(rec, kb):
            continue
        if rec.hop is Hop.CHAIN:
            label: SingleLabel | ChainLabel = ChainLabel(rec.nth_app or "", rec.app, rec.os)
        else:
            label = SingleLabel(rec.app, rec.os, rec.quality)
        entries.append(CorpusEntry(rec.record_id, rec.media_kind, expected_attributes(rec), label))
    return tuple(entries)


def _render_markers(markers: frozenset[Marker]) -> str:
    if not markers:
        return "-"
    return "+".join(m.value for m in _MARKER_ORDER if m in markers)


def render_corpus(entries: tuple[CorpusEntry, ...] | list[CorpusEntry]) -> str:
    """Corpus wire format: one entry per line, fields tab-separated, label last."""
    lines = []
    for e in entries:
        if e.media_kind is MediaKind.VIDEO:
            a = e.attributes
            fields = [
                e.record_id, "video", a.extension, a.format_profile.value,
                a.codec_id, a.video_format_profile or "-",
                str(a.width), str(a.length),
                a.encoder or "-", _render_markers(a.markers), str(a.byte_size),
                e.label.render(),
            ]
        else:
            a = e.attributes
            fields = [
                e.record_id, "image", str(a.width), str(a.length),
                str(a.byte_size), e.label.render(),
            ]
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


class CorpusFormatError(OracleError):
    pass


def _parse_label(text: str) -> SingleLabel | ChainLabel:
    kind, _, body = text.partition(":")
    if kind == "single":
        app, os_token, quality = body.split("|")
        return SingleLabel(app, parse_os(os_token), quality)
    if kind == "chain":
        path, os_token = body.split("|")
        nth, _, napp = path.partition(">")
        return ChainLabel(nth, napp, parse_os(os_token))
    raise CorpusFormatError(f"bad label {text!r}")


def parse_corpus(text: str) -> tuple[CorpusEntry, ...]:
    entries: list[CorpusEntry] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        try:
            if fields[1] == "video" and len(fields) == 12:
                markers = frozenset(
                    Marker(tok) for tok in fields[9].split("+") if tok != "-"
                ) if fields[9] != "-" else frozenset()
                attrs: VideoAttributes | ImageAttributes = VideoAttributes(
                    extension=fields[2],
                    format_profile=FormatProfile(fields[3]),
                    codec_id=fields[4],
                    video_format_profile="" if fields[5] == "-" else fields[5],
                    width=int(fields[6]),
                    length=int(fields[7]),
                    encoder=None if fields[8] == "-" else fields[8],
                    markers=markers,
                    byte_size=int(fields[10]),
                )
                entries.append(CorpusEntry(fields[0], MediaKind.VIDEO, attrs, _parse_label(fields[11])))
            elif fields[1] == "image" and len(fields) == 6:
                attrs = ImageAttributes(
                    width=int(fields[2]), length=int(fields[3]), byte_size=int(fields[4])
                )
                entries.append(CorpusEntry(fields[0], MediaKind.IMAGE, attrs, _parse_label(fields[5])))
            else:
                raise ValueError("unknown media kind or field count")
        except (ValueError, IndexError) as exc:
            raise CorpusFormatError(f"line {line_no}: {exc}") from None
    return tuple(entries)


# ---------------------------------------------------------------------------
# container synthesis

_PROFILE_IDC = {name: idc for idc, name in AVC_PROFILES.items()}

_IDENTITY_MATRIX = struct.pack(">9i", 0x10000, 0, 0, 0, 0x10000, 0, 0, 0, 0x40000000)

_MARKER_ATOM_PAYLOADS: dict[Marker, tuple[bytes, bytes]] = {
    # (atom type, text payload); classic QT text atoms carry 16-bit size and
    # language before the text itself.
    Marker.MOVIE_NAME: (b"\xa9nam", b"fixture movie"),
    Marker.MOVIE_MORE: (b"vndr", b"fixture vendor tag"),
    Marker.COPYRIGHT: (b"\xa9cpy", b"fixture copyright"),
    Marker.RECORDED_DATE: (b"\xa9day", b"2020-11-01T00:00:00+0000"),
}


def _box(box_type: bytes, payload: bytes) -> bytes:
    return struct.pack(">I", 8 + len(payload)) + box_type + payload


def _fullbox(box_type: bytes, payload: bytes, version: int = 0, flags: int = 0) -> bytes:
    return _box(box_type, bytes([version]) + flags.to_bytes(3, "big") + payload)


def _qt_text_atom(atom_type: bytes, text: bytes) -> bytes:
    return _box(atom_type, struct.pack(">HH", len(text), 0) + text)


def _avc_sample_entry(width: int, height: int, avcc: bytes | None) -> bytes:
    body = b"\x00" * 6 + struct.pack(">H", 1)        # reserved + data ref index
    body += b"\x00" * 16                              # pre_defined / reserved
    body += struct.pack(">HH", width, height)
    body += struct.pack(">II", 0x00480000, 0x00480000)  # 72 dpi
    body += b"\x00" * 4
    body += struct.pack(">H", 1)                      # frame count
    body += b"\x00" * 32                              # compressor name
    body += struct.pack(">Hh", 24, -1)                # depth, pre_defined
    if avcc is not None:
        body += _box(b"avcC", avcc)
    return _box(b"avc1", body)


def _avcc_payload(vfp: str) -> bytes | None:
    if not vfp:
        return None
    try:
        signal = parse_video_format_profile(vfp)
    except ValueError:
        raise InconsistentAttrs(f"video format profile {vfp!r} is not synthesizable") from None
    if signal.constraint_suffix not in (None, "@Main"):
        raise InconsistentAttrs(f"unsupported constraint suffix {signal.constraint_suffix!r}")
    profile_idc = _PROFILE_IDC[signal.profile_name]
    compat = 0x40 if signal.constraint_suffix == "@Main" else 0x00
    level_idc = int(round(signal.level * 10))
    # version, profile, compatibility, level, nal length, zero SPS/PPS counts
    return bytes([1, profile_idc, compat, level_idc, 0xFF, 0xE0, 0x00])


def _encoder_meta(encoder: str) -> bytes:
    hdlr = _fullbox(b"hdlr", b"\x00" * 4 + b"mdir" + b"appl" + b"\x00" * 9)
    data = _box(b"data", struct.pack(">II", 1, 0) + encoder.encode("utf-8"))
    ilst = _box(b"ilst", _box(b"\xa9too", data))
    return _fullbox(b"meta", hdlr + ilst)


def synthesize_container(attrs: VideoAttributes) -> bytes:
    """Emit minimal container bytes that extract back to ``attrs`` exactly.

    The file is ftyp + moov (one empty-sample-table video track, user-data
    atoms for the requested markers, an encoder entry when requested) padded
    with a free box to attrs.byte_size when that target is reachable.
    Raises InconsistentAttrs when the vector contradicts itself (format
    profile disagreeing with the codec-id brand, unrenderable profile string).
    """
    major, brands = codec_id_brands(attrs.codec_id)
    try:
        derived_profile = classify_format_profile(FtypInfo(major, 0, brands))
    except UnknownBrand:
        raise InconsistentAttrs(f"codec id {attrs.codec_id!r} has no known lineage") from None
    if derived_profile is not attrs.format_profile:
        raise InconsistentAttrs(
            f"format profile {attrs.format_profile.value!r} contradicts codec id {attrs.codec_id!r}"
        )

    ftyp = _box(b"ftyp", major.encode("latin-1") + struct.pack(">I", 0)
                + b"".join(b.encode("latin-1") for b in brands))

    mvhd = _fullbox(b"mvhd", struct.pack(">IIII", 0, 0, 1000, 0)
                    + struct.pack(">IH", 0x00010000, 0x0100)
                    + b"\x00" * 10 + _IDENTITY_MATRIX + b"\x00" * 24
                    + struct.pack(">I", 2))
    tkhd = _fullbox(b"tkhd", struct.pack(">IIII", 0, 0, 1, 0)
                    + struct.pack(">I", 0) + b"\x00" * 8
                    + struct.pack(">HHHH", 0, 0, 0, 0) + _IDENTITY_MATRIX
                    + struct.pack(">II", attrs.width << 16, attrs.length << 16),
                    flags=7)
    mdhd = _fullbox(b"mdhd", struct.pack(">IIIIHH", 0, 0, 1000, 0, 0x55C4, 0))
    hdlr = _fullbox(b"hdlr", b"\x00" * 4 + b"vide" + b"\x00" * 12 + b"VideoHandler\x00")
    vmhd = _fullbox(b"vmhd", struct.pack(">HHHH", 0, 0, 0, 0), flags=1)
    dref = _fullbox(b"dref", struct.pack(">I", 1) + _fullbox(b"url ", b"", flags=1))
    dinf = _box(b"dinf", dref)
    stsd = _fullbox(b"stsd", struct.pack(">I", 1)
                    + _avc_sample_entry(attrs.width, attrs.length, _avcc_payload(attrs.video_format_profile)))
    stbl = _box(b"stbl", stsd
                + _fullbox(b"stts", struct.pack(">I", 0))
                + _fullbox(b"stsc", struct.pack(">I", 0))
                + _fullbox(b"stsz", struct.pack(">II", 0, 0))
                + _fullbox(b"stco", struct.pack(">I", 0)))
    minf = _box(b"minf", vmhd + dinf + stbl)
    mdia = _box(b"mdia", mdhd + hdlr + minf)
    trak = _box(b"trak", tkhd + mdia)

    udta_children = b""
    for marker in _MARKER_ORDER:
        if marker in attrs.markers:
            atom_type, text = _MARKER_ATOM_PAYLOADS[marker]
            udta_children += _qt_text_atom(atom_type, text)
    if attrs.encoder:
        udta_children += _encoder_meta(attrs.encoder)
    moov_payload = mvhd + trak
    if udta_children:
        moov_payload += _box(b"udta", udta_children)
    data = ftyp + _box(b"moov", moov_payload)

    if attrs.byte_size >= len(data) + 8:
        data += _box(b"free", b"\x00" * (attrs.byte_size - len(data) - 8))
    return data


__all__ = [
    "SYNTH_CONTAINER_SIZE", "DEFAULT_IMAGE_BYTES", "WILDCARD_RESOLUTION",
    "OracleError", "UnknownTransform", "InconsistentAttrs", "TransformResult",
    "expected_attributes", "apply_transform",
    "SingleLabel", "ChainLabel", "CorpusEntry", "CorpusFormatError",
    "generate_corpus", "render_corpus", "parse_corpus", "synthesize_container",
]
