import struct

import pytest
from hypothesis import given, settings, strategies as st

from mediafp.attributes import FormatProfile, Marker, VideoAttributes
from mediafp.container import (
    FtypInfo,
    MalformedBox,
    MissingFtyp,
    NoVideoTrack,
    ParseError,
    TruncatedFile,
    UnknownBrand,
    classify_format_profile,
    codec_id_brands,
    extract_video_attributes,
    parse_box_tree,
    read_ftyp,
    render_codec_id,
)
from mediafp.oracle import synthesize_container


def box(box_type: bytes, payload: bytes) -> bytes:
    return struct.pack(">I", len(payload) + 8) + box_type + payload


def ftyp_bytes(major: bytes, brands: list[bytes]) -> bytes:
    return box(b"ftyp", major + b"\x00" * 4 + b"".join(brands))


class TestBoxTree:
    def test_single_ftyp_leaf(self):
        data = ftyp_bytes(b"qt  ", [b"qt  ", b"qt  "])
        assert len(data) == 24
        tree = parse_box_tree(data)
        assert [b.box_type for b in tree] == ["ftyp"]
        assert tree[0].children == []

    def test_moov_with_trak_child(self):
        data = box(b"moov", box(b"trak", b""))
        tree = parse_box_tree(data)
        assert tree[0].box_type == "moov"
        assert [b.box_type for b in tree[0].children] == ["trak"]

    def test_declared_size_exceeds_file(self):
        # Start from a valid synthesized container, then inflate the first
        # box's declared size beyond the buffer.
        data = bytearray(synthesize_container(discord_attrs()))
        struct.pack_into(">I", data, 0, 1000 + len(data))
        with pytest.raises(TruncatedFile):
            parse_box_tree(bytes(data))

    def test_size_below_header_is_malformed(self):
        data = struct.pack(">I", 4) + b"abcd" + b"\x00" * 8
        with pytest.raises(MalformedBox):
            parse_box_tree(data)

    def test_size_zero_runs_to_end(self):
        data = struct.pack(">I", 0) + b"mdat" + b"\x00" * 100
        tree = parse_box_tree(data)
        assert tree[0].payload_length == 100

    def test_64_bit_extended_size(self):
        payload = b"\x00" * 10
        data = struct.pack(">I", 1) + b"mdat" + struct.pack(">Q", 16 + len(payload)) + payload
        tree = parse_box_tree(data)
        assert tree[0].payload_length == len(payload)

    def test_classic_udta_zero_terminator_tolerated(self):
        data = box(b"udta", box(b"\xa9nam", b"\x00\x04\x00\x00name") + b"\x00\x00\x00\x00")
        tree = parse_box_tree(data)
        assert [b.box_type for b in tree[0].children] == ["\xa9nam"]

    def test_unknown_box_skipped_not_recursed(self):
        data = box(b"wxyz", box(b"trak", b""))
        tree = parse_box_tree(data)
        assert tree[0].children == []

    def test_children_contained_in_parent(self):
        data = synthesize_container(discord_attrs())

        def check(node, lo, hi):
            assert lo <= node.payload_offset and node.payload_end <= hi
            prev_end = node.payload_offset
            for child in node.children:
                assert child.payload_offset - 8 >= prev_end - 8
                check(child, node.payload_offset, node.payload_end)
                prev_end = child.payload_end

        for root in parse_box_tree(data):
            check(root, 0, len(data))


class TestFtyp:
    def test_qt_major(self):
        tree_data = ftyp_bytes(b"qt  ", [b"qt  "])
        info = read_ftyp(parse_box_tree(tree_data), tree_data)
        assert info.major_brand == "qt  "
        assert info.compatible_brands == ("qt  ",)

    def test_mp42_brands_in_order(self):
        data = ftyp_bytes(b"mp42", [b"isom", b"mp42"])
        info = read_ftyp(parse_box_tree(data), data)
        assert info.major_brand == "mp42"
        assert info.compatible_brands == ("isom", "mp42")

    def test_four_compat_brands_preserved(self):
        data = ftyp_bytes(b"isom", [b"isom", b"iso2", b"avc1", b"mp41"])
        info = read_ftyp(parse_box_tree(data), data)
        assert info.compatible_brands == ("isom", "iso2", "avc1", "mp41")

    def test_missing_ftyp(self):
        data = box(b"moov", b"")
        with pytest.raises(MissingFtyp):
            read_ftyp(parse_box_tree(data), data)


class TestCodecId:
    def test_bare_qt(self):
        assert render_codec_id(FtypInfo("qt  ", 0, ("qt  ",))) == "qt"

    def test_two_brands(self):
        assert render_codec_id(FtypInfo("mp42", 0, ("mp42", "isom"))) == "mp42 (mp42/isom)"

    def test_three_brands_file_order(self):
        assert render_codec_id(FtypInfo("mp42", 0, ("isom", "mp41", "mp42"))) == "mp42 (isom/mp41/mp42)"

    def test_empty_compat_renders_bare(self):
        assert render_codec_id(FtypInfo("isom", 512, ())) == "isom"

    @given(st.lists(st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789", min_size=1, max_size=4),
                    min_size=1, max_size=6))
    def test_rendering_reparses(self, brands):
        padded = [b.ljust(4) for b in brands]
        rendered = render_codec_id(FtypInfo(padded[0], 0, tuple(padded)))
        major, compat = codec_id_brands(rendered)
        assert major == padded[0]
        if len(padded) == 1:
            assert compat == (padded[0],)
        else:
            assert compat == tuple(padded)


class TestFormatProfile:
    @pytest.mark.parametrize("major,expected", [
        ("qt  ", FormatProfile.QUICKTIME),
        ("mp42", FormatProfile.BASE_MEDIA_V2),
        ("isom", FormatProfile.BASE_MEDIA),
        ("iso2", FormatProfile.BASE_MEDIA),
        ("avc1", FormatProfile.BASE_MEDIA),
    ])
    def test_brand_mapping(self, major, expected):
        assert classify_format_profile(FtypInfo(major, 0, ())) is expected

    def test_unknown_brand(self):
        with pytest.raises(UnknownBrand):
            classify_format_profile(FtypInfo("zzzz", 0, ()))


def discord_attrs() -> VideoAttributes:
    return VideoAttributes(
        extension="MOV",
        format_profile=FormatProfile.QUICKTIME,
        codec_id="qt",
        video_format_profile="Main@L3.1",
        width=960,
        length=540,
        byte_size=4096,
    )


class TestExtraction:
    def test_quicktime_main_l31(self):
        attrs = extract_video_attributes(synthesize_container(discord_attrs()), name_hint="clip.mov")
        assert attrs.extension == "MOV"
        assert attrs.format_profile is FormatProfile.QUICKTIME
        assert attrs.codec_id == "qt"
        assert attrs.video_format_profile == "Main@L3.1"
        assert (attrs.width, attrs.length) == (960, 540)
        assert attrs.markers == frozenset()

    def test_vendor_atom_reports_movie_more(self):
        base = VideoAttributes(
            extension="mp4",
            format_profile=FormatProfile.BASE_MEDIA_V2,
            codec_id="mp42 (isom/mp41/mp42)",
            video_format_profile="High@L3.1",
            width=960,
            length=544,
            markers=frozenset({Marker.MOVIE_MORE}),
            byte_size=4096,
        )
        attrs = extract_video_attributes(synthesize_container(base), name_hint="v.mp4")
        assert Marker.MOVIE_MORE in attrs.markers

    def test_no_user_data_no_markers(self):
        attrs = extract_video_attributes(synthesize_container(discord_attrs()))
        assert attrs.markers == frozenset()

    def test_constraint_suffix_round_trip(self):
        base = VideoAttributes(
            extension="mp4",
            format_profile=FormatProfile.BASE_MEDIA,
            codec_id="isom (isom/iso2/mp41)",
            video_format_profile="Main@L4@Main",
            width=1920,
            length=1080,
            encoder="Lavf57.83.100",
            byte_size=4096,
        )
        attrs = extract_video_attributes(synthesize_container(base), name_hint="v.mp4")
        assert attrs.video_format_profile == "Main@L4@Main"
        assert attrs.encoder == "Lavf57.83.100"

    def test_extension_falls_back_on_lineage(self):
        data = synthesize_container(discord_attrs())
        assert extract_video_attributes(data).extension == "MOV"
        assert extract_video_attributes(data, name_hint="weird.dat").extension == "other"

    def test_no_video_track(self):
        data = ftyp_bytes(b"isom", [b"isom"]) + box(b"moov", box(b"mvhd", b"\x00" * 100))
        with pytest.raises(NoVideoTrack):
            extract_video_attributes(data)

    def test_determinism(self):
        data = synthesize_container(discord_attrs())
        assert extract_video_attributes(data, "a.mov") == extract_video_attributes(data, "a.mov")

    def test_no_ftyp_classified_quicktime(self):
        # Bare QuickTime files legitimately omit ftyp; everything after the
        # first box of a synthesized qt file is such a container.
        data = synthesize_container(discord_attrs())
        tree = parse_box_tree(data)
        assert tree[0].box_type == "ftyp"
        stripped = data[tree[0].payload_end:]
        attrs = extract_video_attributes(stripped)
        assert attrs.format_profile is FormatProfile.QUICKTIME
        assert attrs.codec_id == "qt"
        assert attrs.extension == "MOV"

    def test_tkhd_fallback_when_stsd_missing(self):
        # Hand-build a track whose stbl has no stsd: dimensions must come
        # from the 16.16 fixed-point track header fields.
        tkhd = box(b"tkhd", b"\x00" * 76 + struct.pack(">II", 640 << 16, 360 << 16))
        hdlr = box(b"hdlr", b"\x00" * 8 + b"vide" + b"\x00" * 12)
        stbl = box(b"stbl", b"")
        minf = box(b"minf", stbl)
        mdia = box(b"mdia", hdlr + minf)
        data = ftyp_bytes(b"isom", [b"isom"]) + box(b"moov", box(b"trak", tkhd + mdia))
        attrs = extract_video_attributes(data, name_hint="x.mp4")
        assert (attrs.width, attrs.length) == (640, 360)
        assert attrs.video_format_profile == ""


@settings(max_examples=300, deadline=None)
@given(st.binary(min_size=0, max_size=512))
def test_fuzz_only_declared_errors(data):
    try:
        parse_box_tree(data)
    except ParseError:
        pass


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=4095), st.integers(min_value=0, max_value=255))
def test_fuzz_mutated_container(offset, value):
    data = bytearray(synthesize_container(discord_attrs()))
    data[offset % len(data)] = value
    try:
        extract_video_attributes(bytes(data), name_hint="m.mov")
    except ParseError:
        pass
