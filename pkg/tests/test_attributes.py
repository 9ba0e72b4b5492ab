import pytest

from mediafp.attributes import (
    AvcSignal,
    ImageAttributes,
    VideoAttributes,
    FormatProfile,
    parse_os,
    parse_video_format_profile,
    render_level,
    OS,
)
from mediafp.container import parse_avc_config


@pytest.mark.parametrize("level,text", [
    (4.0, "4"),
    (3.1, "3.1"),
    (4.1, "4.1"),
    (2.1, "2.1"),
    (3.0, "3"),
])
def test_levels_print_without_trailing_zero(level, text):
    assert render_level(level) == text


def test_signal_render_and_parse_round_trip():
    for text in ("Baseline@L3.1", "Main@L4", "High@L2.1", "Main@L4@Main"):
        assert parse_video_format_profile(text).render() == text


def test_parse_rejects_unknown_profiles():
    for bad in ("Ultra@L9", "Main", "Main@4", "main@L3"):
        with pytest.raises(ValueError):
            parse_video_format_profile(bad)


@pytest.mark.parametrize("idc,name", [(66, "Baseline"), (77, "Main"), (100, "High")])
def test_profile_indication_mapping(idc, name):
    signal = parse_avc_config(bytes([1, idc, 0, 31]))
    assert signal == AvcSignal(profile_name=name, level=3.1)


def test_constraint_set_flag_yields_suffix():
    assert parse_avc_config(bytes([1, 77, 0x40, 40])).render() == "Main@L4@Main"
    assert parse_avc_config(bytes([1, 77, 0x00, 40])).render() == "Main@L4"


def test_unknown_profile_indication_renders_numeric():
    assert parse_avc_config(bytes([1, 88, 0, 30])).render() == "88@L3"


def test_os_aliases():
    assert parse_os("ios") is OS.IOS
    assert parse_os("Android") is OS.ANDROID_ANY
    assert parse_os("ANDROID169") is OS.ANDROID169
    with pytest.raises(ValueError):
        parse_os("windows")


def test_attribute_invariants_enforced():
    with pytest.raises(ValueError):
        ImageAttributes(0, 10, 100)
    with pytest.raises(ValueError):
        ImageAttributes(10, 10, 3)
    with pytest.raises(ValueError):
        VideoAttributes("mkv", FormatProfile.BASE_MEDIA, "isom", "Main@L3", 1, 1)
    with pytest.raises(ValueError):
        VideoAttributes("mp4", FormatProfile.BASE_MEDIA, "isom", "Main@L3", 0, 1)
