"""JPEG dimension extraction.

Scans the marker-segment stream up to the first start-of-frame header and
reads the stored dimensions from it (ITU T.81 layout: precision byte, then
16-bit lines and samples-per-line).  Entropy-coded data and padding segments
are skipped by segment length; nothing is decoded.
"""

from __future__ import annotations

import struct

from .attributes import ImageAttributes

SOI = b"\xff\xd8"

# SOF0..SOF15 minus DHT (C4), JPG (C8) and DAC (CC), which share the range.
_SOF_MARKERS = frozenset(range(0xC0, 0xD0)) - {0xC4, 0xC8, 0xCC}
_STANDALONE = frozenset({0x01}) | frozenset(range(0xD0, 0xD8))  # TEM, RST0-7
_EOI = 0xD9
_SOS = 0xDA


class JpegError(Exception):
    """Base class for JPEG parse failures."""


class NotJpeg(JpegError):
    """Input does not start with the start-of-image marker."""


class NoFrameHeader(JpegError):
    """No start-of-frame segment found before the stream ends or breaks."""


def _skip_entropy(data, pos: int) -> int:
    # Inside entropy-coded data a 0xFF is always followed by 0x00 stuffing or
    # a restart marker; anything else is the next real marker.
    end = len(data)
    while pos < end - 1:
        if data[pos] == 0xFF and data[pos + 1] not in (0x00,) and data[pos + 1] not in _STANDALONE:
            return pos
        pos += 1
    return end


def extract_image_attributes(data, byte_size: int | None = None) -> ImageAttributes:
    """Read width, length and byte size from JPEG bytes.

    ``byte_size`` overrides the reported size when only a head window of a
    larger file is passed in.  Raises NotJpeg on bad magic and NoFrameHeader
    when no usable start-of-frame segment precedes the end of the buffer.
    """
    if bytes(data[:2]) != SOI:
        raise NotJpeg("missing start-of-image marker")
    size = len(data) if byte_size is None else byte_size

    pos, end = 2, len(data)
    while pos < end:
        if data[pos] != 0xFF:
            raise NoFrameHeader(f"expected marker at offset {pos}")
        while pos < end and data[pos] == 0xFF:  # fill bytes before the code
            pos += 1
        if pos >= end:
            break
        marker = data[pos]
        pos += 1
        if marker == 0x00 or marker in _STANDALONE:
            continue
        if marker == _EOI:
            break
        if pos + 2 > end:
            break
        seg_len = struct.unpack_from(">H", data, pos)[0]
        if seg_len < 2 or pos + seg_len > end:
            raise NoFrameHeader(f"segment length {seg_len} at offset {pos} breaks the stream")
        if marker in _SOF_MARKERS:
            if seg_len < 7:
                raise NoFrameHeader("start-of-frame segment too short")
            height, width = struct.unpack_from(">HH", data, pos + 3)
            if width < 1 or height < 1:
                raise NoFrameHeader("start-of-frame declares zero dimensions")
            return ImageAttributes(width=width, length=height, byte_size=size)
        pos += seg_len
        if marker == _SOS:
            pos = _skip_entropy(data, pos)
    raise NoFrameHeader("no start-of-frame segment before end of stream")
