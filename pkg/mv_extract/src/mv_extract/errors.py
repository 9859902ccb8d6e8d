class ExtractError(Exception):
    """Base class for extractor failures."""


class InvalidJob(ExtractError):
    """Job or settings validation failure."""


class UnsupportedCodecError(ExtractError):
    """Stream codec cannot export motion-vector side data."""

    def __init__(self, codec: str):
        super().__init__(
            f"codec {codec!r} does not export motion-vector side data; "
            "supported: h264, mpeg1video, mpeg2video, mpeg4")
        self.codec = codec
