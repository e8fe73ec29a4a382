from .toolkit import BuiltinToolkit, FfmpegToolkit, MediaInfo, MediaToolkit, build_toolkit

__all__ = ["BuiltinToolkit", "FfmpegToolkit", "MediaInfo", "MediaToolkit", "build_toolkit"]
