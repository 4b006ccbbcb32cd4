class S2SFEError(Exception):
    pass


class AlignmentError(S2SFEError, ValueError):
    """Two sequences that must pair up positionally have different lengths."""

    def __init__(self, left: int, right: int, what: str = "lines"):
        super().__init__(f"alignment mismatch: {left} vs {right} {what}")
        self.left = left
        self.right = right


class CorpusDecodeError(S2SFEError, ValueError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: invalid UTF-8 ({reason})")
        self.path = path
        self.line_no = line_no


class CorpusSizeError(S2SFEError, ValueError):
    pass


class TeacherError(S2SFEError, RuntimeError):
    def __init__(self, cmd, returncode: int, stderr: str):
        super().__init__(f"teacher command {cmd!r} exited with {returncode}: {stderr.strip()}")
        self.returncode = returncode
        self.stderr = stderr


class EmptyInputError(S2SFEError, ValueError):
    pass


class DanglingContinuationError(S2SFEError, ValueError):
    pass


class CodecFormatError(S2SFEError, ValueError):
    pass


class ConfigError(S2SFEError, ValueError):
    pass


class VocabularyError(S2SFEError, ValueError):
    pass


class PositionError(S2SFEError, ValueError):
    pass


class DivergenceError(S2SFEError, RuntimeError):
    def __init__(self, step: int, msg: str = "non-finite loss"):
        super().__init__(f"{msg} at step {step}")
        self.step = step


class CheckpointError(S2SFEError, ValueError):
    pass


class EmptyOutputError(S2SFEError, ValueError):
    pass


class PlanError(S2SFEError, ValueError):
    pass


class TranslationError(S2SFEError, RuntimeError):
    """A translator failed on one chunk; ``span`` names the input word window."""

    def __init__(self, span, cause: BaseException):
        super().__init__(f"translation failed on span {span}: {cause}")
        self.span = span
        self.__cause__ = cause


class LabelParseError(S2SFEError, ValueError):
    def __init__(self, line_no: int, line: str):
        super().__init__(f"line {line_no}: malformed label record {line!r}")
        self.line_no = line_no
