"""Exception hierarchy shared by every module."""


class SemfuseError(Exception):
    """Base class for all library errors."""


class ShapeError(SemfuseError, ValueError):
    """Operand shapes are incompatible."""


class PreconditionError(SemfuseError, ValueError):
    """An operation was called outside its documented domain."""


class LabelIndexError(SemfuseError, IndexError):
    """An integer id falls outside its table or class range."""


class EmptySentenceError(SemfuseError, ValueError):
    pass


class AlignmentError(SemfuseError, ValueError):
    """Word-level and subword-level sequences do not line up."""


class VocabError(SemfuseError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class StructureError(SemfuseError, ValueError):
    """A label sequence violates BIO structure."""


class DecodeError(SemfuseError, ValueError):
    pass


class DegenerateInputError(SemfuseError, ValueError):
    pass


class LengthError(SemfuseError, ValueError):
    pass


class DatasetError(SemfuseError, ValueError):
    """One or more dataset lines failed to parse or validate.

    ``problems`` holds ``(line_number, message)`` pairs for every rejected line.
    """

    def __init__(self, path, problems):
        self.path = path
        self.problems = list(problems)
        lines = "\n".join(f"  line {ln}: {msg}" for ln, msg in self.problems)
        super().__init__(f"{path}: {len(self.problems)} invalid line(s)\n{lines}")


class ConfigError(SemfuseError, ValueError):
    pass


class DivergenceError(SemfuseError, RuntimeError):
    pass
