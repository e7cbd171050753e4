"""Exception types raised across the package."""


class LndmvError(Exception):
    """Base class for all package errors."""


class ConllFormatError(LndmvError, ValueError):
    def __init__(self, path, lineno, message):
        self.path = path
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class EncodeError(LndmvError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "encode error"


class TreeError(LndmvError, ValueError):
    """Invalid dependency tree (multi-root, cycle, non-projective, bad length)."""


class VectorFormatError(LndmvError, ValueError):
    pass


class ModelFormatError(LndmvError, ValueError):
    """Unreadable, truncated or version-mismatched model file."""


class NeuralTrainingError(LndmvError, FloatingPointError):
    pass
