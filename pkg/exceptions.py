class SEHSSLError(Exception):
    """Base class for all errors raised by this package"""


class DatasetError(SEHSSLError, ValueError):
    """Dataset file missing, unparsable, or violating hypergraph invariants"""


class ConfigError(SEHSSLError, ValueError):
    """Invalid configuration value, unknown key or missing profile"""


class ShapeMismatchError(SEHSSLError, ValueError):
    """Operands or stored parameters have incompatible shapes"""


class NonFiniteError(SEHSSLError, ArithmeticError):
    """A numerical operation produced NaN or infinity"""

    def __init__(self, message, op=None, epoch=None, breakdown=None):
        super().__init__(message)
        self.op = op
        self.epoch = epoch
        self.breakdown = breakdown


class CheckpointError(SEHSSLError):
    """Checkpoint cannot be written or read"""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version"""


class CheckpointCorruptError(CheckpointError):
    """Checkpoint is truncated or its header is unreadable"""


class EvaluationError(SEHSSLError):
    """Downstream evaluation cannot run on the given inputs"""
