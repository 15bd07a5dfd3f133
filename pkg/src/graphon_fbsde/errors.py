"""Exception hierarchy shared across the package."""


class GraphonFbsdeError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GraphonFbsdeError, ValueError):
    """Array argument has the wrong shape or length."""


class DomainError(GraphonFbsdeError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(GraphonFbsdeError, ValueError):
    """Invalid configuration. ``path`` names the offending field when known."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class UnsupportedConfigurationError(ConfigError):
    """Valid configuration that a particular operation cannot handle."""


class OptimizerError(GraphonFbsdeError, FloatingPointError):
    def __init__(self, message, layer=None):
        self.layer = layer
        super().__init__(message)


class SimulationBlowUpError(GraphonFbsdeError, FloatingPointError):
    """Rollout state left the admissible range at particle ``i``, node ``n``."""

    def __init__(self, particle, node, quantity, value):
        self.particle = particle
        self.node = node
        self.quantity = quantity
        self.value = value
        super().__init__(
            f"simulation blow-up: |{quantity}| = {value!r} at particle {particle}, node {node}"
        )


class TrainingError(GraphonFbsdeError, RuntimeError):
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)


class CsvParseError(GraphonFbsdeError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
