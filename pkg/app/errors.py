"""Exception types shared across the simulator.

All of them survive pickling with their fields intact, so an error raised
inside a study worker process reaches the parent unchanged.
"""


class ConfigurationError(Exception):
    """A miswired tree, unknown node id, missing blackboard key or invalid config.

    `path` names the offending field (dotted) or node when known.
    """

    def __init__(self, message: str, path: str = None):
        self.message = message
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)

    def __reduce__(self):
        return self.__class__, (self.message, self.path)


class GrammarError(ConfigurationError):
    """stringBT text that does not conform to the grammar"""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message

    def __reduce__(self):
        return self.__class__, (self.message, self.line, self.column)


class TrialError(Exception):
    """Any failure escaping a trial; trials are deterministic so this is a bug"""

    def __init__(self, message: str, seed: int = None):
        self.message = message
        self.seed = seed
        super().__init__(message if seed is None else f"{message} [seed={seed}]")

    def __reduce__(self):
        return self.__class__, (self.message, self.seed)
