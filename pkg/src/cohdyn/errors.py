"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration or CLI arguments (exit code 2)."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ResourceLimitError(ConfigError):
    """Requested system size exceeds a documented hard limit."""

    def __init__(self, message):
        super().__init__([message])


class EmptySectorError(ValueError):
    """The requested symmetry sector contains no configurations."""


class IntegrityError(RuntimeError):
    """Internal consistency violation (norm drift, inconsistent counts, ...).

    Mapped to exit code 3 by the CLI.
    """
