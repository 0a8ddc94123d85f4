"""Exception hierarchy shared by every folkgather stage.

Each error carries a short machine-readable code and the process exit status
the CLI should use when it escapes to the top level.
"""


class FolkgatherError(Exception):
    """Base class for all folkgather failures."""

    code = 'E_FOLKGATHER'
    exit_status = 1

    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def one_line(self):
        """Render as a single `error: CODE: message` line for stderr."""
        text = ' '.join(str(self.message).split())
        return f"error: {self.code}: {text}"


class InputError(FolkgatherError):
    """Malformed or inconsistent input: files, ids, parameters."""

    code = 'E_INPUT'
    exit_status = 2


class ModelError(FolkgatherError):
    """Classifier misuse: single-class training data, schema mismatch."""

    code = 'E_MODEL'
    exit_status = 2


class OracleError(FolkgatherError):
    """The self-training label oracle could not resolve a user."""

    code = 'E_ORACLE'
    exit_status = 2


class InvariantError(FolkgatherError):
    """An internal contract was violated (should be unreachable)."""

    code = 'E_INVARIANT'
    exit_status = 4


# Exit status used when a RAP run stops at max_sweeps without converging.
EXIT_NOT_CONVERGED = 3
