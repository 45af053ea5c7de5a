"""Exception hierarchy shared by all modules."""


class OmpcError(Exception):
    pass


class InstanceError(OmpcError, ValueError):
    """Malformed or inconsistent instance data."""


class InstanceFormatError(InstanceError):
    """An instance file could not be parsed; carries a location hint."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class InfeasibleError(OmpcError):
    """No solution exists under the current constraints."""


class InfeasibleStep(InfeasibleError):
    """The oracle found no set satisfying the arriving covering constraint."""


class LoadLimitExceeded(InfeasibleStep):
    """Committing the chosen set would push a packing load past the phase limit."""


class CertificateError(OmpcError):
    pass


class CapacityError(OmpcError):
    """Instance exceeds the configured brute-force size cap."""


class OracleCapacityError(CapacityError):
    pass


class SizeError(InstanceError):
    pass


class StreamEnd(OmpcError):
    pass
