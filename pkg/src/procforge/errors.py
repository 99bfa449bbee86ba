"""Exception taxonomy shared by all procforge subsystems.

Every exception carries a stable ``code`` string; the HTTP layer maps each
code to exactly one status (see service module). Raising anything outside
this taxonomy from a public operation is a bug.
"""

from __future__ import annotations


class ProcForgeError(Exception):
    """Base class; ``code`` is the stable machine-readable identifier."""

    code = "Error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# ---- model definition errors ------------------------------------------------

class ModelSyntaxError(ProcForgeError):
    """Process document is not well-formed (unparseable)."""

    code = "SyntaxError"


class SchemaError(ProcForgeError):
    """Document parses but violates the definition schema."""

    code = "SchemaError"


class InvalidModel(ProcForgeError):
    """Model failed semantic validation; carries the violation list."""

    code = "InvalidModel"

    def __init__(self, violations):
        self.violations = list(violations)
        detail = "; ".join(f"{v.code}({v.subject})" for v in self.violations)
        super().__init__(f"model has {len(self.violations)} violation(s): {detail}")


class UnresolvedReference(ProcForgeError):
    code = "UnresolvedReference"


class RecursiveSubWorkflow(ProcForgeError):
    code = "RecursiveSubWorkflow"


class AmbiguousBoundary(ProcForgeError):
    code = "AmbiguousBoundary"


class CyclicModel(ProcForgeError):
    code = "CyclicModel"


# ---- enactment errors --------------------------------------------------------

class MissingExternalInput(ProcForgeError):
    code = "MissingExternalInput"


class IllegalState(ProcForgeError):
    code = "IllegalState"


class ConstraintViolation(ProcForgeError):
    code = "ConstraintViolation"


class RoleMismatch(ProcForgeError):
    code = "RoleMismatch"


class UnknownDecisionLabel(ProcForgeError):
    code = "UnknownDecisionLabel"


# ---- cloud simulation errors ---------------------------------------------------

class UnknownMachineType(ProcForgeError):
    code = "UnknownMachineType"


class CapacityExceeded(ProcForgeError):
    code = "CapacityExceeded"


class InstanceNotRunning(ProcForgeError):
    code = "InstanceNotRunning"


class MixedClouds(ProcForgeError):
    code = "MixedClouds"


class ClockRegression(ProcForgeError):
    code = "ClockRegression"


# ---- storage errors ------------------------------------------------------------

class NotFound(ProcForgeError):
    code = "NotFound"


class HashMismatch(ProcForgeError):
    code = "HashMismatch"


class StorageFailure(ProcForgeError):
    code = "StorageFailure"


class CorruptLog(ProcForgeError):
    code = "CorruptLog"
