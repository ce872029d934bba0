"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line driver can map
module failures to distinct process statuses.
"""


class SymflowError(Exception):
    exit_code = 1


# geometry / flow
class DegenerateMetric(SymflowError):
    exit_code = 10


class StepTooLarge(SymflowError):
    exit_code = 11


class SymplecticityLost(SymflowError):
    exit_code = 12


class NoBlowup(SymflowError):
    exit_code = 13


# density machinery
class TimeOrder(SymflowError):
    exit_code = 14


class NotSymplectic(SymflowError):
    exit_code = 15


class InsufficientTrace(SymflowError):
    exit_code = 16


class EmptyBall(SymflowError):
    exit_code = 17


class OutOfTraceRange(SymflowError):
    exit_code = 18


# cone analysis
class TooFewPoints(SymflowError):
    exit_code = 19


class NoPlanes(SymflowError):
    exit_code = 20


class EmptyCloud(SymflowError):
    exit_code = 21


# configuration and files
class ParseError(SymflowError):
    exit_code = 30


class ValidationError(SymflowError):
    exit_code = 31


class VersionMismatch(SymflowError):
    exit_code = 40


class LengthMismatch(SymflowError):
    exit_code = 41
