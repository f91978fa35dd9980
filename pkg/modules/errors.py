"""
Exception hierarchy shared by every SwarmRecover module
"""


class SwarmRecoverError(Exception):
    """Base class for all SwarmRecover errors"""


class UsageError(SwarmRecoverError, ValueError):
    """Bad arguments: unknown state or event, malformed estimate, wrong mode"""


class ModelError(SwarmRecoverError, ValueError):
    """An automaton, composite, event or grid map violates its invariants"""


class ModelSyntaxError(ModelError):
    """A model or supervisor document cannot be tokenized"""

    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ContractViolation(SwarmRecoverError):
    """A precondition stated as a contract does not hold"""


class DesynchronizationError(ContractViolation):
    """The online supervisor received an observation outside its decision"""


class SynthesisAborted(SwarmRecoverError):
    """The RBTS node budget was exhausted before a verdict was reached"""

    def __init__(self, budget):
        super().__init__(f"synthesis aborted: node budget of {budget} exceeded")
        self.budget = budget


class OracleInconclusive(SwarmRecoverError):
    """The exhaustive oracle exceeded its budget"""


class SimulationInvariantError(SwarmRecoverError):
    """The simulator found the plant and its supervisor out of step"""


class ConfigError(SwarmRecoverError, ValueError):
    """Invalid synthesis or simulation configuration"""
