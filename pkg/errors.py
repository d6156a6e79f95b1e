from typing import Optional


class ToolkitError(Exception):
    """Base error for every failure the toolkit reports on purpose"""

    exit_code = 1


class InvalidGeneratorError(ToolkitError):
    def __init__(self, index: int, k: int):
        super().__init__(f"Generator index {index} outside 1..{k + 1}")
        self.index = index
        self.k = k


class ParameterMismatchError(ToolkitError):
    pass


class InvalidSpinError(ToolkitError):
    def __init__(self, spin: int, q: int, where: Optional[str] = None):
        location = f" at {where}" if where else ""
        super().__init__(f"Spin {spin}{location} outside 1..{q}")
        self.spin = spin
        self.q = q


class DomainError(ToolkitError):
    pass


class MissingVertexError(ToolkitError):
    def __init__(self, word):
        super().__init__(f"Configuration has no spin for vertex '{word}'")
        self.word = word


class RegimeError(ToolkitError):
    pass


class PigeonholeError(ToolkitError):
    pass


class InvalidSpecError(ToolkitError):
    pass


class BudgetExceededError(ToolkitError):
    def __init__(self, required: int, budget: int):
        super().__init__(
            f"Enumeration needs {required} states, budget is {budget}; "
            f"raise --budget or CENSUS_BUDGET to run it"
        )
        self.required = required
        self.budget = budget
