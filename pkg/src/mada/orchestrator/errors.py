"""Failure modes of the coordination layer."""


class NoEligibleAgent(Exception):
    """The current phase requires an agent that is not registered."""

    def __init__(self, phase: str, wanted: str):
        self.phase = phase
        self.wanted = wanted
        super().__init__(f"phase {phase} needs agent {wanted!r} but none is registered")


class MaxTurnsExceeded(Exception):
    """The workflow hit its turn cap before reaching Done."""

    def __init__(self, max_turns: int):
        self.max_turns = max_turns
        super().__init__(f"workflow did not finish within {max_turns} turns")


class NoActiveStudy(Exception):
    """A command or query arrived before any study was started."""


class InvalidBounds(Exception):
    """set_bounds rejected: lower must be strictly below upper, per axis."""


class NoPendingApproval(Exception):
    """approve_round sent while no round boundary is blocked."""


class ToolSessionDown(Exception):
    """An agent's tool session is closed or unreachable."""

    def __init__(self, agent: str, session: str):
        self.agent = agent
        self.session = session
        super().__init__(f"agent {agent}: tool session {session!r} is down")


class TurnTimeout(Exception):
    """A single agent turn exceeded its wall-clock allowance."""

    def __init__(self, agent: str, limit_s: float):
        self.agent = agent
        self.limit_s = limit_s
        super().__init__(f"agent {agent} exceeded the {limit_s:.1f}s turn limit")


class TurnFailure(Exception):
    """An agent's turn failed in a recoverable way (tool fault, bad result).

    The workflow keeps the phase and retries once; a second consecutive
    failure in the same phase escalates to AwaitingExpert."""

    def __init__(self, message: str):
        self.message = message
        super().__init__(message)
