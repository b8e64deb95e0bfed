# src/domain/state_machine.py

from enum import Enum
from typing import Dict, Set

from src.domain.exceptions import InvalidNodeTransitionError


class NodeStatus(str, Enum):
    OPEN = "OPEN"
    SOLVED = "SOLVED"
    BRANCHED = "BRANCHED"
    INTEGRAL = "INTEGRAL"
    PRUNED = "PRUNED"
    INFEASIBLE = "INFEASIBLE"


class NodeStateMachine:
    """
    Lifecycle of a branch-and-bound node.
    Defines the legal state transitions.
    """

    _ALLOWED_TRANSITIONS: Dict[NodeStatus, Set[NodeStatus]] = {
        NodeStatus.OPEN: {
            NodeStatus.SOLVED,
            NodeStatus.INFEASIBLE,
            NodeStatus.PRUNED,
        },
        NodeStatus.SOLVED: {
            NodeStatus.BRANCHED,
            NodeStatus.INTEGRAL,
            NodeStatus.PRUNED,
        },
        NodeStatus.BRANCHED: set(),
        NodeStatus.INTEGRAL: set(),
        NodeStatus.PRUNED: set(),
        NodeStatus.INFEASIBLE: set(),
    }

    @classmethod
    def can_transition(
        cls,
        from_status: NodeStatus,
        to_status: NodeStatus,
    ) -> bool:
        """
        Returns True if transition is allowed.
        """
        cls._ensure_valid_status(from_status)
        cls._ensure_valid_status(to_status)

        return to_status in cls._ALLOWED_TRANSITIONS.get(from_status, set())

    @classmethod
    def validate_transition(
        cls,
        from_status: NodeStatus,
        to_status: NodeStatus,
    ) -> None:
        """
        Raises InvalidNodeTransitionError if transition is illegal.
        """
        if not cls.can_transition(from_status, to_status):
            raise InvalidNodeTransitionError(
                from_state=from_status.value,
                to_state=to_status.value,
            )

    @classmethod
    def is_terminal(cls, status: NodeStatus) -> bool:
        cls._ensure_valid_status(status)
        return len(cls._ALLOWED_TRANSITIONS.get(status, set())) == 0

    @staticmethod
    def _ensure_valid_status(status: NodeStatus) -> None:
        if not isinstance(status, NodeStatus):
            raise TypeError(
                f"Expected NodeStatus, got {type(status)}"
            )
