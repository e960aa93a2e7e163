"""Exception hierarchy shared by all orderforge modules."""


class OrderforgeError(Exception):
    """Base class for all library errors."""


class ArgumentError(OrderforgeError, ValueError):
    """Invalid argument combination (caller bug, not data)."""


class DomainError(OrderforgeError):
    """A map was evaluated outside its declared domain."""


class SeedResolutionError(OrderforgeError):
    """A seeded square root could not resolve a query within the iteration cap."""


class AccumulationError(OrderforgeError):
    """A window flatten hit a node whose breakpoints accumulate inside the window.

    Carries the offending accumulation point in ``point``.
    """

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class NotIncreasingError(OrderforgeError):
    """Data that must be strictly increasing is not."""


class NotWeakConjError(OrderforgeError):
    """The supplied map is not a weak conjugation on the verification window."""


class StrongnessError(OrderforgeError):
    """The supplied map fails the strong-conjugation identity on the given interval."""


class HypothesisError(OrderforgeError):
    """No admissible generator index satisfies the perturbation hypothesis."""


class DegenerateError(OrderforgeError):
    """All three composition landmarks coincide; no extension step exists."""


class StepCapError(OrderforgeError):
    """An iterative extension exceeded its step cap.

    ``transcript`` holds whatever per-step log the caller accumulated.
    """

    def __init__(self, msg, transcript=None):
        super().__init__(msg)
        self.transcript = transcript or []


class StallError(OrderforgeError):
    """Greedy ladder search failed to exit the window within the step cap."""


class TorsionError(OrderforgeError):
    """The three relation blocks are all equal; the group is not orderable."""


class InconsistentOrderError(OrderforgeError):
    """A ball order violates left invariance inside the ball."""


class UnsupportedFormError(OrderforgeError):
    """An expression has no finite global piecewise form (query it pointwise instead)."""


class InternalCheckError(OrderforgeError):
    """A runtime assertion that should be impossible failed (construction bug)."""
