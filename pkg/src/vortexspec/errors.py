"""Exception hierarchy shared by all vortexspec solvers."""


class VortexSpecError(Exception):
    """Base class for every error raised by this package."""


class NewtonDivergence(VortexSpecError):
    """Damped Newton failed to reduce the residual."""


class MeshLimitExceeded(VortexSpecError):
    """Adaptive refinement would exceed the configured node budget."""


class SingularJacobian(VortexSpecError):
    """The discrete collocation Jacobian could not be factored."""


class OutOfDomain(VortexSpecError, ValueError):
    """Evaluation point lies outside the solution interval."""


class ConvergedToZero(VortexSpecError):
    """Newton kept landing on the trivial solution."""


class ProfileDomainTooSmall(VortexSpecError, ValueError):
    """The vortex profile does not cover the requested interval."""


class StepFailure(VortexSpecError):
    """Initial-value integration aborted."""


class SuspectedTangentialZero(VortexSpecError):
    """Function nearly vanishes without changing sign."""


class NoPlateau(VortexSpecError):
    """Far-field estimator fails to settle on a constant."""


class UncertifiedTail(VortexSpecError):
    """Zero count cannot be trusted beyond the computational domain."""


class ResonanceSuspected(VortexSpecError):
    """Linear solve produced an implausibly large solution."""


class DegenerateMatrix(VortexSpecError):
    """Inner-product matrix too close to singular to certify."""


class ContinuationStall(VortexSpecError):
    """Parameter continuation step shrank below its floor."""
