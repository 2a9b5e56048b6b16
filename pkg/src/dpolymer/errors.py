"""Exception types shared across the package."""


class DomainError(ValueError):
    """Parameter lies outside the open parameter domain of a kernel family."""


class SupportError(ValueError):
    """Point lies outside the support of a density, or outside (0,1) for a probability."""


class CapabilityError(ValueError):
    """Requested order/size exceeds what the implementation supports."""


class LatticeValidationError(ValueError):
    """Model parameters or a lattice path violate a structural constraint."""


class StateError(RuntimeError):
    """Operation requires state (e.g. retained uniforms) that was not kept."""


class NumericsError(RuntimeError):
    """A numerical routine failed to converge or produced an inconsistent value."""


class FitError(ValueError):
    """Slope fitting received unusable input (e.g. nonpositive values)."""
