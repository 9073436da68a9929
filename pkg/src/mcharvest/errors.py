"""Exception types raised across the package."""


class McHarvestError(Exception):
    """Base class for all package errors."""


class ConfigError(McHarvestError, ValueError):
    """Unknown key or invalid value in a configuration source."""


class LayoutError(McHarvestError, ValueError):
    """Invalid receptor layout."""


class OverlapError(LayoutError):
    def __init__(self, i, j, distance, required):
        self.pair = (i, j)
        self.distance = distance
        self.required = required
        super().__init__(
            f"receptors {i} and {j} overlap: chord distance {distance:.6g} um "
            f"< a_{i} + a_{j} = {required:.6g} um"
        )


class UnitNormError(LayoutError):
    pass


class NonPositiveRadius(LayoutError):
    pass


class BracketingFailure(McHarvestError, RuntimeError):
    pass


class CoincidentReceptors(McHarvestError, ValueError):
    pass


class RegimeUnsupported(McHarvestError, ValueError):
    pass


class GridMismatch(McHarvestError, ValueError):
    pass


class DegenerateKd(McHarvestError, ValueError):
    pass


class ModeMismatch(McHarvestError, ValueError):
    pass


class StepTooLarge(McHarvestError, ValueError):
    pass
