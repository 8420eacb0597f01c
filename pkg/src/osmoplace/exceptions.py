class ConfigurationError(ValueError):
    """Invalid infrastructure, workload or run configuration."""


class DegenerateWeightsError(ValueError):
    """All fitness weights are zero, so the weighted mean is undefined."""


class DegenerateDistributionError(ValueError):
    """Every fitness is zero; roulette selection has nothing to normalise by."""


class PlacementOverflow(RuntimeError):
    """No server in the target layer can host the service."""


class IndivisibleServiceError(ValueError):
    pass
