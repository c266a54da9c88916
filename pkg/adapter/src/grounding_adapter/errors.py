class AdapterError(Exception):
    pass


class EndpointError(AdapterError):
    """An HTTP service failed or returned an unusable response."""


class EmptyResponseError(AdapterError):
    """The assistant returned no parseable object names."""


class DimDriftError(AdapterError):
    """The embedding service returned inconsistent dimensions across batches."""


class MissingPoseError(AdapterError):
    """An image has no pose sidecar next to it."""
