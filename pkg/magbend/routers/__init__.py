import logging

from fastapi import HTTPException, status

from magbend.core.exceptions import ArgumentError, ConfigurationError, ExtractionError, ModelStateError

logger = logging.getLogger(__name__)

CLIENT_ERRORS = (ArgumentError, ConfigurationError, ExtractionError, ModelStateError)


def http_error(operation: str, error: Exception) -> HTTPException:
    """Log a failed operation and map it to a 400 (bad input) or 500 response."""
    logger.error(f"{operation} failed: {str(error)}")
    code = status.HTTP_400_BAD_REQUEST if isinstance(error, CLIENT_ERRORS) else status.HTTP_500_INTERNAL_SERVER_ERROR
    return HTTPException(status_code=code, detail=f"{operation} failed: {str(error)}")
