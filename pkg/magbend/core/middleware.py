import logging
import time
import uuid

from fastapi import Request
from starlette.middleware.base import BaseHTTPMiddleware

from magbend.core.config import settings

logger = logging.getLogger(__name__)


class RequestLoggerMiddleware(BaseHTTPMiddleware):
    """
    Tags every request with an id and times it.

    A caller-supplied X-Request-ID is kept so a sweep driver can correlate its
    own logs; otherwise a uuid4 is issued. Requests slower than
    MAGBEND_SLOW_REQUEST_S (solves at fine resolution, /predict on a cold
    model file) are logged at WARNING.
    """

    async def dispatch(self, request: Request, call_next):
        request_id = request.headers.get("X-Request-ID") or str(uuid.uuid4())
        request.state.request_id = request_id
        route = f"{request.method} {request.url.path}"
        started = time.perf_counter()

        try:
            response = await call_next(request)
        except Exception as e:
            logger.error(f"[{request_id}] {route} raised {type(e).__name__}: {e} after {time.perf_counter() - started:.3f}s")
            raise

        elapsed = time.perf_counter() - started
        level = logging.WARNING if elapsed > settings.MAGBEND_SLOW_REQUEST_S else logging.INFO
        logger.log(level, f"[{request_id}] {route} -> {response.status_code} in {elapsed:.3f}s")

        response.headers["X-Request-ID"] = request_id
        response.headers["X-Process-Time"] = f"{elapsed:.6f}"
        return response
