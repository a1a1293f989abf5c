from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
import uvicorn

from magbend import __version__
from magbend.routers import field, rod, curves, surrogate
from magbend.core.config import settings
from magbend.core.logs import setup_logging
from magbend.core.middleware import RequestLoggerMiddleware

setup_logging()

app = FastAPI(
    title="magbend",
    description="Permanent-magnet fields, bending equilibria, curve fits and surrogate predictions for graded-stiffness magnetic continuum robots",
    version=__version__,
)

app.add_middleware(RequestLoggerMiddleware)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(field.router, prefix="/api/v1", tags=["Magnet Field"])
app.include_router(rod.router, prefix="/api/v1", tags=["Rod Equilibrium"])
app.include_router(curves.router, prefix="/api/v1", tags=["Curves"])
app.include_router(surrogate.router, prefix="/api/v1", tags=["Surrogate"])


@app.get("/health", tags=["Health"])
async def health_check():
    return {
        "status": "healthy",
        "version": __version__,
        "model_available": Path(settings.MAGBEND_MODEL_PATH).is_file(),
    }


def serve(host: str = "0.0.0.0", port: int = 8000, reload: bool = False) -> None:
    uvicorn.run("magbend.main:app", host=host, port=port, reload=reload)


if __name__ == "__main__":
    serve(reload=True)
