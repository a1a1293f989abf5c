from fastapi import APIRouter, Depends, status
import logging

from magbend.core.config import settings
from magbend.models.schemas import ErrorResponse, PredictRequest, PredictResponse
from magbend.routers import http_error
from magbend.services.surrogate import SurrogateModel, forward, load_model

router = APIRouter()
logger = logging.getLogger(__name__)


def get_model() -> SurrogateModel:
    """Dependency to load the trained surrogate from MAGBEND_MODEL_PATH."""
    try:
        return load_model(settings.MAGBEND_MODEL_PATH)
    except Exception as e:
        raise http_error("Loading the surrogate model", e)


@router.post(
    "/predict",
    response_model=PredictResponse,
    responses={
        status.HTTP_400_BAD_REQUEST: {"model": ErrorResponse},
        status.HTTP_500_INTERNAL_SERVER_ERROR: {"model": ErrorResponse}
    },
    summary="Predict the bending coefficient",
    description="Quadratic bending coefficient (1/mm) from the trained surrogate, without solving."
)
def predict(request: PredictRequest, model: SurrogateModel = Depends(get_model)) -> PredictResponse:
    try:
        a = forward(
            model,
            request.mt_mT * 1e-3,
            tuple(v * 1e6 for v in request.e_MPa),
            tuple(v * 1e-3 for v in request.l_mm),
            request.cs_mm * 1e-3,
        )
        return PredictResponse(a_per_mm=a * 1e-3)
    except Exception as e:
        raise http_error("Prediction", e)
