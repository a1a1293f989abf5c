from fastapi import APIRouter, File, Form, UploadFile, status
import logging

from magbend.core.config import settings
from magbend.models.schemas import ErrorResponse, FitRequest
from magbend.routers import http_error
from magbend.services.curve_analysis import CurveSource, curve_from_points_mm, describe
from magbend.utils.pgm import decode_pgm, extract_centerline

router = APIRouter()
logger = logging.getLogger(__name__)


@router.post(
    "/fit",
    responses={
        status.HTTP_400_BAD_REQUEST: {"model": ErrorResponse},
        status.HTTP_500_INTERNAL_SERVER_ERROR: {"model": ErrorResponse}
    },
    summary="Fit a centerline",
    description="Quadratic coefficient (1/mm), circle-fit bending radius (mm) or discrete curvature (1/mm) of a point curve given in mm."
)
def fit(request: FitRequest) -> dict:
    try:
        return describe(curve_from_points_mm(request.points_mm), request.metric)
    except Exception as e:
        raise http_error("Fit", e)


@router.post(
    "/extract",
    responses={
        status.HTTP_400_BAD_REQUEST: {"model": ErrorResponse},
        status.HTTP_500_INTERNAL_SERVER_ERROR: {"model": ErrorResponse}
    },
    summary="Extract a centerline from a PGM photograph",
    description="Binarize an 8-bit PGM image, read the centerline of the dark continuum and fit its quadratic coefficient."
)
async def extract(
    image: UploadFile = File(..., description="8-bit grayscale PGM (P5)"),
    scale_mm_per_px: float = Form(..., gt=0),
    threshold: int = Form(settings.MAGBEND_EXTRACT_THRESHOLD, ge=0, le=255),
    axis: str = Form("x", pattern="^[xy]$"),
) -> dict:
    try:
        data = await image.read()
        gray = decode_pgm(data, scale_mm_per_px)
        curve = extract_centerline(gray, threshold, axis)
        logger.info(f"Extracted {len(curve)} centerline points from {image.filename}")
        return {
            "points_mm": curve.points_mm.tolist(),
            "source": CurveSource.IMAGE.value,
            **describe(curve, "quad"),
        }
    except Exception as e:
        raise http_error("Extraction", e)
