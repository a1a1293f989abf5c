from fastapi import APIRouter, HTTPException, status
import logging
import time

from magbend.models.schemas import CuboidMagnet, ErrorResponse, FieldRequest, FieldResponse
from magbend.routers import http_error
from magbend.services.epm_field import calibrate_remanence, field_at_pole_distance

router = APIRouter()
logger = logging.getLogger(__name__)


@router.post(
    "/field",
    response_model=FieldResponse,
    responses={
        status.HTTP_400_BAD_REQUEST: {"model": ErrorResponse},
        status.HTTP_500_INTERNAL_SERVER_ERROR: {"model": ErrorResponse}
    },
    summary="Axial field of the cubic permanent magnet",
    description="Evaluate the on-axis field at a distance from the N pole face, either for a given remanence or after calibrating the remanence from a probe reading."
)
def compute_field(request: FieldRequest) -> FieldResponse:
    if request.calibrate is None and request.br_T is None:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="Provide either br_T or a calibrate reading"
        )
    try:
        start_time = time.time()
        magnet = CuboidMagnet.cube(request.side_mm * 1e-3)
        if request.calibrate is not None:
            br = calibrate_remanence(
                magnet,
                request.calibrate.distance_mm * 1e-3,
                request.calibrate.measured_mT * 1e-3,
                request.order,
            )
        else:
            br = request.br_T

        value = field_at_pole_distance(magnet.model_copy(update={"br": br}), request.distance_mm * 1e-3, request.order)
        duration = time.time() - start_time
        logger.info(f"Field at {request.distance_mm} mm computed in {duration:.3f} seconds")
        return FieldResponse(h_A_per_m=value.h, b_mT=value.b_mT, br_T=br)

    except Exception as e:
        raise http_error("Field computation", e)
