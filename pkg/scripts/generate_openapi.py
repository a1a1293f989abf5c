#!/usr/bin/env python
"""Generate the OpenAPI schema of the magbend HTTP API."""

import json
import sys
from pathlib import Path

# Add the parent directory to the path so we can import magbend
sys.path.insert(0, str(Path(__file__).parent.parent))

from fastapi.openapi.utils import get_openapi
from magbend.main import app

# Create the OpenAPI schema
schema = get_openapi(
    title=app.title,
    version=app.version,
    openapi_version=app.openapi_version,
    description=app.description,
    routes=app.routes,
)

# The extract endpoint takes a multipart upload; label the image part for clients
extract_path = schema["paths"].get("/api/v1/extract", {}).get("post")
if extract_path is not None:
    extract_path.setdefault("externalDocs", {
        "description": "8-bit grayscale PGM (P5); scale_mm_per_px is required",
        "url": "https://netpbm.sourceforge.net/doc/pgm.html",
    })

# Write the schema to a file
with open("openapi.json", "w") as f:
    json.dump(schema, f, indent=2)

print(f"OpenAPI schema generated successfully! ({len(schema['paths'])} paths)")
