"""
Experiment modes and scale presets used across the application.
"""

# Experiment modes
FIXED_MESH_FULL = "fixed-mesh-full"
FIXED_MESH_ADAPTIVE_SAMPLING = "fixed-mesh-adaptive-sampling"
ADAPTIVE_MESH_FULL = "adaptive-mesh-full"
FULLY_ADAPTIVE = "fully-adaptive"

# Scale presets
FULL_SCALE = "full"
DESK_SCALE = "desk"

# mode -> (adaptive sampling, adaptive mesh)
MODE_MAP = {
    FIXED_MESH_FULL: (False, False),
    FIXED_MESH_ADAPTIVE_SAMPLING: (True, False),
    ADAPTIVE_MESH_FULL: (False, True),
    FULLY_ADAPTIVE: (True, True),
}

SCALES = (FULL_SCALE, DESK_SCALE)

# Load kinds
POINT_LOAD = "point"
TRACTION_LOAD = "traction"
