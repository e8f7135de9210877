# Structural defaults of the spatial and channel attention block
DEFAULT_SPATIAL_GROUPS = 64
DEFAULT_GN_GROUPS = 4
DEFAULT_SPATIAL_EPS = 1e-5
DEFAULT_GN_EPS = 1e-5

# Squeeze-and-excitation bottleneck
DEFAULT_SE_REDUCTION = 16

# Identity initialization of the affine terms
AFFINE_SCALE_INIT = 1.0
AFFINE_SHIFT_INIT = 0.0
