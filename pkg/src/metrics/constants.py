# FLOPs per output element of element-wise layers
BN_FLOPS_PER_ELEMENT = 2
RELU_FLOPS_PER_ELEMENT = 1
# One comparison or addition per input element of a pooling window
POOL_FLOPS_PER_ELEMENT = 1
# Shortcut additions are free unless a convention charges them per element
RESIDUAL_ADD_FLOPS_PER_ELEMENT = 0

# Multiply and add counted separately
FLOPS_PER_MAC = 2

GIGA = 1e9
MEGA = 1e6

MIN_LATENCY_REPEATS = 10
DEFAULT_LATENCY_REPEATS = 100
DEFAULT_LATENCY_WARMUP = 10
