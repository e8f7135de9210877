# Pooling marker inside a VGG-style layer configuration
POOL = "M"

# CIFAR VGG conv configurations
VGG_CONFIGS: dict[int, list[int | str]] = {
    16: [64, 64, POOL, 128, 128, POOL, 256, 256, 256, POOL, 512, 512, 512, POOL, 512, 512, 512, POOL],
    19: [64, 64, POOL, 128, 128, POOL, 256, 256, 256, 256, POOL, 512, 512, 512, 512, POOL, 512, 512, 512, 512, POOL],
}

# Classifier head of the CIFAR VGGs: flatten(512) -> 4096 -> ReLU -> Dropout -> num_classes.
# Calibrated so VGG16/CIFAR-10 totals 16,865,354 parameters and CIFAR-100 17,234,084.
DEFAULT_VGG_HEAD = [4096]
DEFAULT_HEAD_DROPOUT = 0.5

# CIFAR ResNet stage widths (option A shortcuts, no projection parameters)
RESNET_STAGE_WIDTHS = (16, 32, 64)
RESNET_STEM_WIDTH = 16

# Geometry
INPUT_CHANNELS = 3
INPUT_RESOLUTION = 32

# Checkpoint layout
GRAPH_FILENAME = "graph.json"
MANIFEST_FILENAME = "manifest.json"
TENSORS_DIRNAME = "tensors"
TENSOR_SUFFIX = ".pt"
