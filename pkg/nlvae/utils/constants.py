"""
Constants and default values for the NLVAE engine.
Centralizes hyperparameter defaults, file names, and metric conventions.
"""

from typing import Dict, List, Tuple

# Process exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3
EXIT_PARTIAL_FAILURE = 4

# Lagrange multiplier per upscaling factor, chosen empirically for 3x/4x/8x
BETA_BY_SCALE: Dict[int, float] = {3: 150.0, 4: 200.0, 8: 300.0}
GLOBAL_BETA = 500.0
DEFAULT_ALPHA = 0.0

# Optimization defaults
DEFAULT_EPOCHS = 2000
DEFAULT_MINIBATCH = 8
DEFAULT_CROP = 48
DEFAULT_LEARNING_RATE = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
RMSPROP_RHO = 0.9
EARLY_STOP_PATIENCE = 200
EARLY_STOP_MIN_DELTA = 1e-5

# Network defaults
DEFAULT_ENCODER_BLOCKS = 5
DEFAULT_DECODER_BLOCKS = 9
DEFAULT_BASE_WIDTH = 32
DEFAULT_LATENT_DIM = 128
DEFAULT_CANVAS = 256
DEFAULT_UPSAMPLE_STAGES = 4
LEAKY_SLOPE = 0.2
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
LOG_VAR_BOUNDS: Tuple[float, float] = (-10.0, 10.0)

# Width multipliers relative to the base width; counts past the end repeat the last entry
ENCODER_WIDTH_MULTIPLIERS: List[int] = [1, 2, 2, 4, 4]
DECODER_WIDTH_MULTIPLIERS: List[int] = [4, 4, 2, 2, 1]

# Image conventions
MIN_TRAIN_SIDE = 16
CANVAS_MODES = ("resize256", "native")
CANVAS_RESIZE_SIDE = 256
SUPPORTED_IMAGE_SUFFIXES = (".png", ".bmp")

# Metric conventions
PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Persistence
CHECKPOINT_VERSION = 1
CHECKPOINT_FILE = "checkpoint.json"
TRAIN_LOG_FILE = "train_log.csv"
EPOCH_TIMES_FILE = "epoch_seconds.csv"
MANIFEST_FILE = "manifest.json"
SR_IMAGE_FILE = "sr.png"
TRAIN_LOG_COLUMNS = ["epoch", "l_r", "l_kl", "beta", "alpha", "total"]

# Feature-unit variants a model can be built from
BLOCK_TYPES = ("non_local", "standard", "depthwise_separable", "transposed")

# Sweep axes and the values swept when none are given
SWEEP_DEFAULT_VALUES: Dict[str, list] = {
    "loss": ["l1", "l2"],
    "optimizer": ["adam", "sgd", "rmsprop"],
    "encoder_blocks": [1, 2, 3, 4, 5],
    "decoder_blocks": [5, 6, 7, 8, 9],
    "beta": [150.0, 200.0, 300.0, 500.0],
    "block_type": list(BLOCK_TYPES),
}
