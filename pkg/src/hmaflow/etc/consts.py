"""
Constants and configuration settings for HMAFlow.
"""

import os
import logging
from typing import Final, Literal
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


SECRETS_DIR = '/run/secrets' if os.path.isdir('/run/secrets') else None

FEATURE_DIM: Final[int] = 384
CORRELATION_DIM: Final[int] = 324
HIDDEN_DIM: Final[int] = 128
CONTEXT_DIM: Final[int] = 128
DEFAULT_RADII: Final[tuple[int, ...]] = (4, 6, 8, 10)
UPSAMPLE_FACTOR: Final[int] = 8

FLO_MAGIC: Final[float] = 202021.25
WEIGHTS_MAGIC: Final[bytes] = b'HMAW'
WEIGHTS_VERSION: Final[int] = 1


class Settings(BaseSettings):
    """
    Configurations for HMAFlow.
    """

    model_config = SettingsConfigDict(
        env_prefix='HMAFLOW_',
        env_file_encoding='utf-8',
        **({'secrets_dir': SECRETS_DIR} if SECRETS_DIR else {})
    )

    threads: int = Field(
        max(1, min(os.cpu_count() or 1, 8)),
        ge=1,
        description='Maximum number of worker threads used to evaluate independent image pairs.',
    )
    logging_level: Literal['CRITICAL', 'ERROR', 'WARNING', 'INFO', 'DEBUG', 'NOTSET'] = Field(
        'INFO',
        description='Logging level for the application'
    )
    seed: int = Field(
        0,
        description='Seed for parameter initialisation and synthetic data generation',
    )
    train_iters: int = Field(
        12,
        ge=1,
        description='Number of refinement iterations used while training',
    )
    infer_iters: int = Field(
        24,
        ge=1,
        description='Number of refinement iterations used for inference and evaluation',
    )
    learning_rate: float = Field(
        2e-4,
        gt=0,
        description='Peak learning rate of the warmup-cosine schedule',
    )
    weight_decay: float = Field(
        1e-5,
        ge=0,
        description='Decoupled weight decay applied by the AdamW optimiser',
    )
    grad_clip: float = Field(
        1.0,
        gt=0,
        description='Maximum global gradient norm before an optimiser step',
    )
    warmup_fraction: float = Field(
        0.05,
        ge=0,
        lt=1,
        description='Fraction of training steps spent in linear learning rate warmup',
    )
    loss_gamma: float = Field(
        0.8,
        gt=0,
        le=1,
        description='Exponential weighting factor of the sequence loss',
    )
    max_flow: float = Field(
        400.0,
        gt=0,
        description='Ground truth flow magnitude above which pixels are excluded from the loss',
    )
    max_image_height: int = Field(
        512,
        ge=8,
        description='Largest (padded) image height the attention position table is sized for',
    )
    max_image_width: int = Field(
        512,
        ge=8,
        description='Largest (padded) image width the attention position table is sized for',
    )

    verbose_print: bool = Field(
        False,
        description='Enable verbose printing for CLI operations',
    )
    disable_progress_bar: bool = Field(
        False,
        description='Disable progress bars for operations',
    )


CONFIG = Settings(_env_file=os.getenv('HMAFLOW_ENV_FILE', 'conf/.env'))     # type: ignore
LOGGER = logging.getLogger('hmaflow')
LOGGER.setLevel(CONFIG.logging_level.upper())   # pylint: disable=no-member

if not LOGGER.hasHandlers():
    console_handler = logging.StreamHandler()
    console_handler.setLevel(CONFIG.logging_level.upper())      # pylint: disable=no-member

    formatter = logging.Formatter(
        fmt='[%(asctime)s] [%(process)d] [%(levelname)s]: %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S %z'
    )
    console_handler.setFormatter(formatter)

    LOGGER.addHandler(console_handler)
