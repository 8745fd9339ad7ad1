from .evaluation import EvaluationPair, evaluate_pairs, read_pairs_file
from .inference import estimate_flow
from .optim import AdamW, WarmupCosineSchedule, clip_grad_norm
from .overfit import run_overfit
