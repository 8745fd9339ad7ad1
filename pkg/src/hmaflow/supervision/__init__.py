from .loss import sequence_loss
from .metrics import epe, fl_all, flow_metrics
