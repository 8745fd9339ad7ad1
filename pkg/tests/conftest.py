import os

os.environ.setdefault('HMAFLOW_DISABLE_PROGRESS_BAR', 'true')
os.environ.setdefault('HMAFLOW_THREADS', '2')
os.environ.setdefault('HMAFLOW_SEED', '0')
os.environ.setdefault('HMAFLOW_TRAIN_ITERS', '2')
os.environ.setdefault('HMAFLOW_INFER_ITERS', '2')
