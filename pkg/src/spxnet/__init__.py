"""Next-day S&P 500 direction forecasting with small numpy neural networks."""
from .dataset import Direction, WindowedDataset, build_dataset, label_direction
from .experiments import MODEL_IDS, build_model, evaluate, run_benchmark_suite
from .ingest import load_csv, load_fixture, parse_ohlcv_csv, select_features
from .layers import LSTM, Conv1D, Dense, Flatten, Model, SimpleRNN, mse_loss
from .training import RMSprop, TrainConfig, two_stage_train

__version__ = "0.1.0"
