"""PSO-tuned MLP, LSTM and 1D-CNN forecasters for hourly PM2.5 series."""

__version__ = "0.1.0"
