"""Neural next-day temperature/humidity forecasting: ANN, DNN, ELM, LSTM, LSTM-PC."""
__version__ = "0.1.0"
