"""Gap filling, wavelet denoising and CNN-LSTM forecasting for dam seepage monitoring."""

__version__ = "0.1.0"
