"""Multi-connectivity downlink flow control: measurement, link adaptation,
channel chain, queueing network, receding-horizon controller and simulator."""

__version__ = "0.1.0"
