"""Multicast crossbar switch toolkit: traffic patterns, conflict graphs,
exact rate-region LPs, network-coded scheduling and discrete-time simulation."""

__version__ = "0.1.0"
