"""atmoscope: store, serve, match and benchmark satellite point observations.

Layers, bottom up: ``core`` (domain types and geodesy), ``store`` (indexed
segment files), ``ingest`` (parsers and the synthetic generator), ``matcher``
(cross-experiment collocation), ``cluster`` (front-end/worker query tier),
``rest`` (HTTP API + static UI serving), ``bench`` (latency/throughput
harness) and ``cli`` (operator entry points).
"""

__version__ = "0.1.0"
