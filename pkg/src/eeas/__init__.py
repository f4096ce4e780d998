"""End-to-end antenna selection for multi-hop MIMO amplify-and-forward relay channels.

Submodules: ``topology`` (stage layout, alpha/beta), ``channel`` (fading
draws and seeded substreams), ``paths`` (single-antenna paths, independent
sets, AF metrics), ``strategies`` (selection rules and transceiver chains),
``montecarlo`` (outage/BER sweeps and slope fits) and ``cli``.
"""

__version__ = "0.1.0"
