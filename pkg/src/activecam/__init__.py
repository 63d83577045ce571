"""Active pan-tilt camera simulation and end-to-end controller training.

A virtual camera is a crop window moving inside a larger annotated world
frame.  Controllers map the current crop to a normalized pan/tilt
displacement; the simulator applies it, and the metrics module scores how
well targets are kept in view.
"""

__version__ = "0.1.0"
