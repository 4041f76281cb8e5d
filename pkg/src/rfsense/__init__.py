"""Narrowband RSS sensing: vital signs, gestures, and walking speed from
single-carrier received-signal-strength traces, plus a physics-based trace
simulator used for ground truth."""

__version__ = "0.1.0"
