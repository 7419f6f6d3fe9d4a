"""Orbit tracing for Reeb-like and Beltrami fields."""
from ._backend import BACKEND, available_backends, get_kernel
from .orbits import (
    OrbitRecord,
    detect_periodic,
    detect_singular_connecting,
    integrate,
    trajectory_csv,
)

__all__ = [
    "BACKEND", "available_backends", "get_kernel", "OrbitRecord", "integrate",
    "detect_periodic", "detect_singular_connecting", "trajectory_csv",
]
