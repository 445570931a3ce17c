"""Condylar trajectory reconstruction from axial and sagittal real-time MRI masks."""

__version__ = "0.1.0"
