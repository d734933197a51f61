"""fixlab: fixation analytics and gaze-assisted object classification."""

__version__ = "0.1.0"
