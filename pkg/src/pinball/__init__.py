"""Wake-stabilization toolkit for the fluidic pinball benchmark."""

__version__ = "0.1.0"
