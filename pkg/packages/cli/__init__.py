"""odflow command-line interface."""
