"""Small shared helpers: logging, timing, version lookup."""
