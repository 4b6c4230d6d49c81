class FormatError(ValueError):
    """A file does not match the format it claims to be."""
