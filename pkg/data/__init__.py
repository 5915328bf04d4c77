"""Sample matrices and bundled problem specs."""
