"""A backend factory that always fails, for the 500-path test."""


def broken_backend(weights=None):
    def detect(image):
        raise RuntimeError("weights corrupted")
    return detect
